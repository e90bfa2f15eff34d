//! Synthetic mobile-health intervention simulator.
//!
//! Each day is a bag of `bag_size` decision points. At every point the agent
//! picks a treatment `A` and whether to send a survey `I`:
//!
//! ```text
//! C[t+1] = rho * C[t] + context_noise * eps
//! M[t]   = mediator_base + mediator_action * A + mediator_context * C[t] + mediator_noise * eps
//! R[t]   = reward_base + reward_mediator * M + reward_engagement * E + reward_context * C
//!          + A * (reward_action + reward_action_engagement * E) + reward_noise * eps
//! E      <- E + engagement_recovery * (engagement_baseline - E)
//!           - query_burden * (surveys sent today) + engagement_noise * eps   (at the end of each day)
//! ```
//!
//! The latent reward `R` is revealed only through a survey; unsurveyed steps
//! report reward 0. The hidden state is the 4x4x4 binning of
//! `(C, E, R of the last decision point)`, each standardized by its
//! stationary scale.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::acno::{self, AcnoEnv, ControlAction, EnvSpec, MeasureAction, StateId, StepOutcome};

/// Standard-normal quartile cut points.
pub const BIN_CUTS: [f64; 3] = [-0.674_489_750_196_081_7, 0.0, 0.674_489_750_196_081_7];

/// Probability midpoints of the quartile bins (octile points of a standard normal).
pub const BIN_MIDPOINTS: [f64; 4] = [-1.150_349_380_376_008, -0.318_639_363_964_375, 0.318_639_363_964_375, 1.150_349_380_376_008];

pub const NUM_BINS: usize = 4;
pub const NUM_STATES: usize = NUM_BINS * NUM_BINS * NUM_BINS;

/// Quartile bin of a standardized value; cut points belong to the upper bin.
pub fn bin(z: f64) -> usize {
    BIN_CUTS.iter().filter(|&&cut| z >= cut).count()
}

/// State index `16 * bin(c) + 4 * bin(e) + bin(r)` of standardized inputs.
pub fn discretize_state(c: f64, e: f64, r: f64) -> StateId {
    StateId(16 * bin(c) + 4 * bin(e) + bin(r))
}

/// Bin indices `(context, engagement, reward)` of a state.
pub fn state_bins(s: StateId) -> (usize, usize, usize) {
    (s.0 / 16, (s.0 / 4) % 4, s.0 % 4)
}

/// Standardized bin midpoints of a state.
pub fn state_midpoints(s: StateId) -> (f64, f64, f64) {
    let (c, e, r) = state_bins(s);
    (BIN_MIDPOINTS[c], BIN_MIDPOINTS[e], BIN_MIDPOINTS[r])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MHealthSpec {
    pub bag_size: usize,
    pub horizon_days: usize,
    pub cost: f64,
    pub discount: f64,
    pub context_ar: f64,
    pub context_noise: f64,
    pub engagement_baseline: f64,
    pub engagement_recovery: f64,
    pub engagement_noise: f64,
    pub query_burden: f64,
    pub mediator_base: f64,
    pub mediator_action: f64,
    pub mediator_context: f64,
    pub mediator_noise: f64,
    pub reward_base: f64,
    pub reward_mediator: f64,
    pub reward_engagement: f64,
    pub reward_context: f64,
    pub reward_action: f64,
    pub reward_action_engagement: f64,
    pub reward_noise: f64,
    pub reward_center: f64,
    pub reward_scale: f64,
    pub initial_context: f64,
    pub initial_engagement: f64,
}

impl Default for MHealthSpec {
    fn default() -> Self {
        Self {
            bag_size: 5,
            horizon_days: 500,
            cost: 0.1,
            discount: 0.95,
            context_ar: 0.7,
            context_noise: 0.714_142_842_854_285,
            engagement_baseline: 0.0,
            engagement_recovery: 0.2,
            engagement_noise: 0.6,
            query_burden: 0.03,
            mediator_base: 0.0,
            mediator_action: 0.8,
            mediator_context: 0.3,
            mediator_noise: 0.5,
            reward_base: 1.0,
            reward_mediator: 0.25,
            reward_engagement: 0.6,
            reward_context: 0.2,
            reward_action: -0.2,
            reward_action_engagement: 0.5,
            reward_noise: 0.3,
            reward_center: 1.0,
            reward_scale: 1.0,
            initial_context: 0.0,
            initial_engagement: 0.0,
        }
    }
}

const FIELD_DOCS: [(&str, &str); 25] = [
    ("bag_size", "decision points per day"),
    ("horizon_days", "days per episode"),
    ("cost", "cost of one survey"),
    ("discount", "discount factor reported to the agent"),
    ("context_ar", "autoregressive coefficient of the context C"),
    ("context_noise", "innovation scale of C"),
    ("engagement_baseline", "level engagement E relaxes towards"),
    ("engagement_recovery", "daily relaxation rate of E towards the baseline"),
    ("engagement_noise", "daily innovation scale of E"),
    ("query_burden", "drop in E per survey, applied at the end of the day"),
    ("mediator_base", "intercept of the mediator M"),
    ("mediator_action", "effect of treatment on M"),
    ("mediator_context", "effect of C on M"),
    ("mediator_noise", "noise scale of M"),
    ("reward_base", "intercept of the latent reward R"),
    ("reward_mediator", "effect of M on R"),
    ("reward_engagement", "effect of E on R"),
    ("reward_context", "effect of C on R"),
    ("reward_action", "direct effect of treatment on R"),
    ("reward_action_engagement", "treatment effect on R per unit of E"),
    ("reward_noise", "noise scale of R"),
    ("reward_center", "centre used to standardize R for binning"),
    ("reward_scale", "scale used to standardize R for binning"),
    ("initial_context", "C at the start of an episode"),
    ("initial_engagement", "E at the start of an episode"),
];

impl MHealthSpec {
    pub fn with_cost(cost: f64) -> Self {
        Self { cost, ..Self::default() }
    }

    pub fn decision_points(&self) -> usize {
        self.bag_size * self.horizon_days
    }

    /// Stationary standard deviation of C.
    pub fn context_scale(&self) -> f64 {
        self.context_noise / (1.0 - self.context_ar * self.context_ar).sqrt()
    }

    /// Stationary standard deviation of E without surveys.
    pub fn engagement_scale(&self) -> f64 {
        let keep = 1.0 - self.engagement_recovery;
        self.engagement_noise / (1.0 - keep * keep).sqrt()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.bag_size == 0 || self.horizon_days == 0 {
            return Err("bag_size and horizon_days must be positive".into());
        }
        if !(self.cost >= 0.0 && self.cost.is_finite()) {
            return Err(format!("survey cost must be nonnegative, got {}", self.cost));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(format!("discount must lie in (0, 1], got {}", self.discount));
        }
        if !(self.context_ar.abs() < 1.0) {
            return Err("context_ar must lie in (-1, 1)".into());
        }
        if !(self.engagement_recovery > 0.0 && self.engagement_recovery <= 1.0) {
            return Err("engagement_recovery must lie in (0, 1]".into());
        }
        if self.query_burden < 0.0 {
            return Err("query_burden must be nonnegative".into());
        }
        let scales = [self.context_noise, self.engagement_noise, self.mediator_noise, self.reward_noise];
        if scales.iter().any(|&x| !(x >= 0.0)) {
            return Err("noise scales must be nonnegative".into());
        }
        if !(self.context_noise > 0.0 && self.engagement_noise > 0.0 && self.reward_scale > 0.0) {
            return Err("context_noise, engagement_noise and reward_scale must be positive".into());
        }
        Ok(())
    }

    /// Flat key-value file, one commented line per coefficient.
    pub fn to_documented_toml(&self) -> String {
        let table = toml::Table::try_from(self).expect("spec serializes");
        let mut out = String::new();
        for (key, doc) in FIELD_DOCS {
            let _ = writeln!(out, "# {doc}");
            let _ = writeln!(out, "{key} = {}", table[key]);
        }
        out
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        let spec: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
pub struct MHealthEnv {
    spec: MHealthSpec,
    context: f64,
    engagement: f64,
    last_reward: f64,
    queries_today: usize,
    steps: usize,
    done: bool,
    reward_sum: f64,
    revealed: usize,
    rng: ChaCha8Rng,
}

impl MHealthEnv {
    pub fn new(spec: MHealthSpec) -> Self {
        let mut env = Self {
            spec,
            context: 0.0,
            engagement: 0.0,
            last_reward: spec.reward_center,
            queries_today: 0,
            steps: 0,
            done: false,
            reward_sum: 0.0,
            revealed: 0,
            rng: acno::stream_rng(0, 0),
        };
        env.reset(0);
        env
    }

    pub fn config(&self) -> &MHealthSpec {
        &self.spec
    }

    pub fn context(&self) -> f64 {
        self.context
    }

    pub fn engagement(&self) -> f64 {
        self.engagement
    }

    /// Number of rewards revealed through surveys this episode.
    pub fn revealed_count(&self) -> usize {
        self.revealed
    }

    pub fn day(&self) -> usize {
        self.steps / self.spec.bag_size
    }

    pub fn hidden_state(&self) -> StateId {
        let s = &self.spec;
        discretize_state(
            self.context / s.context_scale(),
            (self.engagement - s.engagement_baseline) / s.engagement_scale(),
            (self.last_reward - s.reward_center) / s.reward_scale,
        )
    }

    fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

impl AcnoEnv for MHealthEnv {
    fn spec(&self) -> EnvSpec {
        let s = &self.spec;
        EnvSpec {
            num_states: NUM_STATES,
            num_actions: 2,
            measurement_cost: s.cost,
            discount: s.discount,
            initial_state: discretize_state(
                s.initial_context / s.context_scale(),
                (s.initial_engagement - s.engagement_baseline) / s.engagement_scale(),
                0.0,
            ),
        }
    }

    fn reset(&mut self, seed: u64) -> StateId {
        self.rng = acno::stream_rng(seed, 0);
        self.context = self.spec.initial_context;
        self.engagement = self.spec.initial_engagement;
        self.last_reward = self.spec.reward_center;
        self.queries_today = 0;
        self.steps = 0;
        self.done = false;
        self.reward_sum = 0.0;
        self.revealed = 0;
        self.hidden_state()
    }

    fn step(&mut self, action: ControlAction, measure: MeasureAction) -> Result<StepOutcome, acno::AcnoError> {
        acno::check_action(&self.spec(), action, self.done)?;
        let s = self.spec;
        let treat = action.0 as f64;
        // Noise draws happen unconditionally so paired trajectories share them.
        let (eps_m, eps_r, eps_c, eps_e) = (self.normal(), self.normal(), self.normal(), self.normal());

        let mediator = s.mediator_base + s.mediator_action * treat + s.mediator_context * self.context + s.mediator_noise * eps_m;
        let latent = s.reward_base
            + s.reward_mediator * mediator
            + s.reward_engagement * self.engagement
            + s.reward_context * self.context
            + treat * (s.reward_action + s.reward_action_engagement * self.engagement)
            + s.reward_noise * eps_r;

        if measure.is_observe() {
            self.queries_today += 1;
            self.revealed += 1;
        }
        self.context = s.context_ar * self.context + s.context_noise * eps_c;
        self.last_reward = latent;
        self.steps += 1;
        if self.steps.is_multiple_of(s.bag_size) {
            self.engagement += s.engagement_recovery * (s.engagement_baseline - self.engagement)
                - s.query_burden * self.queries_today as f64
                + s.engagement_noise * eps_e;
            self.queries_today = 0;
        }
        self.done = self.steps >= s.decision_points();
        let reward = if measure.is_observe() { latent } else { 0.0 };
        self.reward_sum += reward;
        Ok(acno::outcome(reward, s.cost, measure, self.hidden_state(), self.done))
    }

    fn episode_reward(&self) -> f64 {
        self.reward_sum
    }

    fn steps_taken(&self) -> usize {
        self.steps
    }

    fn record_segment(&self) -> Option<usize> {
        Some(self.spec.bag_size)
    }

    fn latent_reward(&self) -> Option<f64> {
        (self.steps > 0).then_some(self.last_reward)
    }
}
