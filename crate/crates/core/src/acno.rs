//! The interaction contract shared by every environment and agent.
//!
//! Each step the agent submits a joint action: a control action `a` and a
//! binary measurement flag `m`. The environment advances its hidden state
//! under `a` and answers with a reward, the measurement cost `C(m)`, a done
//! flag, and the true post-transition state only when `m` was set.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of steps after which an episode is cut off.
pub const DEFAULT_STEP_CAP: usize = 1000;

/// Index of a hidden environment state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateId(pub usize);

impl StateId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Index of a control action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ControlAction(pub usize);

impl ControlAction {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Whether the agent pays to observe the next state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasureAction(pub bool);

impl MeasureAction {
    pub const OBSERVE: MeasureAction = MeasureAction(true);
    pub const SKIP: MeasureAction = MeasureAction(false);

    pub fn is_observe(self) -> bool {
        self.0
    }
}

/// What the environment returns for one joint action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    /// `C(m)`: zero when not measuring, the configured cost otherwise.
    pub cost: f64,
    /// Present exactly when the step was measured.
    pub observation: Option<StateId>,
    pub done: bool,
}

impl StepOutcome {
    /// `r - C(m)` for this step.
    pub fn scalarized(&self) -> ScalarizedReward {
        ScalarizedReward(self.reward - self.cost)
    }
}

/// Reward net of measurement cost for a single step.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ScalarizedReward(pub f64);

/// The only environment facts an agent is allowed to read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub num_states: usize,
    pub num_actions: usize,
    pub measurement_cost: f64,
    pub discount: f64,
    pub initial_state: StateId,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<(), AcnoError> {
        if self.num_states == 0 || self.num_actions == 0 {
            return Err(AcnoError::EmptySpace);
        }
        if !(self.measurement_cost >= 0.0 && self.measurement_cost.is_finite()) {
            return Err(AcnoError::InvalidCost(self.measurement_cost));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(AcnoError::InvalidDiscount(self.discount));
        }
        if self.initial_state.0 >= self.num_states {
            return Err(AcnoError::StateOutOfRange {
                state: self.initial_state.0,
                num_states: self.num_states,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AcnoError {
    #[error("step called on a finished episode")]
    EpisodeFinished,
    #[error("control action {action} out of range (num_actions = {num_actions})")]
    ActionOutOfRange { action: usize, num_actions: usize },
    #[error("state {state} out of range (num_states = {num_states})")]
    StateOutOfRange { state: usize, num_states: usize },
    #[error("environment must have at least one state and one action")]
    EmptySpace,
    #[error("measurement cost must be finite and nonnegative, got {0}")]
    InvalidCost(f64),
    #[error("discount must lie in (0, 1], got {0}")]
    InvalidDiscount(f64),
}

/// An environment with costly, noiseless state observation.
///
/// The hidden state is only handed out by [`AcnoEnv::reset`] (for harness
/// logging) and through `observation` on measured steps.
pub trait AcnoEnv: Send {
    fn spec(&self) -> EnvSpec;

    /// Return to the initial-state distribution and reseed the internal RNG.
    fn reset(&mut self, seed: u64) -> StateId;

    fn step(&mut self, action: ControlAction, measure: MeasureAction) -> Result<StepOutcome, AcnoError>;

    /// Raw (cost-free) reward accumulated since the last reset, tracked by the
    /// environment itself as an independent cross-check of agent-side logging.
    fn episode_reward(&self) -> f64;

    /// Number of steps taken since the last reset.
    fn steps_taken(&self) -> usize;

    /// Long-running environments report results in fixed-size segments of
    /// decision points (one per simulated day) instead of once per episode.
    fn record_segment(&self) -> Option<usize> {
        None
    }

    /// Latent per-step quantity logged by the harness only (never shown to agents).
    fn latent_reward(&self) -> Option<f64> {
        None
    }
}

/// Shared validation and bookkeeping for `step`.
pub(crate) fn check_action(spec: &EnvSpec, action: ControlAction, done: bool) -> Result<(), AcnoError> {
    if done {
        return Err(AcnoError::EpisodeFinished);
    }
    if action.0 >= spec.num_actions {
        return Err(AcnoError::ActionOutOfRange {
            action: action.0,
            num_actions: spec.num_actions,
        });
    }
    Ok(())
}

/// Build the outcome record from the pieces every environment computes.
pub(crate) fn outcome(reward: f64, cost: f64, measure: MeasureAction, next: StateId, done: bool) -> StepOutcome {
    StepOutcome {
        reward,
        cost: if measure.is_observe() { cost } else { 0.0 },
        observation: measure.is_observe().then_some(next),
        done,
    }
}

/// SplitMix64 finalizer, used to derive independent seeds from a base seed.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based stream: one key per seed, one stream per index.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
