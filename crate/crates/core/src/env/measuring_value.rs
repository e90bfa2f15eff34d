//! Three-state toy where measuring has a clear, computable value.
//!
//! From `s0` either action moves to `s+` with probability `p` and to `s-`
//! otherwise, with no reward. In `s+` action `a1` pays `reward_good`, in
//! `s-` action `a2` does; the mismatched action pays `reward_bad`. The
//! episode ends after that second action, leaving the hidden state in place.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acno::{self, AcnoEnv, ControlAction, EnvSpec, MeasureAction, StateId, StepOutcome};

pub const S0: StateId = StateId(0);
pub const S_PLUS: StateId = StateId(1);
pub const S_MINUS: StateId = StateId(2);
pub const A1: ControlAction = ControlAction(0);
pub const A2: ControlAction = ControlAction(1);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuringValueSpec {
    /// Probability of branching to `s+`.
    pub branch_prob: f64,
    pub cost: f64,
    pub reward_good: f64,
    pub reward_bad: f64,
    pub discount: f64,
}

impl Default for MeasuringValueSpec {
    fn default() -> Self {
        Self { branch_prob: 0.5, cost: 0.05, reward_good: 1.0, reward_bad: 0.0, discount: 0.95 }
    }
}

impl MeasuringValueSpec {
    pub fn with_cost(cost: f64) -> Self {
        Self { cost, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.branch_prob) {
            return Err(format!("branch probability must lie in [0, 1], got {}", self.branch_prob));
        }
        if !(self.cost >= 0.0 && self.cost.is_finite()) {
            return Err(format!("measurement cost must be nonnegative, got {}", self.cost));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MeasuringValueEnv {
    spec: MeasuringValueSpec,
    state: StateId,
    done: bool,
    steps: usize,
    reward_sum: f64,
    rng: ChaCha8Rng,
}

impl MeasuringValueEnv {
    pub fn new(spec: MeasuringValueSpec) -> Self {
        Self { spec, state: S0, done: false, steps: 0, reward_sum: 0.0, rng: acno::stream_rng(0, 0) }
    }

    pub fn config(&self) -> &MeasuringValueSpec {
        &self.spec
    }

    /// Exact `P(s' | s, a)`, for oracles and known-model tests.
    pub fn kernel(&self) -> Vec<Vec<Vec<f64>>> {
        let p = self.spec.branch_prob;
        vec![
            vec![vec![0.0, p, 1.0 - p]; 2],
            vec![vec![0.0, 1.0, 0.0]; 2],
            vec![vec![0.0, 0.0, 1.0]; 2],
        ]
    }
}

impl AcnoEnv for MeasuringValueEnv {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            num_states: 3,
            num_actions: 2,
            measurement_cost: self.spec.cost,
            discount: self.spec.discount,
            initial_state: S0,
        }
    }

    fn reset(&mut self, seed: u64) -> StateId {
        self.rng = acno::stream_rng(seed, 0);
        self.state = S0;
        self.done = false;
        self.steps = 0;
        self.reward_sum = 0.0;
        self.state
    }

    fn step(&mut self, action: ControlAction, measure: MeasureAction) -> Result<StepOutcome, acno::AcnoError> {
        acno::check_action(&self.spec(), action, self.done)?;
        self.steps += 1;
        let (reward, done) = if self.state == S0 {
            self.state = if self.rng.random::<f64>() < self.spec.branch_prob { S_PLUS } else { S_MINUS };
            (0.0, false)
        } else {
            let matched = (self.state == S_PLUS && action == A1) || (self.state == S_MINUS && action == A2);
            (if matched { self.spec.reward_good } else { self.spec.reward_bad }, true)
        };
        self.done = done;
        self.reward_sum += reward;
        Ok(acno::outcome(reward, self.spec.cost, measure, self.state, done))
    }

    fn episode_reward(&self) -> f64 {
        self.reward_sum
    }

    fn steps_taken(&self) -> usize {
        self.steps
    }
}
