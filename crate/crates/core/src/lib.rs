//! Act-then-measure agents for environments where observing the state costs
//! something.
//!
//! An agent picks a control action from its belief, then decides whether to
//! pay for a noiseless look at the next state. Two value learners are
//! provided: replicated Q-learning and a Kalman-filter Q-learner.

pub mod acno;
pub mod agent;
pub mod belief;
pub mod env;
pub mod harness;

pub use acno::{AcnoEnv, AcnoError, ControlAction, EnvSpec, MeasureAction, ScalarizedReward, StateId, StepOutcome};
pub use agent::{AgentError, AtmAgent, AtmConfig, Decision, EpsilonSchedule, LearnerKind, TargetReward};
pub use belief::{Belief, BeliefError, TransitionModel, VisitCounter};

#[cfg(test)]
pub(crate) mod testutil {
    /// Value iteration on an explicit kernel with per-(s, a) rewards.
    pub fn value_iteration(kernel: &[Vec<Vec<f64>>], reward: &[Vec<f64>], gamma: f64, tol: f64) -> Vec<Vec<f64>> {
        let n = kernel.len();
        let m = kernel[0].len();
        let mut q = vec![vec![0.0; m]; n];
        loop {
            let v: Vec<f64> = q.iter().map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect();
            let mut delta: f64 = 0.0;
            for s in 0..n {
                for a in 0..m {
                    let next: f64 = kernel[s][a].iter().zip(&v).map(|(p, x)| p * x).sum();
                    let updated = reward[s][a] + gamma * next;
                    delta = delta.max((updated - q[s][a]).abs());
                    q[s][a] = updated;
                }
            }
            if delta < tol {
                return q;
            }
        }
    }
}
