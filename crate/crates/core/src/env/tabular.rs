//! Explicit finite MDP given by a kernel and a deterministic reward table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acno::{self, AcnoEnv, ControlAction, EnvSpec, MeasureAction, StateId, StepOutcome, DEFAULT_STEP_CAP};

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    /// `kernel[s][a][s']`.
    pub kernel: Vec<Vec<Vec<f64>>>,
    /// `rewards[s][a]`, paid on every step regardless of the successor.
    pub rewards: Vec<Vec<f64>>,
    /// `terminal[s]`: entering `s` ends the episode.
    pub terminal: Vec<bool>,
    pub initial_state: StateId,
    pub cost: f64,
    pub discount: f64,
    pub step_cap: usize,
}

impl TabularMdp {
    /// Dense random MDP: kernel rows are normalized uniform draws, rewards
    /// uniform in `[0, 1)`, no terminal states.
    pub fn random(num_states: usize, num_actions: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kernel = (0..num_states)
            .map(|_| {
                (0..num_actions)
                    .map(|_| {
                        let raw: Vec<f64> = (0..num_states).map(|_| rng.random::<f64>() + 0.05).collect();
                        let total: f64 = raw.iter().sum();
                        raw.into_iter().map(|x| x / total).collect()
                    })
                    .collect()
            })
            .collect();
        let rewards = (0..num_states).map(|_| (0..num_actions).map(|_| rng.random::<f64>()).collect()).collect();
        Self {
            kernel,
            rewards,
            terminal: vec![false; num_states],
            initial_state: StateId(0),
            cost: 0.0,
            discount: 0.9,
            step_cap: DEFAULT_STEP_CAP,
        }
    }

    pub fn num_states(&self) -> usize {
        self.kernel.len()
    }

    pub fn num_actions(&self) -> usize {
        self.kernel.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<(), String> {
        let n = self.num_states();
        let m = self.num_actions();
        if n == 0 || m == 0 {
            return Err("tabular MDP needs at least one state and one action".into());
        }
        if self.rewards.len() != n || self.terminal.len() != n || self.initial_state.0 >= n {
            return Err("tabular MDP tables disagree on the state count".into());
        }
        for (s, per_action) in self.kernel.iter().enumerate() {
            if per_action.len() != m || self.rewards[s].len() != m {
                return Err(format!("state {s} has the wrong number of actions"));
            }
            for (a, row) in per_action.iter().enumerate() {
                let total: f64 = row.iter().sum();
                if row.len() != n || row.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                    return Err(format!("kernel row ({s}, {a}) is not a distribution"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TabularEnv {
    mdp: TabularMdp,
    state: usize,
    done: bool,
    steps: usize,
    reward_sum: f64,
    rng: ChaCha8Rng,
}

impl TabularEnv {
    pub fn new(mdp: TabularMdp) -> Result<Self, String> {
        mdp.validate()?;
        let state = mdp.initial_state.0;
        Ok(Self { mdp, state, done: false, steps: 0, reward_sum: 0.0, rng: acno::stream_rng(0, 0) })
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }
}

/// Inverse-CDF draw from a probability row.
pub(crate) fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

impl AcnoEnv for TabularEnv {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            num_states: self.mdp.num_states(),
            num_actions: self.mdp.num_actions(),
            measurement_cost: self.mdp.cost,
            discount: self.mdp.discount,
            initial_state: self.mdp.initial_state,
        }
    }

    fn reset(&mut self, seed: u64) -> StateId {
        self.rng = acno::stream_rng(seed, 0);
        self.state = self.mdp.initial_state.0;
        self.done = false;
        self.steps = 0;
        self.reward_sum = 0.0;
        StateId(self.state)
    }

    fn step(&mut self, action: ControlAction, measure: MeasureAction) -> Result<StepOutcome, acno::AcnoError> {
        acno::check_action(&self.spec(), action, self.done)?;
        let reward = self.mdp.rewards[self.state][action.0];
        self.state = sample_row(&self.mdp.kernel[self.state][action.0], &mut self.rng);
        self.steps += 1;
        self.done = self.mdp.terminal[self.state] || self.steps >= self.mdp.step_cap;
        self.reward_sum += reward;
        Ok(acno::outcome(reward, self.mdp.cost, measure, StateId(self.state), self.done))
    }

    fn episode_reward(&self) -> f64 {
        self.reward_sum
    }

    fn steps_taken(&self) -> usize {
        self.steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_mdp_is_valid_and_seeded() {
        let a = TabularMdp::random(5, 3, 11);
        assert!(a.validate().is_ok());
        assert_eq!(a, TabularMdp::random(5, 3, 11));
        assert_ne!(a, TabularMdp::random(5, 3, 12));
    }

    #[test]
    fn sample_row_respects_zero_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(sample_row(&[0.0, 1.0, 0.0], &mut rng), 1);
        }
    }

    #[test]
    fn rewards_follow_table() {
        let mut mdp = TabularMdp::random(2, 2, 0);
        mdp.kernel = vec![vec![vec![0.0, 1.0]; 2], vec![vec![1.0, 0.0]; 2]];
        mdp.rewards = vec![vec![0.25, 0.5], vec![1.0, 2.0]];
        mdp.cost = 0.1;
        let mut env = TabularEnv::new(mdp).unwrap();
        env.reset(0);
        let out = env.step(ControlAction(1), MeasureAction::OBSERVE).unwrap();
        assert_eq!((out.reward, out.cost, out.observation), (0.5, 0.1, Some(StateId(1))));
        let out = env.step(ControlAction(0), MeasureAction::SKIP).unwrap();
        assert_eq!((out.reward, out.observation), (1.0, None));
        assert_eq!(env.episode_reward(), 1.5);
    }

    #[test]
    fn invalid_kernel_rejected() {
        let mut mdp = TabularMdp::random(3, 2, 0);
        mdp.kernel[1][0][0] += 0.5;
        assert!(TabularEnv::new(mdp).is_err());
    }
}
