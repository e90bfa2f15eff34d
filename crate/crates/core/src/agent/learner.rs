//! Temporal-difference updates for both learners, the learned reward table
//! and simulated (Dyna) backups.

use rand::Rng;

use super::values::{GaussianQTable, QTable, QValues};
use crate::acno::{ControlAction, StateId};
use crate::belief::{Belief, TransitionModel};

/// Where the bootstrap term of a target comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bootstrap {
    /// Episode ended: no continuation value.
    Terminal,
    /// The next state was measured: use `max_a' Q(s', a')` directly.
    Observed(StateId),
    /// Next state unknown: use `Psi(s, a) = sum_s' P(s'|s,a) max_a' Q(s', a')`.
    Model,
}

/// Continuation value for each belief-supported state, computed before any
/// entry of the table changes.
fn continuation<V: QValues>(
    values: &V,
    b_prev: &Belief,
    a: ControlAction,
    model: &TransitionModel,
    bootstrap: Bootstrap,
) -> Vec<(usize, f64, f64)> {
    match bootstrap {
        Bootstrap::Terminal => b_prev.support().map(|(s, p)| (s, p, 0.0)).collect(),
        Bootstrap::Observed(next) => {
            let v = values.max_value(next.0);
            b_prev.support().map(|(s, p)| (s, p, v)).collect()
        }
        Bootstrap::Model => {
            let maxima = values.state_maxima();
            let total: f64 = maxima.iter().sum();
            b_prev
                .support()
                .map(|(s, p)| (s, p, model.expect_next(s, a.0, &maxima, total)))
                .collect()
        }
    }
}

/// Belief-weighted replicated Q-learning:
/// `Q(s,a) <- (1 - b(s) eta) Q(s,a) + b(s) eta (r + gamma Psi(s,a))`.
/// `Bootstrap::Model` reproduces the textbook update; a terminal step drops
/// `Psi`.
pub fn replicated_update(
    table: &mut QTable,
    b_prev: &Belief,
    a: ControlAction,
    reward: f64,
    model: &TransitionModel,
    discount: f64,
    bootstrap: Bootstrap,
) {
    let eta = table.learning_rate;
    for (s, weight, psi) in continuation(table, b_prev, a, model, bootstrap) {
        let eta_s = weight * eta;
        let target = reward + discount * psi;
        let old = table.get(s, a.0);
        table.set(s, a.0, (1.0 - eta_s) * old + eta_s * target);
    }
}

/// Kalman update, belief weighted. For each `s` with `b(s) > 0` the target
/// `nu = r + gamma * continuation` is absorbed with gain
/// `K_s = b(s) var / (var + tau^2)`, then `mu += K_s (nu - mu)` and
/// `var <- max(floor, (1 - K_s) var)`. Returns the largest gain applied.
pub fn kalman_update(
    table: &mut GaussianQTable,
    b_prev: &Belief,
    a: ControlAction,
    reward: f64,
    model: &TransitionModel,
    discount: f64,
    bootstrap: Bootstrap,
) -> f64 {
    let mut max_gain: f64 = 0.0;
    for (s, weight, next) in continuation(table, b_prev, a, model, bootstrap) {
        let target = reward + discount * next;
        max_gain = max_gain.max(table.absorb(s, a.0, target, weight));
    }
    max_gain
}

/// Belief-weighted running mean of rewards and termination frequency per
/// `(s, a)`; supplies the simulated transitions of [`dyna_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    num_actions: usize,
    mean: Vec<f64>,
    mass: Vec<f64>,
    done_mass: Vec<f64>,
}

impl RewardTable {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        let n = num_states * num_actions;
        Self { num_actions, mean: vec![0.0; n], mass: vec![0.0; n], done_mass: vec![0.0; n] }
    }

    pub fn record(&mut self, b_prev: &Belief, a: ControlAction, reward: f64, done: bool) {
        for (s, p) in b_prev.support() {
            let idx = s * self.num_actions + a.0;
            self.mass[idx] += p;
            self.mean[idx] += p / self.mass[idx] * (reward - self.mean[idx]);
            if done {
                self.done_mass[idx] += p;
            }
        }
    }

    pub fn mean(&self, s: usize, a: usize) -> f64 {
        self.mean[s * self.num_actions + a]
    }

    pub fn mass(&self, s: usize, a: usize) -> f64 {
        self.mass[s * self.num_actions + a]
    }

    pub fn done_mass(&self, s: usize, a: usize) -> f64 {
        self.done_mass[s * self.num_actions + a]
    }

    /// Fraction of visits to `(s, a)` that ended the episode.
    pub fn termination_rate(&self, s: usize, a: usize) -> f64 {
        let m = self.mass(s, a);
        if m > 0.0 {
            self.done_mass(s, a) / m
        } else {
            0.0
        }
    }

    /// Belief-weighted probability that taking `a` does not end the episode.
    pub fn continuation_prob(&self, b: &Belief, a: ControlAction) -> f64 {
        let done: f64 = b.support().map(|(s, p)| p * self.termination_rate(s, a.0)).sum();
        (1.0 - done).clamp(0.0, 1.0)
    }

    pub fn set(&mut self, s: usize, a: usize, mean: f64, mass: f64, done_mass: f64) {
        let idx = s * self.num_actions + a;
        self.mean[idx] = mean;
        self.mass[idx] = mass;
        self.done_mass[idx] = done_mass;
    }

    fn visited(&self) -> Vec<(usize, usize)> {
        (0..self.mass.len())
            .filter(|&i| self.mass[i] > 0.0)
            .map(|i| (i / self.num_actions, i % self.num_actions))
            .collect()
    }
}

/// Mutable access to whichever learner the agent runs.
pub enum LearnerMut<'a> {
    Replicated(&'a mut QTable),
    Kalman(&'a mut GaussianQTable),
}

/// `n_sweeps` simulated one-step backups. Each samples a visited `(s, a)`
/// uniformly, uses the learned mean reward, and bootstraps through the model
/// scaled by the observed continuation probability.
pub fn dyna_sweep<R: Rng + ?Sized>(
    learner: LearnerMut<'_>,
    model: &TransitionModel,
    rewards: &RewardTable,
    n_sweeps: u32,
    discount: f64,
    rng: &mut R,
) {
    if n_sweeps == 0 {
        return;
    }
    let rows = rewards.visited();
    if rows.is_empty() {
        return;
    }
    let mut learner = learner;
    for _ in 0..n_sweeps {
        let (s, a) = rows[rng.random_range(0..rows.len())];
        let reward = rewards.mean(s, a);
        let continue_prob = 1.0 - rewards.termination_rate(s, a);
        let target = |values: &dyn Fn(usize) -> f64, n: usize| {
            let maxima: Vec<f64> = (0..n).map(values).collect();
            let total: f64 = maxima.iter().sum();
            reward + discount * continue_prob * model.expect_next(s, a, &maxima, total)
        };
        match &mut learner {
            LearnerMut::Replicated(q) => {
                let n = q.num_states();
                let t = target(&|x| q.max_value(x), n);
                let eta = q.learning_rate;
                let old = q.get(s, a);
                q.set(s, a, (1.0 - eta) * old + eta * t);
            }
            LearnerMut::Kalman(g) => {
                let n = g.num_states();
                let t = target(&|x| g.max_value(x), n);
                g.absorb(s, a, t, 1.0);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::value_iteration;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const A0: ControlAction = ControlAction(0);

    #[test]
    fn continuation_follows_termination_counts() {
        let mut table = RewardTable::new(2, 1);
        let at = |s| Belief::one_hot(StateId(s), 2).unwrap();
        table.record(&at(0), A0, 1.0, true);
        table.record(&at(0), A0, 1.0, false);
        table.record(&at(1), A0, 0.0, true);
        assert_eq!(table.continuation_prob(&at(0), A0), 0.5);
        assert_eq!(table.continuation_prob(&at(1), A0), 0.0);
        assert_eq!(table.continuation_prob(&Belief::uniform(2), A0), 0.25);
        assert_eq!(RewardTable::new(2, 1).continuation_prob(&at(0), A0), 1.0);
    }

    #[test]
    fn zero_weight_rows_are_frozen() {
        let mut q = QTable::new(3, 2, 0.5, 0.1);
        let model = TransitionModel::new(3, 2, 1e-3);
        let b = Belief::one_hot(StateId(0), 3).unwrap();
        replicated_update(&mut q, &b, A0, 1.0, &model, 0.9, Bootstrap::Model);
        assert_ne!(q.get(0, 0), 0.5);
        for s in 1..3 {
            for a in 0..2 {
                assert_eq!(q.get(s, a), 0.5);
            }
        }
        assert_eq!(q.get(0, 1), 0.5);
    }

    #[test]
    fn full_overwrite_on_terminal_step() {
        let mut q = QTable::new(2, 2, 0.3, 1.0);
        let model = TransitionModel::new(2, 2, 1e-3);
        let b = Belief::one_hot(StateId(0), 2).unwrap();
        replicated_update(&mut q, &b, A0, 1.0, &model, 0.95, Bootstrap::Terminal);
        assert_eq!(q.get(0, 0), 1.0);
    }

    #[test]
    fn replicated_matches_hand_computation() {
        // P(.|0,a0) = (0.25, 0.75), P(.|1,a0) = (1, 0); Q rows (1,2) and (3,0).
        let kernel = vec![vec![vec![0.25, 0.75], vec![1.0, 0.0]], vec![vec![1.0, 0.0], vec![0.0, 1.0]]];
        let model = TransitionModel::known(&kernel);
        let mut q = QTable::new(2, 2, 0.0, 0.5);
        q.set(0, 0, 1.0);
        q.set(0, 1, 2.0);
        q.set(1, 0, 3.0);
        q.set(1, 1, 0.0);
        let b = Belief::uniform(2);
        replicated_update(&mut q, &b, A0, 0.2, &model, 0.9, Bootstrap::Model);
        // max Q = (2, 3); Psi(0) = 0.25*2 + 0.75*3 = 2.75; Psi(1) = 2.
        let eta_s = 0.25;
        let q0 = (1.0 - eta_s) * 1.0 + eta_s * (0.2 + 0.9 * 2.75);
        let q1 = (1.0 - eta_s) * 3.0 + eta_s * (0.2 + 0.9 * 2.0);
        assert!((q.get(0, 0) - q0).abs() < 1e-12);
        assert!((q.get(1, 0) - q1).abs() < 1e-12);
    }

    #[test]
    fn kalman_observed_target_uses_measured_state() {
        let mut g = GaussianQTable::new(2, 1, 0.0, 0.25, 0.25, 1e-8);
        g.set(1, 0, 2.0, 0.25);
        let model = TransitionModel::new(2, 1, 1e-3);
        let b = Belief::one_hot(StateId(0), 2).unwrap();
        let k = kalman_update(&mut g, &b, A0, 1.0, &model, 0.5, Bootstrap::Observed(StateId(1)));
        assert!((k - 0.5).abs() < 1e-15);
        // nu = 1 + 0.5 * 2 = 2, mu = 0 + 0.5 * 2.
        assert!((g.mean(0, 0) - 1.0).abs() < 1e-15);
        assert!((g.variance(0, 0) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn kalman_constant_target_matches_iterative_oracle() {
        let (tau2, var0, target) = (0.25, 1.0, 0.7);
        let mut g = GaussianQTable::new(1, 1, 0.0, var0, tau2, 1e-8);
        let model = TransitionModel::new(1, 1, 1e-3);
        let b = Belief::uniform(1);
        // Oracle: iterate the scalar recursions directly, and cross-check the
        // closed form var_n = var0 tau2 / (tau2 + n var0).
        let (mut mu, mut var) = (0.0f64, var0);
        let mut prev_var = var0;
        for n in 1..=500 {
            let k = var / (var + tau2);
            mu += k * (target - mu);
            var *= 1.0 - k;
            kalman_update(&mut g, &b, A0, target, &model, 0.9, Bootstrap::Terminal);
            assert!((g.mean(0, 0) - mu).abs() < 1e-12);
            assert!((g.variance(0, 0) - var).abs() < 1e-12);
            let closed = var0 * tau2 / (tau2 + n as f64 * var0);
            assert!((var - closed).abs() < 1e-12);
            assert!(g.variance(0, 0) < prev_var);
            prev_var = g.variance(0, 0);
        }
        assert!((g.mean(0, 0) - target).abs() < 1e-2);
    }

    #[test]
    fn variance_floor_holds() {
        let mut g = GaussianQTable::new(1, 1, 0.0, 1.0, 1e-6, 1e-8);
        let model = TransitionModel::new(1, 1, 0.0);
        let b = Belief::uniform(1);
        for _ in 0..100 {
            kalman_update(&mut g, &b, A0, 1.0, &model, 0.9, Bootstrap::Terminal);
        }
        assert!(g.variance(0, 0) >= 1e-8);
    }

    #[test]
    fn dyna_zero_sweeps_is_noop_and_seeded_sweeps_are_deterministic() {
        let kernel = vec![vec![vec![0.2, 0.8], vec![1.0, 0.0]], vec![vec![0.5, 0.5], vec![0.0, 1.0]]];
        let model = TransitionModel::known(&kernel);
        let mut rewards = RewardTable::new(2, 2);
        for s in 0..2 {
            for a in 0..2 {
                rewards.set(s, a, (s + a) as f64 * 0.5, 1.0, 0.0);
            }
        }
        let mut q = QTable::new(2, 2, 0.0, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        dyna_sweep(LearnerMut::Replicated(&mut q), &model, &rewards, 0, 0.9, &mut rng);
        assert_eq!(q, QTable::new(2, 2, 0.0, 0.1));

        let run = |seed| {
            let mut q = QTable::new(2, 2, 0.0, 0.1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            dyna_sweep(LearnerMut::Replicated(&mut q), &model, &rewards, 100, 0.9, &mut rng);
            q
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn dyna_converges_to_value_iteration_on_known_chain() {
        let kernel = vec![vec![vec![0.9, 0.1], vec![0.2, 0.8]], vec![vec![0.6, 0.4], vec![0.05, 0.95]]];
        let reward = vec![vec![0.0, 0.3], vec![1.0, -0.5]];
        let gamma = 0.95;
        let oracle = value_iteration(&kernel, &reward, gamma, 1e-12);
        let model = TransitionModel::known(&kernel);
        let mut rewards = RewardTable::new(2, 2);
        for s in 0..2 {
            for a in 0..2 {
                rewards.set(s, a, reward[s][a], 1.0, 0.0);
            }
        }
        let mut q = QTable::new(2, 2, 0.0, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        dyna_sweep(LearnerMut::Replicated(&mut q), &model, &rewards, 10_000, gamma, &mut rng);
        for s in 0..2 {
            for a in 0..2 {
                assert!((q.get(s, a) - oracle[s][a]).abs() < 1e-3, "({s},{a}) {} vs {}", q.get(s, a), oracle[s][a]);
            }
        }
    }

    proptest! {
        #[test]
        fn kalman_gain_bounded_and_variance_monotone(
            raw in prop::collection::vec(0.0f64..1.0, 4),
            var0 in 1e-6f64..5.0,
            tau2 in 1e-3f64..2.0,
            reward in -3.0f64..3.0,
            steps in 1usize..20,
        ) {
            let z: f64 = raw.iter().sum();
            prop_assume!(z > 1e-6);
            let b = Belief::new(raw.iter().map(|x| x / z).collect()).unwrap();
            let mut g = GaussianQTable::new(4, 2, 0.0, var0, tau2, 1e-8);
            let model = TransitionModel::new(4, 2, 1e-3);
            for _ in 0..steps {
                let before: Vec<f64> = g.variances().to_vec();
                let k = kalman_update(&mut g, &b, A0, reward, &model, 0.9, Bootstrap::Model);
                prop_assert!((0.0..1.0).contains(&k));
                for (i, (&v0, &v1)) in before.iter().zip(g.variances()).enumerate() {
                    prop_assert!(v1 <= v0);
                    prop_assert!(v1 >= 1e-8);
                    let s = i / 2;
                    if i % 2 == 0 && b.probs()[s] > 0.0 && v0 > 1e-8 {
                        prop_assert!(v1 < v0 || v1 == 1e-8);
                    }
                }
            }
        }
    }
}
