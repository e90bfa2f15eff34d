//! Value tables and the belief-level quantities computed from them.

use rand::Rng;

use crate::acno::ControlAction;
use crate::belief::{predict, Belief, BeliefError, TransitionModel};

/// Read access to per-state action values: `Q(s, a)` for the replicated
/// learner, the posterior mean `mu(s, a)` for the Kalman learner.
pub trait QValues {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn value(&self, s: usize, a: usize) -> f64;

    fn max_value(&self, s: usize) -> f64 {
        (0..self.num_actions()).map(|a| self.value(s, a)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_a Q(s, a)` for every state.
    fn state_maxima(&self) -> Vec<f64> {
        (0..self.num_states()).map(|s| self.max_value(s)).collect()
    }
}

/// Point-estimate Q-table.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_actions: usize,
    q: Vec<f64>,
    pub learning_rate: f64,
}

impl QTable {
    pub fn new(num_states: usize, num_actions: usize, init: f64, learning_rate: f64) -> Self {
        Self { num_actions, q: vec![init; num_states * num_actions], learning_rate }
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.num_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.q[s * self.num_actions + a] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }
}

impl QValues for QTable {
    fn num_states(&self) -> usize {
        self.q.len() / self.num_actions
    }
    fn num_actions(&self) -> usize {
        self.num_actions
    }
    fn value(&self, s: usize, a: usize) -> f64 {
        self.get(s, a)
    }
}

/// Independent Gaussian posterior `N(mu, var)` for each `Q(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianQTable {
    num_actions: usize,
    mu: Vec<f64>,
    var: Vec<f64>,
    /// `tau^2`.
    pub obs_noise: f64,
    pub var_floor: f64,
}

impl GaussianQTable {
    pub fn new(num_states: usize, num_actions: usize, init_mu: f64, init_var: f64, obs_noise: f64, var_floor: f64) -> Self {
        assert!(init_var > 0.0 && obs_noise > 0.0, "variances must be positive");
        Self {
            num_actions,
            mu: vec![init_mu; num_states * num_actions],
            var: vec![init_var; num_states * num_actions],
            obs_noise,
            var_floor,
        }
    }

    pub fn mean(&self, s: usize, a: usize) -> f64 {
        self.mu[s * self.num_actions + a]
    }

    pub fn variance(&self, s: usize, a: usize) -> f64 {
        self.var[s * self.num_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, mean: f64, variance: f64) {
        let idx = s * self.num_actions + a;
        self.mu[idx] = mean;
        self.var[idx] = variance;
    }

    /// Kalman gain for a full-weight observation of `(s, a)`.
    pub fn gain(&self, s: usize, a: usize) -> f64 {
        let v = self.variance(s, a);
        v / (v + self.obs_noise)
    }

    /// Fold one target observation into `(s, a)` with belief weight
    /// `weight`. Returns the effective gain.
    pub fn absorb(&mut self, s: usize, a: usize, target: f64, weight: f64) -> f64 {
        let idx = s * self.num_actions + a;
        let var = self.var[idx];
        let gain = weight * var / (var + self.obs_noise);
        self.mu[idx] += gain * (target - self.mu[idx]);
        self.var[idx] = ((1.0 - gain) * var).max(self.var_floor);
        gain
    }

    pub fn means(&self) -> &[f64] {
        &self.mu
    }

    pub fn variances(&self) -> &[f64] {
        &self.var
    }
}

impl QValues for GaussianQTable {
    fn num_states(&self) -> usize {
        self.mu.len() / self.num_actions
    }
    fn num_actions(&self) -> usize {
        self.num_actions
    }
    fn value(&self, s: usize, a: usize) -> f64 {
        self.mean(s, a)
    }
}

/// `Q(b, a) = sum_s b(s) Q(s, a)`.
pub fn q_belief<V: QValues + ?Sized>(b: &Belief, a: ControlAction, values: &V) -> f64 {
    b.expect(|s| values.value(s, a.0))
}

/// Greedy action under the belief, lowest index on ties.
pub fn greedy_control<V: QValues + ?Sized>(b: &Belief, values: &V) -> ControlAction {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for a in 0..values.num_actions() {
        let v = q_belief(b, ControlAction(a), values);
        if v > best_value {
            best = a;
            best_value = v;
        }
    }
    ControlAction(best)
}

/// Epsilon-greedy control choice. Always draws exactly one uniform variate
/// first, plus one action index when exploring.
pub fn select_control<V: QValues + ?Sized, R: Rng + ?Sized>(
    b: &Belief,
    values: &V,
    epsilon: f64,
    rng: &mut R,
) -> ControlAction {
    if rng.random::<f64>() < epsilon {
        ControlAction(rng.random_range(0..values.num_actions()))
    } else {
        greedy_control(b, values)
    }
}

/// Information term of the measuring value on an already predicted belief:
/// `sum_s' b'(s') max_a Q(s', a) - max_a sum_s' b'(s') Q(s', a)`, never negative.
pub fn information_gain<V: QValues + ?Sized>(predicted: &Belief, values: &V) -> f64 {
    let revealed = predicted.expect(|s| values.max_value(s));
    let acting = (0..values.num_actions())
        .map(|a| predicted.expect(|s| values.value(s, a)))
        .fold(f64::NEG_INFINITY, f64::max);
    (revealed - acting).max(0.0)
}

/// Measuring value from a predicted next belief.
pub fn measuring_value_predicted<V: QValues + ?Sized>(predicted: &Belief, values: &V, cost: f64, discount: f64) -> f64 {
    discount * information_gain(predicted, values) - cost
}

/// `MV(b, a) = Q_ATM(b, <a, 1>) - Q_ATM(b, <a, 0>)`: the discounted gain from
/// choosing the next action with the next state revealed rather than from the
/// predicted belief, minus the measurement cost.
pub fn measuring_value<V: QValues + ?Sized>(
    b: &Belief,
    a: ControlAction,
    values: &V,
    model: &TransitionModel,
    cost: f64,
    discount: f64,
) -> Result<f64, BeliefError> {
    let predicted = predict(b, a, model)?;
    Ok(measuring_value_predicted(&predicted, values, cost, discount))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acno::StateId;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(rows: &[&[f64]]) -> QTable {
        let mut q = QTable::new(rows.len(), rows[0].len(), 0.0, 0.1);
        for (s, row) in rows.iter().enumerate() {
            for (a, &v) in row.iter().enumerate() {
                q.set(s, a, v);
            }
        }
        q
    }

    #[test]
    fn q_belief_examples() {
        let q = table(&[&[2.0, 7.0], &[4.0, -1.0]]);
        let b = Belief::one_hot(StateId(1), 2).unwrap();
        assert_eq!(q_belief(&b, ControlAction(0), &q), 4.0);
        let b = Belief::uniform(2);
        assert_eq!(q_belief(&b, ControlAction(0), &q), 3.0);
    }

    #[test]
    fn q_belief_matches_explicit_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let mut q = QTable::new(8, 3, 0.0, 0.1);
            for s in 0..8 {
                for a in 0..3 {
                    q.set(s, a, rng.random_range(-5.0..5.0));
                }
            }
            let raw: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
            let z: f64 = raw.iter().sum();
            let b = Belief::new(raw.iter().map(|x| x / z).collect()).unwrap();
            for a in 0..3 {
                let mut oracle = 0.0;
                for s in 0..8 {
                    oracle += b.probs()[s] * q.as_slice()[s * 3 + a];
                }
                assert!((q_belief(&b, ControlAction(a), &q) - oracle).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn greedy_choice_and_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = Belief::uniform(1);
        assert_eq!(select_control(&b, &table(&[&[0.1, 0.9]]), 0.0, &mut rng), ControlAction(1));
        assert_eq!(select_control(&b, &table(&[&[0.5, 0.5, 0.5]]), 0.0, &mut rng), ControlAction(0));
    }

    #[test]
    fn uniform_exploration_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let q = table(&[&[1.0, 0.0, 0.0, 0.0]]);
        let b = Belief::uniform(1);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[select_control(&b, &q, 1.0, &mut rng).0] += 1;
        }
        for c in counts {
            let f = c as f64 / 10_000.0;
            assert!((0.22..=0.28).contains(&f), "frequency {f}");
        }
    }

    fn branch_model() -> TransitionModel {
        // s0 -> {s+, s-} with equal probability, s+/s- absorbing.
        let kernel = vec![
            vec![vec![0.0, 0.5, 0.5]; 2],
            vec![vec![0.0, 1.0, 0.0]; 2],
            vec![vec![0.0, 0.0, 1.0]; 2],
        ];
        TransitionModel::known(&kernel)
    }

    #[test]
    fn measuring_value_one_hot_is_minus_cost() {
        let q = table(&[&[0.3, 0.1], &[1.0, 0.0], &[0.0, 1.0]]);
        let b = Belief::one_hot(StateId(1), 3).unwrap();
        let mv = measuring_value(&b, ControlAction(0), &q, &branch_model(), 0.05, 0.95).unwrap();
        assert!((mv + 0.05).abs() < 1e-12);
    }

    #[test]
    fn measuring_value_branch_examples() {
        // Hand enumeration: revealed branch is worth 1, acting blind is worth 0.5.
        let q = table(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let b = Belief::one_hot(StateId(0), 3).unwrap();
        let model = branch_model();
        let mv = measuring_value(&b, ControlAction(0), &q, &model, 0.05, 0.95).unwrap();
        assert!((mv - 0.425).abs() < 1e-12);
        let mv = measuring_value(&b, ControlAction(0), &q, &model, 0.50, 0.95).unwrap();
        assert!((mv + 0.025).abs() < 1e-12);
    }

    #[test]
    fn gaussian_gain_arithmetic() {
        let mut g = GaussianQTable::new(1, 1, 0.0, 0.25, 0.25, 1e-8);
        assert!((g.gain(0, 0) - 0.5).abs() < 1e-15);
        let mut g2 = GaussianQTable::new(1, 1, 0.0, 0.4, 0.4, 1e-8);
        let k = g2.absorb(0, 0, 1.0, 1.0);
        assert!((k - 0.5).abs() < 1e-15);
        assert!((g2.mean(0, 0) - 0.5).abs() < 1e-15);
        assert!((g2.variance(0, 0) - 0.2).abs() < 1e-15);
        let k = g.absorb(0, 0, 1.0, 0.5);
        assert!((k - 0.25).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn measuring_value_lower_bound_and_shift_invariance(
            qv in prop::collection::vec(-10.0f64..10.0, 6),
            raw in prop::collection::vec(0.0f64..1.0, 3),
            cost in 0.0f64..1.0,
            shift in -5.0f64..5.0,
        ) {
            let z: f64 = raw.iter().sum();
            prop_assume!(z > 1e-6);
            let b = Belief::new(raw.iter().map(|x| x / z).collect()).unwrap();
            let q = table(&[&qv[0..2], &qv[2..4], &qv[4..6]]);
            let shifted_rows: Vec<f64> = qv.iter().map(|v| v + shift).collect();
            let qs = table(&[&shifted_rows[0..2], &shifted_rows[2..4], &shifted_rows[4..6]]);
            let model = branch_model();
            let mv = measuring_value(&b, ControlAction(0), &q, &model, cost, 0.9).unwrap();
            let mvs = measuring_value(&b, ControlAction(0), &qs, &model, cost, 0.9).unwrap();
            prop_assert!(mv >= -cost);
            prop_assert!((mv - mvs).abs() < 1e-9);
        }
    }
}
