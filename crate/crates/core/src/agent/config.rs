use serde::{Deserialize, Serialize};

use super::AgentError;

/// Which value learner backs the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    /// Belief-weighted replicated Q-learning (ATM-Q).
    Replicated,
    /// Gaussian posterior per `(s, a)` with Kalman-gain updates (ATM-KQ).
    Kalman,
}

impl LearnerKind {
    pub fn short_name(self) -> &'static str {
        match self {
            LearnerKind::Replicated => "atm-q",
            LearnerKind::Kalman => "atm-kq",
        }
    }
}

/// Reward fed into temporal-difference targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetReward {
    /// Replicated learner uses `r - C(m)`, Kalman learner uses plain `r`.
    PerLearner,
    /// Both learners use `r - C(m)`.
    Scalarized,
    /// Both learners use plain `r`.
    Raw,
}

/// Exploration rate per episode: geometric decay from `start` to `end` over
/// the first `decay_fraction` of the run, then held at `end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self { start: 1.0, end: 0.05, decay_fraction: 0.2 }
    }
}

impl EpsilonSchedule {
    pub fn constant(epsilon: f64) -> Self {
        Self { start: epsilon, end: epsilon, decay_fraction: 0.0 }
    }

    pub fn at(&self, episode: usize, total_episodes: usize) -> f64 {
        let horizon = self.decay_fraction * total_episodes as f64;
        let e = episode as f64;
        if horizon <= 0.0 || e >= horizon {
            return self.end;
        }
        let t = e / horizon;
        if self.end > 0.0 && self.start > 0.0 {
            self.start * (self.end / self.start).powf(t)
        } else {
            self.start + (self.end - self.start) * t
        }
    }

    fn validate(&self) -> Result<(), AgentError> {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !in_unit(self.start) || !in_unit(self.end) || self.end > self.start {
            return Err(AgentError::Config(format!(
                "epsilon schedule must satisfy 1 >= start >= end >= 0 (start {}, end {})",
                self.start, self.end
            )));
        }
        if !in_unit(self.decay_fraction) {
            return Err(AgentError::Config("epsilon decay fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtmConfig {
    pub learner: LearnerKind,
    pub discount: f64,
    /// `eta` for the replicated learner.
    pub learning_rate: f64,
    /// `N_m`: belief-weighted visits per `(s, a)` that force a measurement.
    pub exploratory_visits: u32,
    pub epsilon: EpsilonSchedule,
    pub init_q: f64,
    /// Prior variance of each Gaussian Q posterior.
    pub init_var: f64,
    /// `tau^2`, observation noise of the Kalman learner.
    pub obs_noise: f64,
    pub var_floor: f64,
    pub prior_pseudocount: f64,
    pub dyna_sweeps: u32,
    pub target_reward: TargetReward,
    /// When false the transition model is frozen at construction.
    pub learn_transitions: bool,
}

impl Default for AtmConfig {
    fn default() -> Self {
        Self {
            learner: LearnerKind::Replicated,
            discount: 0.95,
            learning_rate: 0.1,
            exploratory_visits: 5,
            epsilon: EpsilonSchedule::default(),
            init_q: 0.0,
            init_var: 1.0,
            obs_noise: 0.25,
            var_floor: 1e-8,
            prior_pseudocount: crate::belief::DEFAULT_PRIOR,
            dyna_sweeps: 0,
            target_reward: TargetReward::PerLearner,
            learn_transitions: true,
        }
    }
}

impl AtmConfig {
    pub fn with_learner(learner: LearnerKind) -> Self {
        Self { learner, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |msg: &str| Err(AgentError::Config(msg.to_string()));
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad("discount must lie in (0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning rate must lie in (0, 1]");
        }
        if !(self.init_var > 0.0 && self.init_var.is_finite()) {
            return bad("initial variance must be positive");
        }
        if !(self.obs_noise > 0.0 && self.obs_noise.is_finite()) {
            return bad("observation noise must be positive");
        }
        if !(self.var_floor > 0.0 && self.var_floor <= self.init_var) {
            return bad("variance floor must lie in (0, init_var]");
        }
        if !(self.prior_pseudocount >= 0.0 && self.prior_pseudocount.is_finite()) {
            return bad("prior pseudocount must be nonnegative");
        }
        if !self.init_q.is_finite() {
            return bad("initial Q must be finite");
        }
        self.epsilon.validate()
    }

    /// Whether the configured learner trains on `r - C(m)` instead of `r`.
    pub fn scalarizes_targets(&self) -> bool {
        match self.target_reward {
            TargetReward::PerLearner => self.learner == LearnerKind::Replicated,
            TargetReward::Scalarized => true,
            TargetReward::Raw => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_decays_then_holds() {
        let s = EpsilonSchedule::default();
        assert_eq!(s.at(0, 1000), 1.0);
        assert!((s.at(200, 1000) - 0.05).abs() < 1e-12);
        assert_eq!(s.at(900, 1000), 0.05);
        let mut prev = 1.0;
        for e in 0..300 {
            let eps = s.at(e, 1000);
            assert!(eps <= prev + 1e-15);
            prev = eps;
        }
        assert_eq!(EpsilonSchedule::constant(0.3).at(5, 10), 0.3);
        let linear = EpsilonSchedule { start: 1.0, end: 0.0, decay_fraction: 0.5 };
        assert!((linear.at(25, 100) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mut cfg = AtmConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.discount = 1.0;
        assert!(cfg.validate().is_err());
        cfg = AtmConfig::default();
        cfg.epsilon.end = 0.9;
        cfg.epsilon.start = 0.5;
        assert!(cfg.validate().is_err());
        cfg = AtmConfig::default();
        cfg.obs_noise = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn target_switch() {
        let q = AtmConfig::with_learner(LearnerKind::Replicated);
        let kq = AtmConfig::with_learner(LearnerKind::Kalman);
        assert!(q.scalarizes_targets());
        assert!(!kq.scalarizes_targets());
        let forced = AtmConfig { target_reward: TargetReward::Scalarized, ..kq };
        assert!(forced.scalarizes_targets());
    }
}
