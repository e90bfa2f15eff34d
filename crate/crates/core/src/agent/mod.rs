//! Act-Then-Measure agents.
//!
//! Each step the agent first picks a control action from its belief, then
//! decides separately whether to pay for observing the resulting state:
//! always during the first `N_m` visits of a state-action pair, afterwards
//! exactly when the measuring value is nonnegative.

mod config;
mod learner;
mod snapshot;
mod values;

use rand::Rng;
use thiserror::Error;

pub use config::{AtmConfig, EpsilonSchedule, LearnerKind, TargetReward};
pub use learner::{dyna_sweep, kalman_update, replicated_update, Bootstrap, LearnerMut, RewardTable};
pub use snapshot::{snapshot_learner, SNAPSHOT_HEADER};
pub use values::{
    greedy_control, information_gain, measuring_value, measuring_value_predicted, q_belief, select_control,
    GaussianQTable, QTable, QValues,
};

use crate::acno::{ControlAction, EnvSpec, MeasureAction, StepOutcome};
use crate::belief::{collapse, predict, Belief, BeliefError, TransitionModel, VisitCounter};

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error("invalid agent config: {0}")]
    Config(String),
    #[error("inconsistent step: {0}")]
    Step(String),
    #[error("snapshot line {line}: {reason}")]
    Snapshot { line: usize, reason: String },
}

/// One joint decision together with the quantities that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub action: ControlAction,
    pub measure: MeasureAction,
    /// Measuring value of `action` under the current belief.
    pub mv: f64,
    /// Measurement forced by the visit gate (or by an external override).
    pub exploratory: bool,
}

impl Decision {
    /// `exploratory => measure`, otherwise `measure <=> mv >= 0`.
    pub fn is_consistent(&self) -> bool {
        if self.exploratory {
            self.measure.is_observe()
        } else {
            self.measure.is_observe() == (self.mv >= 0.0)
        }
    }
}

/// The ATM decision rule on explicit inputs, with the full discount on the
/// information term.
#[allow(clippy::too_many_arguments)]
pub fn decide<V: QValues + ?Sized, R: Rng + ?Sized>(
    b: &Belief,
    values: &V,
    model: &TransitionModel,
    visits: &VisitCounter,
    cfg: &AtmConfig,
    cost: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<Decision, BeliefError> {
    let action = select_control(b, values, epsilon, rng);
    let mv = measuring_value(b, action, values, model, cost, cfg.discount)?;
    Ok(gate(b, action, mv, visits, cfg.exploratory_visits))
}

fn gate(b: &Belief, action: ControlAction, mv: f64, visits: &VisitCounter, n_m: u32) -> Decision {
    let exploratory = visits.get(b.argmax(), action) < f64::from(n_m);
    Decision {
        action,
        measure: MeasureAction(exploratory || mv >= 0.0),
        mv,
        exploratory,
    }
}

/// Value learner state.
#[derive(Debug, Clone, PartialEq)]
pub enum Learner {
    Replicated(QTable),
    Kalman(GaussianQTable),
}

impl Learner {
    fn as_mut(&mut self) -> LearnerMut<'_> {
        match self {
            Learner::Replicated(q) => LearnerMut::Replicated(q),
            Learner::Kalman(g) => LearnerMut::Kalman(g),
        }
    }

    pub fn kind(&self) -> LearnerKind {
        match self {
            Learner::Replicated(_) => LearnerKind::Replicated,
            Learner::Kalman(_) => LearnerKind::Kalman,
        }
    }
}

impl QValues for Learner {
    fn num_states(&self) -> usize {
        match self {
            Learner::Replicated(q) => q.num_states(),
            Learner::Kalman(g) => g.num_states(),
        }
    }
    fn num_actions(&self) -> usize {
        match self {
            Learner::Replicated(q) => q.num_actions(),
            Learner::Kalman(g) => g.num_actions(),
        }
    }
    fn value(&self, s: usize, a: usize) -> f64 {
        match self {
            Learner::Replicated(q) => q.get(s, a),
            Learner::Kalman(g) => g.mean(s, a),
        }
    }
}

/// A complete ATM agent: belief, transition model, visit gate, reward table
/// and value learner.
#[derive(Debug, Clone)]
pub struct AtmAgent {
    cfg: AtmConfig,
    spec: EnvSpec,
    belief: Belief,
    model: TransitionModel,
    visits: VisitCounter,
    rewards: RewardTable,
    learner: Learner,
    force_measure: bool,
    /// Predicted next belief for the last decided action, reused on
    /// unmeasured steps.
    pending: Option<(ControlAction, Belief)>,
}

impl AtmAgent {
    pub fn new(spec: EnvSpec, cfg: AtmConfig) -> Result<Self, AgentError> {
        spec.validate().map_err(|e| AgentError::Config(e.to_string()))?;
        cfg.validate()?;
        let (n, m) = (spec.num_states, spec.num_actions);
        let learner = match cfg.learner {
            LearnerKind::Replicated => Learner::Replicated(QTable::new(n, m, cfg.init_q, cfg.learning_rate)),
            LearnerKind::Kalman => Learner::Kalman(GaussianQTable::new(
                n,
                m,
                cfg.init_q,
                cfg.init_var,
                cfg.obs_noise,
                cfg.var_floor,
            )),
        };
        Ok(Self {
            belief: Belief::one_hot(spec.initial_state, n)?,
            model: TransitionModel::new(n, m, cfg.prior_pseudocount),
            visits: VisitCounter::new(n, m),
            rewards: RewardTable::new(n, m),
            learner,
            cfg,
            spec,
            force_measure: false,
            pending: None,
        })
    }

    /// Replace the transition model, e.g. with a known kernel. The model is
    /// frozen when `learn_transitions` is off.
    pub fn with_model(mut self, model: TransitionModel) -> Result<Self, AgentError> {
        if model.num_states() != self.spec.num_states || model.num_actions() != self.spec.num_actions {
            return Err(AgentError::Config("model dimensions do not match the environment".into()));
        }
        self.model = model;
        Ok(self)
    }

    pub fn config(&self) -> &AtmConfig {
        &self.cfg
    }

    pub fn env_spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    pub fn model(&self) -> &TransitionModel {
        &self.model
    }

    pub fn visits(&self) -> &VisitCounter {
        &self.visits
    }

    pub fn rewards(&self) -> &RewardTable {
        &self.rewards
    }

    pub fn learner(&self) -> &Learner {
        &self.learner
    }

    pub fn learner_mut(&mut self) -> &mut Learner {
        &mut self.learner
    }

    /// Measure on every step regardless of the measuring value (used for
    /// warm-up phases). Forced measurements are logged as exploratory.
    pub fn set_force_measure(&mut self, force: bool) {
        self.force_measure = force;
    }

    /// Start of an episode: the start state is known.
    pub fn begin_episode(&mut self) {
        self.belief = Belief::one_hot(self.spec.initial_state, self.spec.num_states)
            .expect("initial state validated at construction");
        self.pending = None;
    }

    /// Joint decision for the current belief. The information term of the
    /// measuring value is weighted by the learned probability that the
    /// episode continues after `action`.
    pub fn decide<R: Rng + ?Sized>(&mut self, epsilon: f64, rng: &mut R) -> Result<Decision, AgentError> {
        let action = select_control(&self.belief, &self.learner, epsilon, rng);
        let predicted = predict(&self.belief, action, &self.model)?;
        let horizon = self.cfg.discount * self.rewards.continuation_prob(&self.belief, action);
        let mv = measuring_value_predicted(&predicted, &self.learner, self.spec.measurement_cost, horizon);
        self.pending = Some((action, predicted));
        let mut decision = gate(&self.belief, action, mv, &self.visits, self.cfg.exploratory_visits);
        if self.force_measure {
            decision.exploratory = true;
            decision.measure = MeasureAction::OBSERVE;
        }
        Ok(decision)
    }

    /// Learn from the outcome of `decision` and advance the belief.
    pub fn observe<R: Rng + ?Sized>(
        &mut self,
        decision: &Decision,
        outcome: &StepOutcome,
        rng: &mut R,
    ) -> Result<(), AgentError> {
        if outcome.observation.is_some() != decision.measure.is_observe() {
            return Err(AgentError::Step("observation present without measurement (or vice versa)".into()));
        }
        let a = decision.action;
        let reward = if self.cfg.scalarizes_targets() {
            outcome.reward - outcome.cost
        } else {
            outcome.reward
        };

        let b_prev = std::mem::replace(&mut self.belief, Belief::uniform(1));
        self.visits.record(&b_prev, a);
        self.rewards.record(&b_prev, a, reward, outcome.done);

        let bootstrap = match (outcome.done, outcome.observation) {
            (true, _) => Bootstrap::Terminal,
            (false, Some(s_obs)) => {
                self.model.record_transition(&b_prev, a, s_obs);
                Bootstrap::Observed(s_obs)
            }
            (false, None) => Bootstrap::Model,
        };

        let gamma = self.cfg.discount;
        match &mut self.learner {
            Learner::Replicated(q) => {
                // Replicated targets always average over the model.
                let bootstrap = if bootstrap == Bootstrap::Terminal { Bootstrap::Terminal } else { Bootstrap::Model };
                replicated_update(q, &b_prev, a, reward, &self.model, gamma, bootstrap);
            }
            Learner::Kalman(g) => {
                kalman_update(g, &b_prev, a, reward, &self.model, gamma, bootstrap);
            }
        }

        let pending = self.pending.take();
        self.belief = match (outcome.done, outcome.observation) {
            (true, _) => b_prev,
            (false, Some(s_obs)) => collapse(s_obs, self.spec.num_states)?,
            (false, None) => match pending {
                Some((pa, predicted)) if pa == a => predicted,
                _ => predict(&b_prev, a, &self.model)?,
            },
        };

        dyna_sweep(self.learner.as_mut(), &self.model, &self.rewards, self.cfg.dyna_sweeps, gamma, rng);
        Ok(())
    }
}
