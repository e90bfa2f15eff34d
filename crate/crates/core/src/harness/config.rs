use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::acno::{self, AcnoEnv};
use crate::agent::AtmConfig;
use crate::belief::TransitionModel;
use crate::env::{
    generate_lake, LakeEnv, LakeMap, LakeSpec, LakeVariant, MHealthEnv, MHealthSpec, MeasuringValueEnv,
    MeasuringValueSpec, TabularEnv, TabularMdp,
};

/// Salt for per-run map and MDP generation.
const LAYOUT_SALT: u64 = 0x6c61_796f_7574;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvConfig {
    MeasuringValue {
        #[serde(default = "half")]
        branch_prob: f64,
    },
    Lake {
        variant: LakeVariant,
        /// Side length. 4 without `map` selects the benchmark layout.
        #[serde(default = "four")]
        size: usize,
        #[serde(default)]
        hole_density: f64,
        /// Fixed seed for generated maps; `None` draws a fresh map per run.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        map_seed: Option<u64>,
        /// Inline map text (`S`/`F`/`H`/`G` rows separated by newlines).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        map: Option<String>,
        #[serde(default = "default_step_cap")]
        step_cap: usize,
    },
    Mhealth {
        #[serde(default)]
        spec: MHealthSpec,
    },
    Tabular {
        states: usize,
        actions: usize,
        /// Fixed seed for the MDP; `None` draws a fresh MDP per run.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mdp_seed: Option<u64>,
    },
}

fn half() -> f64 {
    0.5
}

fn four() -> usize {
    4
}

fn default_step_cap() -> usize {
    acno::DEFAULT_STEP_CAP
}

impl EnvConfig {
    pub fn lake(variant: LakeVariant) -> Self {
        EnvConfig::Lake { variant, size: 4, hole_density: 0.0, map_seed: None, map: None, step_cap: default_step_cap() }
    }

    pub fn large_lake(variant: LakeVariant, size: usize, hole_density: f64) -> Self {
        EnvConfig::Lake { variant, size, hole_density, map_seed: None, map: None, step_cap: default_step_cap() }
    }

    pub fn label(&self) -> String {
        match self {
            EnvConfig::MeasuringValue { .. } => "mv".into(),
            EnvConfig::Lake { variant, size, .. } => {
                let v = match variant {
                    LakeVariant::Deterministic => "det",
                    LakeVariant::SemiSlippery => "semi",
                    LakeVariant::Slippery => "slip",
                };
                format!("lake{size}-{v}")
            }
            EnvConfig::Mhealth { .. } => "mhealth".into(),
            EnvConfig::Tabular { states, actions, .. } => format!("tabular{states}x{actions}"),
        }
    }

    pub fn is_segmented(&self) -> bool {
        matches!(self, EnvConfig::Mhealth { .. })
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        match self {
            EnvConfig::MeasuringValue { branch_prob } => {
                if !(0.0..=1.0).contains(branch_prob) {
                    return bad(format!("branch_prob must lie in [0, 1], got {branch_prob}"));
                }
            }
            EnvConfig::Lake { size, hole_density, map, step_cap, .. } => {
                if let Some(text) = map {
                    text.parse::<LakeMap>().map_err(|e| HarnessError::Config(format!("lake map: {e}")))?;
                } else if *size < 4 {
                    return bad(format!("lake size must be at least 4, got {size}"));
                }
                if !(0.0..1.0).contains(hole_density) {
                    return bad(format!("hole_density must lie in [0, 1), got {hole_density}"));
                }
                if *step_cap == 0 {
                    return bad("step_cap must be positive".into());
                }
            }
            EnvConfig::Mhealth { spec } => spec.validate().map_err(HarnessError::Config)?,
            EnvConfig::Tabular { states, actions, .. } => {
                if *states == 0 || *actions == 0 {
                    return bad("tabular MDP needs at least one state and one action".into());
                }
            }
        }
        Ok(())
    }
}

/// A constructed environment plus its exact kernel when one exists.
pub struct BuiltEnv {
    pub env: Box<dyn AcnoEnv>,
    pub kernel: Option<Vec<Vec<Vec<f64>>>>,
    /// Decision points per logged record (`None`: one record per episode).
    pub segment: Option<usize>,
}

impl BuiltEnv {
    pub fn known_model(&self) -> Option<TransitionModel> {
        self.kernel.as_deref().map(TransitionModel::known)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub env: EnvConfig,
    /// Measurement cost; overrides any cost inside the environment block.
    pub cost: f64,
    pub agent: AtmConfig,
    pub episodes: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_final_window")]
    pub final_window: usize,
    #[serde(default = "default_smoothing_window")]
    pub smoothing_window: usize,
    /// Leading records (days for segmented environments, episodes
    /// otherwise) during which every step is measured.
    #[serde(default)]
    pub warmup_days: usize,
    /// Give the agent the exact transition kernel instead of learning it.
    #[serde(default)]
    pub known_model: bool,
    /// Start every run from this agent snapshot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<PathBuf>,
}

fn default_runs() -> usize {
    5
}

fn default_final_window() -> usize {
    200
}

fn default_smoothing_window() -> usize {
    25
}

pub const DEFAULT_MHEALTH_WARMUP_DAYS: usize = 50;

impl ExperimentConfig {
    pub fn new(name: impl Into<String>, env: EnvConfig, cost: f64, agent: AtmConfig, episodes: usize) -> Self {
        let warmup_days = if env.is_segmented() { DEFAULT_MHEALTH_WARMUP_DAYS } else { 0 };
        Self {
            name: name.into(),
            env,
            cost,
            agent,
            episodes,
            runs: default_runs(),
            base_seed: 0,
            final_window: default_final_window().min(episodes),
            smoothing_window: default_smoothing_window(),
            warmup_days,
            known_model: false,
            snapshot: None,
        }
    }

    /// Records emitted per run.
    pub fn records_per_run(&self) -> usize {
        match &self.env {
            EnvConfig::Mhealth { spec } => self.episodes * spec.horizon_days,
            _ => self.episodes,
        }
    }

    /// Stem for output files, e.g. `lake-table-semi-atm-kq`.
    pub fn file_stem(&self) -> String {
        format!("{}-{}", self.name, self.agent.learner.short_name())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("experiment name `{}` is not a valid file stem", self.name));
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.episodes == 0 {
            return bad("episodes must be at least 1".into());
        }
        if self.final_window == 0 || self.final_window > self.records_per_run() {
            return bad(format!(
                "final_window {} must lie in [1, {}] (records per run)",
                self.final_window,
                self.records_per_run()
            ));
        }
        if self.smoothing_window == 0 {
            return bad("smoothing_window must be at least 1".into());
        }
        if !(self.cost >= 0.0 && self.cost.is_finite()) {
            return bad(format!("cost must be nonnegative, got {}", self.cost));
        }
        if self.known_model && self.env.is_segmented() {
            return bad("known_model is unavailable for the mhealth environment".into());
        }
        self.env.validate()?;
        self.agent.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    /// Environment for run `run`.
    pub fn build_env(&self, run: usize) -> Result<BuiltEnv, HarnessError> {
        let gamma = self.agent.discount;
        let run_seed = self.run_seed(run);
        let layout_seed = |fixed: &Option<u64>| fixed.unwrap_or_else(|| acno::mix_seed(run_seed, LAYOUT_SALT));
        let built = match &self.env {
            EnvConfig::MeasuringValue { branch_prob } => {
                let spec = MeasuringValueSpec { branch_prob: *branch_prob, cost: self.cost, discount: gamma, ..Default::default() };
                let env = MeasuringValueEnv::new(spec);
                BuiltEnv { kernel: Some(env.kernel()), env: Box::new(env), segment: None }
            }
            EnvConfig::Lake { variant, size, hole_density, map_seed, map, step_cap } => {
                let layout = match map {
                    Some(text) => text.parse::<LakeMap>(),
                    None if *size == 4 && *hole_density == 0.0 => Ok(LakeMap::standard_4x4()),
                    None => generate_lake(*size, *hole_density, layout_seed(map_seed)),
                }
                .map_err(|e| HarnessError::Config(format!("lake map: {e}")))?;
                let spec = LakeSpec { map: layout, variant: *variant, cost: self.cost, discount: gamma, step_cap: *step_cap };
                let env = LakeEnv::new(spec);
                BuiltEnv { kernel: Some(env.kernel()), env: Box::new(env), segment: None }
            }
            EnvConfig::Mhealth { spec } => {
                let spec = MHealthSpec { cost: self.cost, discount: gamma, ..*spec };
                BuiltEnv { env: Box::new(MHealthEnv::new(spec)), kernel: None, segment: Some(spec.bag_size) }
            }
            EnvConfig::Tabular { states, actions, mdp_seed } => {
                let mut mdp = TabularMdp::random(*states, *actions, layout_seed(mdp_seed));
                mdp.cost = self.cost;
                mdp.discount = gamma;
                let kernel = mdp.kernel.clone();
                BuiltEnv { env: Box::new(TabularEnv::new(mdp).map_err(HarnessError::Config)?), kernel: Some(kernel), segment: None }
            }
        };
        Ok(built)
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add(run as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::LearnerKind;

    fn lake_cfg() -> ExperimentConfig {
        ExperimentConfig::new("t", EnvConfig::lake(LakeVariant::SemiSlippery), 0.05, AtmConfig::default(), 300)
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = lake_cfg();
        cfg.agent = AtmConfig::with_learner(LearnerKind::Kalman);
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<ExperimentConfig>(&text).unwrap(), cfg);

        let mh = ExperimentConfig::new("m", EnvConfig::Mhealth { spec: MHealthSpec::default() }, 0.1, AtmConfig::default(), 1);
        let text = toml::to_string(&mh).unwrap();
        assert_eq!(toml::from_str::<ExperimentConfig>(&text).unwrap(), mh);
        assert_eq!(mh.warmup_days, DEFAULT_MHEALTH_WARMUP_DAYS);
        assert_eq!(mh.records_per_run(), 500);
    }

    #[test]
    fn validation() {
        assert!(lake_cfg().validate().is_ok());
        let mut cfg = lake_cfg();
        cfg.final_window = 301;
        assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
        let mut cfg = lake_cfg();
        cfg.runs = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = lake_cfg();
        cfg.env = EnvConfig::Lake {
            variant: LakeVariant::Deterministic,
            size: 4,
            hole_density: 0.0,
            map_seed: None,
            map: Some("SFFF\nHHHH\nFFFF\nFFFG".into()),
            step_cap: 10,
        };
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new("m", EnvConfig::Mhealth { spec: MHealthSpec::default() }, 0.1, AtmConfig::default(), 1);
        cfg.known_model = true;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn per_run_layouts_differ_unless_pinned() {
        let mut cfg = lake_cfg();
        cfg.env = EnvConfig::large_lake(LakeVariant::Deterministic, 8, 0.2);
        let k0 = cfg.build_env(0).unwrap().kernel;
        let k1 = cfg.build_env(1).unwrap().kernel;
        assert_ne!(k0, k1);
        if let EnvConfig::Lake { map_seed, .. } = &mut cfg.env {
            *map_seed = Some(3);
        }
        assert_eq!(cfg.build_env(0).unwrap().kernel, cfg.build_env(1).unwrap().kernel);
    }

    #[test]
    fn cost_and_discount_propagate() {
        let mut cfg = lake_cfg();
        cfg.agent.discount = 0.9;
        let built = cfg.build_env(0).unwrap();
        let spec = built.env.spec();
        assert_eq!((spec.measurement_cost, spec.discount), (0.05, 0.9));
    }
}
