//! Bundled experiment configurations.

use super::{EnvConfig, ExperimentConfig};
use crate::agent::{AtmConfig, LearnerKind};
use crate::env::{LakeVariant, MHealthSpec};

/// Lake sizes of the large-lake scan.
pub const LARGE_LAKE_SIZES: [usize; 7] = [8, 10, 12, 14, 16, 18, 20];
/// Hole density of generated large lakes.
pub const LARGE_LAKE_HOLE_DENSITY: f64 = 0.1;
/// Cost grid of the cost sweep: 0.04 to 0.20 in steps of 0.02.
pub const SWEEP_COSTS: [f64; 9] = [0.04, 0.06, 0.08, 0.10, 0.12, 0.14, 0.16, 0.18, 0.20];
pub const SWEEP_WINDOW: usize = 50;
pub const LAKE_COST: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub experiments: Vec<ExperimentConfig>,
    /// Costs and summary window when the preset is a cost sweep.
    pub sweep: Option<(Vec<f64>, usize)>,
}

const NAMES: [(&str, &str); 7] = [
    ("mv-table", "measuring-value environment, c = 0.05, 5 runs x 1000 episodes, both learners"),
    ("lake-table-det", "deterministic 4x4 lake, c = 0.05, 5 runs x 1000 episodes, both learners"),
    ("lake-table-semi", "semi-slippery 4x4 lake, c = 0.05, 5 runs x 1000 episodes, both learners"),
    ("lake-table-slip", "slippery 4x4 lake, c = 0.05, 5 runs x 1000 episodes, both learners"),
    ("large-lakes", "semi-slippery generated lakes of side 8..20 (even), c = 0.05, 5 runs x 7500 episodes"),
    ("adapts-fig6", "synthetic mHealth simulator, 5 runs x 500 days with a 50-day always-survey warm-up"),
    ("appendix-cost-sweep", "semi-slippery 4x4 lake, costs 0.04..0.20 step 0.02, final 50 episodes"),
];

pub fn preset_names() -> impl Iterator<Item = (&'static str, &'static str)> {
    NAMES.into_iter()
}

/// Agent settings used by the bundled lake and toy presets.
pub fn tabular_agent(kind: LearnerKind) -> AtmConfig {
    let mut cfg = AtmConfig::with_learner(kind);
    cfg.learning_rate = 0.3;
    cfg.exploratory_visits = 20;
    cfg.init_q = 1.0;
    cfg.epsilon.end = 0.01;
    cfg.var_floor = 0.03;
    cfg
}

/// Agent settings used by the bundled mHealth preset.
pub fn mhealth_agent(kind: LearnerKind) -> AtmConfig {
    let mut cfg = AtmConfig::with_learner(kind);
    cfg.obs_noise = 0.1;
    cfg.var_floor = 0.1;
    cfg
}

fn both(name: &str, env: EnvConfig, cost: f64, episodes: usize, agent: fn(LearnerKind) -> AtmConfig) -> Vec<ExperimentConfig> {
    [LearnerKind::Replicated, LearnerKind::Kalman]
        .into_iter()
        .map(|kind| ExperimentConfig::new(name, env.clone(), cost, agent(kind), episodes))
        .collect()
}

pub fn mhealth_experiment(kind: LearnerKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new("adapts-fig6", EnvConfig::Mhealth { spec: MHealthSpec::default() }, MHealthSpec::default().cost, mhealth_agent(kind), 1);
    cfg.final_window = 100;
    cfg.smoothing_window = 10;
    cfg
}

pub fn preset(name: &str) -> Option<Preset> {
    let &(name, description) = NAMES.iter().find(|(n, _)| *n == name)?;
    let lake = |variant| both(name, EnvConfig::lake(variant), LAKE_COST, 1000, tabular_agent);
    let (experiments, sweep) = match name {
        "mv-table" => (both(name, EnvConfig::MeasuringValue { branch_prob: 0.5 }, 0.05, 1000, tabular_agent), None),
        "lake-table-det" => (lake(LakeVariant::Deterministic), None),
        "lake-table-semi" => (lake(LakeVariant::SemiSlippery), None),
        "lake-table-slip" => (lake(LakeVariant::Slippery), None),
        "large-lakes" => {
            let experiments = LARGE_LAKE_SIZES
                .iter()
                .flat_map(|&n| {
                    let env = EnvConfig::large_lake(LakeVariant::SemiSlippery, n, LARGE_LAKE_HOLE_DENSITY);
                    both(&format!("large-lakes-{n}"), env, LAKE_COST, 7500, tabular_agent)
                })
                .collect();
            (experiments, None)
        }
        "adapts-fig6" => (vec![mhealth_experiment(LearnerKind::Replicated), mhealth_experiment(LearnerKind::Kalman)], None),
        "appendix-cost-sweep" => (lake(LakeVariant::SemiSlippery), Some((SWEEP_COSTS.to_vec(), SWEEP_WINDOW))),
        _ => return None,
    };
    Some(Preset { name, description, experiments, sweep })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_named_preset_resolves_and_validates() {
        for (name, _) in preset_names() {
            let p = preset(name).unwrap();
            assert_eq!(p.name, name);
            assert!(!p.experiments.is_empty());
            for cfg in &p.experiments {
                cfg.validate().unwrap();
            }
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn shapes() {
        let semi = preset("lake-table-semi").unwrap();
        assert_eq!(semi.experiments.len(), 2);
        assert!(semi.experiments.iter().all(|c| c.runs == 5 && c.episodes == 1000));
        let large = preset("large-lakes").unwrap();
        assert_eq!(large.experiments.len(), 14);
        assert!(large.experiments.iter().all(|c| c.episodes == 7500));
        let sweep = preset("appendix-cost-sweep").unwrap().sweep.unwrap();
        assert_eq!((sweep.0.len(), sweep.1), (9, 50));
    }
}
