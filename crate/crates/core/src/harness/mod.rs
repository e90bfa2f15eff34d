//! Seeded experiment runs, aggregation and CSV output.

mod config;
mod output;
pub mod presets;
mod runner;
mod stats;

use thiserror::Error;

pub use config::{BuiltEnv, EnvConfig, ExperimentConfig, DEFAULT_MHEALTH_WARMUP_DAYS};
pub use output::{
    load_config, records_csv, sweep_csv, aggregate_csv, write_experiment, write_sweep, EchoFile, ARTIFACT_VERSION,
};
pub use presets::{preset, preset_names, Preset};
pub use runner::{initial_agent, run_experiment, run_experiment_full, run_single, RunOutput};
pub use stats::{aggregate, cost_sweep, final_summary, mean_ci, moving_average, AggregateRow, FinalSummary, Metric, SweepRow};

use crate::acno::AcnoError;
use crate::agent::AgentError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("environment: {0}")]
    Env(#[from] AcnoError),
    #[error("agent: {0}")]
    Agent(#[from] AgentError),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("i/o: {0}")]
    Io(String),
}

/// One logged row: an episode, or a day for segmented environments.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub run: usize,
    pub episode: usize,
    /// Sum of `reward - cost` over the record.
    pub scalarized_return: f64,
    /// Reward sum reported independently by the environment.
    pub raw_return: f64,
    pub measurements: usize,
    pub steps: usize,
    /// Running total of the latent reward since the start of the run.
    pub cumulative_reward: Option<f64>,
    pub query_rate: Option<f64>,
}

impl EpisodeRecord {
    /// `scalarized_return + cost * measurements == raw_return`.
    pub fn cross_check(&self, cost: f64, tol: f64) -> Result<(), String> {
        let gap = self.scalarized_return + cost * self.measurements as f64 - self.raw_return;
        if gap.abs() > tol {
            return Err(format!(
                "run {} episode {}: scalarized return disagrees with environment reward by {gap}",
                self.run, self.episode
            ));
        }
        Ok(())
    }
}
