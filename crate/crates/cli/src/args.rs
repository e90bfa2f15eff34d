use std::path::PathBuf;

use atm_core::agent::{AtmConfig, LearnerKind, TargetReward};
use atm_core::env::{LakeVariant, MHealthSpec};
use atm_core::harness::{load_config, EchoFile, EnvConfig, ExperimentConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "atm", version, about = "Act-then-measure agents for costly-observation MDPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its CSVs.
    Run(RunArgs),
    /// Rerun one experiment per measurement cost and write a summary table.
    Sweep(SweepArgs),
    /// Run a bundled configuration.
    Reproduce(ReproduceArgs),
    /// Print the names of the bundled configurations.
    ListConfigs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Costs as `start:end:step` (inclusive) or a comma-separated list
    /// [default: 0.04:0.20:0.02].
    #[arg(long)]
    pub costs: Option<String>,
    /// Final records per run averaged for each cost [default: 50].
    #[arg(long)]
    pub sweep_window: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Bundled configuration name (see `list-configs`).
    pub name: String,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory, created if absent.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads [default: one per run].
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnvKind {
    Mv,
    Lake,
    Mhealth,
    Tabular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AgentKind {
    #[value(alias = "atm-q", alias = "replicated")]
    Q,
    #[value(alias = "atm-kq", alias = "kalman")]
    Kq,
}

impl From<AgentKind> for LearnerKind {
    fn from(kind: AgentKind) -> Self {
        match kind {
            AgentKind::Q => LearnerKind::Replicated,
            AgentKind::Kq => LearnerKind::Kalman,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetKind {
    PerLearner,
    Scalarized,
    Raw,
}

impl From<TargetKind> for TargetReward {
    fn from(kind: TargetKind) -> Self {
        match kind {
            TargetKind::PerLearner => TargetReward::PerLearner,
            TargetKind::Scalarized => TargetReward::Scalarized,
            TargetKind::Raw => TargetReward::Raw,
        }
    }
}

/// Flags mirroring `ExperimentConfig`, its environment block and
/// `AtmConfig`. An unset flag keeps the value from `--config`, or the
/// library default when no config file is given.
#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Echo file or bare experiment TOML used as the starting point.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file stem prefix [default: environment label].
    #[arg(long)]
    pub name: Option<String>,

    /// Environment [default: lake].
    #[arg(long, value_enum)]
    pub env: Option<EnvKind>,
    /// Lake dynamics: det, semi or slip [default: semi].
    #[arg(long)]
    pub variant: Option<LakeVariant>,
    /// Lake side length [default: 4].
    #[arg(long)]
    pub size: Option<usize>,
    /// Hole density of generated lakes [default: 0].
    #[arg(long)]
    pub hole_density: Option<f64>,
    /// Seed pinning the generated lake or tabular MDP [default: fresh per run].
    #[arg(long)]
    pub map_seed: Option<u64>,
    /// File with a lake map in `S`/`F`/`H`/`G` rows.
    #[arg(long)]
    pub map_file: Option<PathBuf>,
    /// Episode step cap [default: 1000].
    #[arg(long)]
    pub step_cap: Option<usize>,
    /// Branch probability of the measuring-value environment [default: 0.5].
    #[arg(long)]
    pub branch_prob: Option<f64>,
    /// States of the random tabular MDP [default: 5].
    #[arg(long)]
    pub states: Option<usize>,
    /// Actions of the random tabular MDP [default: 3].
    #[arg(long)]
    pub actions: Option<usize>,
    /// TOML file with mhealth simulator parameters [default: built-in].
    #[arg(long)]
    pub mhealth_spec: Option<PathBuf>,

    /// Measurement cost [default: 0.05; 0.1 for mhealth].
    #[arg(long)]
    pub cost: Option<f64>,
    /// Episodes per run [default: 1000; 1 for mhealth].
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Independent runs [default: 5].
    #[arg(long)]
    pub runs: Option<usize>,
    /// Base seed; run r uses seed + r [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Final records per run in the summary [default: 200, capped at the run length].
    #[arg(long)]
    pub final_window: Option<usize>,
    /// Moving-average width of the aggregate CSV [default: 25].
    #[arg(long)]
    pub smoothing_window: Option<usize>,
    /// Leading records measured at every step [default: 0; 50 for mhealth].
    #[arg(long)]
    pub warmup_days: Option<usize>,
    /// Give agents the exact transition kernel.
    #[arg(long)]
    pub known_model: bool,
    /// Start every run from this agent snapshot.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,

    /// Learner: q (replicated) or kq (Kalman) [default: q].
    #[arg(long, value_enum)]
    pub agent: Option<AgentKind>,
    /// Discount [default: 0.95].
    #[arg(long)]
    pub discount: Option<f64>,
    /// Replicated learning rate [default: 0.1].
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Visits per (s, a) forcing a measurement [default: 5].
    #[arg(long)]
    pub exploratory_visits: Option<u32>,
    /// Initial exploration rate [default: 1].
    #[arg(long)]
    pub epsilon_start: Option<f64>,
    /// Final exploration rate [default: 0.05].
    #[arg(long)]
    pub epsilon_end: Option<f64>,
    /// Fraction of the run over which exploration decays [default: 0.2].
    #[arg(long)]
    pub epsilon_decay_fraction: Option<f64>,
    /// Initial Q values or posterior means [default: 0].
    #[arg(long)]
    pub init_q: Option<f64>,
    /// Prior variance of the Kalman learner [default: 1].
    #[arg(long)]
    pub init_var: Option<f64>,
    /// Observation noise of the Kalman learner [default: 0.25].
    #[arg(long)]
    pub obs_noise: Option<f64>,
    /// Lower bound on posterior variances [default: 1e-8].
    #[arg(long)]
    pub var_floor: Option<f64>,
    /// Dirichlet pseudocount of the transition model [default: 0.001].
    #[arg(long)]
    pub prior_pseudocount: Option<f64>,
    /// Simulated backups per real step [default: 0].
    #[arg(long)]
    pub dyna_sweeps: Option<u32>,
    /// Reward inside TD targets [default: per-learner].
    #[arg(long, value_enum)]
    pub target_reward: Option<TargetKind>,
    /// Update the transition model from measured steps [default: true].
    #[arg(long)]
    pub learn_transitions: Option<bool>,
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

impl ExperimentArgs {
    /// Starting echo: the `--config` file, or `None` to build from flags.
    pub fn base_echo(&self) -> Result<Option<EchoFile>, CliError> {
        match &self.config {
            Some(path) => load_config(&read(path)?).map(Some).map_err(|e| CliError::Usage(e.to_string())),
            None => Ok(None),
        }
    }

    fn env_config(&self, base: Option<&EnvConfig>) -> Result<EnvConfig, CliError> {
        let kind = self.env.unwrap_or(match base {
            Some(EnvConfig::MeasuringValue { .. }) => EnvKind::Mv,
            Some(EnvConfig::Mhealth { .. }) => EnvKind::Mhealth,
            Some(EnvConfig::Tabular { .. }) => EnvKind::Tabular,
            Some(EnvConfig::Lake { .. }) | None => EnvKind::Lake,
        });
        let base = base.filter(|b| same_kind(b, kind));
        let env = match kind {
            EnvKind::Mv => {
                let prior = match base {
                    Some(EnvConfig::MeasuringValue { branch_prob }) => *branch_prob,
                    _ => 0.5,
                };
                EnvConfig::MeasuringValue { branch_prob: self.branch_prob.unwrap_or(prior) }
            }
            EnvKind::Lake => {
                let mut env = base.cloned().unwrap_or_else(|| EnvConfig::lake(LakeVariant::SemiSlippery));
                let map_text = self.map_file.as_ref().map(read).transpose()?;
                if let EnvConfig::Lake { variant, size, hole_density, map_seed, map, step_cap } = &mut env {
                    set(variant, self.variant);
                    set(size, self.size);
                    set(hole_density, self.hole_density);
                    if self.map_seed.is_some() {
                        *map_seed = self.map_seed;
                    }
                    if map_text.is_some() {
                        *map = map_text;
                    }
                    set(step_cap, self.step_cap);
                }
                env
            }
            EnvKind::Mhealth => {
                let spec = match (&self.mhealth_spec, base) {
                    (Some(path), _) => MHealthSpec::from_toml(&read(path)?).map_err(CliError::Usage)?,
                    (None, Some(EnvConfig::Mhealth { spec })) => *spec,
                    (None, _) => MHealthSpec::default(),
                };
                EnvConfig::Mhealth { spec }
            }
            EnvKind::Tabular => {
                let (mut states, mut actions, mut mdp_seed) = match base {
                    Some(EnvConfig::Tabular { states, actions, mdp_seed }) => (*states, *actions, *mdp_seed),
                    _ => (5, 3, None),
                };
                set(&mut states, self.states);
                set(&mut actions, self.actions);
                if self.map_seed.is_some() {
                    mdp_seed = self.map_seed;
                }
                EnvConfig::Tabular { states, actions, mdp_seed }
            }
        };
        Ok(env)
    }

    fn apply_agent(&self, agent: &mut AtmConfig) {
        if let Some(kind) = self.agent {
            agent.learner = kind.into();
        }
        set(&mut agent.discount, self.discount);
        set(&mut agent.learning_rate, self.learning_rate);
        set(&mut agent.exploratory_visits, self.exploratory_visits);
        set(&mut agent.epsilon.start, self.epsilon_start);
        set(&mut agent.epsilon.end, self.epsilon_end);
        set(&mut agent.epsilon.decay_fraction, self.epsilon_decay_fraction);
        set(&mut agent.init_q, self.init_q);
        set(&mut agent.init_var, self.init_var);
        set(&mut agent.obs_noise, self.obs_noise);
        set(&mut agent.var_floor, self.var_floor);
        set(&mut agent.prior_pseudocount, self.prior_pseudocount);
        set(&mut agent.dyna_sweeps, self.dyna_sweeps);
        set(&mut agent.target_reward, self.target_reward.map(Into::into));
        set(&mut agent.learn_transitions, self.learn_transitions);
    }

    /// Resolve flags on top of `base`.
    pub fn resolve(&self, base: Option<&ExperimentConfig>) -> Result<ExperimentConfig, CliError> {
        let env = self.env_config(base.map(|b| &b.env))?;
        let env_changed = base.is_none_or(|b| !same_kind(&b.env, kind_of(&env)));
        let mut cfg = match base {
            Some(b) if !env_changed => ExperimentConfig { env, ..b.clone() },
            _ => {
                let cost = match &env {
                    EnvConfig::Mhealth { spec } => spec.cost,
                    _ => 0.05,
                };
                let episodes = if env.is_segmented() { 1 } else { 1000 };
                let agent = base.map(|b| b.agent.clone()).unwrap_or_default();
                let name = base.map(|b| b.name.clone()).unwrap_or_else(|| env.label());
                ExperimentConfig::new(name, env, cost, agent, episodes)
            }
        };
        set(&mut cfg.name, self.name.clone());
        set(&mut cfg.cost, self.cost);
        if let Some(episodes) = self.episodes {
            cfg.episodes = episodes;
            if self.final_window.is_none() {
                let window = if env_changed { 200 } else { cfg.final_window };
                cfg.final_window = window.min(cfg.records_per_run());
            }
        }
        set(&mut cfg.runs, self.runs);
        set(&mut cfg.base_seed, self.seed);
        set(&mut cfg.final_window, self.final_window);
        set(&mut cfg.smoothing_window, self.smoothing_window);
        set(&mut cfg.warmup_days, self.warmup_days);
        cfg.known_model |= self.known_model;
        if self.snapshot.is_some() {
            cfg.snapshot = self.snapshot.clone();
        }
        self.apply_agent(&mut cfg.agent);
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn kind_of(env: &EnvConfig) -> EnvKind {
    match env {
        EnvConfig::MeasuringValue { .. } => EnvKind::Mv,
        EnvConfig::Lake { .. } => EnvKind::Lake,
        EnvConfig::Mhealth { .. } => EnvKind::Mhealth,
        EnvConfig::Tabular { .. } => EnvKind::Tabular,
    }
}

fn same_kind(env: &EnvConfig, kind: EnvKind) -> bool {
    kind_of(env) == kind
}

/// `start:end:step` (inclusive) or `a,b,c`.
pub fn parse_costs(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("invalid cost list `{text}`: expected start:end:step or a,b,c"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let costs = match text.split(':').collect::<Vec<_>>()[..] {
        [start, end, step] => {
            let (start, end, step) = (num(start)?, num(end)?, num(step)?);
            if !(step > 0.0) || end < start {
                return Err(bad());
            }
            let n = ((end - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad()),
    };
    if costs.is_empty() || costs.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
        return Err(bad());
    }
    Ok(costs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> ExperimentConfig {
        let cli = Cli::try_parse_from([&["atm", "run"], args].concat()).unwrap();
        let Command::Run(run) = cli.command else { panic!() };
        run.experiment.resolve(None).unwrap()
    }

    #[test]
    fn cost_ranges() {
        let costs = parse_costs("0.04:0.20:0.02").unwrap();
        assert_eq!(costs, vec![0.04, 0.06, 0.08, 0.1, 0.12, 0.14, 0.16, 0.18, 0.2]);
        assert_eq!(parse_costs("0.1,0.3").unwrap(), vec![0.1, 0.3]);
        assert_eq!(parse_costs("0.5:0.5:0.1").unwrap(), vec![0.5]);
        for bad in ["", "0.2:0.1:0.01", "0:1:0", "a:b:c", "1:2", "-0.1"] {
            assert!(parse_costs(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn defaults_match_library() {
        let cfg = parse(&[]);
        let lib = ExperimentConfig::new("lake4-semi", EnvConfig::lake(LakeVariant::SemiSlippery), 0.05, AtmConfig::default(), 1000);
        assert_eq!(cfg, lib);
        let mh = parse(&["--env", "mhealth"]);
        assert_eq!((mh.episodes, mh.cost, mh.warmup_days), (1, MHealthSpec::default().cost, 50));
    }

    #[test]
    fn flags_reach_fields() {
        let cfg = parse(&[
            "--env", "lake", "--variant", "slip", "--agent", "kq", "--episodes", "10", "--runs", "1", "--seed", "7",
            "--init-q", "1", "--dyna-sweeps", "3", "--target-reward", "scalarized",
        ]);
        assert_eq!((cfg.episodes, cfg.runs, cfg.base_seed, cfg.final_window), (10, 1, 7, 10));
        assert_eq!(cfg.agent.learner, LearnerKind::Kalman);
        assert_eq!((cfg.agent.init_q, cfg.agent.dyna_sweeps), (1.0, 3));
        assert_eq!(cfg.agent.target_reward, TargetReward::Scalarized);
        assert!(matches!(cfg.env, EnvConfig::Lake { variant: LakeVariant::Slippery, .. }));
    }

    #[test]
    fn flags_override_a_base_config() {
        let mut base = ExperimentConfig::new("b", EnvConfig::MeasuringValue { branch_prob: 0.3 }, 0.1, AtmConfig::default(), 40);
        base.agent.init_q = 2.0;
        let cli = Cli::try_parse_from(["atm", "run", "--cost", "0.2"]).unwrap();
        let Command::Run(run) = cli.command else { panic!() };
        let cfg = run.experiment.resolve(Some(&base)).unwrap();
        assert_eq!(cfg, ExperimentConfig { cost: 0.2, ..base });
    }

    #[test]
    fn unknown_flags_are_rejected() {
        assert!(Cli::try_parse_from(["atm", "run", "--bogus", "1"]).is_err());
        assert!(Cli::try_parse_from(["atm", "run", "--agent", "dqn"]).is_err());
    }
}
