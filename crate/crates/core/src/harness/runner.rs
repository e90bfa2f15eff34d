use rayon::prelude::*;

use super::{EpisodeRecord, ExperimentConfig, HarnessError};
use crate::acno::{self, AcnoEnv};
use crate::agent::AtmAgent;

/// Substream of the agent's exploration RNG within a run.
const AGENT_STREAM: u64 = 1;
/// Tolerance of the per-record reward cross-check.
const CROSS_CHECK_TOL: f64 = 1e-9;

/// Everything one run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub run: usize,
    pub records: Vec<EpisodeRecord>,
    pub agent: AtmAgent,
}

/// Agent for run `run`: from the configured snapshot or fresh.
pub fn initial_agent(cfg: &ExperimentConfig, env: &dyn AcnoEnv, known: Option<crate::belief::TransitionModel>) -> Result<AtmAgent, HarnessError> {
    let spec = env.spec();
    let mut agent = match &cfg.snapshot {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
            let agent = AtmAgent::from_snapshot(&text)?;
            let s = agent.env_spec();
            if s.num_states != spec.num_states || s.num_actions != spec.num_actions {
                return Err(HarnessError::Config("snapshot dimensions do not match the environment".into()));
            }
            agent
        }
        None => AtmAgent::new(spec, cfg.agent.clone())?,
    };
    if let Some(model) = known {
        agent = agent.with_model(model)?;
    }
    Ok(agent)
}

/// Execute run `run` of `cfg` on the calling thread.
pub fn run_single(cfg: &ExperimentConfig, run: usize) -> Result<RunOutput, HarnessError> {
    let built = cfg.build_env(run)?;
    let known = if cfg.known_model { built.known_model() } else { None };
    let mut env = built.env;
    let mut agent = initial_agent(cfg, env.as_ref(), known)?;
    let run_seed = cfg.run_seed(run);
    let mut rng = acno::stream_rng(run_seed, AGENT_STREAM);
    let total_records = cfg.records_per_run();
    let mut records = Vec::with_capacity(total_records);
    let mut cumulative_latent = 0.0;

    for episode in 0..cfg.episodes {
        env.reset(acno::mix_seed(run_seed, episode as u64));
        agent.begin_episode();
        let mut acc = Accumulator::default();
        let mut raw_mark = 0.0;
        loop {
            let index = records.len();
            agent.set_force_measure(index < cfg.warmup_days);
            let epsilon = cfg.agent.epsilon.at(index, total_records);
            let decision = agent.decide(epsilon, &mut rng)?;
            if !decision.is_consistent() {
                return Err(HarnessError::Invariant(format!("inconsistent decision {decision:?} in run {run}")));
            }
            let outcome = env.step(decision.action, decision.measure)?;
            agent.observe(&decision, &outcome, &mut rng)?;
            acc.add(outcome.reward - outcome.cost, decision.measure.is_observe());
            if let Some(r) = env.latent_reward() {
                cumulative_latent += r;
            }
            let boundary = built.segment.is_some_and(|k| acc.steps == k);
            if boundary || outcome.done {
                let raw = env.episode_reward() - raw_mark;
                raw_mark = env.episode_reward();
                let record = acc.finish(run, index, raw, built.segment.map(|_| cumulative_latent));
                record.cross_check(cfg.cost, CROSS_CHECK_TOL).map_err(HarnessError::Invariant)?;
                records.push(record);
                acc = Accumulator::default();
            }
            if outcome.done {
                break;
            }
        }
    }
    Ok(RunOutput { run, records, agent })
}

#[derive(Debug, Default)]
struct Accumulator {
    scalarized: f64,
    measurements: usize,
    steps: usize,
}

impl Accumulator {
    fn add(&mut self, scalarized: f64, measured: bool) {
        self.scalarized += scalarized;
        self.measurements += usize::from(measured);
        self.steps += 1;
    }

    fn finish(&self, run: usize, episode: usize, raw_return: f64, cumulative: Option<f64>) -> EpisodeRecord {
        EpisodeRecord {
            run,
            episode,
            scalarized_return: self.scalarized,
            raw_return,
            measurements: self.measurements,
            steps: self.steps,
            cumulative_reward: cumulative,
            query_rate: cumulative.map(|_| self.measurements as f64 / self.steps as f64),
        }
    }
}

/// All runs of `cfg`, in parallel on up to `jobs` threads (default: one per
/// run). Output is sorted by run regardless of completion order.
pub fn run_experiment_full(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<RunOutput>, HarnessError> {
    cfg.validate()?;
    let threads = jobs.unwrap_or(cfg.runs).clamp(1, cfg.runs);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Io(format!("thread pool: {e}")))?;
    let mut outputs = pool.install(|| (0..cfg.runs).into_par_iter().map(|r| run_single(cfg, r)).collect::<Result<Vec<_>, _>>())?;
    outputs.sort_by_key(|o| o.run);
    Ok(outputs)
}

/// Records of every run in `(run, episode)` order.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<EpisodeRecord>, HarnessError> {
    Ok(run_experiment_full(cfg, jobs)?.into_iter().flat_map(|o| o.records).collect())
}
