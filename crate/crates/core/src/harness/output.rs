//! CSV emission and config echo files.
//!
//! Records CSV header: `run,episode,scalarized_return,measurements,steps`,
//! followed by `cumulative_reward,query_rate` for segmented environments.
//! Everything is comma separated with `.` decimals and LF line endings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{aggregate, AggregateRow, EpisodeRecord, ExperimentConfig, HarnessError, Metric, SweepRow};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn records_csv(records: &[EpisodeRecord]) -> String {
    let segmented = records.first().is_some_and(|r| r.query_rate.is_some());
    let mut out = String::from("run,episode,scalarized_return,measurements,steps");
    out.push_str(if segmented { ",cumulative_reward,query_rate\n" } else { "\n" });
    for r in records {
        let _ = write!(out, "{},{},{},{},{}", r.run, r.episode, r.scalarized_return, r.measurements, r.steps);
        if segmented {
            let _ = write!(out, ",{},{}", r.cumulative_reward.unwrap_or(f64::NAN), r.query_rate.unwrap_or(f64::NAN));
        }
        out.push('\n');
    }
    out
}

/// `episode,<metric>_mean,<metric>_ci95,...` for every metric present.
pub fn aggregate_csv(records: &[EpisodeRecord], smoothing_window: usize) -> String {
    let columns: Vec<(Metric, Vec<AggregateRow>)> = Metric::ALL
        .into_iter()
        .map(|m| (m, aggregate(records, m, smoothing_window)))
        .filter(|(_, rows)| !rows.is_empty())
        .collect();
    let mut out = String::from("episode");
    for (m, _) in &columns {
        let _ = write!(out, ",{0}_mean,{0}_ci95", m.column());
    }
    out.push('\n');
    let len = columns.iter().map(|(_, rows)| rows.len()).min().unwrap_or(0);
    for i in 0..len {
        let _ = write!(out, "{i}");
        for (_, rows) in &columns {
            let _ = write!(out, ",{},{}", rows[i].mean, rows[i].ci95_half_width);
        }
        out.push('\n');
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("cost,scalarized_return,measurements,steps\n");
    for row in rows {
        let s = &row.summary;
        let _ = writeln!(out, "{},{},{},{}", row.cost, s.scalarized_return, s.measurements, s.steps);
    }
    out
}

/// Everything needed to rerun an experiment or sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EchoFile {
    pub artifact_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_window: Option<usize>,
    pub experiment: ExperimentConfig,
}

impl EchoFile {
    pub fn new(experiment: &ExperimentConfig) -> Self {
        Self { artifact_version: ARTIFACT_VERSION.to_string(), costs: None, sweep_window: None, experiment: experiment.clone() }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("echo serializes")
    }
}

/// Parse either an echo file or a bare experiment config.
pub fn load_config(text: &str) -> Result<EchoFile, HarnessError> {
    if let Ok(echo) = toml::from_str::<EchoFile>(text) {
        return Ok(echo);
    }
    toml::from_str::<ExperimentConfig>(text)
        .map(|cfg| EchoFile::new(&cfg))
        .map_err(|e| HarnessError::Config(e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))
}

/// Write `<stem>.csv`, `<stem>.aggregate.csv` and `<stem>.echo.toml`.
pub fn write_experiment(dir: &Path, cfg: &ExperimentConfig, records: &[EpisodeRecord]) -> Result<Vec<PathBuf>, HarnessError> {
    ensure_dir(dir)?;
    let stem = cfg.file_stem();
    let files = [
        (dir.join(format!("{stem}.csv")), records_csv(records)),
        (dir.join(format!("{stem}.aggregate.csv")), aggregate_csv(records, cfg.smoothing_window)),
        (dir.join(format!("{stem}.echo.toml")), EchoFile::new(cfg).to_toml()),
    ];
    for (path, text) in &files {
        write_file(path, text)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// Write `<stem>.sweep.csv` and `<stem>.sweep.echo.toml`.
pub fn write_sweep(
    dir: &Path,
    cfg: &ExperimentConfig,
    costs: &[f64],
    window: usize,
    rows: &[SweepRow],
) -> Result<Vec<PathBuf>, HarnessError> {
    ensure_dir(dir)?;
    let stem = cfg.file_stem();
    let echo = EchoFile { costs: Some(costs.to_vec()), sweep_window: Some(window), ..EchoFile::new(cfg) };
    let files = [
        (dir.join(format!("{stem}.sweep.csv")), sweep_csv(rows)),
        (dir.join(format!("{stem}.sweep.echo.toml")), echo.to_toml()),
    ];
    for (path, text) in &files {
        write_file(path, text)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::AtmConfig;
    use crate::env::LakeVariant;
    use crate::harness::{EnvConfig, FinalSummary};

    fn rec(run: usize, episode: usize) -> EpisodeRecord {
        EpisodeRecord {
            run,
            episode,
            scalarized_return: 0.95,
            raw_return: 1.0,
            measurements: 1,
            steps: 6,
            cumulative_reward: None,
            query_rate: None,
        }
    }

    #[test]
    fn records_layout() {
        let text = records_csv(&[rec(0, 0), rec(0, 1)]);
        assert_eq!(text, "run,episode,scalarized_return,measurements,steps\n0,0,0.95,1,6\n0,1,0.95,1,6\n");
        let mut day = rec(1, 3);
        day.cumulative_reward = Some(2.5);
        day.query_rate = Some(0.2);
        let text = records_csv(&[day]);
        assert_eq!(
            text,
            "run,episode,scalarized_return,measurements,steps,cumulative_reward,query_rate\n1,3,0.95,1,6,2.5,0.2\n"
        );
    }

    #[test]
    fn aggregate_and_sweep_layout() {
        let text = aggregate_csv(&[rec(0, 0), rec(1, 0)], 3);
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("episode,scalarized_return_mean,scalarized_return_ci95,measurements_mean,measurements_ci95,steps_mean,steps_ci95")
        );
        assert_eq!(lines.next(), Some("0,0.95,0,1,0,6,0"));
        let summary = FinalSummary { scalarized_return: 0.5, measurements: 1.25, steps: 3.0, query_rate: None };
        assert_eq!(sweep_csv(&[SweepRow { cost: 0.04, summary }]), "cost,scalarized_return,measurements,steps\n0.04,0.5,1.25,3\n");
    }

    #[test]
    fn echo_round_trip_and_bare_configs() {
        let cfg = ExperimentConfig::new("x", EnvConfig::lake(LakeVariant::Slippery), 0.05, AtmConfig::default(), 50);
        let echo = EchoFile { costs: Some(vec![0.1, 0.2]), sweep_window: Some(10), ..EchoFile::new(&cfg) };
        assert_eq!(load_config(&echo.to_toml()).unwrap(), echo);
        let bare = toml::to_string(&cfg).unwrap();
        assert_eq!(load_config(&bare).unwrap().experiment, cfg);
        assert!(load_config("name = 3").is_err());
    }

    #[test]
    fn files_land_in_created_directory() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("nested/out");
        let cfg = ExperimentConfig::new("x", EnvConfig::lake(LakeVariant::Slippery), 0.05, AtmConfig::default(), 50);
        let paths = write_experiment(&out, &cfg, &[rec(0, 0)]).unwrap();
        assert_eq!(paths.len(), 3);
        assert!(paths.iter().all(|p| p.exists()));
        assert!(paths[0].ends_with("x-atm-q.csv"));
    }
}
