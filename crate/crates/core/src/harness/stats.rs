use std::str::FromStr;

use super::{run_experiment, EpisodeRecord, ExperimentConfig, HarnessError};

/// Normal quantile for two-sided 95% intervals.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    ScalarizedReturn,
    Measurements,
    Steps,
    CumulativeReward,
    QueryRate,
}

impl Metric {
    pub const ALL: [Metric; 5] =
        [Metric::ScalarizedReturn, Metric::Measurements, Metric::Steps, Metric::CumulativeReward, Metric::QueryRate];

    pub fn column(self) -> &'static str {
        match self {
            Metric::ScalarizedReturn => "scalarized_return",
            Metric::Measurements => "measurements",
            Metric::Steps => "steps",
            Metric::CumulativeReward => "cumulative_reward",
            Metric::QueryRate => "query_rate",
        }
    }

    pub fn value(self, r: &EpisodeRecord) -> Option<f64> {
        match self {
            Metric::ScalarizedReturn => Some(r.scalarized_return),
            Metric::Measurements => Some(r.measurements as f64),
            Metric::Steps => Some(r.steps as f64),
            Metric::CumulativeReward => r.cumulative_reward,
            Metric::QueryRate => r.query_rate,
        }
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.column() == s)
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub episode: usize,
    pub mean: f64,
    pub ci95_half_width: f64,
}

/// Centered moving average of width `window`, truncated at the edges.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let (back, ahead) = ((window - 1) / 2, window / 2);
    (0..series.len())
        .map(|i| {
            let lo = i.saturating_sub(back);
            let hi = (i + ahead).min(series.len() - 1);
            series[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Per-run series of `metric`, in run order.
fn per_run(records: &[EpisodeRecord], metric: Metric) -> Vec<Vec<f64>> {
    let mut runs: Vec<(usize, Vec<f64>)> = Vec::new();
    for r in records {
        let Some(v) = metric.value(r) else { continue };
        match runs.iter_mut().find(|(run, _)| *run == r.run) {
            Some((_, series)) => series.push(v),
            None => runs.push((r.run, vec![v])),
        }
    }
    runs.sort_by_key(|(run, _)| *run);
    runs.into_iter().map(|(_, s)| s).collect()
}

/// Sample mean and `Z95 * sd / sqrt(n)` with the `n - 1` denominator.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.windows(2).all(|w| w[0] == w[1]) {
        return (values.first().copied().unwrap_or(f64::NAN), 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Z95 * var.sqrt() / n.sqrt())
}

/// Smooth each run, then average across runs episode by episode.
pub fn aggregate(records: &[EpisodeRecord], metric: Metric, smoothing_window: usize) -> Vec<AggregateRow> {
    let smoothed: Vec<Vec<f64>> = per_run(records, metric).iter().map(|s| moving_average(s, smoothing_window)).collect();
    let len = smoothed.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let column: Vec<f64> = smoothed.iter().map(|s| s[i]).collect();
            let (mean, ci95_half_width) = mean_ci(&column);
            AggregateRow { episode: i, mean, ci95_half_width }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalSummary {
    pub scalarized_return: f64,
    pub measurements: f64,
    pub steps: f64,
    pub query_rate: Option<f64>,
}

/// Means over the last `final_window` records of every run, pooled.
pub fn final_summary(records: &[EpisodeRecord], final_window: usize) -> Result<FinalSummary, HarnessError> {
    let mut runs: Vec<usize> = records.iter().map(|r| r.run).collect();
    runs.sort_unstable();
    runs.dedup();
    if runs.is_empty() || final_window == 0 {
        return Err(HarnessError::Config("final summary needs records and a positive window".into()));
    }
    let mut tail = Vec::new();
    for run in runs {
        let rows: Vec<&EpisodeRecord> = records.iter().filter(|r| r.run == run).collect();
        if rows.len() < final_window {
            return Err(HarnessError::Config(format!(
                "run {run} has {} records, fewer than the final window {final_window}",
                rows.len()
            )));
        }
        tail.extend_from_slice(&rows[rows.len() - final_window..]);
    }
    let n = tail.len() as f64;
    let mean = |f: &dyn Fn(&EpisodeRecord) -> f64| tail.iter().map(|r| f(r)).sum::<f64>() / n;
    let query_rate = tail.iter().all(|r| r.query_rate.is_some()).then(|| mean(&|r| r.query_rate.unwrap_or(0.0)));
    Ok(FinalSummary {
        scalarized_return: mean(&|r| r.scalarized_return),
        measurements: mean(&|r| r.measurements as f64),
        steps: mean(&|r| r.steps as f64),
        query_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub cost: f64,
    pub summary: FinalSummary,
}

/// One full experiment per cost, each summarized over `final_window`.
pub fn cost_sweep(
    cfg: &ExperimentConfig,
    costs: &[f64],
    final_window: usize,
    jobs: Option<usize>,
) -> Result<Vec<SweepRow>, HarnessError> {
    if costs.is_empty() {
        return Err(HarnessError::Config("cost sweep needs at least one cost".into()));
    }
    if let Some(c) = costs.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
        return Err(HarnessError::Config(format!("sweep costs must be nonnegative, got {c}")));
    }
    let mut base = cfg.clone();
    base.final_window = final_window;
    base.validate()?;
    costs
        .iter()
        .map(|&cost| {
            let mut one = base.clone();
            one.cost = cost;
            let records = run_experiment(&one, jobs)?;
            Ok(SweepRow { cost, summary: final_summary(&records, final_window)? })
        })
        .collect()
}
