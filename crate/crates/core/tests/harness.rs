use atm_core::agent::{AtmConfig, EpsilonSchedule, LearnerKind};
use atm_core::env::{LakeVariant, MHealthSpec};
use atm_core::harness::{
    aggregate, cost_sweep, final_summary, records_csv, run_experiment, run_single, EnvConfig, ExperimentConfig, Metric,
};

fn lake(variant: LakeVariant, kind: LearnerKind, episodes: usize) -> ExperimentConfig {
    let mut agent = AtmConfig::with_learner(kind);
    agent.init_q = 1.0;
    agent.epsilon.end = 0.01;
    ExperimentConfig::new("t", EnvConfig::lake(variant), 0.05, agent, episodes)
}

#[test]
fn identical_configs_give_identical_csv() {
    for kind in [LearnerKind::Replicated, LearnerKind::Kalman] {
        let mut cfg = lake(LakeVariant::SemiSlippery, kind, 60);
        cfg.runs = 3;
        let a = records_csv(&run_experiment(&cfg, Some(1)).unwrap());
        let b = records_csv(&run_experiment(&cfg, Some(3)).unwrap());
        assert_eq!(a, b);
        cfg.base_seed = 1;
        assert_ne!(a, records_csv(&run_experiment(&cfg, None).unwrap()));
    }
}

#[test]
fn runs_are_seeded_by_offset() {
    let mut cfg = lake(LakeVariant::Slippery, LearnerKind::Replicated, 20);
    cfg.runs = 3;
    cfg.base_seed = 10;
    let all = run_experiment(&cfg, None).unwrap();
    let mut single = cfg.clone();
    single.runs = 1;
    single.base_seed = 12;
    let third = run_single(&single, 0).unwrap().records;
    let from_all: Vec<_> = all.iter().filter(|r| r.run == 2).collect();
    assert_eq!(from_all.len(), third.len());
    for (x, y) in from_all.iter().zip(&third) {
        assert_eq!((x.scalarized_return, x.measurements, x.steps), (y.scalarized_return, y.measurements, y.steps));
    }
}

#[test]
fn records_are_ordered_and_cross_checked() {
    let mut cfg = lake(LakeVariant::SemiSlippery, LearnerKind::Kalman, 30);
    cfg.runs = 2;
    let records = run_experiment(&cfg, None).unwrap();
    let keys: Vec<_> = records.iter().map(|r| (r.run, r.episode)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(records.len(), 60);
    for r in &records {
        assert!((r.scalarized_return + 0.05 * r.measurements as f64 - r.raw_return).abs() < 1e-9);
    }
}

#[test]
fn pre_trained_agent_scores_one_minus_measurement_cost() {
    let dir = tempfile::tempdir().unwrap();
    let train = lake(LakeVariant::Deterministic, LearnerKind::Replicated, 400);
    let trained = run_single(&train, 0).unwrap().agent;
    let path = dir.path().join("agent.snapshot");
    std::fs::write(&path, trained.to_snapshot()).unwrap();

    let mut cfg = lake(LakeVariant::Deterministic, LearnerKind::Replicated, 1);
    cfg.runs = 1;
    cfg.snapshot = Some(path);
    cfg.agent.epsilon = EpsilonSchedule::constant(0.0);
    let records = run_experiment(&cfg, None).unwrap();
    assert_eq!(records.len(), 1);
    let r = &records[0];
    assert_eq!(r.raw_return, 1.0);
    assert!((r.scalarized_return - (1.0 - 0.05 * r.measurements as f64)).abs() < 1e-12);
}

#[test]
fn episodes_shorter_than_window_are_rejected_before_running() {
    let mut cfg = lake(LakeVariant::Deterministic, LearnerKind::Replicated, 50);
    cfg.final_window = 200;
    assert!(run_experiment(&cfg, None).is_err());
}

#[test]
fn single_cost_sweep_equals_one_experiment() {
    let cfg = lake(LakeVariant::SemiSlippery, LearnerKind::Kalman, 80);
    let rows = cost_sweep(&cfg, &[0.05], 30, None).unwrap();
    let direct = final_summary(&run_experiment(&cfg, None).unwrap(), 30).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].summary, direct);
    assert!(cost_sweep(&cfg, &[], 30, None).is_err());
    assert!(cost_sweep(&cfg, &[-0.1], 30, None).is_err());
}

#[test]
fn aggregate_matches_a_spreadsheet_computation() {
    let mut cfg = lake(LakeVariant::SemiSlippery, LearnerKind::Replicated, 12);
    cfg.runs = 3;
    let records = run_experiment(&cfg, None).unwrap();
    let rows = aggregate(&records, Metric::Steps, 3);
    let series: Vec<Vec<f64>> =
        (0..3).map(|run| records.iter().filter(|r| r.run == run).map(|r| r.steps as f64).collect()).collect();
    for (i, row) in rows.iter().enumerate() {
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(11);
        let smoothed: Vec<f64> =
            series.iter().map(|s| s[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64).collect();
        let mean = smoothed.iter().sum::<f64>() / 3.0;
        let sd = (smoothed.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
        assert!((row.mean - mean).abs() < 1e-12);
        assert!((row.ci95_half_width - 1.96 * sd / 3f64.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn mhealth_logs_one_record_per_day() {
    let spec = MHealthSpec { horizon_days: 60, ..MHealthSpec::default() };
    let mut cfg = ExperimentConfig::new("m", EnvConfig::Mhealth { spec }, spec.cost, AtmConfig::default(), 1);
    cfg.runs = 2;
    cfg.final_window = 20;
    cfg.warmup_days = 10;
    let records = run_experiment(&cfg, None).unwrap();
    assert_eq!(records.len(), 120);
    for r in &records {
        assert_eq!(r.steps, spec.bag_size);
        let rate = r.query_rate.unwrap();
        assert!((rate * spec.bag_size as f64 - r.measurements as f64).abs() < 1e-12);
        if r.episode < 10 {
            assert_eq!(r.measurements, spec.bag_size);
        }
    }
    let run0: Vec<f64> = records.iter().filter(|r| r.run == 0).map(|r| r.cumulative_reward.unwrap()).collect();
    assert_eq!(run0.len(), 60);
    let csv = records_csv(&records);
    assert!(csv.starts_with("run,episode,scalarized_return,measurements,steps,cumulative_reward,query_rate\n"));
}
