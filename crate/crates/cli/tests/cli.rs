use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn atm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atm")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b/nested"));
    let args = ["run", "--env", "lake", "--variant", "semi", "--agent", "kq", "--episodes", "10", "--runs", "1", "--seed", "7"];
    for out in [&a, &b] {
        let o = atm(&[&args[..], &["--out", path(out)]].concat());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["lake4-semi-atm-kq.csv", "lake4-semi-atm-kq.aggregate.csv", "lake4-semi-atm-kq.echo.toml"] {
        let (x, y) = (fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name}");
    }
    let csv = fs::read_to_string(a.join("lake4-semi-atm-kq.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert!(csv.starts_with("run,episode,scalarized_return,measurements,steps\n"));
}

#[test]
fn echo_file_reruns_the_same_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = atm(&["run", "--env", "mv", "--episodes", "30", "--runs", "2", "--init-q", "0.5", "--out", path(&first)]);
    assert!(o.status.success());
    let echo = first.join("mv-atm-q.echo.toml");
    let second = dir.path().join("second");
    let o = atm(&["run", "--config", path(&echo), "--out", path(&second)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(first.join("mv-atm-q.csv")).unwrap(), fs::read(second.join("mv-atm-q.csv")).unwrap());
    assert_eq!(fs::read(&echo).unwrap(), fs::read(second.join("mv-atm-q.echo.toml")).unwrap());
}

#[test]
fn sweep_over_the_mv_grid_gives_nine_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = atm(&[
        "sweep", "--env", "mv", "--costs", "0.04:0.20:0.02", "--episodes", "60", "--runs", "2", "--sweep-window", "20",
        "--out", path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("mv-atm-q.sweep.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "cost,scalarized_return,measurements,steps");
    assert_eq!(lines.len(), 10);
    assert!(lines[1].starts_with("0.04,") && lines[9].starts_with("0.2,"));
    assert!(dir.path().join("mv-atm-q.sweep.echo.toml").exists());
}

#[test]
fn list_configs_names_every_bundle() {
    let o = atm(&["list-configs"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["mv-table", "lake-table-det", "lake-table-semi", "lake-table-slip", "large-lakes", "adapts-fig6", "appendix-cost-sweep"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn reproduce_prints_resolved_config_first() {
    let o = atm(&["reproduce", "large-lakes", "--dry-run"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("# large-lakes"));
    assert_eq!(text.matches("episodes = 7500").count(), 14);
    let o = atm(&["reproduce", "appendix-cost-sweep", "--dry-run"]);
    assert!(stdout(&o).contains("sweep_window = 50"));
}

#[test]
fn reproduce_lake_table_semi_writes_both_learners() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let o = atm(&["reproduce", "lake-table-semi", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for learner in ["atm-q", "atm-kq"] {
        let csv = fs::read_to_string(out.join(format!("lake-table-semi-{learner}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 1 + 5 * 1000);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(atm(&["run", "--bogus"]).status.code(), Some(2));
    assert_eq!(atm(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(atm(&["reproduce", "nope"]).status.code(), Some(2));
    let bad = atm(&["run", "--episodes", "10", "--final-window", "20"]);
    assert_eq!(bad.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&bad.stderr);
    assert_eq!(stderr.trim().lines().count(), 1, "{stderr}");
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = atm(&["run", "--episodes", "2", "--runs", "1", "--out", path(&blocker.join("sub"))]);
    assert_eq!(o.status.code(), Some(3));
    let missing = atm(&["run", "--config", path(&dir.path().join("absent.toml"))]);
    assert_eq!(missing.status.code(), Some(3));
    assert_eq!(atm(&["--help"]).status.code(), Some(0));
}
