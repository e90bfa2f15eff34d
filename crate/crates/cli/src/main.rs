mod args;

use std::path::Path;
use std::process::ExitCode;

use atm_core::harness::{
    cost_sweep, final_summary, preset, preset_names, presets, run_experiment, write_experiment, write_sweep, EchoFile,
    ExperimentConfig, HarnessError,
};
use clap::Parser;

use args::{parse_costs, Cli, Command, OutputArgs, ReproduceArgs, RunArgs, SweepArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Reproduce(a) => reproduce(a),
        Command::ListConfigs => {
            for (name, description) in preset_names() {
                println!("{name:<20} {description}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(a: RunArgs) -> Result<(), CliError> {
    let base = a.experiment.base_echo()?;
    let cfg = a.experiment.resolve(base.as_ref().map(|e| &e.experiment))?;
    execute(&cfg, &a.output)
}

fn sweep(a: SweepArgs) -> Result<(), CliError> {
    let base = a.experiment.base_echo()?;
    let cfg = a.experiment.resolve(base.as_ref().map(|e| &e.experiment))?;
    let costs = match (&a.costs, base.as_ref().and_then(|e| e.costs.clone())) {
        (Some(text), _) => parse_costs(text)?,
        (None, Some(costs)) => costs,
        (None, None) => presets::SWEEP_COSTS.to_vec(),
    };
    let window = a.sweep_window.or(base.and_then(|e| e.sweep_window)).unwrap_or(presets::SWEEP_WINDOW);
    execute_sweep(&cfg, &costs, window, &a.output)
}

fn reproduce(a: ReproduceArgs) -> Result<(), CliError> {
    let p = preset(&a.name).ok_or_else(|| {
        let names: Vec<&str> = preset_names().map(|(n, _)| n).collect();
        CliError::Usage(format!("unknown configuration `{}` (known: {})", a.name, names.join(", ")))
    })?;
    println!("# {}: {}", p.name, p.description);
    for cfg in &p.experiments {
        let echo = match &p.sweep {
            Some((costs, window)) => EchoFile { costs: Some(costs.clone()), sweep_window: Some(*window), ..EchoFile::new(cfg) },
            None => EchoFile::new(cfg),
        };
        println!("# --- {}\n{}", cfg.file_stem(), echo.to_toml());
    }
    if a.dry_run {
        return Ok(());
    }
    for cfg in &p.experiments {
        match &p.sweep {
            Some((costs, window)) => execute_sweep(cfg, costs, *window, &a.output)?,
            None => execute(cfg, &a.output)?,
        }
    }
    Ok(())
}

fn execute(cfg: &ExperimentConfig, out: &OutputArgs) -> Result<(), CliError> {
    let records = run_experiment(cfg, out.jobs)?;
    let paths = write_experiment(&out.out, cfg, &records)?;
    let s = final_summary(&records, cfg.final_window)?;
    let mut line = format!(
        "{}: final {} mean SR {:.4} M {:.4} steps {:.2}",
        cfg.file_stem(),
        cfg.final_window,
        s.scalarized_return,
        s.measurements,
        s.steps
    );
    if let Some(q) = s.query_rate {
        line.push_str(&format!(" query rate {q:.4}"));
    }
    println!("{line}");
    print_paths(&paths);
    Ok(())
}

fn execute_sweep(cfg: &ExperimentConfig, costs: &[f64], window: usize, out: &OutputArgs) -> Result<(), CliError> {
    let rows = cost_sweep(cfg, costs, window, out.jobs)?;
    for row in &rows {
        let s = &row.summary;
        println!("{}: cost {} SR {:.4} M {:.4} steps {:.2}", cfg.file_stem(), row.cost, s.scalarized_return, s.measurements, s.steps);
    }
    let paths = write_sweep(&out.out, cfg, costs, window, &rows)?;
    print_paths(&paths);
    Ok(())
}

fn print_paths(paths: &[impl AsRef<Path>]) {
    for p in paths {
        println!("wrote {}", p.as_ref().display());
    }
}
