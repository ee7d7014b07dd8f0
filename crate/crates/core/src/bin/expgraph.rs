use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use expanding_graph::experiment::config::Mode;
use expanding_graph::experiment::runner::{run_experiment, AGGREGATE_FILE};
use expanding_graph::experiment::verify::{
    bound_from_run, check_arrival_bound, check_contraction, check_regret_bound, TrackingSetup,
};
use expanding_graph::experiment::{read_aggregate, ExperimentConfig};
use expanding_graph::metrics::{median, Metric};
use expanding_graph::{Error, Result};

#[derive(Parser)]
#[command(name = "expgraph", version, about = "Online topology learning for expanding graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for result files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Replaces the base seed of the configuration.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a synthetic experiment.
    Synth,
    /// Run the estimators on a recorded CSV stream.
    RunCsv,
    /// Check the contraction, regret and arrival bounds on small instances.
    Verify,
    /// Report the regret bound against the measured regret of a finished run.
    Bound,
}

fn load_config(cli: &Cli, mode: Mode) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if cfg.mode != mode {
        return Err(Error::Config(format!("configuration mode is {:?}, expected {mode:?}", cfg.mode)));
    }
    if let Some(seed) = cli.seed_override {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> Result<PathBuf> {
    cli.out_dir
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.clone()))
        .ok_or_else(|| Error::Config("--out-dir is required (or `output` in the configuration)".into()))
}

fn run(cli: &Cli, mode: Mode) -> Result<()> {
    let cfg = load_config(cli, mode)?;
    let dir = out_dir(cli, Some(&cfg))?;
    let summary = run_experiment(&cfg, &dir, cli.threads)?;
    print_summary(&dir)?;
    if let Some((i, e)) = summary.failures.into_iter().next() {
        eprintln!("realization {i} failed");
        return Err(e);
    }
    Ok(())
}

fn print_summary(dir: &Path) -> Result<()> {
    let rows = read_aggregate(std::fs::File::open(dir.join(AGGREGATE_FILE))?)?;
    let mut labels: Vec<&str> = Vec::new();
    for r in &rows {
        if !labels.contains(&r.estimator.as_str()) {
            labels.push(&r.estimator);
        }
    }
    let t_max = rows.iter().map(|r| r.t).max().unwrap_or(0);
    let from = t_max.saturating_sub(99);
    println!("trailing medians over t >= {from}:");
    for label in labels {
        let tail = |m: Metric| {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.estimator == label && r.metric == m && r.t >= from)
                .map(|r| r.median)
                .collect();
            if v.is_empty() {
                "-".to_string()
            } else {
                format!("{:.4e}", median(&v))
            }
        };
        println!(
            "  {label:<16} nerr_truth {:>11}  nerr_offline {:>11}  wall_ms {:>11}",
            tail(Metric::NerrTruth),
            tail(Metric::NerrOffline),
            tail(Metric::WallMs)
        );
    }
    println!("results in {}", dir.display());
    Ok(())
}

fn verify(cli: &Cli) -> Result<bool> {
    let base = cli.seed_override.unwrap_or(0);
    let mut ok = true;

    let setup = TrackingSetup::contraction_default();
    let seeds: Vec<u64> = (0..20).map(|k| base + k).collect();
    let c = check_contraction(&setup, &seeds, 1e-8)?;
    let pass = c.fraction() >= 0.99;
    ok &= pass;
    println!(
        "{} contraction: {}/{} steps within rho = {:.6} (worst ratio {:.6})",
        verdict(pass),
        c.satisfied,
        c.checked,
        c.rho,
        c.worst_ratio
    );

    let setup = TrackingSetup::regret_default();
    for k in 0..10 {
        let r = check_regret_bound(&setup, base + k)?;
        ok &= r.holds();
        println!(
            "{} regret seed {}: measured {:.4} <= K1 {:.4} + K2 {:.4} * path {:.4} = {:.4}",
            verdict(r.holds()),
            r.seed,
            r.measured,
            r.bound.k1,
            r.bound.k2,
            r.bound.path_length,
            r.bound.bound
        );
    }

    let events = check_arrival_bound(50, base)?;
    let held = events.iter().filter(|e| e.drift <= e.bound).count();
    ok &= held == events.len();
    println!("{} arrival drift bound: {held}/{} events", verdict(held == events.len()), events.len());
    Ok(ok)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn bound(cli: &Cli) -> Result<()> {
    let dir = out_dir(cli, None)?;
    for b in bound_from_run(&dir)? {
        println!(
            "realization {} {}: rho {:.6} K1 {:.4} K2 {:.4} path {:.4} bound {:.4} measured {:.4} {}",
            b.realization,
            b.estimator,
            b.bound.rho,
            b.bound.k1,
            b.bound.k2,
            b.bound.path_length,
            b.bound.bound,
            b.measured,
            if b.measured <= b.bound.bound { "within" } else { "exceeded" }
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match cli.command {
        Command::Synth => run(&cli, Mode::Synth),
        Command::RunCsv => run(&cli, Mode::Csv),
        Command::Bound => bound(&cli),
        Command::Verify => match verify(&cli) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(3),
            Err(e) => Err(e),
        },
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
