use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;

use mdpql::config::{parse_config, serialize_config, ExperimentSpec};
use mdpql::experiment::run_experiment_with;
use mdpql::sched::SchedulerKind;

/// Run LTE-A downlink scheduling experiments (rr, pf, fls, mdp-ql) and write
/// plot-ready CSV files.
#[derive(Debug, Parser)]
#[command(name = "mdpql", version)]
struct Args {
    /// Config file of `key = value` lines; defaults apply for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Seed list, e.g. `1,2,3`.
    #[arg(long, value_delimiter = ',')]
    seed: Option<Vec<u64>>,

    /// UE count list, e.g. `10,40,80,120`.
    #[arg(long, value_delimiter = ',')]
    ues: Option<Vec<usize>>,

    /// Scheduler list from `rr`, `pf`, `fls`, `mdp-ql`.
    #[arg(long, value_delimiter = ',')]
    scheduler: Option<Vec<String>>,

    /// Simulated seconds per run.
    #[arg(long)]
    duration: Option<f64>,

    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,

    /// Suppress per-run progress lines.
    #[arg(long, short)]
    quiet: bool,
}

fn resolve(args: &Args) -> Result<ExperimentSpec> {
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => String::new(),
    };
    let mut spec = parse_config(&text).context("invalid config")?;
    if let Some(out) = &args.out {
        spec.out_dir = out.clone();
    }
    if let Some(seeds) = &args.seed {
        spec.seeds = seeds.clone();
    }
    if let Some(ues) = &args.ues {
        spec.ues = ues.clone();
    }
    if let Some(s) = &args.scheduler {
        spec.schedulers = s
            .iter()
            .map(|t| t.parse::<SchedulerKind>())
            .collect::<mdpql::Result<_>>()?;
    }
    if let Some(d) = args.duration {
        let ms = d * 1000.0;
        anyhow::ensure!(
            ms > 0.0 && (ms - ms.round()).abs() < 1e-6,
            "--duration must be a positive whole number of milliseconds"
        );
        spec.base.duration_ms = ms.round() as u64;
    }
    // flags go through the same validation as config keys
    let spec = parse_config(&serialize_config(&spec)).context("invalid flag value")?;
    Ok(spec)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let spec = match resolve(&args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if args.print_config {
        print!("{}", serialize_config(&spec));
        return ExitCode::SUCCESS;
    }
    let started = Instant::now();
    let quiet = args.quiet;
    let result = run_experiment_with(&spec, |i, n, name| {
        if !quiet {
            eprintln!(
                "[{}/{}] {name} ({:.1?} elapsed)",
                i + 1,
                n,
                started.elapsed()
            );
        }
    });
    match result {
        Ok(report) => {
            if !quiet {
                eprintln!(
                    "{} runs done in {:.1?}; summary at {}",
                    report.cells.len(),
                    started.elapsed(),
                    report.summary_path.display()
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
