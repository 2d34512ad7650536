//! Sweep execution and CSV artifacts.
//!
//! Layout under the output directory:
//!
//! ```text
//! summary.csv
//! runs/<scheduler>_ues<n>_seed<k>/cdf_<class>_<n>.csv
//! runs/<scheduler>_ues<n>_seed<k>/qtable_qci<id>.csv     (mdp-ql only)
//! runs/<scheduler>_ues<n>_seed<k>/channel_trace.csv      (when requested)
//! ```
//!
//! Files are written to a temporary name and renamed into place. If any run
//! fails, `FAILED` lists the failing cells and `summary.csv` holds only the
//! runs that completed.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::ExperimentSpec;
use crate::engine::{run, RunConfig};
use crate::error::{Error, Result};
use crate::metrics::{cdf_csv, summary_rows, RunMetrics, SUMMARY_HEADER};
use crate::sched::SchedulerKind;
use crate::traffic::TrafficClass;

/// Outcome of one sweep cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub scheduler: SchedulerKind,
    pub ues: usize,
    pub seed: u64,
    pub metrics: RunMetrics,
    pub dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub cells: Vec<CellResult>,
    pub summary_path: PathBuf,
}

pub fn cell_name(cfg: &RunConfig) -> String {
    format!("{}_ues{}_seed{}", cfg.scheduler, cfg.num_ues, cfg.seed)
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn run_cell(cfg: &RunConfig, runs_dir: &Path) -> Result<CellResult> {
    let out = run(cfg)?;
    let dir = runs_dir.join(cell_name(cfg));
    fs::create_dir_all(&dir)?;
    for class in TrafficClass::ALL {
        if let Some(table) = out.metrics.throughput_cdf(class) {
            write_atomic(
                &dir.join(format!("cdf_{}_{}.csv", class, cfg.num_ues)),
                &cdf_csv(&table),
            )?;
        }
    }
    for (qci, table) in &out.qtables {
        write_atomic(&dir.join(format!("qtable_qci{qci}.csv")), &table.to_csv())?;
    }
    if let Some(trace) = &out.channel_trace {
        write_atomic(&dir.join("channel_trace.csv"), trace)?;
    }
    Ok(CellResult {
        scheduler: cfg.scheduler,
        ues: cfg.num_ues,
        seed: cfg.seed,
        metrics: out.metrics,
        dir,
    })
}

/// Run every cell of `spec` and write the artifacts. `progress` is called
/// before each cell with (index, total, cell name).
pub fn run_experiment_with<F: FnMut(usize, usize, &str)>(
    spec: &ExperimentSpec,
    mut progress: F,
) -> Result<ExperimentReport> {
    spec.validate()?;
    let runs_dir = spec.out_dir.join("runs");
    fs::create_dir_all(&runs_dir)?;
    let failed_marker = spec.out_dir.join("FAILED");
    if failed_marker.exists() {
        fs::remove_file(&failed_marker)?;
    }

    let cells = spec.cells();
    let mut results = Vec::with_capacity(cells.len());
    let mut failures = Vec::new();
    for (i, cfg) in cells.iter().enumerate() {
        progress(i, cells.len(), &cell_name(cfg));
        match run_cell(cfg, &runs_dir) {
            Ok(r) => results.push(r),
            Err(e) => failures.push(format!("{}: {e}", cell_name(cfg))),
        }
    }

    let mut summary = format!("{SUMMARY_HEADER}\n");
    for r in &results {
        summary.push_str(&summary_rows(r.scheduler.token(), r.seed, &r.metrics));
    }
    let summary_path = spec.out_dir.join("summary.csv");
    write_atomic(&summary_path, &summary)?;

    if !failures.is_empty() {
        write_atomic(&failed_marker, &(failures.join("\n") + "\n"))?;
        return Err(Error::Io(format!(
            "{} of {} runs failed: {}",
            failures.len(),
            cells.len(),
            failures.join("; ")
        )));
    }
    Ok(ExperimentReport {
        cells: results,
        summary_path,
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    run_experiment_with(spec, |_, _, _| {})
}
