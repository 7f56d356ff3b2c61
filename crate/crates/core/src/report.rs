//! Benchmark execution and output files.
//!
//! A run writes a long-form results CSV (one row per trial, failed trials
//! included), two heatmap CSVs of per-cell means with the zero-entry rate down
//! the rows and the nonzero-entry rate across the columns, and a JSON manifest.
//! Everything except the manifest's wall time is a pure function of the config.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::{BenchmarkConfig, GroundTruth, OutputNames};
use crate::error::{Error, Result};
use crate::harness::{run_grid, run_real_matrix, CellSummary, ExperimentGrid, GridReport, MatrixSweep, TrialOutcome};
use crate::io::{format_f64, ingest_matrix_csv, EmptyCellPolicy};
use crate::metrics::ErrorRatio;
use crate::problem::SolverConfig;
use crate::synth::GeneratorSpec;

const FIXED_COLUMNS: [&str; 14] = [
    "rate_zero",
    "rate_nonzero",
    "trial",
    "outcome",
    "alpha_used",
    "err_reg",
    "err_nnm",
    "ratio",
    "status_reg",
    "status_nnm",
    "observed",
    "rho",
    "attempt",
    "error",
];

fn ratio_text(r: ErrorRatio) -> String {
    match r {
        ErrorRatio::Value(v) => format_f64(v),
        other => other.to_string(),
    }
}

fn write_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Long-form table: the fixed columns, then the error for each α in grid
/// order (`err_alpha=<α>`).
pub fn results_csv(report: &GridReport, alphas: &[f64]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(alphas.iter().map(|a| format!("err_alpha={}", format_f64(*a))));
    w.write_record(&header).map_err(write_err)?;

    for outcome in &report.outcomes {
        let cell = outcome.cell();
        let mut row = vec![format_f64(cell.rate_zero), format_f64(cell.rate_nonzero)];
        match outcome {
            TrialOutcome::Completed(r) => {
                row.extend([
                    r.trial_index.to_string(),
                    "ok".into(),
                    format_f64(r.alpha_used),
                    format_f64(r.err_reg),
                    format_f64(r.err_nnm),
                    ratio_text(r.ratio),
                    r.status_reg.name().into(),
                    r.status_nnm.name().into(),
                    r.observed.to_string(),
                    r.rho.map(format_f64).unwrap_or_default(),
                    r.attempt.to_string(),
                    String::new(),
                ]);
                row.extend(r.alpha_errors.iter().map(|a| format_f64(a.err)));
            }
            TrialOutcome::Failed {
                trial_index, error, ..
            } => {
                row.push(trial_index.to_string());
                row.push("failed".into());
                row.extend(std::iter::repeat_n(String::new(), 9));
                row.push(error.clone());
                row.extend(std::iter::repeat_n(String::new(), alphas.len()));
            }
        }
        w.write_record(&row).map_err(write_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Matrix-form table of one per-cell statistic. The corner cell is
/// `rate_zero\rate_nonzero`; cells without a value are left empty.
pub fn heatmap_csv(report: &GridReport, stat: impl Fn(&CellSummary) -> Option<f64>) -> String {
    let mut out = String::from("rate_zero\\rate_nonzero");
    for r in &report.nonzero_rates {
        out.push(',');
        out.push_str(&format_f64(*r));
    }
    out.push('\n');
    for (z, row) in report.zero_rates.iter().zip(report.table(stat)) {
        out.push_str(&format_f64(*z));
        for v in row {
            out.push(',');
            if let Some(v) = v {
                out.push_str(&format_f64(v));
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum TruthManifest {
    Synthetic {
        n1: usize,
        n2: usize,
        rank: usize,
        density_left: f64,
        density_right: f64,
    },
    Matrix {
        path: PathBuf,
        rows: usize,
        cols: usize,
        row_subsample: Option<usize>,
    },
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    truth: TruthManifest,
    base_seed: u64,
    zero_rates: &'a [f64],
    nonzero_rates: &'a [f64],
    alphas: &'a [f64],
    trials: usize,
    noise_sigma: f64,
    solver: &'a SolverConfig,
    threads: usize,
    rows_written: usize,
    failed_trials: usize,
    wall_time_seconds: f64,
    files: &'a OutputNames,
}

#[derive(Debug)]
pub struct BenchmarkOutput {
    pub report: GridReport,
    pub results_path: PathBuf,
    pub heatmap_ratio_path: PathBuf,
    pub heatmap_alpha_path: PathBuf,
    pub manifest_path: PathBuf,
}

/// Runs the configured sweep and writes its files into `out_dir`, creating
/// it if needed.
pub fn run_benchmark(config: &BenchmarkConfig, out_dir: &Path) -> Result<BenchmarkOutput> {
    let start = Instant::now();
    let params = &config.params;
    let (report, truth) = match &config.truth {
        GroundTruth::Synthetic(spec) => {
            let grid = ExperimentGrid {
                params: params.clone(),
                generator: spec.clone(),
            };
            let GeneratorSpec {
                n1,
                n2,
                rank,
                density_left,
                density_right,
                ..
            } = *spec;
            let truth = TruthManifest::Synthetic {
                n1,
                n2,
                rank,
                density_left,
                density_right,
            };
            (run_grid(&grid)?, truth)
        }
        GroundTruth::Matrix { path, row_subsample } => {
            let (m, _) = ingest_matrix_csv(path, EmptyCellPolicy::Strict)?;
            let sweep = MatrixSweep {
                params: params.clone(),
                row_subsample: *row_subsample,
            };
            let truth = TruthManifest::Matrix {
                path: path.clone(),
                rows: m.rows(),
                cols: m.cols(),
                row_subsample: *row_subsample,
            };
            (run_real_matrix(&m, &sweep)?, truth)
        }
    };

    std::fs::create_dir_all(out_dir)?;
    let names = &config.output;
    let results_path = out_dir.join(&names.results);
    let heatmap_ratio_path = out_dir.join(&names.heatmap_ratio);
    let heatmap_alpha_path = out_dir.join(&names.heatmap_alpha);
    let manifest_path = out_dir.join(&names.manifest);

    std::fs::write(&results_path, results_csv(&report, &params.alphas)?)?;
    std::fs::write(&heatmap_ratio_path, heatmap_csv(&report, |s| s.mean_ratio))?;
    std::fs::write(&heatmap_alpha_path, heatmap_csv(&report, |s| s.mean_alpha))?;

    let failed = report.outcomes.iter().filter(|o| o.record().is_none()).count();
    if failed > 0 {
        log::warn!("{failed} of {} trials failed; see the error column", report.outcomes.len());
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        truth,
        base_seed: params.base_seed,
        zero_rates: &params.zero_rates,
        nonzero_rates: &params.nonzero_rates,
        alphas: &params.alphas,
        trials: params.trials,
        noise_sigma: params.noise_sigma,
        solver: &params.solver,
        threads: rayon::current_num_threads(),
        rows_written: report.outcomes.len(),
        failed_trials: failed,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        files: names,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.into()))?;
    std::fs::write(&manifest_path, json + "\n")?;

    Ok(BenchmarkOutput {
        report,
        results_path,
        heatmap_ratio_path,
        heatmap_alpha_path,
        manifest_path,
    })
}
