//! Sampling-rate sweeps comparing regularized completion against the plain
//! nuclear norm baseline.
//!
//! For every (rate_zero, rate_nonzero) cell and trial: draw a ground truth,
//! subsample its zero and nonzero entries at the cell's rates, optionally add
//! noise, solve the baseline once and the regularized program once per α,
//! then keep the α with the smallest error against the ground truth. The α
//! choice uses the ground truth, as an oracle tuning rule rather than a
//! deployable selection method.
//!
//! Seeds for every draw are derived from `base_seed`, the cell's rate values,
//! the trial index, the redraw attempt and a purpose tag, so adding cells
//! never perturbs the draws of existing ones.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{frobenius_norm, DenseMatrix};
use crate::metrics::ErrorRatio;
use crate::problem::{CompletionProblem, SolveStatus, SolverConfig};
use crate::solvers::solve;
use crate::synth::{
    add_noise, derive_seed, generate_low_rank, rng_from_seed, rho_for_noise, sample_structured_mask,
    GeneratorSpec, Purpose, SamplingSpec,
};

/// Redraws allowed after a degenerate ground truth or empty mask.
pub const MAX_REDRAWS: usize = 8;

/// The α grid used throughout the reference experiments.
pub const DEFAULT_ALPHAS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// `0.0, 0.1, …, 1.0`.
pub fn default_rates() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub rate_zero: f64,
    pub rate_nonzero: f64,
}

impl Cell {
    pub fn new(rate_zero: f64, rate_nonzero: f64) -> Self {
        Self {
            rate_zero,
            rate_nonzero,
        }
    }

    fn seed(&self, base: u64, trial: usize, attempt: usize, purpose: Purpose) -> u64 {
        derive_seed(
            base,
            &[
                self.rate_zero.to_bits(),
                self.rate_nonzero.to_bits(),
                trial as u64,
                attempt as u64,
                purpose as u64,
            ],
        )
    }
}

/// Parameters shared by synthetic and fixed-matrix sweeps.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepParams {
    pub zero_rates: Vec<f64>,
    pub nonzero_rates: Vec<f64>,
    pub alphas: Vec<f64>,
    pub trials: usize,
    /// 0 selects the noiseless experiment.
    pub noise_sigma: f64,
    pub base_seed: u64,
    pub solver: SolverConfig,
}

impl SweepParams {
    pub fn validate(&self) -> Result<()> {
        if self.zero_rates.is_empty() || self.nonzero_rates.is_empty() || self.alphas.is_empty() {
            return Err(Error::invalid("rate and alpha lists must be nonempty"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if let Some(r) = self
            .zero_rates
            .iter()
            .chain(&self.nonzero_rates)
            .find(|r| !(0.0..=1.0).contains(*r))
        {
            return Err(Error::invalid(format!("sampling rate {r} outside [0, 1]")));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::invalid(format!("alpha {a} must be positive")));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma must be nonnegative"));
        }
        self.solver.validate()
    }

    pub fn cells(&self) -> Vec<Cell> {
        self.zero_rates
            .iter()
            .flat_map(|&z| self.nonzero_rates.iter().map(move |&n| Cell::new(z, n)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentGrid {
    pub params: SweepParams,
    /// The generator's own `seed` field is ignored; per-trial seeds are derived.
    pub generator: GeneratorSpec,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.generator.validate()
    }
}

/// Fixed ground-truth sweep, optionally on a random row subset per trial.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSweep {
    pub params: SweepParams,
    pub row_subsample: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaError {
    pub alpha: f64,
    pub err: f64,
    pub status: SolveStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub cell: Cell,
    pub trial_index: usize,
    pub alpha_used: f64,
    pub ratio: ErrorRatio,
    pub err_reg: f64,
    pub err_nnm: f64,
    pub status_reg: SolveStatus,
    pub status_nnm: SolveStatus,
    pub observed: usize,
    /// Set for noisy sweeps.
    pub rho: Option<f64>,
    /// Redraw attempt that produced a usable instance (0 = first draw).
    pub attempt: usize,
    /// Every α tried, in grid order.
    pub alpha_errors: Vec<AlphaError>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrialOutcome {
    Completed(TrialRecord),
    Failed {
        cell: Cell,
        trial_index: usize,
        error: String,
    },
}

impl TrialOutcome {
    pub fn cell(&self) -> Cell {
        match self {
            TrialOutcome::Completed(r) => r.cell,
            TrialOutcome::Failed { cell, .. } => *cell,
        }
    }

    pub fn record(&self) -> Option<&TrialRecord> {
        match self {
            TrialOutcome::Completed(r) => Some(r),
            TrialOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell: Cell,
    /// Mean over trials with a finite ratio.
    pub mean_ratio: Option<f64>,
    pub mean_alpha: Option<f64>,
    pub ratio_trials: usize,
    pub both_exact: usize,
    pub infinite: usize,
    pub failed: usize,
}

#[derive(Clone, Debug)]
pub struct GridReport {
    pub zero_rates: Vec<f64>,
    pub nonzero_rates: Vec<f64>,
    /// Cell-major (zero rate outer, nonzero rate inner), trials in order.
    pub outcomes: Vec<TrialOutcome>,
    /// One entry per cell, same order as `outcomes`.
    pub summaries: Vec<CellSummary>,
}

impl GridReport {
    pub fn summary(&self, cell: Cell) -> Option<&CellSummary> {
        self.summaries.iter().find(|s| s.cell == cell)
    }

    /// `[zero_rate][nonzero_rate]` table of a per-cell statistic.
    pub fn table(&self, stat: impl Fn(&CellSummary) -> Option<f64>) -> Vec<Vec<Option<f64>>> {
        let n = self.nonzero_rates.len();
        self.summaries
            .chunks(n)
            .map(|row| row.iter().map(&stat).collect())
            .collect()
    }

    /// First failed trial as an error carrying its cell coordinates.
    pub fn first_failure(&self) -> Option<Error> {
        self.outcomes.iter().find_map(|o| match o {
            TrialOutcome::Failed {
                cell,
                trial_index,
                error,
            } => Some(Error::Cell {
                rate_zero: cell.rate_zero,
                rate_nonzero: cell.rate_nonzero,
                source: Box::new(Error::invalid(format!("trial {trial_index}: {error}"))),
            }),
            TrialOutcome::Completed(_) => None,
        })
    }
}

fn summarize(cell: Cell, outcomes: &[TrialOutcome]) -> CellSummary {
    let records: Vec<&TrialRecord> = outcomes.iter().filter_map(TrialOutcome::record).collect();
    let finite: Vec<f64> = records
        .iter()
        .filter_map(|r| match r.ratio {
            ErrorRatio::Value(v) => Some(v),
            _ => None,
        })
        .collect();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let alphas: Vec<f64> = records.iter().map(|r| r.alpha_used).collect();
    CellSummary {
        cell,
        mean_ratio: mean(&finite),
        mean_alpha: mean(&alphas),
        ratio_trials: finite.len(),
        both_exact: records.iter().filter(|r| r.ratio == ErrorRatio::BothExact).count(),
        infinite: records.iter().filter(|r| r.ratio == ErrorRatio::Infinite).count(),
        failed: outcomes.len() - records.len(),
    }
}

/// Solves baseline and every regularized variant on a prepared instance.
fn evaluate(
    truth: &DenseMatrix,
    sampling: &SamplingSpec,
    noise_seed: u64,
    params: &SweepParams,
) -> Result<TrialRecord> {
    let mask = sample_structured_mask(truth, sampling)?;
    let (n1, n2) = truth.shape();
    let noisy = params.noise_sigma > 0.0;
    let observed = add_noise(truth, params.noise_sigma, &mask, noise_seed)?;
    let rho = if noisy {
        Some(rho_for_noise(n1, n2, mask.len(), params.noise_sigma)?)
    } else {
        None
    };

    let baseline = match rho {
        Some(rho) => CompletionProblem::noisy(&observed, mask.clone(), rho)?,
        None => CompletionProblem::exact(&observed, mask.clone())?,
    };
    let base = solve(&baseline, &params.solver)?.result;
    let err_nnm = frobenius_norm(&(&base.completed - truth));

    let mut alpha_errors = Vec::with_capacity(params.alphas.len());
    for &alpha in &params.alphas {
        let problem = match rho {
            Some(rho) => CompletionProblem::noisy_regularized(&observed, mask.clone(), rho, alpha)?,
            None => CompletionProblem::regularized(&observed, mask.clone(), alpha)?,
        };
        let r = solve(&problem, &params.solver)?.result;
        alpha_errors.push(AlphaError {
            alpha,
            err: frobenius_norm(&(&r.completed - truth)),
            status: r.status,
        });
    }
    // smallest error; ties go to the smaller α
    let best = alpha_errors
        .iter()
        .min_by(|a, b| a.err.total_cmp(&b.err).then(a.alpha.total_cmp(&b.alpha)))
        .map(|a| (a.alpha, a.err, a.status))
        .expect("alpha list is nonempty");
    let (alpha_used, err_reg, status_reg) = best;

    Ok(TrialRecord {
        cell: Cell::new(sampling.rate_zero, sampling.rate_nonzero),
        trial_index: 0,
        alpha_used,
        ratio: ErrorRatio::from_errors(err_reg, err_nnm),
        err_reg,
        err_nnm,
        status_reg,
        status_nnm: base.status,
        observed: mask.len(),
        rho,
        attempt: 0,
        alpha_errors,
    })
}

fn run_trial(
    params: &SweepParams,
    cell: Cell,
    trial: usize,
    draw_truth: &(dyn Fn(usize) -> Result<DenseMatrix> + Sync),
) -> Result<TrialRecord> {
    let mut last_reason = String::new();
    for attempt in 0..MAX_REDRAWS {
        let truth = draw_truth(attempt)?;
        if truth.is_zero() {
            last_reason = "ground truth is the zero matrix".into();
            log::info!(
                "cell ({}, {}) trial {trial}: zero ground truth on attempt {attempt}, redrawing",
                cell.rate_zero,
                cell.rate_nonzero
            );
            continue;
        }
        let sampling = SamplingSpec {
            rate_zero: cell.rate_zero,
            rate_nonzero: cell.rate_nonzero,
            seed: cell.seed(params.base_seed, trial, attempt, Purpose::Mask),
        };
        let noise_seed = cell.seed(params.base_seed, trial, attempt, Purpose::Noise);
        match evaluate(&truth, &sampling, noise_seed, params) {
            Ok(mut record) => {
                record.trial_index = trial;
                record.attempt = attempt;
                return Ok(record);
            }
            Err(Error::InvalidSampling(reason)) => {
                log::info!(
                    "cell ({}, {}) trial {trial}: {reason} on attempt {attempt}, redrawing",
                    cell.rate_zero,
                    cell.rate_nonzero
                );
                last_reason = reason;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::DegenerateDraw {
        attempts: MAX_REDRAWS,
        reason: last_reason,
    })
}

/// One synthetic trial of one cell.
pub fn run_cell(grid: &ExperimentGrid, cell: Cell, trial_index: usize) -> Result<TrialRecord> {
    grid.validate()?;
    run_trial(&grid.params, cell, trial_index, &|attempt| {
        synthetic_truth(grid, cell, trial_index, attempt)
    })
}

fn synthetic_truth(grid: &ExperimentGrid, cell: Cell, trial: usize, attempt: usize) -> Result<DenseMatrix> {
    let seed = cell.seed(grid.params.base_seed, trial, attempt, Purpose::Generator);
    generate_low_rank(&grid.generator.with_seed(seed))
}

fn run_sweep(
    params: &SweepParams,
    draw_truth: &(dyn Fn(Cell, usize, usize) -> Result<DenseMatrix> + Sync),
) -> GridReport {
    let cells = params.cells();
    let jobs: Vec<(Cell, usize)> = cells
        .iter()
        .flat_map(|&c| (0..params.trials).map(move |t| (c, t)))
        .collect();
    // collect preserves job order regardless of scheduling
    let outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(cell, trial)| {
            match run_trial(params, cell, trial, &|attempt| draw_truth(cell, trial, attempt)) {
                Ok(r) => TrialOutcome::Completed(r),
                Err(e) => TrialOutcome::Failed {
                    cell,
                    trial_index: trial,
                    error: e.to_string(),
                },
            }
        })
        .collect();
    let summaries = cells
        .iter()
        .zip(outcomes.chunks(params.trials))
        .map(|(&c, chunk)| summarize(c, chunk))
        .collect();
    GridReport {
        zero_rates: params.zero_rates.clone(),
        nonzero_rates: params.nonzero_rates.clone(),
        outcomes,
        summaries,
    }
}

/// Every cell × trial of a synthetic grid. Failed trials are kept in the
/// report rather than aborting the sweep.
pub fn run_grid(grid: &ExperimentGrid) -> Result<GridReport> {
    grid.validate()?;
    Ok(run_sweep(&grid.params, &|cell, trial, attempt| {
        synthetic_truth(grid, cell, trial, attempt)
    }))
}

/// Rows kept for a trial of a fixed-matrix sweep, in sampled order.
pub fn subsample_rows(n_rows: usize, keep: usize, base_seed: u64, trial: usize) -> Result<Vec<usize>> {
    if keep == 0 || keep > n_rows {
        return Err(Error::invalid(format!(
            "cannot subsample {keep} rows from {n_rows}"
        )));
    }
    let mut rng = rng_from_seed(derive_seed(base_seed, &[trial as u64, Purpose::RowSubset as u64]));
    let mut rows: Vec<usize> = (0..n_rows).collect();
    rows.shuffle(&mut rng);
    rows.truncate(keep);
    Ok(rows)
}

/// Same protocol as [`run_grid`] with a fixed ground truth. Row subsets
/// depend on the trial only, so every cell of a trial sees the same rows.
pub fn run_real_matrix(m: &DenseMatrix, sweep: &MatrixSweep) -> Result<GridReport> {
    sweep.params.validate()?;
    if m.is_zero() {
        return Err(Error::invalid("ground-truth matrix has no nonzero entries"));
    }
    if let Some(k) = sweep.row_subsample {
        subsample_rows(m.rows(), k, sweep.params.base_seed, 0)?;
    }
    let base_seed = sweep.params.base_seed;
    Ok(run_sweep(&sweep.params, &|_cell, trial, _attempt| match sweep.row_subsample {
        Some(k) => m.select_rows(&subsample_rows(m.rows(), k, base_seed, trial)?),
        None => Ok(m.clone()),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::GeneratorSpec;

    fn params(zero: Vec<f64>, nonzero: Vec<f64>, trials: usize) -> SweepParams {
        SweepParams {
            zero_rates: zero,
            nonzero_rates: nonzero,
            alphas: DEFAULT_ALPHAS.to_vec(),
            trials,
            noise_sigma: 0.0,
            base_seed: 17,
            solver: SolverConfig::default(),
        }
    }

    fn small_grid(zero: Vec<f64>, nonzero: Vec<f64>, trials: usize) -> ExperimentGrid {
        ExperimentGrid {
            params: params(zero, nonzero, trials),
            generator: GeneratorSpec::new(12, 12, 2, 0.3, 0.5, 0),
        }
    }

    #[test]
    fn fully_observed_cell_is_both_exact() {
        let grid = small_grid(vec![1.0], vec![1.0], 1);
        let r = run_cell(&grid, Cell::new(1.0, 1.0), 0).unwrap();
        assert_eq!(r.err_nnm, 0.0);
        assert_eq!(r.err_reg, 0.0);
        assert_eq!(r.ratio, ErrorRatio::BothExact);
    }

    #[test]
    fn zero_entries_unobserved_never_loses() {
        let mut grid = small_grid(vec![0.0], vec![1.0], 1);
        grid.params.solver = SolverConfig::default().with_tolerance(1e-9).with_max_iters(20_000);
        for trial in 0..3 {
            let r = run_cell(&grid, Cell::new(0.0, 1.0), trial).unwrap();
            if let Some(v) = r.ratio.value() {
                assert!(v <= 1.0 + 1e-6, "trial {trial}: ratio {v}");
            }
        }
    }

    #[test]
    fn cell_replay_is_bit_identical() {
        let grid = ExperimentGrid {
            params: params(vec![0.1], vec![0.9], 1),
            generator: GeneratorSpec::new(30, 30, 2, 0.3, 0.5, 0),
        };
        let a = run_cell(&grid, Cell::new(0.1, 0.9), 3).unwrap();
        let b = run_cell(&grid, Cell::new(0.1, 0.9), 3).unwrap();
        assert_eq!(a.err_reg.to_bits(), b.err_reg.to_bits());
        assert_eq!(a.err_nnm.to_bits(), b.err_nnm.to_bits());
        assert_eq!(a, b);
    }

    #[test]
    fn alpha_used_is_the_argmin() {
        let grid = small_grid(vec![0.2], vec![0.8], 2);
        let report = run_grid(&grid).unwrap();
        for o in &report.outcomes {
            let r = o.record().unwrap();
            let min = r.alpha_errors.iter().map(|a| a.err).fold(f64::INFINITY, f64::min);
            let chosen = r.alpha_errors.iter().find(|a| a.alpha == r.alpha_used).unwrap();
            assert_eq!(chosen.err, min);
            assert!(r
                .alpha_errors
                .iter()
                .filter(|a| a.err == min)
                .all(|a| a.alpha >= r.alpha_used));
        }
    }

    #[test]
    fn single_cell_grid_summary_equals_record() {
        let grid = small_grid(vec![0.3], vec![0.7], 1);
        let report = run_grid(&grid).unwrap();
        assert_eq!(report.outcomes.len(), 1);
        let r = report.outcomes[0].record().unwrap();
        let s = &report.summaries[0];
        assert_eq!(s.mean_alpha, Some(r.alpha_used));
        assert_eq!(s.mean_ratio, r.ratio.value().filter(|v| v.is_finite()));
    }

    #[test]
    fn table_shape_and_failed_cells() {
        let grid = small_grid(vec![0.0, 0.5], vec![0.0, 0.5, 1.0], 2);
        let report = run_grid(&grid).unwrap();
        assert_eq!(report.outcomes.len(), 12);
        let table = report.table(|s| s.mean_ratio);
        assert_eq!(table.len(), 2);
        assert!(table.iter().all(|row| row.len() == 3));
        // nothing can be observed at rates (0, 0)
        let dead = report.summary(Cell::new(0.0, 0.0)).unwrap();
        assert_eq!(dead.failed, 2);
        assert!(report.first_failure().is_some());
        let live = report.summary(Cell::new(0.5, 0.5)).unwrap();
        assert_eq!(live.failed, 0);
    }

    #[test]
    fn degenerate_generator_fails_after_redraws() {
        let mut grid = small_grid(vec![0.5], vec![0.5], 1);
        grid.generator.density_left = 0.0;
        let err = run_cell(&grid, Cell::new(0.5, 0.5), 0).unwrap_err();
        assert!(matches!(err, Error::DegenerateDraw { attempts: MAX_REDRAWS, .. }));
    }

    #[test]
    fn grid_is_deterministic_across_thread_counts() {
        let grid = small_grid(vec![0.2, 0.6], vec![0.5, 0.9], 2);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_grid(&grid).unwrap());
        let b = many.install(|| run_grid(&grid).unwrap());
        assert_eq!(a.outcomes, b.outcomes);
        assert_eq!(a.summaries, b.summaries);
    }

    #[test]
    fn real_matrix_sweep() {
        let m = DenseMatrix::from_fn(20, 6, |i, j| ((i * 7 + j * 3) % 5) as f64).unwrap();
        let full = MatrixSweep {
            params: params(vec![1.0], vec![1.0], 2),
            row_subsample: None,
        };
        let report = run_real_matrix(&m, &full).unwrap();
        for o in &report.outcomes {
            let r = o.record().unwrap();
            assert_eq!((r.err_nnm, r.err_reg), (0.0, 0.0));
        }

        assert!(run_real_matrix(&DenseMatrix::zeros(3, 3), &full).is_err());

        let a = subsample_rows(20, 8, 5, 1).unwrap();
        assert_eq!(a, subsample_rows(20, 8, 5, 1).unwrap());
        assert_ne!(a, subsample_rows(20, 8, 5, 2).unwrap());
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 8);
        assert!(subsample_rows(20, 21, 5, 1).is_err());

        let sub = MatrixSweep {
            params: params(vec![0.3], vec![0.8], 2),
            row_subsample: Some(8),
        };
        let r1 = run_real_matrix(&m, &sub).unwrap();
        let r2 = run_real_matrix(&m, &sub).unwrap();
        assert_eq!(r1.outcomes, r2.outcomes);
    }

    #[test]
    fn validation() {
        let mut g = small_grid(vec![], vec![0.5], 1);
        assert!(run_grid(&g).is_err());
        g = small_grid(vec![1.5], vec![0.5], 1);
        assert!(run_grid(&g).is_err());
        g = small_grid(vec![0.5], vec![0.5], 0);
        assert!(run_grid(&g).is_err());
        g = small_grid(vec![0.5], vec![0.5], 1);
        g.params.alphas = vec![0.0];
        assert!(run_grid(&g).is_err());
    }
}
