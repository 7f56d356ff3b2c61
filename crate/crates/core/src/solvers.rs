//! Two-block ADMM solvers for every formulation.
//!
//! Each program is written as `min f(X) + g(Z)  s.t.  X = Z` in scaled form:
//!
//! ```text
//! X ← prox_{f/β}(Z − U)
//! Z ← prox_{g/β}(X + U)
//! U ← U + X − Z
//! ```
//!
//! | formulation       | f                        | g                                           |
//! |-------------------|--------------------------|---------------------------------------------|
//! | nnm-exact         | ‖X‖_*                    | indicator of P_Ω(Z) = P_Ω(M)                |
//! | nnm-reg           | ‖X‖_*                    | indicator + α‖P_Ωᶜ(Z)‖_1                    |
//! | nnm-noisy         | ρ‖X‖_*                   | ‖P_Ω(M − Z)‖_F                              |
//! | nnm-noisy-reg     | ρ‖X‖_*                   | ‖P_Ω(M − Z)‖_F + α‖P_Ωᶜ(Z)‖_1               |
//! | rpca-restricted   | ‖X‖_*                    | α‖D − Z‖_1 with D = P_Ω(M), S = D − Z       |
//!
//! Every g is separable over Ω and Ωᶜ, so its prox is the composition of the
//! closed-form pieces in [`crate::prox`].

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{numerical_rank, DenseMatrix, Svd};
use crate::problem::{
    CompletionProblem, Formulation, Residuals, Solution, SolveResult, SolveStatus, SolverConfig,
};
use crate::prox::{
    enforce_observed_in_place, prox_obs_fit_in_place, shrink, soft_threshold_in_place, svt_raw,
};

/// Relative cutoff for `SolveResult::rank_estimate`.
pub const RANK_ESTIMATE_CUTOFF: f64 = 1e-6;

const BALANCE_RATIO: f64 = 10.0;
const BALANCE_FACTOR: f64 = 2.0;

struct AdmmOutcome {
    x: DMatrix<f64>,
    z: DMatrix<f64>,
    iterations: usize,
    last: Residuals,
    status: SolveStatus,
    history: Vec<Residuals>,
}

/// Scaled-form ADMM on `X = Z`. `prox_f` / `prox_g` receive the point and
/// the step `1/β` and overwrite the point with the prox.
fn admm(
    init: &DMatrix<f64>,
    cfg: &SolverConfig,
    mut prox_f: impl FnMut(&mut DMatrix<f64>, f64) -> Result<()>,
    mut prox_g: impl FnMut(&mut DMatrix<f64>, f64),
) -> AdmmOutcome {
    let scale = ((init.nrows() * init.ncols()) as f64).sqrt();
    let mut beta = cfg.admm_penalty;
    let mut x = init.clone();
    let mut z = init.clone();
    let mut u = DMatrix::<f64>::zeros(init.nrows(), init.ncols());
    let mut history = Vec::with_capacity(cfg.max_iters.min(10_000));
    let mut last = Residuals {
        primal: f64::INFINITY,
        dual: f64::INFINITY,
    };

    for iter in 1..=cfg.max_iters {
        let mut x_next = &z - &u;
        if let Err(e) = prox_f(&mut x_next, 1.0 / beta) {
            log::warn!("ADMM aborted at iteration {iter}: {e}");
            return AdmmOutcome {
                x,
                z,
                iterations: iter - 1,
                last,
                status: SolveStatus::NumericalFailure,
                history,
            };
        }
        x = x_next;

        let mut z_next = &x + &u;
        prox_g(&mut z_next, 1.0 / beta);
        let dual = beta * (&z_next - &z).norm() / scale;
        z = z_next;

        let diff = &x - &z;
        u += &diff;
        let primal = diff.norm() / scale;
        last = Residuals { primal, dual };
        history.push(last);

        if !(primal.is_finite() && dual.is_finite()) {
            return AdmmOutcome {
                x,
                z,
                iterations: iter,
                last,
                status: SolveStatus::NumericalFailure,
                history,
            };
        }
        if primal <= cfg.primal_tol && dual <= cfg.dual_tol {
            return AdmmOutcome {
                x,
                z,
                iterations: iter,
                last,
                status: SolveStatus::Converged,
                history,
            };
        }

        // residual balancing; the scaled dual U = Y/β is rescaled with β
        if iter <= cfg.adapt_iters {
            if primal > BALANCE_RATIO * dual {
                beta *= BALANCE_FACTOR;
                u /= BALANCE_FACTOR;
            } else if dual > BALANCE_RATIO * primal {
                beta /= BALANCE_FACTOR;
                u *= BALANCE_FACTOR;
            }
        }
    }

    AdmmOutcome {
        x,
        z,
        iterations: cfg.max_iters,
        last,
        status: SolveStatus::MaxIters,
        history,
    }
}

fn finish(p: &CompletionProblem, completed: DMatrix<f64>, out: &AdmmOutcome) -> Result<SolveResult> {
    let completed = DenseMatrix::from_nalgebra(completed)?;
    let sigma = Svd::compute(completed.as_nalgebra().clone(), false)?.sigma;
    Ok(SolveResult {
        objective: p.objective(&completed)?,
        rank_estimate: numerical_rank(&sigma, RANK_ESTIMATE_CUTOFF),
        completed,
        iterations: out.iterations,
        primal_residual: out.last.primal,
        dual_residual: out.last.dual,
        status: out.status,
        history: out.history.clone(),
    })
}

fn expect_formulation(p: &CompletionProblem, expected: Formulation) -> Result<()> {
    if p.formulation() != expected {
        return Err(Error::invalid(format!(
            "problem formulation is {}, solver expects {expected}",
            p.formulation()
        )));
    }
    Ok(())
}

fn nuclear_prox(weight: f64) -> impl FnMut(&mut DMatrix<f64>, f64) -> Result<()> {
    move |v, step| {
        let (out, _) = svt_raw(std::mem::take(v), weight * step)?;
        *v = out;
        Ok(())
    }
}

/// Standard nuclear norm minimization with exact observations.
pub fn solve_nnm_exact(p: &CompletionProblem, cfg: &SolverConfig) -> Result<SolveResult> {
    expect_formulation(p, Formulation::NnmExact)?;
    cfg.validate()?;
    let obs = p.observed().as_nalgebra();
    let mask = p.mask();
    let out = admm(obs, cfg, nuclear_prox(1.0), |v, _| {
        enforce_observed_in_place(v, obs, mask)
    });
    finish(p, out.z.clone(), &out)
}

/// Nuclear norm plus entrywise L1 on the unobserved entries, exact
/// observations.
pub fn solve_nnm_reg(p: &CompletionProblem, cfg: &SolverConfig) -> Result<SolveResult> {
    expect_formulation(p, Formulation::NnmReg)?;
    cfg.validate()?;
    let obs = p.observed().as_nalgebra();
    let mask = p.mask();
    let unobserved = mask.complement();
    let alpha = p.alpha();
    let out = admm(obs, cfg, nuclear_prox(1.0), |v, step| {
        // disjoint supports: the two pieces commute
        soft_threshold_in_place(v, alpha * step, &unobserved);
        enforce_observed_in_place(v, obs, mask);
    });
    finish(p, out.z.clone(), &out)
}

/// Unsquared Frobenius data fit plus `ρ‖A‖_*`.
pub fn solve_nnm_noisy(p: &CompletionProblem, cfg: &SolverConfig) -> Result<SolveResult> {
    expect_formulation(p, Formulation::NnmNoisy)?;
    cfg.validate()?;
    let obs = p.observed().as_nalgebra();
    let mask = p.mask();
    let out = admm(obs, cfg, nuclear_prox(p.rho()), |v, step| {
        prox_obs_fit_in_place(v, obs, mask, step)
    });
    finish(p, out.x.clone(), &out)
}

/// Noisy data fit, `ρ‖A‖_*` and α-L1 on the unobserved entries.
pub fn solve_nnm_noisy_reg(p: &CompletionProblem, cfg: &SolverConfig) -> Result<SolveResult> {
    expect_formulation(p, Formulation::NnmNoisyReg)?;
    cfg.validate()?;
    let obs = p.observed().as_nalgebra();
    let mask = p.mask();
    let unobserved = mask.complement();
    let alpha = p.alpha();
    let out = admm(obs, cfg, nuclear_prox(p.rho()), |v, step| {
        prox_obs_fit_in_place(v, obs, mask, step);
        soft_threshold_in_place(v, alpha * step, &unobserved);
    });
    finish(p, out.x.clone(), &out)
}

/// Low-rank plus sparse split of the zero-filled observations. Returns the
/// low-rank part as the solve result and the sparse part separately.
pub fn solve_rpca_restricted(
    p: &CompletionProblem,
    cfg: &SolverConfig,
) -> Result<(SolveResult, DenseMatrix)> {
    expect_formulation(p, Formulation::RpcaRestricted)?;
    cfg.validate()?;
    let d = p.observed().as_nalgebra();
    let alpha = p.alpha();
    // Z = D − S, so prox of α‖D − Z‖_1 is D − shrink(D − V)
    let out = admm(d, cfg, nuclear_prox(1.0), |v, step| {
        v.zip_apply(d, |vz, dz| *vz = dz - shrink(dz - *vz, alpha * step));
    });
    let sparse = DenseMatrix::from_nalgebra(d - &out.z)?;
    let mut result = finish(p, out.x.clone(), &out)?;
    result.objective = p.rpca_objective(&result.completed, &sparse)?;
    Ok((result, sparse))
}

/// Dispatches on the problem's formulation.
pub fn solve(p: &CompletionProblem, cfg: &SolverConfig) -> Result<Solution> {
    let (result, sparse) = match p.formulation() {
        Formulation::NnmExact => (solve_nnm_exact(p, cfg)?, None),
        Formulation::NnmReg => (solve_nnm_reg(p, cfg)?, None),
        Formulation::NnmNoisy => (solve_nnm_noisy(p, cfg)?, None),
        Formulation::NnmNoisyReg => (solve_nnm_noisy_reg(p, cfg)?, None),
        Formulation::RpcaRestricted => {
            let (r, s) = solve_rpca_restricted(p, cfg)?;
            (r, Some(s))
        }
    };
    Ok(Solution { result, sparse })
}
