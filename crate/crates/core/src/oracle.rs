//! Brute-force reference minimizer for tiny instances.
//!
//! Independent of the splitting solvers: it only evaluates the objective.
//! One or two free entries are handled by a zooming grid scan; up to 16 free
//! entries by restarted Nelder–Mead from several starting points.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::matrix::{numerical_rank, DenseMatrix};
use crate::problem::{CompletionProblem, Formulation, Solution, SolveResult, SolveStatus};
use crate::solvers::RANK_ESTIMATE_CUTOFF;

/// Largest number of unknowns the polytope search accepts.
pub const MAX_SEARCH_UNKNOWNS: usize = 16;
/// Largest number of unknowns handled by grid scanning.
pub const MAX_GRID_UNKNOWNS: usize = 2;

#[derive(Clone, Debug)]
pub struct NelderMeadOptions {
    pub initial_step: f64,
    /// Stop a run when the simplex value spread falls below this.
    pub ftol: f64,
    /// Stop a run when the simplex diameter falls below this.
    pub xtol: f64,
    pub max_evals: usize,
    /// Fresh simplices built around the incumbent after a run stalls.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.5,
            ftol: 1e-13,
            xtol: 1e-10,
            max_evals: 100_000,
            restarts: 20,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
}

/// Nelder–Mead with dimension-adaptive coefficients and restarts.
pub fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult {
    let n = x0.len();
    if n == 0 {
        return NelderMeadResult {
            x: Vec::new(),
            fx: f(&[]),
            evals: 1,
        };
    }
    let nf = n as f64;
    let (reflect, expand, contract, shrink_by) =
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);

    let evals = Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        f(x)
    };
    let mut best_x = x0.to_vec();
    let mut best_f = eval(&best_x);
    let mut step = opts.initial_step;

    for _ in 0..=opts.restarts {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((best_x.clone(), best_f));
        for k in 0..n {
            let mut v = best_x.clone();
            v[k] += if v[k] != 0.0 { step * v[k].abs().max(1.0) } else { step };
            let fv = eval(&v);
            simplex.push((v, fv));
        }

        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[n].1 - simplex[0].1;
            let diameter = simplex[1..]
                .iter()
                .map(|(v, _)| {
                    v.iter()
                        .zip(&simplex[0].0)
                        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
                })
                .fold(0.0_f64, f64::max);
            if (spread <= opts.ftol && diameter <= opts.xtol.max(1e-3 * step))
                || diameter <= opts.xtol
                || evals.get() >= opts.max_evals
            {
                break;
            }

            let mut centroid = vec![0.0; n];
            for (v, _) in &simplex[..n] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / nf;
                }
            }
            let along = |t: f64, worst: &[f64]| -> Vec<f64> {
                centroid.iter().zip(worst).map(|(c, w)| c + t * (c - w)).collect()
            };
            let worst = simplex[n].0.clone();
            let f_worst = simplex[n].1;
            let xr = along(reflect, &worst);
            let fr = eval(&xr);

            if fr < simplex[0].1 {
                let xe = along(reflect * expand, &worst);
                let fe = eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < f_worst {
                    let xc = along(reflect * contract, &worst);
                    let fc = eval(&xc);
                    (xc, fc)
                } else {
                    let xc = along(-contract, &worst);
                    let fc = eval(&xc);
                    (xc, fc)
                };
                if fc < f_worst.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let anchor = simplex[0].0.clone();
                    for (v, fv) in simplex[1..].iter_mut() {
                        for (x, a) in v.iter_mut().zip(&anchor) {
                            *x = a + shrink_by * (*x - a);
                        }
                        *fv = eval(v);
                    }
                }
            }
        }

        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let improved = simplex[0].1 < best_f;
        if improved {
            best_f = simplex[0].1;
            best_x = simplex[0].0.clone();
        }
        if evals.get() >= opts.max_evals {
            break;
        }
        // restart smaller when a run stalls at the incumbent
        step = if improved { step.max(1e-6) * 0.5 } else { step * 0.1 };
        if step < 1e-12 {
            break;
        }
    }

    NelderMeadResult {
        x: best_x,
        fx: best_f,
        evals: evals.get(),
    }
}

/// Zooming grid scan over a box; assumes the objective is convex.
fn grid_search(f: &dyn Fn(&[f64]) -> f64, dim: usize, radius: f64, points: usize, tol: f64) -> (Vec<f64>, f64) {
    let points = points.max(5) | 1;
    let mut center = vec![0.0; dim];
    let mut half = radius;
    let mut best = (center.clone(), f(&center));
    let mut expansions = 0;
    loop {
        let h = 2.0 * half / (points - 1) as f64;
        let coords = |c: f64| (0..points).map(move |k| c - half + k as f64 * h);
        let mut found = best.clone();
        let mut at_edge = false;
        let mut visit = |x: Vec<f64>, edge: bool| {
            let fx = f(&x);
            if fx < found.1 {
                found = (x, fx);
                at_edge = edge;
            }
        };
        let last = points - 1;
        if dim == 1 {
            for (k, a) in coords(center[0]).enumerate() {
                visit(vec![a], k == 0 || k == last);
            }
        } else {
            for (k, a) in coords(center[0]).enumerate() {
                for (l, b) in coords(center[1]).enumerate() {
                    visit(vec![a, b], k == 0 || k == last || l == 0 || l == last);
                }
            }
        }
        best = found;
        if at_edge && expansions < 20 {
            // minimum may lie outside the box: recentre and widen
            expansions += 1;
            center = best.0.clone();
            half *= 2.0;
            continue;
        }
        if h <= tol {
            return best;
        }
        center = best.0.clone();
        half = 2.0 * h;
    }
}

/// Search budget for [`oracle_solve`].
#[derive(Clone, Debug)]
pub struct OracleBudget {
    /// Grid points per axis for each zoom level.
    pub grid_points: usize,
    /// Final grid spacing.
    pub grid_tol: f64,
    pub search: NelderMeadOptions,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            grid_points: 41,
            grid_tol: 1e-9,
            search: NelderMeadOptions::default(),
        }
    }
}

/// Minimizes the problem's exact objective by direct search.
///
/// For hard-constrained formulations only the unobserved entries are free;
/// otherwise every entry is. The residual fields of the result are zero and
/// `history` is empty.
pub fn oracle_solve(p: &CompletionProblem, budget: &OracleBudget) -> Result<Solution> {
    let (n1, n2) = p.shape();
    let base = p.observed().clone();
    let free: Vec<(usize, usize)> = if p.formulation().has_hard_constraint() {
        p.mask().complement().observed().to_vec()
    } else {
        (0..n1).flat_map(|i| (0..n2).map(move |j| (i, j))).collect()
    };
    if free.len() > MAX_SEARCH_UNKNOWNS {
        return Err(Error::Unsupported(format!(
            "{} free entries exceed the oracle budget of {MAX_SEARCH_UNKNOWNS}",
            free.len()
        )));
    }

    let fill = |x: &[f64]| -> DenseMatrix {
        let mut m = base.as_nalgebra().clone();
        for (&(i, j), &v) in free.iter().zip(x) {
            m[(i, j)] = v;
        }
        DenseMatrix::from_inner(m)
    };
    let objective = |x: &[f64]| -> f64 {
        if x.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        p.objective(&fill(x)).unwrap_or(f64::INFINITY)
    };

    let x = if free.is_empty() {
        Vec::new()
    } else if free.len() <= MAX_GRID_UNKNOWNS && p.formulation().has_hard_constraint() {
        let radius = 4.0 * (base.max_abs() + 1.0);
        grid_search(&objective, free.len(), radius, budget.grid_points, budget.grid_tol).0
    } else {
        multi_start_search(&objective, &free, &base, &budget.search)
    };

    let completed = fill(&x);
    let sigma = completed.singular_values()?;
    let result = SolveResult {
        objective: p.objective(&completed)?,
        rank_estimate: numerical_rank(&sigma, RANK_ESTIMATE_CUTOFF),
        completed,
        iterations: 0,
        primal_residual: 0.0,
        dual_residual: 0.0,
        status: SolveStatus::Converged,
        history: Vec::new(),
    };
    let sparse = match p.formulation() {
        Formulation::RpcaRestricted => Some(p.observed() - &result.completed),
        _ => None,
    };
    Ok(Solution { result, sparse })
}

fn multi_start_search(
    objective: &dyn Fn(&[f64]) -> f64,
    free: &[(usize, usize)],
    base: &DenseMatrix,
    opts: &NelderMeadOptions,
) -> Vec<f64> {
    let n = free.len();
    let filled: Vec<f64> = free.iter().map(|&(i, j)| base.get(i, j)).collect();
    let mean = base.as_nalgebra().mean();
    let starts = [filled.clone(), vec![0.0; n], vec![mean; n], filled.iter().map(|v| 0.5 * v).collect()];

    let mut best: Option<NelderMeadResult> = None;
    for start in &starts {
        let run = nelder_mead(objective, start, opts);
        if best.as_ref().is_none_or(|b| run.fx < b.fx) {
            best = Some(run);
        }
    }
    // polish from the best point found
    let polished = nelder_mead(objective, &best.as_ref().expect("at least one start").x, opts);
    if polished.fx < best.as_ref().unwrap().fx {
        best = Some(polished);
    }
    best.unwrap().x
}
