//! Problem, configuration and result types shared by the solvers and the
//! brute-force oracle.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{
    masked_frobenius, masked_l1, nuclear_norm, project, DenseMatrix, ObservationMask,
};

/// Which convex program to solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    /// `min ‖A‖_*  s.t.  P_Ω(A) = P_Ω(M)`
    NnmExact,
    /// `min ‖A‖_* + α‖P_Ωᶜ(A)‖_1  s.t.  P_Ω(A) = P_Ω(M)`
    NnmReg,
    /// `min ‖P_Ω(M − A)‖_F + ρ‖A‖_*`
    NnmNoisy,
    /// `min ‖P_Ω(M − A)‖_F + ρ‖A‖_* + α‖P_Ωᶜ(A)‖_1`
    NnmNoisyReg,
    /// `min ‖A‖_* + α‖S‖_1  s.t.  A + S = P_Ω(M)`
    RpcaRestricted,
}

impl Formulation {
    pub const ALL: [Formulation; 5] = [
        Formulation::NnmExact,
        Formulation::NnmReg,
        Formulation::NnmNoisy,
        Formulation::NnmNoisyReg,
        Formulation::RpcaRestricted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Formulation::NnmExact => "nnm-exact",
            Formulation::NnmReg => "nnm-reg",
            Formulation::NnmNoisy => "nnm-noisy",
            Formulation::NnmNoisyReg => "nnm-noisy-reg",
            Formulation::RpcaRestricted => "rpca-restricted",
        }
    }

    pub fn uses_alpha(self) -> bool {
        matches!(
            self,
            Formulation::NnmReg | Formulation::NnmNoisyReg | Formulation::RpcaRestricted
        )
    }

    pub fn uses_rho(self) -> bool {
        matches!(self, Formulation::NnmNoisy | Formulation::NnmNoisyReg)
    }

    /// Observed entries are pinned exactly.
    pub fn has_hard_constraint(self) -> bool {
        matches!(self, Formulation::NnmExact | Formulation::NnmReg)
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Formulation::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown formulation `{s}` (expected one of nnm-exact, nnm-reg, nnm-noisy, nnm-noisy-reg, rpca-restricted)"
                ))
            })
    }
}

#[derive(Clone, Debug)]
pub struct CompletionProblem {
    observed: DenseMatrix,
    mask: ObservationMask,
    formulation: Formulation,
    alpha: f64,
    rho: f64,
}

impl CompletionProblem {
    /// `observed_values` is zero-filled outside the mask on construction.
    /// `alpha` and `rho` are validated only for formulations that use them.
    pub fn new(
        observed_values: &DenseMatrix,
        mask: ObservationMask,
        formulation: Formulation,
        alpha: f64,
        rho: f64,
    ) -> Result<Self> {
        mask.ensure_shape(observed_values.shape())?;
        if mask.is_empty() {
            return Err(Error::invalid("observation mask is empty"));
        }
        if formulation.uses_alpha() && !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!(
                "{formulation} requires alpha > 0, got {alpha}"
            )));
        }
        if formulation.uses_rho() && !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::invalid(format!(
                "{formulation} requires rho > 0, got {rho}"
            )));
        }
        Ok(Self {
            observed: project(observed_values, &mask)?,
            mask,
            formulation,
            alpha: if formulation.uses_alpha() { alpha } else { 0.0 },
            rho: if formulation.uses_rho() { rho } else { 0.0 },
        })
    }

    pub fn exact(observed_values: &DenseMatrix, mask: ObservationMask) -> Result<Self> {
        Self::new(observed_values, mask, Formulation::NnmExact, 0.0, 0.0)
    }

    pub fn regularized(observed_values: &DenseMatrix, mask: ObservationMask, alpha: f64) -> Result<Self> {
        Self::new(observed_values, mask, Formulation::NnmReg, alpha, 0.0)
    }

    pub fn noisy(observed_values: &DenseMatrix, mask: ObservationMask, rho: f64) -> Result<Self> {
        Self::new(observed_values, mask, Formulation::NnmNoisy, 0.0, rho)
    }

    pub fn noisy_regularized(
        observed_values: &DenseMatrix,
        mask: ObservationMask,
        rho: f64,
        alpha: f64,
    ) -> Result<Self> {
        Self::new(observed_values, mask, Formulation::NnmNoisyReg, alpha, rho)
    }

    pub fn rpca_restricted(observed_values: &DenseMatrix, mask: ObservationMask, alpha: f64) -> Result<Self> {
        Self::new(observed_values, mask, Formulation::RpcaRestricted, alpha, 0.0)
    }

    /// Same data and mask under a different formulation.
    pub fn with_formulation(&self, formulation: Formulation, alpha: f64, rho: f64) -> Result<Self> {
        Self::new(&self.observed, self.mask.clone(), formulation, alpha, rho)
    }

    /// Observations, zero outside Ω.
    pub fn observed(&self) -> &DenseMatrix {
        &self.observed
    }

    pub fn mask(&self) -> &ObservationMask {
        &self.mask
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn shape(&self) -> (usize, usize) {
        self.observed.shape()
    }

    /// Objective at `a`. For `rpca-restricted` the sparse part is the
    /// implied `S = P_Ω(M) − A`. Hard constraints are not checked here.
    pub fn objective(&self, a: &DenseMatrix) -> Result<f64> {
        a.ensure_shape(self.shape())?;
        let unobserved = self.mask.complement();
        let nuc = nuclear_norm(a)?;
        Ok(match self.formulation {
            Formulation::NnmExact => nuc,
            Formulation::NnmReg => nuc + self.alpha * masked_l1(a, &unobserved),
            Formulation::NnmNoisy => {
                masked_frobenius(&(&self.observed - a), &self.mask) + self.rho * nuc
            }
            Formulation::NnmNoisyReg => {
                masked_frobenius(&(&self.observed - a), &self.mask)
                    + self.rho * nuc
                    + self.alpha * masked_l1(a, &unobserved)
            }
            Formulation::RpcaRestricted => {
                nuc + self.alpha * crate::matrix::entrywise_l1(&(&self.observed - a))
            }
        })
    }

    /// `‖A‖_* + α‖S‖_1` for an explicit (A, S) pair.
    pub fn rpca_objective(&self, low_rank: &DenseMatrix, sparse: &DenseMatrix) -> Result<f64> {
        low_rank.ensure_shape(self.shape())?;
        sparse.ensure_shape(self.shape())?;
        Ok(nuclear_norm(low_rank)? + self.alpha * crate::matrix::entrywise_l1(sparse))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Bound on the RMS primal residual `‖X − Z‖_F / √(n1·n2)`.
    pub primal_tol: f64,
    /// Bound on the RMS dual residual `β‖Z − Z_prev‖_F / √(n1·n2)`.
    pub dual_tol: f64,
    /// Initial ADMM penalty β.
    pub admm_penalty: f64,
    /// Residual balancing is applied during the first `adapt_iters` iterations.
    pub adapt_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            primal_tol: 1e-6,
            dual_tol: 1e-6,
            admm_penalty: 1.0,
            adapt_iters: 1000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        for (name, v) in [
            ("primal_tol", self.primal_tol),
            ("dual_tol", self.dual_tol),
            ("admm_penalty", self.admm_penalty),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.primal_tol = tol;
        self.dual_tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    NumericalFailure,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIters => "max-iters",
            SolveStatus::NumericalFailure => "numerical-failure",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub completed: DenseMatrix,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub status: SolveStatus,
    /// Singular values above `1e-6 · σ_max`.
    pub rank_estimate: usize,
    /// Per-iteration residuals, empty for the oracle.
    pub history: Vec<Residuals>,
}

impl SolveResult {
    /// Running minimum of each residual sequence.
    pub fn smoothed_history(&self) -> Vec<Residuals> {
        let mut best = Residuals {
            primal: f64::INFINITY,
            dual: f64::INFINITY,
        };
        self.history
            .iter()
            .map(|r| {
                best.primal = best.primal.min(r.primal);
                best.dual = best.dual.min(r.dual);
                best
            })
            .collect()
    }
}

/// Solver output; `sparse` is set only for `rpca-restricted`.
#[derive(Clone, Debug)]
pub struct Solution {
    pub result: SolveResult,
    pub sparse: Option<DenseMatrix>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formulation_names_round_trip() {
        for f in Formulation::ALL {
            assert_eq!(f.name().parse::<Formulation>().unwrap(), f);
        }
        assert!("nnm".parse::<Formulation>().is_err());
    }

    #[test]
    fn parameter_requirements() {
        let obs = DenseMatrix::identity(2);
        let mask = ObservationMask::full(2, 2);
        assert!(CompletionProblem::regularized(&obs, mask.clone(), 0.0).is_err());
        assert!(CompletionProblem::noisy(&obs, mask.clone(), -1.0).is_err());
        assert!(CompletionProblem::noisy_regularized(&obs, mask.clone(), 1.0, 0.0).is_err());
        assert!(CompletionProblem::rpca_restricted(&obs, mask.clone(), f64::NAN).is_err());
        assert!(CompletionProblem::exact(&obs, ObservationMask::empty(2, 2)).is_err());
        assert!(CompletionProblem::exact(&obs, ObservationMask::full(2, 3)).is_err());
        // unused parameters are ignored
        let p = CompletionProblem::new(&obs, mask, Formulation::NnmExact, -5.0, -5.0).unwrap();
        assert_eq!((p.alpha(), p.rho()), (0.0, 0.0));
    }

    #[test]
    fn observations_are_zero_filled() {
        let obs = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let mask = ObservationMask::new(2, 2, [(0, 1)]).unwrap();
        let p = CompletionProblem::exact(&obs, mask).unwrap();
        assert_eq!(p.observed().to_row_major(), vec![0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn objectives() {
        let obs = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let mask = ObservationMask::new(2, 2, [(0, 0), (0, 1), (1, 0)]).unwrap();
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let p = CompletionProblem::regularized(&obs, mask.clone(), 0.1).unwrap();
        assert!((p.objective(&a).unwrap() - 2.1).abs() < 1e-12);
        let p = CompletionProblem::noisy(&obs, mask.clone(), 0.5).unwrap();
        assert!((p.objective(&a).unwrap() - 1.0).abs() < 1e-12);
        let p = CompletionProblem::rpca_restricted(&obs, mask, 0.5).unwrap();
        // implied S has a single -1 at (1, 1)
        assert!((p.objective(&a).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn smoothed_history_is_running_min() {
        let r = |p, d| Residuals { primal: p, dual: d };
        let res = SolveResult {
            completed: DenseMatrix::zeros(1, 1),
            objective: 0.0,
            iterations: 3,
            primal_residual: 0.0,
            dual_residual: 0.0,
            status: SolveStatus::MaxIters,
            rank_estimate: 0,
            history: vec![r(3.0, 1.0), r(4.0, 0.5), r(1.0, 2.0)],
        };
        assert_eq!(
            res.smoothed_history(),
            vec![r(3.0, 1.0), r(3.0, 0.5), r(1.0, 0.5)]
        );
    }
}
