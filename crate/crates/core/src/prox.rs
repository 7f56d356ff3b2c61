//! Proximal operators composed by the splitting solvers.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, ObservationMask, Svd};

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("tau must be positive and finite, got {tau}")));
    }
    Ok(())
}

/// Singular value thresholding: `U max(Σ - τ, 0) Vᵀ`, the prox of `τ‖·‖_*`.
pub fn svt(m: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    check_tau(tau)?;
    let (out, _) = svt_raw(m.as_nalgebra().clone(), tau)?;
    Ok(DenseMatrix::from_inner(out))
}

/// SVT on a raw matrix; also returns the shrunk singular values.
pub(crate) fn svt_raw(m: DMatrix<f64>, tau: f64) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let svd = Svd::compute(m, true)?;
    let shrunk: Vec<f64> = svd.sigma.iter().map(|s| (s - tau).max(0.0)).collect();
    Ok((svd.recompose_with(&shrunk), shrunk))
}

/// Entrywise soft-thresholding on `support`; other entries pass through.
pub fn soft_threshold(m: &DenseMatrix, tau: f64, support: &ObservationMask) -> Result<DenseMatrix> {
    check_tau(tau)?;
    support.ensure_shape(m.shape())?;
    let mut out = m.as_nalgebra().clone();
    soft_threshold_in_place(&mut out, tau, support);
    Ok(DenseMatrix::from_inner(out))
}

#[inline]
pub(crate) fn shrink(x: f64, tau: f64) -> f64 {
    x.signum() * (x.abs() - tau).max(0.0)
}

pub(crate) fn soft_threshold_in_place(m: &mut DMatrix<f64>, tau: f64, support: &ObservationMask) {
    for &(i, j) in support.observed() {
        m[(i, j)] = shrink(m[(i, j)], tau);
    }
}

/// Prox of `τ‖P_Ω(Y − ·)‖_F`: block soft-thresholding of the Ω-residual
/// toward the observations. Entries outside Ω are untouched.
pub fn prox_obs_fit(
    m: &DenseMatrix,
    observed_values: &DenseMatrix,
    mask: &ObservationMask,
    tau: f64,
) -> Result<DenseMatrix> {
    check_tau(tau)?;
    observed_values.ensure_shape(m.shape())?;
    mask.ensure_shape(m.shape())?;
    let mut out = m.as_nalgebra().clone();
    prox_obs_fit_in_place(&mut out, observed_values.as_nalgebra(), mask, tau);
    Ok(DenseMatrix::from_inner(out))
}

pub(crate) fn prox_obs_fit_in_place(
    m: &mut DMatrix<f64>,
    observed: &DMatrix<f64>,
    mask: &ObservationMask,
    tau: f64,
) {
    let norm = mask
        .observed()
        .iter()
        .map(|&(i, j)| (m[(i, j)] - observed[(i, j)]).powi(2))
        .sum::<f64>()
        .sqrt();
    // zero residual is a fixed point (limit of the shrink factor)
    if norm == 0.0 {
        return;
    }
    let factor = (1.0 - tau / norm).max(0.0);
    for &(i, j) in mask.observed() {
        m[(i, j)] = observed[(i, j)] + factor * (m[(i, j)] - observed[(i, j)]);
    }
}

/// Overwrites Ω entries with the observations.
pub fn enforce_observed(
    m: &DenseMatrix,
    observed_values: &DenseMatrix,
    mask: &ObservationMask,
) -> Result<DenseMatrix> {
    observed_values.ensure_shape(m.shape())?;
    mask.ensure_shape(m.shape())?;
    let mut out = m.as_nalgebra().clone();
    enforce_observed_in_place(&mut out, observed_values.as_nalgebra(), mask);
    Ok(DenseMatrix::from_inner(out))
}

pub(crate) fn enforce_observed_in_place(
    m: &mut DMatrix<f64>,
    observed: &DMatrix<f64>,
    mask: &ObservationMask,
) {
    for &(i, j) in mask.observed() {
        m[(i, j)] = observed[(i, j)];
    }
}
