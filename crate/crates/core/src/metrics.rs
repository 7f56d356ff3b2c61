//! Recovery error metrics and incoherence parameters.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{frobenius_norm, DenseMatrix, Svd};

/// Numerators at or below this count as exact when the denominator is zero.
pub const EXACT_THRESHOLD: f64 = 1e-12;
/// Relative singular value cutoff used for the numerical rank in
/// [`incoherence`].
pub const INCOHERENCE_RANK_CUTOFF: f64 = 1e-10;

/// `‖M̃ − M‖_F / ‖M̂ − M‖_F` with explicit handling of a zero baseline error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum ErrorRatio {
    Value(f64),
    /// Both errors are zero.
    BothExact,
    /// Baseline exact, regularized not.
    Infinite,
}

impl ErrorRatio {
    pub fn from_errors(err_reg: f64, err_nnm: f64) -> Self {
        if err_nnm > 0.0 {
            ErrorRatio::Value(err_reg / err_nnm)
        } else if err_reg <= EXACT_THRESHOLD {
            ErrorRatio::BothExact
        } else {
            ErrorRatio::Infinite
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            ErrorRatio::Value(v) => Some(v),
            ErrorRatio::BothExact => None,
            ErrorRatio::Infinite => Some(f64::INFINITY),
        }
    }
}

impl fmt::Display for ErrorRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorRatio::Value(v) => write!(f, "{v}"),
            ErrorRatio::BothExact => f.write_str("both-exact"),
            ErrorRatio::Infinite => f.write_str("inf"),
        }
    }
}

pub fn error_ratio(m_reg: &DenseMatrix, m_nnm: &DenseMatrix, m_true: &DenseMatrix) -> Result<ErrorRatio> {
    m_reg.ensure_shape(m_true.shape())?;
    m_nnm.ensure_shape(m_true.shape())?;
    Ok(ErrorRatio::from_errors(
        frobenius_norm(&(m_reg - m_true)),
        frobenius_norm(&(m_nnm - m_true)),
    ))
}

pub fn relative_error(m_hat: &DenseMatrix, m_true: &DenseMatrix) -> Result<f64> {
    m_hat.ensure_shape(m_true.shape())?;
    let denom = frobenius_norm(m_true);
    if denom == 0.0 {
        return Err(Error::invalid("relative error against a zero ground truth"));
    }
    Ok(frobenius_norm(&(m_hat - m_true)) / denom)
}

/// Smallest μ satisfying each incoherence condition for the rank-r SVD
/// `M = U Σ Vᵀ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Incoherence {
    /// `(n1 / r) · max_i ‖Uᵀ e_i‖²`
    pub mu_row: f64,
    /// `(n2 / r) · max_j ‖Vᵀ e_j‖²`
    pub mu_col: f64,
    /// `(n1 n2 / r) · ‖U Vᵀ‖_∞²`
    pub mu_uv: f64,
    pub rank: usize,
}

impl Incoherence {
    pub fn max(&self) -> f64 {
        self.mu_row.max(self.mu_col).max(self.mu_uv)
    }
}

pub fn incoherence(m: &DenseMatrix) -> Result<Incoherence> {
    if m.is_zero() {
        return Err(Error::invalid("incoherence of the zero matrix is undefined"));
    }
    let (n1, n2) = m.shape();
    let svd = Svd::compute(m.as_nalgebra().clone(), true)?;
    let r = svd.numerical_rank(INCOHERENCE_RANK_CUTOFF);
    let u = svd.u.columns(0, r);
    let v_t = svd.v_t.rows(0, r);

    let max_row = u.row_iter().map(|row| row.norm_squared()).fold(0.0, f64::max);
    let max_col = v_t.column_iter().map(|col| col.norm_squared()).fold(0.0, f64::max);
    let uv = u * v_t;
    let uv_inf = uv.iter().fold(0.0_f64, |a, x| a.max(x.abs()));

    let rf = r as f64;
    Ok(Incoherence {
        mu_row: n1 as f64 / rf * max_row,
        mu_col: n2 as f64 / rf * max_col,
        mu_uv: (n1 * n2) as f64 / rf * uv_inf * uv_inf,
        rank: r,
    })
}
