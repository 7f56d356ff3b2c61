//! Dense matrices, observation masks, the masking projection and the norms
//! used by every formulation.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Real-valued dense matrix with finite entries.
///
/// Storage is delegated to `nalgebra`; the logical order exposed through
/// [`DenseMatrix::from_row_major`] and [`DenseMatrix::to_row_major`] is
/// row-major.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    inner: DMatrix<f64>,
}

impl DenseMatrix {
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Self::from_nalgebra(DMatrix::from_row_slice(rows, cols, &entries))
    }

    /// Builds from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(Error::invalid(format!(
                "row {bad} has {} entries, expected {n_cols}",
                rows[bad].len()
            )));
        }
        Self::from_row_major(n_rows, n_cols, rows.concat())
    }

    pub fn from_nalgebra(inner: DMatrix<f64>) -> Result<Self> {
        if inner.nrows() == 0 || inner.ncols() == 0 {
            return Err(Error::invalid("matrix dimensions must be positive"));
        }
        if let Some(pos) = inner.iter().position(|x| !x.is_finite()) {
            // nalgebra iterates column-major
            let (i, j) = (pos % inner.nrows(), pos / inner.nrows());
            return Err(Error::invalid(format!(
                "non-finite entry {} at ({i}, {j})",
                inner[(i, j)]
            )));
        }
        Ok(Self { inner })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("matrix dimensions must be positive"));
        }
        Self::from_nalgebra(DMatrix::from_fn(rows, cols, f))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            inner: DMatrix::zeros(rows, cols),
        }
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "matrix dimensions must be positive");
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    /// Wraps results of internal arithmetic on already-finite operands.
    pub(crate) fn from_inner(inner: DMatrix<f64>) -> Self {
        debug_assert!(inner.iter().all(|x| x.is_finite()));
        Self { inner }
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_nalgebra(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_nalgebra(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.inner[(i, j)]);
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_inner(self.inner.transpose())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_nalgebra(&self.inner * s).expect("finite scale of a finite matrix")
    }

    pub fn is_zero(&self) -> bool {
        self.inner.iter().all(|&x| x == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn ensure_shape(&self, shape: (usize, usize)) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::DimensionMismatch {
                expected: shape,
                got: self.shape(),
            });
        }
        Ok(())
    }

    /// Row subset in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("row selection is empty"));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.rows()) {
            return Err(Error::invalid(format!("row {bad} out of range")));
        }
        Ok(Self::from_inner(self.inner.select_rows(rows)))
    }

    pub fn singular_values(&self) -> Result<Vec<f64>> {
        Ok(Svd::compute(self.inner.clone(), false)?.sigma)
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix {}x{} [", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            let row: Vec<f64> = (0..self.cols()).map(|j| self.inner[(i, j)]).collect();
            write!(f, "{row:?}")?;
            if i + 1 < self.rows() {
                write!(f, ", ")?;
            }
        }
        write!(f, "]")
    }
}

impl std::ops::Add for &DenseMatrix {
    type Output = DenseMatrix;
    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in add");
        DenseMatrix::from_nalgebra(&self.inner + &rhs.inner).expect("finite sum")
    }
}

impl std::ops::Sub for &DenseMatrix {
    type Output = DenseMatrix;
    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in sub");
        DenseMatrix::from_nalgebra(&self.inner - &rhs.inner).expect("finite difference")
    }
}

/// Thin SVD with singular values sorted in descending order.
#[derive(Clone, Debug)]
pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

impl Svd {
    pub fn compute(m: DMatrix<f64>, vectors: bool) -> Result<Self> {
        let (r, c) = m.shape();
        let a = faer::Mat::<f64>::from_fn(r, c, |i, j| m[(i, j)]);
        let failed = |e: faer::linalg::svd::SvdError| {
            Error::Numerical(format!("SVD of {r}x{c} matrix failed: {e:?}"))
        };
        let (u, sigma, v_t) = if vectors {
            let svd = a.thin_svd().map_err(failed)?;
            let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
            let k = s.nrows();
            let sigma: Vec<f64> = (0..k).map(|i| s[i]).collect();
            (
                DMatrix::from_fn(r, k, |i, j| u[(i, j)]),
                sigma,
                DMatrix::from_fn(k, c, |i, j| v[(j, i)]),
            )
        } else {
            let sigma = a.singular_values().map_err(failed)?;
            (DMatrix::zeros(0, 0), sigma, DMatrix::zeros(0, 0))
        };
        if sigma.iter().any(|s| !s.is_finite()) {
            return Err(Error::Numerical("SVD produced non-finite singular values".into()));
        }
        Ok(Self { u, sigma, v_t })
    }

    /// `U diag(weights) Vᵀ`, skipping zero weights.
    pub fn recompose_with(&self, weights: &[f64]) -> DMatrix<f64> {
        let (n1, n2) = (self.u.nrows(), self.v_t.ncols());
        let mut out = DMatrix::zeros(n1, n2);
        for (k, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let u_col: DVector<f64> = self.u.column(k) * w;
            out.ger(1.0, &u_col, &self.v_t.row(k).transpose(), 1.0);
        }
        out
    }

    /// Count of singular values strictly above `rel_cutoff * σ_max`.
    pub fn numerical_rank(&self, rel_cutoff: f64) -> usize {
        numerical_rank(&self.sigma, rel_cutoff)
    }
}

pub(crate) fn numerical_rank(sigma: &[f64], rel_cutoff: f64) -> usize {
    let max = sigma.iter().fold(0.0_f64, |a, &s| a.max(s));
    if max == 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > rel_cutoff * max).count()
}

/// Set Ω of observed index pairs.
///
/// Kept both as an ordered index list and a same-shape membership table so
/// that per-entry membership tests are O(1).
#[derive(Clone, PartialEq, Eq)]
pub struct ObservationMask {
    rows: usize,
    cols: usize,
    observed: Vec<(usize, usize)>,
    lookup: Vec<bool>,
}

impl ObservationMask {
    /// Rejects out-of-range and duplicate pairs.
    pub fn new(rows: usize, cols: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("mask dimensions must be positive"));
        }
        let mut lookup = vec![false; rows * cols];
        for (i, j) in pairs {
            if i >= rows || j >= cols {
                return Err(Error::invalid(format!(
                    "index ({i}, {j}) outside {rows}x{cols} mask"
                )));
            }
            if lookup[i * cols + j] {
                return Err(Error::invalid(format!("duplicate index ({i}, {j}) in mask")));
            }
            lookup[i * cols + j] = true;
        }
        Ok(Self::from_lookup(rows, cols, lookup))
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(rows > 0 && cols > 0, "mask dimensions must be positive");
        let lookup = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Self::from_lookup(rows, cols, lookup)
    }

    fn from_lookup(rows: usize, cols: usize, lookup: Vec<bool>) -> Self {
        let observed = lookup
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(k, _)| (k / cols, k % cols))
            .collect();
        Self {
            rows,
            cols,
            observed,
            lookup,
        }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| true)
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| false)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Observed pairs in row-major order.
    pub fn observed(&self) -> &[(usize, usize)] {
        &self.observed
    }

    pub fn observed_set(&self) -> BTreeSet<(usize, usize)> {
        self.observed.iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.observed.len() == self.rows * self.cols
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.rows && j < self.cols && self.lookup[i * self.cols + j]
    }

    pub fn complement(&self) -> Self {
        Self::from_lookup(self.rows, self.cols, self.lookup.iter().map(|b| !b).collect())
    }

    pub fn ensure_shape(&self, shape: (usize, usize)) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::DimensionMismatch {
                expected: shape,
                got: self.shape(),
            });
        }
        Ok(())
    }

    /// Mask restricted to the given rows, renumbered in selection order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() || rows.iter().any(|&r| r >= self.rows) {
            return Err(Error::invalid("invalid row selection for mask"));
        }
        Ok(Self::from_fn(rows.len(), self.cols, |i, j| self.contains(rows[i], j)))
    }
}

impl fmt::Debug for ObservationMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ObservationMask {}x{} {:?}",
            self.rows, self.cols, self.observed
        )
    }
}

/// Keeps observed entries and zeroes the rest.
pub fn project(m: &DenseMatrix, mask: &ObservationMask) -> Result<DenseMatrix> {
    mask.ensure_shape(m.shape())?;
    Ok(DenseMatrix::from_inner(DMatrix::from_fn(
        m.rows(),
        m.cols(),
        |i, j| if mask.contains(i, j) { m.get(i, j) } else { 0.0 },
    )))
}

pub fn complement(mask: &ObservationMask) -> ObservationMask {
    mask.complement()
}

/// Sum of singular values.
pub fn nuclear_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(m.singular_values()?.iter().sum())
}

pub fn frobenius_norm(m: &DenseMatrix) -> f64 {
    m.as_nalgebra().norm()
}

pub fn entrywise_l1(m: &DenseMatrix) -> f64 {
    m.as_nalgebra().iter().map(|x| x.abs()).sum()
}

/// Entrywise L1 norm restricted to the mask.
pub fn masked_l1(m: &DenseMatrix, mask: &ObservationMask) -> f64 {
    mask.observed().iter().map(|&(i, j)| m.get(i, j).abs()).sum()
}

/// Frobenius norm restricted to the mask.
pub fn masked_frobenius(m: &DenseMatrix, mask: &ObservationMask) -> f64 {
    mask.observed()
        .iter()
        .map(|&(i, j)| m.get(i, j).powi(2))
        .sum::<f64>()
        .sqrt()
}
