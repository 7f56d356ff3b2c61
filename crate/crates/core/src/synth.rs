//! Synthetic ground truth: sparse-factor low-rank matrices, zero/nonzero
//! structured subsampling, Gaussian observation noise and the matching ρ.
//!
//! Randomness comes from ChaCha8 (counter-based, portable) seeded through
//! [`derive_seed`], a SplitMix64 chain over the base seed and any number of
//! stream coordinates. Uniform draws use the open interval (0, 1); Gaussian
//! draws use the inverse normal CDF of such a uniform.

use rand::distr::Open01;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, ObservationMask};

/// Stream tags used when deriving per-trial seeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Generator = 1,
    Mask = 2,
    Noise = 3,
    RowSubset = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `base` one at a time.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n1: usize,
    pub n2: usize,
    pub rank: usize,
    /// Per-entry inclusion probability of the left factor.
    pub density_left: f64,
    /// Per-entry inclusion probability of the right factor.
    pub density_right: f64,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(n1: usize, n2: usize, rank: usize, density_left: f64, density_right: f64, seed: u64) -> Self {
        Self {
            n1,
            n2,
            rank,
            density_left,
            density_right,
            seed,
        }
    }

    /// Densities of 0 are accepted and yield the zero matrix; callers that
    /// need a usable ground truth reject it as a degenerate draw.
    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::invalid("generator dimensions must be positive"));
        }
        if self.rank == 0 || self.rank > self.n1.min(self.n2) {
            return Err(Error::invalid(format!(
                "rank {} must lie in 1..={}",
                self.rank,
                self.n1.min(self.n2)
            )));
        }
        for (name, d) in [("density_left", self.density_left), ("density_right", self.density_right)] {
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {d}")));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    /// Fraction of zero entries observed.
    pub rate_zero: f64,
    /// Fraction of nonzero entries observed.
    pub rate_nonzero: f64,
    pub seed: u64,
}

impl SamplingSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("rate_zero", self.rate_zero), ("rate_nonzero", self.rate_nonzero)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {r}")));
            }
        }
        Ok(())
    }
}

fn sparse_factor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> nalgebra::DMatrix<f64> {
    let mut entries = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let keep = rng.random::<f64>() < density;
        let value: f64 = rng.sample(Open01);
        entries.push(if keep { value } else { 0.0 });
    }
    nalgebra::DMatrix::from_row_slice(rows, cols, &entries)
}

/// `M_L · M_R` with sparse nonnegative factors of inner dimension `rank`.
pub fn generate_low_rank(spec: &GeneratorSpec) -> Result<DenseMatrix> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let left = sparse_factor(&mut rng, spec.n1, spec.rank, spec.density_left);
    let right = sparse_factor(&mut rng, spec.rank, spec.n2, spec.density_right);
    DenseMatrix::from_nalgebra(left * right)
}

/// `round(rate · count)` with ties to even.
pub fn rounded_count(rate: f64, count: usize) -> usize {
    (rate * count as f64).round_ties_even() as usize
}

/// Observes a shuffled prefix of the zero entries and, independently, of the
/// nonzero entries. Zero means exactly `0.0`.
pub fn sample_structured_mask(m: &DenseMatrix, spec: &SamplingSpec) -> Result<ObservationMask> {
    spec.validate()?;
    let (rows, cols) = m.shape();
    let (mut zeros, mut nonzeros): (Vec<_>, Vec<_>) = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .partition(|&(i, j)| m.get(i, j) == 0.0);

    let mut rng = rng_from_seed(spec.seed);
    zeros.shuffle(&mut rng);
    nonzeros.shuffle(&mut rng);
    let take_zero = rounded_count(spec.rate_zero, zeros.len());
    let take_nonzero = rounded_count(spec.rate_nonzero, nonzeros.len());
    if take_zero + take_nonzero == 0 {
        return Err(Error::InvalidSampling(format!(
            "rates ({}, {}) select no entries from {} zeros and {} nonzeros",
            spec.rate_zero,
            spec.rate_nonzero,
            zeros.len(),
            nonzeros.len()
        )));
    }
    ObservationMask::new(
        rows,
        cols,
        zeros[..take_zero]
            .iter()
            .chain(&nonzeros[..take_nonzero])
            .copied(),
    )
}

/// Adds i.i.d. `N(0, σ²)` noise on the observed entries only, drawn in
/// row-major order of the mask.
pub fn add_noise(m: &DenseMatrix, sigma: f64, mask: &ObservationMask, seed: u64) -> Result<DenseMatrix> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be nonnegative, got {sigma}")));
    }
    mask.ensure_shape(m.shape())?;
    if sigma == 0.0 {
        return Ok(m.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let mut out = m.as_nalgebra().clone();
    for &(i, j) in mask.observed() {
        let u: f64 = rng.sample(Open01);
        out[(i, j)] += normal.inverse_cdf(u);
    }
    DenseMatrix::from_nalgebra(out)
}

/// `ρ = (√n1 + √n2) · √(|Ω| / (n1·n2)) · σ`.
pub fn rho_for_noise(n1: usize, n2: usize, omega_size: usize, sigma: f64) -> Result<f64> {
    if n1 == 0 || n2 == 0 || omega_size == 0 || omega_size > n1 * n2 {
        return Err(Error::invalid(format!(
            "need 1 <= |Ω| <= n1·n2, got |Ω| = {omega_size} for {n1}x{n2}"
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let (n1, n2) = (n1 as f64, n2 as f64);
    Ok((n1.sqrt() + n2.sqrt()) * (omega_size as f64 / (n1 * n2)).sqrt() * sigma)
}
