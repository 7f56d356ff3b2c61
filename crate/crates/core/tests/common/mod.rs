#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use structured_mc::synth::{generate_low_rank, rng_from_seed, sample_structured_mask, GeneratorSpec, SamplingSpec};
use structured_mc::{DenseMatrix, ObservationMask};

/// Rank-1 outer product of vectors drawn from (0.5, 1.5).
pub fn positive_rank_one(n1: usize, n2: usize, seed: u64) -> DenseMatrix {
    let mut rng = rng_from_seed(seed);
    let u: Vec<f64> = (0..n1).map(|_| 0.5 + rng.random::<f64>()).collect();
    let v: Vec<f64> = (0..n2).map(|_| 0.5 + rng.random::<f64>()).collect();
    DenseMatrix::from_fn(n1, n2, |i, j| u[i] * v[j]).unwrap()
}

/// Exactly `count` entries chosen uniformly without replacement.
pub fn uniform_mask(n1: usize, n2: usize, count: usize, seed: u64) -> ObservationMask {
    let mut idx: Vec<(usize, usize)> = (0..n1).flat_map(|i| (0..n2).map(move |j| (i, j))).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    idx.truncate(count);
    ObservationMask::new(n1, n2, idx).unwrap()
}

/// Sparse nonnegative low-rank truth whose zeros are only partly observed
/// and whose nonzeros are all observed, so every unobserved entry is zero.
pub fn zero_unobserved_instance(
    n: usize,
    rank: usize,
    rate_zero: f64,
    seed: u64,
) -> (DenseMatrix, ObservationMask) {
    for attempt in 0.. {
        let spec = GeneratorSpec::new(n, n, rank, 0.5, 0.5, seed.wrapping_mul(31).wrapping_add(attempt));
        let m = generate_low_rank(&spec).unwrap();
        if m.is_zero() {
            continue;
        }
        let sampling = SamplingSpec {
            rate_zero,
            rate_nonzero: 1.0,
            seed: seed ^ 0x5eed,
        };
        let mask = sample_structured_mask(&m, &sampling).unwrap();
        return (m, mask);
    }
    unreachable!()
}

pub fn rel_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let d = structured_mc::matrix::frobenius_norm(&(a - b));
    d / structured_mc::matrix::frobenius_norm(b).max(1e-300)
}
