//! Shared helpers for the criterion benchmarks.

use cramp_core::{sample_gaussian, CovMatrix, Dataset, RngStream};
use nalgebra::DVector;

/// Standard-normal dataset on a fixed stream.
pub fn gaussian_dataset(n: usize, p: usize, seed: u64) -> Dataset {
    sample_gaussian(&DVector::zeros(p), &CovMatrix::identity(p), n, RngStream::new(seed, 0))
        .expect("identity covariance samples")
}
