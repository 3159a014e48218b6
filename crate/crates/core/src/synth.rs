//! Seeded random fixtures shared by the gradient checker, the toy trainer
//! and the command-line harness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::hnnce::EmbeddingBatch;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard-normal entries.
pub fn gaussian_matrix<T: Scalar>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<T> {
    let data = (0..rows * cols)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            T::lit(v)
        })
        .collect();
    Matrix::from_vec(rows, cols, data).expect("length matches shape")
}

/// Gaussian rows projected onto the unit sphere.
pub fn random_unit_matrix<T: Scalar>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<T> {
    let mut m = gaussian_matrix(rng, rows, cols);
    m.normalize_rows();
    m
}

/// Independent unit-norm image and text rows.
pub fn random_batch<T: Scalar>(rng: &mut ChaCha8Rng, n: usize, d: usize, tau: T) -> Result<EmbeddingBatch<T>> {
    let x = random_unit_matrix(rng, n, d);
    let t = random_unit_matrix(rng, n, d);
    EmbeddingBatch::new(x, t, tau)
}

/// Text rows are noisy copies of the image rows, so the diagonal dominates.
pub fn correlated_batch<T: Scalar>(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: usize,
    noise: T,
    tau: T,
) -> Result<EmbeddingBatch<T>> {
    let x = random_unit_matrix::<T>(rng, n, d);
    let mut t = gaussian_matrix::<T>(rng, n, d).scale(noise);
    t.axpy(T::one(), &x)?;
    t.normalize_rows();
    EmbeddingBatch::new(x, t, tau)
}
