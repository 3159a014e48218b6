use crate::error::Result;
use crate::scalar::Scalar;

use super::batch::EmbeddingBatch;
use super::loss::similarity_matrix;
use super::weights::hn_weights;

/// How much negative weight mass sits on the single hardest negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationRow<T> {
    pub beta: T,
    /// Smallest over anchors (both directions) of `max_j w_ij / (n-1)`.
    pub min_fraction: T,
    pub mean_fraction: T,
}

/// Evaluates the weight concentration of a fixed batch at each `beta`.
pub fn beta_concentration_probe<T: Scalar>(
    batch: &EmbeddingBatch<T>,
    betas: &[T],
) -> Result<Vec<ConcentrationRow<T>>> {
    let s = similarity_matrix(batch);
    let n = batch.n();
    let mass = T::from_usize_lossy(n - 1);
    let mut out = Vec::with_capacity(betas.len());
    for &beta in betas {
        if !(beta >= T::zero() && beta.is_finite()) {
            return Err(crate::error::invalid(format!("beta {beta} must be finite and >= 0")));
        }
        let (w1, w2) = hn_weights(&s, beta);
        let fractions: Vec<T> = w1
            .iter_rows()
            .chain(w2.iter_rows())
            .map(|row| row.iter().copied().fold(T::zero(), T::max) / mass)
            .collect();
        let min_fraction = fractions.iter().copied().fold(T::infinity(), T::min);
        let mean_fraction = fractions.iter().copied().sum::<T>() / T::from_usize_lossy(fractions.len());
        out.push(ConcentrationRow {
            beta,
            min_fraction,
            mean_fraction,
        });
    }
    Ok(out)
}
