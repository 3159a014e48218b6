use std::collections::BTreeSet;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

use super::ConceptVocab;

/// Uniform target over the concepts mentioned by one caption.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftTarget<T> {
    pub present: Vec<usize>,
    pub dense: Vec<T>,
}

/// `1/K` on each of the `K` distinct present ids, `0` elsewhere.
pub fn soft_targets<T: Scalar>(present: &[usize], vocab: &ConceptVocab) -> Result<SoftTarget<T>> {
    soft_targets_dim(present, vocab.len())
}

pub fn soft_targets_dim<T: Scalar>(present: &[usize], dim: usize) -> Result<SoftTarget<T>> {
    let ids: BTreeSet<usize> = present.iter().copied().collect();
    if ids.is_empty() {
        return Err(Error::EmptyPresentSet);
    }
    if let Some(&bad) = ids.iter().find(|&&i| i >= dim) {
        return Err(invalid(format!("concept id {bad} outside vocabulary of size {dim}")));
    }
    let mass = T::one() / T::from_usize_lossy(ids.len());
    let mut dense = vec![T::zero(); dim];
    for &i in &ids {
        dense[i] = mass;
    }
    Ok(SoftTarget {
        present: ids.into_iter().collect(),
        dense,
    })
}

/// Per-image sampling weights proportional to `1/sqrt(f)` where `f` is the
/// frequency of the image's rarest concept, scaled so the weights sum to
/// `target_length` (the expected number of draws).
pub fn sqrt_resample_weights<T: Scalar>(
    image_frequencies: &[Vec<u64>],
    target_length: usize,
) -> Result<Vec<T>> {
    let raw = image_frequencies
        .iter()
        .enumerate()
        .map(|(i, freqs)| {
            if freqs.contains(&0) {
                return Err(invalid(format!("image {i}: nonpositive concept frequency")));
            }
            let rarest = freqs.iter().min().ok_or(Error::EmptyPresentSet)?;
            Ok(T::one() / T::from_u64(*rarest).expect("frequency fits scalar").sqrt())
        })
        .collect::<Result<Vec<T>>>()?;
    let total: T = raw.iter().copied().sum();
    if raw.is_empty() {
        return Ok(raw);
    }
    let scale = T::from_usize_lossy(target_length) / total;
    Ok(raw.into_iter().map(|w| w * scale).collect())
}

/// Concept frequencies for each image's present ids, ready for [`sqrt_resample_weights`].
pub fn image_frequencies(vocab: &ConceptVocab, present: &[Vec<usize>]) -> Result<Vec<Vec<u64>>> {
    present
        .iter()
        .map(|ids| {
            ids.iter()
                .map(|&id| {
                    vocab
                        .frequency(id)
                        .ok_or_else(|| invalid(format!("concept id {id} not in vocabulary")))
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_target_examples() {
        let t: SoftTarget<f64> = soft_targets_dim(&[3], 5).unwrap();
        assert_eq!(t.dense, [0.0, 0.0, 0.0, 1.0, 0.0]);
        let t: SoftTarget<f64> = soft_targets_dim(&[1, 4, 7], 8).unwrap();
        for i in [1, 4, 7] {
            assert_eq!(t.dense[i], 1.0 / 3.0);
        }
        assert!((t.dense.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let t: SoftTarget<f32> = soft_targets_dim(&[2, 2, 5], 6).unwrap();
        assert_eq!(t.present, [2, 5]);
        assert_eq!(t.dense[2], 0.5);
        assert_eq!(t.dense[5], 0.5);
    }

    #[test]
    fn soft_target_errors() {
        assert!(matches!(soft_targets_dim::<f64>(&[], 3), Err(Error::EmptyPresentSet)));
        assert!(soft_targets_dim::<f64>(&[3], 3).is_err());
    }

    #[test]
    fn resample_ratio_and_uniformity() {
        let w: Vec<f64> = sqrt_resample_weights(&[vec![100], vec![1]], 11).unwrap();
        assert!((w[1] / w[0] - 10.0).abs() < 1e-12);
        let w: Vec<f64> = sqrt_resample_weights(&[vec![7], vec![7, 9], vec![7]], 30).unwrap();
        for x in &w {
            assert!((x - 10.0).abs() < 1e-12);
        }
        assert!(sqrt_resample_weights::<f64>(&[vec![0]], 10).is_err());
        assert!(sqrt_resample_weights::<f64>(&[vec![]], 10).is_err());
    }
}
