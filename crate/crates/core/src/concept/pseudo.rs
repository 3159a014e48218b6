use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{log_sum_exp, softmax, Scalar};

pub const DEFAULT_TOP_K: usize = 10;

/// Sparse probability vector: distinct ids with positive probabilities
/// summing to one, listed by descending probability (ties by id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PseudoLabel<T> {
    entries: Vec<(usize, T)>,
}

impl<T: Scalar> PseudoLabel<T> {
    /// Validates and wraps explicit entries.
    pub fn from_entries(entries: Vec<(usize, T)>) -> Result<Self> {
        let label = Self { entries };
        label.validate(T::lit(1e-6))?;
        Ok(label)
    }

    pub fn entries(&self) -> &[(usize, T)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sum(&self) -> T {
        self.entries.iter().map(|&(_, p)| p).sum()
    }

    pub fn max_id(&self) -> Option<usize> {
        self.entries.iter().map(|&(i, _)| i).max()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<T> {
        let mut v = vec![T::zero(); dim];
        for &(i, p) in &self.entries {
            v[i] = p;
        }
        v
    }

    pub fn validate(&self, tol: T) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for &(i, p) in &self.entries {
            if !seen.insert(i) {
                return Err(invalid(format!("pseudo-label repeats class {i}")));
            }
            if !(p > T::zero()) || !p.is_finite() {
                return Err(invalid(format!("pseudo-label class {i} has probability {p}")));
            }
        }
        if !self.entries.is_empty() && (self.sum() - T::one()).abs() > tol {
            return Err(invalid(format!("pseudo-label sums to {}", self.sum())));
        }
        Ok(())
    }
}

/// Keeps the `k` largest entries of `p` (ties by lower index), drops zeros,
/// and renormalizes to sum one.
pub fn topk_sparsify<T: Scalar>(p: &[T], k: usize) -> Result<PseudoLabel<T>> {
    if k == 0 {
        return Err(invalid("top-k needs k >= 1"));
    }
    if let Some(bad) = p.iter().find(|v| !v.is_finite() || **v < T::zero()) {
        return Err(invalid(format!("probability entry {bad} is negative or non-finite")));
    }
    let mut order: Vec<usize> = (0..p.len()).filter(|&i| p[i] > T::zero()).collect();
    if order.is_empty() {
        return Err(invalid("probability vector has no positive mass"));
    }
    order.sort_by(|&a, &b| p[b].partial_cmp(&p[a]).expect("finite").then(a.cmp(&b)));
    order.truncate(k);
    let total: T = order.iter().map(|&i| p[i]).sum();
    // Already-normalized input is passed through untouched, which makes the
    // operation exactly idempotent.
    let tol = T::epsilon() * T::from_usize_lossy(4 * order.len());
    let entries = if (total - T::one()).abs() <= tol {
        order.iter().map(|&i| (i, p[i])).collect()
    } else {
        order.iter().map(|&i| (i, p[i] / total)).collect()
    };
    Ok(PseudoLabel { entries })
}

/// Cross-entropy of `softmax(logits)` against a pseudo-label, with its
/// gradient `softmax(logits) - label`.
pub fn ce_pseudo_loss<T: Scalar>(logits: &[T], label: &PseudoLabel<T>) -> Result<(T, Vec<T>)> {
    if let Some(i) = logits.iter().position(|z| !z.is_finite()) {
        return Err(Error::NonFinite {
            what: format!("logit {i}"),
            iteration: None,
        });
    }
    if let Some(m) = label.max_id() {
        if m >= logits.len() {
            return Err(invalid(format!(
                "label class {m} outside {} logits",
                logits.len()
            )));
        }
    }
    let lse = log_sum_exp(logits.iter().copied());
    let loss = label
        .entries
        .iter()
        .map(|&(i, q)| -q * (logits[i] - lse))
        .sum();
    let mut grad = softmax(logits);
    for &(i, q) in &label.entries {
        grad[i] -= q;
    }
    Ok((loss, grad))
}
