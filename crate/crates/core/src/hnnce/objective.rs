use crate::concept::{ce_pseudo_loss, PseudoLabel};
use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::batch::EmbeddingBatch;
use super::loss::{hn_nce_loss, LossResult};
use super::HnConfig;

/// Concept-classifier logits for a batch and per-row pseudo-labels.
/// Rows without a label contribute nothing.
#[derive(Debug, Clone, Copy)]
pub struct ConceptHead<'a, T> {
    pub logits: &'a Matrix<T>,
    pub labels: &'a [Option<PseudoLabel<T>>],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveResult<T> {
    /// Contrastive term plus both summed cross-entropy terms.
    pub loss: T,
    pub contrastive: LossResult<T>,
    pub obj_loss: T,
    pub attr_loss: T,
    pub grad_obj_logits: Option<Matrix<T>>,
    pub grad_attr_logits: Option<Matrix<T>>,
}

/// Hard-negative contrastive loss plus object and attribute cross-entropy.
/// The terms share no parameters here, so the gradients are simply additive.
pub fn total_objective<T: Scalar>(
    batch: &EmbeddingBatch<T>,
    cfg: &HnConfig<T>,
    obj: Option<ConceptHead<'_, T>>,
    attr: Option<ConceptHead<'_, T>>,
) -> Result<ObjectiveResult<T>> {
    let contrastive = hn_nce_loss(batch, cfg)?;
    let (obj_loss, grad_obj_logits) = split(obj.map(|h| concept_ce_term(batch.n(), h)).transpose()?);
    let (attr_loss, grad_attr_logits) = split(attr.map(|h| concept_ce_term(batch.n(), h)).transpose()?);
    Ok(ObjectiveResult {
        loss: contrastive.loss + obj_loss + attr_loss,
        contrastive,
        obj_loss,
        attr_loss,
        grad_obj_logits,
        grad_attr_logits,
    })
}

fn split<T: Scalar>(term: Option<(T, Matrix<T>)>) -> (T, Option<Matrix<T>>) {
    match term {
        Some((l, g)) => (l, Some(g)),
        None => (T::zero(), None),
    }
}

/// Summed pseudo-label cross-entropy over the labelled rows of a head and
/// its gradient wrt the logits (zero rows where the label is absent).
pub fn concept_ce_term<T: Scalar>(n: usize, head: ConceptHead<'_, T>) -> Result<(T, Matrix<T>)> {
    if head.logits.rows() != n || head.labels.len() != n {
        return Err(invalid(format!(
            "concept head has {} logit rows and {} labels for a batch of {n}",
            head.logits.rows(),
            head.labels.len()
        )));
    }
    let mut grad = Matrix::zeros(n, head.logits.cols());
    let mut loss = T::zero();
    for (i, label) in head.labels.iter().enumerate() {
        if let Some(label) = label {
            let (l, g) = ce_pseudo_loss(head.logits.row(i), label)?;
            loss += l;
            grad.row_mut(i).copy_from_slice(&g);
        }
    }
    Ok((loss, grad))
}
