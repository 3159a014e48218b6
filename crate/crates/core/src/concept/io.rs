//! Line-delimited teacher predictions and pseudo-labels.

use serde::{Deserialize, Serialize};

use super::{topk_sparsify, PseudoLabel};
use crate::error::{invalid, Result};

/// Dense teacher probabilities for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub obj: Vec<f64>,
    pub attr: Vec<f64>,
}

/// Stored form: `{"id": .., "obj": [[class, prob], ..], "attr": [[class, prob], ..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelRecord {
    pub id: String,
    pub obj: PseudoLabel<f64>,
    pub attr: PseudoLabel<f64>,
}

impl PredictionRecord {
    /// Sparsifies both heads after checking them against the vocabulary sizes.
    pub fn sparsify(&self, k: usize, obj_dim: usize, attr_dim: usize) -> Result<PseudoLabelRecord> {
        for (name, v, dim) in [("obj", &self.obj, obj_dim), ("attr", &self.attr, attr_dim)] {
            if v.len() != dim {
                return Err(invalid(format!(
                    "record {}: {name} has {} probabilities, vocabulary has {dim}",
                    self.id,
                    v.len()
                )));
            }
        }
        Ok(PseudoLabelRecord {
            id: self.id.clone(),
            obj: topk_sparsify(&self.obj, k)?,
            attr: topk_sparsify(&self.attr, k)?,
        })
    }
}
