//! Cross-modal contrastive objectives: InfoNCE and its hard-negative
//! variant with importance weights on in-batch negatives.
//!
//! For a batch of `n` image/text pairs with similarities
//! `S_ij = x_i . t_j / tau`, the hard-negative loss is
//!
//! ```text
//! L = - sum_i log[ e^{S_ii} / (alpha e^{S_ii} + sum_{j!=i} e^{S_ij} w_i2t[i][j]) ]
//!     - sum_i log[ e^{S_ii} / (alpha e^{S_ii} + sum_{j!=i} e^{S_ji} w_t2i[i][j]) ]
//! ```
//!
//! with `w_i2t[i][j] = (n-1) e^{beta S_ij} / sum_{k!=i} e^{beta S_ik}` and
//! `w_t2i` its column-wise analogue. `alpha = 1, beta = 0` recovers InfoNCE.

mod batch;
mod concentration;
mod loss;
mod objective;
mod weights;

pub use batch::{EmbeddingBatch, LogitScale, LOGIT_SCALE_INIT, LOGIT_SCALE_MAX, MIN_TAU};
pub use concentration::{beta_concentration_probe, ConcentrationRow};
pub use loss::{
    backprop_similarity, hn_nce_loss, hn_nce_loss_with_weights, info_nce_loss, similarity_matrix,
    LossResult,
};
pub use objective::{concept_ce_term, total_objective, ConceptHead, ObjectiveResult};
pub use weights::hn_weights;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// How gradients treat the hard-negative weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightGradient {
    /// Weights are constants of the current batch.
    #[default]
    Detached,
    /// Differentiate through the weights as functions of the similarities.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HnConfig<T> {
    /// Mass on the positive term in the denominator, in `(0, 1]`.
    pub alpha: T,
    /// Concentration of the negative weights, `>= 0`.
    pub beta: T,
    #[serde(default)]
    pub weight_gradient: WeightGradient,
}

impl<T: Scalar> HnConfig<T> {
    pub fn new(alpha: T, beta: T) -> Result<Self> {
        let cfg = Self {
            alpha,
            beta,
            weight_gradient: WeightGradient::Detached,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `alpha = 1, beta = 0`: plain InfoNCE.
    pub fn info_nce() -> Self {
        Self {
            alpha: T::one(),
            beta: T::zero(),
            weight_gradient: WeightGradient::Detached,
        }
    }

    /// Defaults for large, noisy web-scale data.
    pub fn large_noisy() -> Self {
        Self {
            alpha: T::one(),
            beta: T::lit(0.25),
            weight_gradient: WeightGradient::Detached,
        }
    }

    /// Defaults for smaller, cleaner data where false negatives are likelier.
    pub fn small_clean() -> Self {
        Self {
            alpha: T::lit(0.999),
            beta: T::lit(0.5),
            weight_gradient: WeightGradient::Detached,
        }
    }

    pub fn with_weight_gradient(mut self, mode: WeightGradient) -> Self {
        self.weight_gradient = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero() && self.alpha <= T::one()) {
            return Err(invalid(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        if !(self.beta >= T::zero()) || !self.beta.is_finite() {
            return Err(invalid(format!("beta {} must be finite and >= 0", self.beta)));
        }
        Ok(())
    }
}
