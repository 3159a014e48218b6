//! Concept vocabularies and distillation targets.

mod io;
mod pseudo;
mod targets;
mod vocab;

pub use io::{PredictionRecord, PseudoLabelRecord};
pub use pseudo::{ce_pseudo_loss, topk_sparsify, PseudoLabel, DEFAULT_TOP_K};
pub use targets::{image_frequencies, soft_targets, soft_targets_dim, sqrt_resample_weights, SoftTarget};
pub use vocab::{build_vocab, Concept, ConceptCounter, ConceptVocab, Lexicon, DEFAULT_MIN_COUNT};
