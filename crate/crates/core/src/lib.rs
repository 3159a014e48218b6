//! Caption-graph data filtering, concept pseudo-labels, hard-negative
//! contrastive objectives and prompt-initialized linear probing.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar for callers that do not care.

// index loops mirror the formulas; negated comparisons reject NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod conllu;
pub mod error;
pub mod matfile;
pub mod matrix;
pub mod scalar;
pub mod semgraph;
pub mod catfilter;
pub mod concept;
pub mod hnnce;
pub mod gradcheck;
pub mod synth;
pub mod probe;
pub mod toy;

pub use conllu::{parse_conllu, DependencyParse, Token, Upos};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::Scalar;
pub use semgraph::{build_graph, complexity, ComplexityLevel, SemanticGraph};

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type EmbeddingBatch64 = hnnce::EmbeddingBatch<f64>;
pub type EmbeddingBatch32 = hnnce::EmbeddingBatch<f32>;
pub type HnConfig64 = hnnce::HnConfig<f64>;
pub type LossResult64 = hnnce::LossResult<f64>;
pub type PseudoLabel64 = concept::PseudoLabel<f64>;
pub type PseudoLabel32 = concept::PseudoLabel<f32>;
pub type ProbeProblem64 = probe::ProbeProblem<f64>;
pub type ProbeSolution64 = probe::ProbeSolution<f64>;
