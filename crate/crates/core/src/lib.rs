//! Differentiable mining of first-order Horn rules from knowledge graphs.
//!
//! A head relation's rules are scored through a rank-L sum of products of
//! mixed adjacency operators. The mixing coefficients come from per-rank
//! bidirectional LSTMs driven by a head-relation embedding, so training is
//! plain gradient descent, and the learned coefficients expand back into a
//! ranked list of rules.

pub mod diffgraph;
pub mod error;
pub mod eval;
pub mod kg;
pub mod model;
pub mod parallel;
pub mod rules;
pub mod trainer;

pub use error::{Error, Result};
