//! Minimal reverse-mode automatic differentiation over dense f64 matrices,
//! with sparse adjacency products as constant operators.

mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{compare_gradients, grad_check, GradCheckReport, ParamCheck};
pub use params::{Gradients, ParamId, ParameterSet};
pub use tape::{mix_spmv_t, NodeId, Tape, LOG_FLOOR};
pub use tensor::Tensor;
