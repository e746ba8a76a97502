//! Dense numerics and reverse-mode differentiation.

mod dense;
mod sparse;
mod tape;

pub use dense::{dot, Tensor};
pub use sparse::Propagation;
pub use tape::{cosine, sigmoid, BatchStats, Gradients, Tape, Var, SCE_NORM_EPS};
