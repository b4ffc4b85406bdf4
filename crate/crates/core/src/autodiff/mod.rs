//! Minimal reverse-mode automatic differentiation over dense `f64` matrices.

mod gradcheck;
mod matrix;
mod tape;

pub use gradcheck::{central_difference, grad_check, relative_error, REL_ERR_FLOOR};
pub use matrix::Matrix;
pub use tape::{Gradients, Tape, Var};
