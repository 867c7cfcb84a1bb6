//! Dense matrices and the reverse-mode differentiation tape.

mod check;
mod matrix;
mod tape;

pub use check::{evaluate, finite_diff_check, gradient};
pub use matrix::Matrix;
pub use tape::{Binary, Gradients, Reduce, Tape, Unary, Var, EPS_DIV, EPS_ROW};
