//! Differentiation engine: a batched reverse-mode tape, forward-mode duals,
//! and tangents carried on the tape so state-space partials stay
//! differentiable with respect to parameters.

pub mod check;
pub mod dual;
pub mod dvar;
pub mod tape;
pub mod tensor;

pub use check::{grad_check, grad_check_leaves};
pub use dual::{jvp, Dual};
pub use dvar::DualVar;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
