//! Tanh networks and the structured heads built on them.

pub mod component;
pub mod expr;
pub mod mlp;

pub use component::{
    input_matrix_eval, lower_index, mass_inv, mass_inv_dual, mass_inv_from_outputs, potential_eval, BoundNet,
    Component, Factor, Head, Net, DEFAULT_EPSILON,
};
pub use expr::Expr;
pub use mlp::{init_params, mlp_eval, BoundMlp, Layer, MlpParams, MlpSpec};
