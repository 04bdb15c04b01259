//! Energy-shaping controllers from learned energies, and closed-loop runs.

pub mod closed_loop;
pub mod law;

pub use closed_loop::{closed_loop_rollout, ClosedLoop, FieldPlant, Plant, Policy};
pub use law::{
    actuation_solve, config_gradient, damping_injection, pd_energy_controller, pendulum_swingup_controller,
    potential_shaping_beta, split_state, wrap_angle, Actuation, ControlLaw, Shaping, MAX_ACTUATION_CONDITION,
};
