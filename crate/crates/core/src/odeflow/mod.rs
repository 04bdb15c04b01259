//! Integration, losses and training.

pub mod adam;
pub mod integrate;
pub mod loss;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use integrate::{make_windows, rk4_step, rk4_step_batch, rk4_tape, rollout, rollout_batch, FnField, Trajectory, VectorField, Window};
pub use loss::{
    finite_differences, gradient_matching_loss, integrated_error_tape, matching_error_tape, stack_windows,
    trajectory_loss,
};
pub use train::{group_by_control, train, EpochRecord, LossReport, Objective, TrainConfig};
