//! Ground-truth systems, datasets and evaluation metrics.

pub mod arch;
pub mod dataset;
pub mod metrics;
pub mod standin;
pub mod task;

pub use arch::{build_model, hidden_widths, Scale};
pub use dataset::{control_vector, generate_dataset, sample_initial, Dataset, DatasetMeta, GenConfig, Range, Sampling, DEFAULT_CONTROLS};
pub use metrics::{
    energy_std, mean_std, model_rollouts, pendulum_acceleration_gap, per_trajectory_errors, prediction_error,
    prediction_errors, prediction_truth, test_error, train_error, trajectory_error,
};
pub use standin::truth_bundle;
pub use task::{acrobot_field, cartpole_field, pendulum_embedded_field, pendulum_rn_field, Task};
