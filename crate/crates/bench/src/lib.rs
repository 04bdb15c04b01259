//! Fixtures shared by the benchmarks.

use symoden_core::envsim::{build_model, GenConfig, Scale, Task};
use symoden_core::hamdyn::ModelBundle;
use symoden_core::odeflow::Trajectory;
use symoden_core::Tensor;

pub fn desk_model(task: Task) -> ModelBundle {
    build_model(task, task.symoden_variant(), Scale::Desk, 7).expect("desk model")
}

/// `rows` states spread over the task's sampling box, with zero control.
pub fn state_batch(task: Task, rows: usize) -> (Tensor, Tensor) {
    let ranges = task.ranges();
    let states: Vec<Vec<f64>> = (0..rows)
        .map(|i| {
            let g: Vec<f64> = ranges
                .iter()
                .enumerate()
                .map(|(k, &(_, lo, hi))| lo + (hi - lo) * (0.5 + 0.5 * ((i * (k + 3)) as f64 * 0.731).sin()))
                .collect();
            task.embed(&g)
        })
        .collect();
    let u = Tensor::zeros(rows, task.dims().ctrl);
    (Tensor::from_rows(&states), u)
}

pub fn small_training_set(task: Task, n_init: usize) -> Vec<Trajectory> {
    GenConfig::new(task, n_init, 3).generate().expect("dataset").train
}
