//! Evaluation metrics. A trajectory's error is the sum over its steps of
//! the mean squared state error; dataset errors average trajectories.

use std::f64::consts::PI;

use super::dataset::Dataset;
use super::task::Task;
use crate::diffkit::Tensor;
use crate::error::{ensure, Result};
use crate::odeflow::{rollout_batch, Trajectory, VectorField};

/// Σ_k mean_d (x̂_k − x_k)² over steps k ≥ 1.
pub fn trajectory_error(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> f64 {
    pred.iter()
        .zip(truth)
        .skip(1)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
        .sum()
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len().max(1) as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Model rollouts from each trajectory's first state under its control.
pub fn model_rollouts<F: VectorField + ?Sized>(f: &F, trajs: &[Trajectory]) -> Result<Vec<Vec<Vec<f64>>>> {
    ensure(!trajs.is_empty(), || "no trajectories to evaluate".into())?;
    let (steps, dt) = (trajs[0].steps(), trajs[0].dt);
    ensure(trajs.iter().all(|t| t.steps() == steps && t.dt == dt), || "trajectories differ in length or step size".into())?;
    let x0 = Tensor::from_rows(&trajs.iter().map(|t| t.states[0].clone()).collect::<Vec<_>>());
    let u = Tensor::from_rows(&trajs.iter().map(|t| t.u.clone()).collect::<Vec<_>>());
    let steps: Vec<Vec<Vec<f64>>> = rollout_batch(f, &x0, &u, steps, dt)?.iter().map(Tensor::to_rows).collect();
    Ok((0..trajs.len()).map(|i| steps.iter().map(|s| s[i].clone()).collect()).collect())
}

/// Per-trajectory errors of model rollouts against recorded trajectories.
pub fn per_trajectory_errors<F: VectorField + ?Sized>(f: &F, trajs: &[Trajectory]) -> Result<Vec<f64>> {
    let preds = model_rollouts(f, trajs)?;
    Ok(preds.iter().zip(trajs).map(|(p, t)| trajectory_error(p, &t.states)).collect())
}

pub fn train_error<F: VectorField + ?Sized>(f: &F, ds: &Dataset) -> Result<f64> {
    Ok(mean_std(&per_trajectory_errors(f, &ds.train)?).0)
}

pub fn test_error<F: VectorField + ?Sized>(f: &F, ds: &Dataset) -> Result<f64> {
    Ok(mean_std(&per_trajectory_errors(f, &ds.test)?).0)
}

/// Truth rollouts from the training set's initial states under zero control.
pub fn prediction_truth(ds: &Dataset, steps: usize) -> Result<Vec<Trajectory>> {
    let task = ds.task();
    let u = vec![0.0; task.dims().ctrl];
    ds.train_initial_states().iter().map(|x| task.simulate(x, &u, steps, ds.meta.dt)).collect()
}

/// Per-trajectory errors of `steps`-step zero-control predictions.
pub fn prediction_errors<F: VectorField + ?Sized>(f: &F, ds: &Dataset, steps: usize) -> Result<Vec<f64>> {
    per_trajectory_errors(f, &prediction_truth(ds, steps)?)
}

pub fn prediction_error<F: VectorField + ?Sized>(f: &F, ds: &Dataset, steps: usize) -> Result<f64> {
    Ok(mean_std(&prediction_errors(f, ds, steps)?).0)
}

/// Standard deviation of the true energy along each state sequence.
pub fn energy_std(task: Task, states: &[Vec<f64>]) -> Result<f64> {
    let h = states.iter().map(|s| task.energy(s)).collect::<Result<Vec<_>>>()?;
    Ok(mean_std(&h).1)
}

/// Relative RMS gap between a pendulum model's acceleration at rest and
/// `−15 sin q + 3u`, over `points` angles in [−π, π] and the given controls.
pub fn pendulum_acceleration_gap<F: VectorField + ?Sized>(f: &F, points: usize, controls: &[f64]) -> Result<f64> {
    let mut x = Vec::new();
    let mut u = Vec::new();
    let mut want = Vec::new();
    for &c in controls {
        for i in 0..points {
            let q = -PI + 2.0 * PI * i as f64 / (points - 1) as f64;
            x.push(vec![q.cos(), q.sin(), 0.0]);
            u.push(vec![c]);
            want.push(-15.0 * q.sin() + 3.0 * c);
        }
    }
    let out = f.eval_batch(&Tensor::from_rows(&x), &Tensor::from_rows(&u))?;
    let got = out.col_vec(2);
    let num: f64 = got.iter().zip(&want).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = want.iter().map(|b| b * b).sum();
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envsim::{generate_dataset, truth_bundle, DEFAULT_CONTROLS};
    use crate::odeflow::FnField;

    #[test]
    fn stand_in_errors_vanish_on_task1() {
        let ds = generate_dataset(Task::Task1, 8, &DEFAULT_CONTROLS, 20, 0.05, 0).unwrap();
        let b = truth_bundle(Task::Task1).unwrap();
        assert!(train_error(&b, &ds).unwrap() < 1e-20);
        assert!(prediction_error(&b, &ds, 40).unwrap() < 1e-20);
    }

    #[test]
    fn stand_in_errors_are_truncation_level_on_embedded_tasks() {
        // the acrobot's step of 0.2 is too coarse for the embedded and
        // generalized discretizations to agree
        for task in [Task::Task2, Task::Task3] {
            let ds = generate_dataset(task, 4, &DEFAULT_CONTROLS, 20, task.dt(), 0).unwrap();
            let b = truth_bundle(task).unwrap();
            let e = train_error(&b, &ds).unwrap();
            assert!(e < 1e-5, "{task}: {e}");
        }
    }

    #[test]
    fn zero_field_error_is_displacement() {
        let ds = generate_dataset(Task::Task1, 5, &[0.0, 1.0], 20, 0.05, 4).unwrap();
        let zero = FnField(|x: &[f64], _: &[f64]| Ok(vec![0.0; x.len()]));
        let want: f64 = ds
            .train
            .iter()
            .map(|t| {
                t.states[1..]
                    .iter()
                    .map(|s| ((s[0] - t.states[0][0]).powi(2) + (s[1] - t.states[0][1]).powi(2)) / 2.0)
                    .sum::<f64>()
            })
            .sum::<f64>()
            / ds.train.len() as f64;
        let got = train_error(&zero, &ds).unwrap();
        assert!((got - want).abs() < 1e-12 * want);
    }

    #[test]
    fn acceleration_gap_of_truth_is_zero() {
        let b = truth_bundle(Task::Task2).unwrap();
        assert!(pendulum_acceleration_gap(&b, 101, &DEFAULT_CONTROLS).unwrap() < 1e-14);
        let zero = FnField(|x: &[f64], _: &[f64]| Ok(vec![0.0; x.len()]));
        assert!((pendulum_acceleration_gap(&zero, 101, &DEFAULT_CONTROLS).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_std_basics() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
    }
}
