//! Training objectives: the integrated τ-step loss and the finite-difference
//! gradient-matching ablation.

use super::integrate::{rk4_step_batch, rk4_tape, Trajectory, VectorField, Window};
use crate::diffkit::{Tape, Tensor, Var};
use crate::error::{ensure, Result};
use crate::hamdyn::{BoundBundle, ModelBundle};

fn stack(rows: impl Iterator<Item = Vec<f64>>) -> Tensor {
    let rows: Vec<Vec<f64>> = rows.collect();
    Tensor::from_rows(&rows)
}

/// Windows stacked into `(roots, controls, targets per step)`.
pub fn stack_windows(windows: &[Window]) -> Result<(Tensor, Tensor, Vec<Tensor>)> {
    ensure(!windows.is_empty(), || "no windows".into())?;
    let tau = windows[0].targets.len();
    ensure(windows.iter().all(|w| w.targets.len() == tau), || "windows of mixed horizon".into())?;
    let roots = stack(windows.iter().map(|w| w.root.clone()));
    let u = stack(windows.iter().map(|w| w.u.clone()));
    let targets = (0..tau).map(|k| stack(windows.iter().map(|w| w.targets[k].clone()))).collect();
    Ok((roots, u, targets))
}

/// Squared error of τ-step rollouts against the targets, summed over
/// steps and state dimensions, averaged over windows.
pub fn trajectory_loss<F: VectorField + ?Sized>(f: &F, windows: &[Window], h: f64) -> Result<f64> {
    let (mut x, u, targets) = stack_windows(windows)?;
    let mut total = 0.0;
    for target in &targets {
        x = rk4_step_batch(f, &x, h, &u)?;
        total += x.zip_map(target, |a, b| (a - b) * (a - b)).sum();
    }
    Ok(total / windows.len() as f64)
}

/// Central differences inside, one-sided at the two ends.
pub fn finite_differences(traj: &Trajectory) -> Result<Vec<Vec<f64>>> {
    ensure(traj.states.len() >= 2, || "finite differences need at least two states".into())?;
    let h = traj.dt;
    ensure(h > 0.0, || format!("step size must be positive, got {h}"))?;
    let s = &traj.states;
    let n = s.len() - 1;
    let diff = |a: &[f64], b: &[f64], scale: f64| a.iter().zip(b).map(|(x, y)| (x - y) / scale).collect();
    Ok((0..=n)
        .map(|i| match i {
            0 => diff(&s[1], &s[0], h),
            i if i == n => diff(&s[n], &s[n - 1], h),
            i => diff(&s[i + 1], &s[i - 1], 2.0 * h),
        })
        .collect())
}

/// Mean squared difference between the field at the recorded states and
/// their finite-difference derivatives.
pub fn gradient_matching_loss<F: VectorField + ?Sized>(f: &F, traj: &Trajectory, h: f64) -> Result<f64> {
    ensure(h > 0.0, || format!("step size must be positive, got {h}"))?;
    let spaced = Trajectory { dt: h, ..traj.clone() };
    let d = finite_differences(&spaced)?;
    let x = Tensor::from_rows(&traj.states);
    let u = Tensor::from_rows(&vec![traj.u.clone(); traj.states.len()]);
    let fx = f.eval_batch(&x, &u)?;
    let target = Tensor::from_rows(&d);
    let sq = fx.zip_map(&target, |a, b| (a - b) * (a - b));
    Ok(sq.sum() / sq.data().len() as f64)
}

fn cols(t: &mut Tape, m: &Tensor) -> Vec<Var> {
    (0..m.cols()).map(|j| t.constant(Tensor::column(m.col_vec(j)))).collect()
}

fn squared_error(t: &mut Tape, pred: &[Var], target: &Tensor) -> Var {
    let target = cols(t, target);
    let terms: Vec<Var> = pred
        .iter()
        .zip(target)
        .map(|(&p, y)| {
            let d = t.sub(p, y);
            let sq = t.mul(d, d);
            t.sum(sq)
        })
        .collect();
    terms.into_iter().reduce(|a, b| t.add(a, b)).unwrap()
}

/// Summed squared error of τ-step model rollouts, recorded on `t`.
pub fn integrated_error_tape(
    model: &ModelBundle,
    b: &BoundBundle,
    t: &mut Tape,
    roots: &Tensor,
    u: &Tensor,
    targets: &[Tensor],
    h: f64,
) -> Result<Var> {
    let mut x = cols(t, roots);
    let uc = cols(t, u);
    let mut total: Option<Var> = None;
    for target in targets {
        x = rk4_tape(t, |t, x| model.field_tape(b, t, x, &uc), &x, h)?;
        let e = squared_error(t, &x, target);
        total = Some(match total {
            Some(acc) => t.add(acc, e),
            None => e,
        });
    }
    Ok(total.unwrap())
}

/// Summed squared error between the model field and derivative targets.
pub fn matching_error_tape(
    model: &ModelBundle,
    b: &BoundBundle,
    t: &mut Tape,
    states: &Tensor,
    u: &Tensor,
    derivs: &Tensor,
) -> Result<Var> {
    let x = cols(t, states);
    let uc = cols(t, u);
    let f = model.field_tape(b, t, &x, &uc)?;
    Ok(squared_error(t, &f, derivs))
}
