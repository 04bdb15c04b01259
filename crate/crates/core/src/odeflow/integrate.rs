//! Fixed-step RK4 and rollouts.

use serde::{Deserialize, Serialize};

use crate::diffkit::{Tape, Tensor, Var};
use crate::error::{ensure, Error, Result};
use crate::hamdyn::ModelBundle;

/// States sampled every `dt` under one constant control.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub u: Vec<f64>,
    pub dt: f64,
}

impl Trajectory {
    /// Number of steps (one less than the number of states).
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }
}

/// A field that can be evaluated on a batch of rows.
pub trait VectorField {
    fn eval_batch(&self, x: &Tensor, u: &Tensor) -> Result<Tensor>;
}

impl VectorField for ModelBundle {
    fn eval_batch(&self, x: &Tensor, u: &Tensor) -> Result<Tensor> {
        self.field_batch(x, u)
    }
}

/// Adapts a pointwise closure `f(x, u)` into a [`VectorField`].
pub struct FnField<F>(pub F);

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64], &[f64]) -> Result<Vec<f64>>,
{
    fn eval_batch(&self, x: &Tensor, u: &Tensor) -> Result<Tensor> {
        let mut data = Vec::with_capacity(x.data().len());
        for r in 0..x.rows() {
            let xr = &x.data()[r * x.cols()..(r + 1) * x.cols()];
            let ur = &u.data()[r * u.cols()..(r + 1) * u.cols()];
            let fr = (self.0)(xr, ur)?;
            ensure(fr.len() == x.cols(), || format!("field returned {} values for a state of {}", fr.len(), x.cols()))?;
            data.extend(fr);
        }
        Ok(Tensor::new(x.rows(), x.cols(), data))
    }
}

fn axpy(x: &Tensor, a: f64, k: &Tensor) -> Tensor {
    x.zip_map(k, |x, k| x + a * k)
}

/// One classical RK4 step on every row, with `u` held constant.
pub fn rk4_step_batch<F: VectorField + ?Sized>(f: &F, x: &Tensor, h: f64, u: &Tensor) -> Result<Tensor> {
    ensure(h > 0.0, || format!("step size must be positive, got {h}"))?;
    let stage = |i: usize, x: &Tensor| -> Result<Tensor> {
        let k = f.eval_batch(x, u)?;
        if k.is_finite() {
            Ok(k)
        } else {
            Err(Error::NumericFault(format!("non-finite value in rk4 stage {i}")))
        }
    };
    let k1 = stage(1, x)?;
    let k2 = stage(2, &axpy(x, h / 2.0, &k1))?;
    let k3 = stage(3, &axpy(x, h / 2.0, &k2))?;
    let k4 = stage(4, &axpy(x, h, &k3))?;
    let mut out = x.clone();
    for (i, o) in out.data_mut().iter_mut().enumerate() {
        let (a, b, c, d) = (k1.data()[i], k2.data()[i], k3.data()[i], k4.data()[i]);
        *o += h / 6.0 * (a + 2.0 * b + 2.0 * c + d);
    }
    Ok(out)
}

pub fn rk4_step<F: VectorField + ?Sized>(f: &F, x: &[f64], h: f64, u: &[f64]) -> Result<Vec<f64>> {
    Ok(rk4_step_batch(f, &Tensor::row(x.to_vec()), h, &Tensor::row(u.to_vec()))?.into_data())
}

/// `x0` followed by `steps` RK4 states under constant `u`.
pub fn rollout<F: VectorField + ?Sized>(f: &F, x0: &[f64], u: &[f64], steps: usize, h: f64) -> Result<Trajectory> {
    ensure(steps >= 1, || "rollout needs at least one step".into())?;
    let mut states = vec![x0.to_vec()];
    for s in 0..steps {
        let next = rk4_step(f, states.last().unwrap(), h, u).map_err(|e| e.context(format!("step {s}")))?;
        states.push(next);
    }
    Ok(Trajectory { states, u: u.to_vec(), dt: h })
}

/// Batched rollout: element `k` holds the states after `k` steps.
pub fn rollout_batch<F: VectorField + ?Sized>(
    f: &F,
    x0: &Tensor,
    u: &Tensor,
    steps: usize,
    h: f64,
) -> Result<Vec<Tensor>> {
    let mut out = vec![x0.clone()];
    for s in 0..steps {
        let next = rk4_step_batch(f, out.last().unwrap(), h, u).map_err(|e| e.context(format!("step {s}")))?;
        out.push(next);
    }
    Ok(out)
}

/// RK4 step recorded on a tape, over state columns.
pub fn rk4_tape<F>(t: &mut Tape, mut f: F, x: &[Var], h: f64) -> Result<Vec<Var>>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Vec<Var>>,
{
    let mut stage = |t: &mut Tape, i: usize, x: &[Var]| -> Result<Vec<Var>> {
        let k = f(t, x)?;
        if k.iter().all(|&v| t.value(v).is_finite()) {
            Ok(k)
        } else {
            Err(Error::NumericFault(format!("non-finite value in rk4 stage {i}")))
        }
    };
    let shift = |t: &mut Tape, a: f64, k: &[Var]| -> Vec<Var> {
        x.iter()
            .zip(k)
            .map(|(&xi, &ki)| {
                let s = t.scale(ki, a);
                t.add(xi, s)
            })
            .collect()
    };
    let k1 = stage(t, 1, x)?;
    let x2 = shift(t, h / 2.0, &k1);
    let k2 = stage(t, 2, &x2)?;
    let x3 = shift(t, h / 2.0, &k2);
    let k3 = stage(t, 3, &x3)?;
    let x4 = shift(t, h, &k3);
    let k4 = stage(t, 4, &x4)?;
    Ok((0..x.len())
        .map(|i| {
            let b = t.add(k2[i], k3[i]);
            let b2 = t.scale(b, 2.0);
            let s = t.add(k1[i], b2);
            let s = t.add(s, k4[i]);
            let s = t.scale(s, h / 6.0);
            t.add(x[i], s)
        })
        .collect())
}

/// A training window: the state at `t_i` and the `τ` states after it.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    pub root: Vec<f64>,
    pub targets: Vec<Vec<f64>>,
    pub u: Vec<f64>,
}

/// All windows `i = 0..=n-τ` of a trajectory with `n + 1` states.
pub fn make_windows(traj: &Trajectory, tau: usize) -> Result<Vec<Window>> {
    ensure(tau >= 1, || "tau must be at least 1".into())?;
    ensure(traj.states.len() > tau, || {
        format!("trajectory with {} states is too short for tau = {tau}", traj.states.len())
    })?;
    Ok((0..traj.states.len() - tau)
        .map(|i| Window {
            root: traj.states[i].clone(),
            targets: traj.states[i + 1..=i + tau].to_vec(),
            u: traj.u.clone(),
        })
        .collect())
}
