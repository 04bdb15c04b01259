//! Closed-loop simulation with a zero-order hold on the control.

use super::law::ControlLaw;
use crate::envsim::Task;
use crate::error::{Error, Result};
use crate::odeflow::{rk4_step, VectorField};

/// Advances a plant by one step under a held control.
pub trait Plant {
    fn step(&self, x: &[f64], u: &[f64], dt: f64) -> Result<Vec<f64>>;
}

/// The task's truth system (integrated in generalized coordinates).
impl Plant for Task {
    fn step(&self, x: &[f64], u: &[f64], dt: f64) -> Result<Vec<f64>> {
        let tr = self.simulate(x, u, 1, dt)?;
        Ok(tr.states.into_iter().nth(1).expect("one step"))
    }
}

/// Any vector field, stepped with RK4.
pub struct FieldPlant<'a, F: VectorField + ?Sized>(pub &'a F);

impl<F: VectorField + ?Sized> Plant for FieldPlant<'_, F> {
    fn step(&self, x: &[f64], u: &[f64], dt: f64) -> Result<Vec<f64>> {
        rk4_step(self.0, x, dt, u)
    }
}

/// A state feedback law.
pub trait Policy {
    fn control(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl Policy for ControlLaw {
    fn control(&self, x: &[f64]) -> Result<Vec<f64>> {
        ControlLaw::control(self, x)
    }
}

impl<F: Fn(&[f64]) -> Result<Vec<f64>>> Policy for F {
    fn control(&self, x: &[f64]) -> Result<Vec<f64>> {
        self(x)
    }
}

/// States `x_0..x_n` and the controls `u_0..u_{n-1}` applied between them.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoop {
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub dt: f64,
}

impl ClosedLoop {
    pub fn max_abs_control(&self) -> f64 {
        self.controls.iter().flatten().fold(0.0, |m, u| m.max(u.abs()))
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("at least the initial state")
    }

    /// Index of the first state meeting `pred`, if any.
    pub fn first_reaching(&self, pred: impl Fn(&[f64]) -> bool) -> Option<usize> {
        self.states.iter().position(|s| pred(s))
    }

    /// `t, <state names>, u0, u1, ...`; the final state row has no control.
    pub fn to_csv(&self, state_names: &[&str]) -> String {
        let ctrl = self.controls.first().map_or(0, Vec::len);
        let mut head: Vec<String> = vec!["t".into()];
        head.extend(state_names.iter().map(|s| s.to_string()));
        head.extend((0..ctrl).map(|i| format!("u{i}")));
        let mut out = head.join(",") + "\n";
        for (k, s) in self.states.iter().enumerate() {
            let mut row = vec![format!("{}", k as f64 * self.dt)];
            row.extend(s.iter().map(|v| v.to_string()));
            match self.controls.get(k) {
                Some(u) => row.extend(u.iter().map(|v| v.to_string())),
                None => row.extend((0..ctrl).map(|_| String::new())),
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Evaluates the law at each state and holds it through one plant step.
pub fn closed_loop_rollout<P: Plant + ?Sized, L: Policy + ?Sized>(
    plant: &P,
    law: &L,
    x0: &[f64],
    steps: usize,
    dt: f64,
) -> Result<ClosedLoop> {
    let mut states = vec![x0.to_vec()];
    let mut controls = Vec::with_capacity(steps);
    for k in 0..steps {
        let x = states.last().unwrap();
        let u = law.control(x).map_err(|e| match e {
            Error::SingularActuation(m) => Error::SingularActuation(format!("step {k}, state {x:?}: {m}")),
            e => e.context(format!("step {k}")),
        })?;
        let next = plant.step(x, &u, dt).map_err(|e| e.context(format!("step {k}")))?;
        controls.push(u);
        states.push(next);
    }
    Ok(ClosedLoop { states, controls, dt })
}
