//! Ground truth written as closed-form bundles, for oracle comparisons.

use std::collections::BTreeMap;

use super::task::*;
use crate::error::Result;
use crate::hamdyn::{Dims, ModelBundle, INPUT, MASS_INV, POTENTIAL};
use crate::netcore::expr::{c, input};
use crate::netcore::{Component, Expr, Factor, Head};

fn direct_mass(exprs: Vec<Expr>, n: usize) -> Component {
    Component::closed(exprs, Head::MassInv { n, epsilon: 0.0, factor: Factor::Direct })
}

fn identity_inputs(rows: usize, cols: usize, single: usize) -> Component {
    let e = (0..rows * cols)
        .map(|k| {
            let (i, j) = (k / cols, k % cols);
            let on = if cols == 1 { i == single } else { i == j };
            c(if on { 1.0 } else { 0.0 })
        })
        .collect();
    Component::closed(e, Head::InputMatrix { rows, cols })
}

/// Lower triangle `[a11, a21, a22]` of the inverse of a symmetric 2×2.
fn inverse2(m11: Expr, m12: Expr, m22: Expr) -> Vec<Expr> {
    let det = m11.clone() * m22.clone() - m12.clone() * m12.clone();
    vec![m22 / det.clone(), -m12 / det.clone(), m11 / det]
}

/// The task's truth system as a structured bundle (the task's SymODEN
/// variant with closed-form components).
pub fn truth_bundle(task: Task) -> Result<ModelBundle> {
    let dims: Dims = task.dims();
    let (mass, pot, g) = match task {
        Task::Task1 => (
            direct_mass(vec![c(3.0)], 1),
            c(5.0) * (c(1.0) - input(0).cos()),
            identity_inputs(1, 1, 0),
        ),
        Task::Task2 => (direct_mass(vec![c(3.0)], 1), c(5.0) * (c(1.0) - input(0)), identity_inputs(1, 1, 0)),
        Task::Task3 | Task::Task3Fa => {
            let mt = CARTPOLE_MASS_CART + CARTPOLE_MASS_POLE;
            let ml = CARTPOLE_MASS_POLE * CARTPOLE_HALF_LENGTH;
            let m = inverse2(c(mt), c(ml) * input(1), c(4.0 / 3.0 * ml * CARTPOLE_HALF_LENGTH));
            (direct_mass(m, 2), c(ml * CARTPOLE_GRAVITY) * input(1), identity_inputs(2, dims.ctrl, 0))
        }
        Task::Task4 | Task::Task4Fa => {
            let (l1, mm, lc, i, gr) =
                (ACROBOT_LINK_LENGTH_1, ACROBOT_LINK_MASS, ACROBOT_LINK_COM, ACROBOT_LINK_MOI, ACROBOT_GRAVITY);
            // coords: cos q1, cos q2, sin q1, sin q2
            let m11 = c(mm * lc * lc + mm * (l1 * l1 + lc * lc) + 2.0 * i) + c(2.0 * mm * l1 * lc) * input(1);
            let m12 = c(mm * lc * lc + i) + c(mm * l1 * lc) * input(1);
            let m22 = c(mm * lc * lc + i);
            let v = -(c((mm * lc + mm * l1) * gr) * input(0))
                - c(mm * lc * gr) * (input(0) * input(1) - input(2) * input(3));
            (direct_mass(inverse2(m11, m12, m22), 2), v, identity_inputs(2, dims.ctrl, 1))
        }
    };
    let mut comps = BTreeMap::new();
    comps.insert(MASS_INV.to_string(), mass);
    comps.insert(POTENTIAL.to_string(), Component::closed(vec![pot], Head::Raw));
    comps.insert(INPUT.to_string(), g);
    ModelBundle::new(task.symoden_variant(), dims, comps)
}
