//! Energy-shaping control laws built from a model's learned V, M⁻¹ and g.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure, Error, Result};
use crate::hamdyn::{ModelBundle, POTENTIAL};

/// Limit on the condition number of g gᵀ.
pub const MAX_ACTUATION_CONDITION: f64 = 1e10;

/// Configuration, velocity (or momentum) and raw coordinates of a state.
pub struct Split {
    pub coords: Vec<f64>,
    /// Generalized configuration; angles in (−π, π].
    pub q: Vec<f64>,
    /// `p` for momentum-state models, `q̇` otherwise.
    pub rate: Vec<f64>,
}

fn has_potential(model: &ModelBundle) -> Result<()> {
    if model.components.contains_key(POTENTIAL) {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("{} models have no learned potential to shape", model.variant)))
    }
}

pub fn split_state(model: &ModelBundle, state: &[f64]) -> Result<Split> {
    let d = model.dims;
    ensure(state.len() == d.state_dim(), || format!("expected a state of {} values, got {}", d.state_dim(), state.len()))?;
    let c = d.coord_dim();
    let coords = state[..c].to_vec();
    let rate = state[c..].to_vec();
    let q = if model.momentum_state() {
        coords.clone()
    } else {
        let mut q = coords[..d.n].to_vec();
        q.extend((0..d.m).map(|j| coords[d.n + d.m + j].atan2(coords[d.n + j])));
        q
    };
    Ok(Split { coords, q, rate })
}

/// ∂V/∂q in generalized coordinates; angle entries use
/// ∂/∂φ = −sin φ ∂/∂cos φ + cos φ ∂/∂sin φ.
pub fn config_gradient(model: &ModelBundle, coords: &[f64]) -> Result<Vec<f64>> {
    has_potential(model)?;
    let (_, g) = model.potential_grad(coords)?;
    if model.momentum_state() {
        return Ok(g);
    }
    let (n, m) = (model.dims.n, model.dims.m);
    let mut out = g[..n].to_vec();
    for j in 0..m {
        let (c, s) = (coords[n + j], coords[n + m + j]);
        out.push(-s * g[n + j] + c * g[n + m + j]);
    }
    Ok(out)
}

/// `gᵀ(g gᵀ)⁻¹ r`, refusing ill-conditioned actuation.
pub fn actuation_solve(g: &[Vec<f64>], r: &[f64]) -> Result<Vec<f64>> {
    let rows = g.len();
    let cols = g.first().map_or(0, Vec::len);
    ensure(r.len() == rows, || format!("right-hand side has {} entries for {rows} generalized forces", r.len()))?;
    let gm = DMatrix::from_fn(rows, cols, |i, j| g[i][j]);
    let ggt = &gm * gm.transpose();
    let sv = ggt.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    let cond = hi / lo;
    if !(cond.is_finite() && cond <= MAX_ACTUATION_CONDITION) {
        return Err(Error::SingularActuation(format!(
            "g gᵀ has condition number {cond:e} (limit {MAX_ACTUATION_CONDITION:e}); the system is not fully actuated here"
        )));
    }
    let y = ggt
        .lu()
        .solve(&DVector::from_column_slice(r))
        .ok_or_else(|| Error::SingularActuation("g gᵀ is singular".into()))?;
    Ok((gm.transpose() * y).iter().copied().collect())
}

/// β = gᵀ(g gᵀ)⁻¹(∂V/∂q − ∂V_d/∂q).
pub fn potential_shaping_beta(model: &ModelBundle, coords: &[f64], vd_grad: &[f64]) -> Result<Vec<f64>> {
    let dv = config_gradient(model, coords)?;
    ensure(vd_grad.len() == dv.len(), || format!("∂V_d/∂q has {} entries, expected {}", vd_grad.len(), dv.len()))?;
    let r: Vec<f64> = dv.iter().zip(vd_grad).map(|(a, b)| a - b).collect();
    actuation_solve(&model.input_matrix_at(coords)?, &r)
}

fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// v = −gᵀ(g gᵀ)⁻¹ K_d·rate, with `rate` the momentum or velocity.
pub fn damping_injection(model: &ModelBundle, coords: &[f64], rate: &[f64], kd: &[Vec<f64>]) -> Result<Vec<f64>> {
    let r: Vec<f64> = matvec(kd, rate).into_iter().map(|v| -v).collect();
    actuation_solve(&model.input_matrix_at(coords)?, &r)
}

/// Wraps to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shaping {
    /// V_d = ½(q − q*)ᵀK_p(q − q*), angle differences wrapped.
    Quadratic { kp: Vec<Vec<f64>>, target: Vec<f64> },
    /// V_d = −V.
    NegatedLearned,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Actuation {
    FullyActuated,
    PendulumSwingup,
}

#[derive(Clone, Debug)]
pub struct ControlLaw {
    pub model: ModelBundle,
    pub shaping: Shaping,
    pub kd: Vec<Vec<f64>>,
    pub actuation: Actuation,
}

fn check_spd(a: &[Vec<f64>], d: usize, what: &str) -> Result<()> {
    ensure(a.len() == d && a.iter().all(|r| r.len() == d), || format!("{what} must be {d}×{d}"))?;
    let m = DMatrix::from_fn(d, d, |i, j| a[i][j]);
    ensure((&m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0), || format!("{what} must be symmetric"))?;
    ensure(m.cholesky().is_some(), || format!("{what} must be positive definite"))
}

impl ControlLaw {
    /// The PD form with energy compensation (quadratic V_d).
    pub fn pd(model: ModelBundle, target: Vec<f64>, kp: Vec<Vec<f64>>, kd: Vec<Vec<f64>>) -> Result<Self> {
        has_potential(&model)?;
        let d = model.dims.dof();
        ensure(target.len() == d, || format!("target has {} entries, expected {d}", target.len()))?;
        check_spd(&kp, d, "K_p")?;
        check_spd(&kd, d, "K_d")?;
        Ok(Self { model, shaping: Shaping::Quadratic { kp, target }, kd, actuation: Actuation::FullyActuated })
    }

    /// Diagonal gains.
    pub fn pd_diag(model: ModelBundle, target: Vec<f64>, kp: f64, kd: f64) -> Result<Self> {
        let d = model.dims.dof();
        let diag = |k: f64| (0..d).map(|i| (0..d).map(|j| if i == j { k } else { 0.0 }).collect()).collect();
        Self::pd(model, target, diag(kp), diag(kd))
    }

    /// The pendulum swing-up law: V_d = −V and K_d = 3.
    pub fn swingup(model: ModelBundle) -> Result<Self> {
        has_potential(&model)?;
        ensure(model.dims.dof() == 1 && model.dims.m == 1 && model.dims.ctrl == 1, || {
            "the swing-up law needs a single embedded angle with one input".into()
        })?;
        Ok(Self { model, shaping: Shaping::NegatedLearned, kd: vec![vec![3.0]], actuation: Actuation::PendulumSwingup })
    }

    /// ∂V_d/∂q at a split state.
    fn vd_grad(&self, s: &Split) -> Result<Vec<f64>> {
        match &self.shaping {
            Shaping::Quadratic { kp, target } => {
                let n = self.model.dims.n;
                let m_state = self.model.momentum_state();
                let e: Vec<f64> = s
                    .q
                    .iter()
                    .zip(target)
                    .enumerate()
                    .map(|(i, (q, t))| if !m_state && i >= n { wrap_angle(q - t) } else { q - t })
                    .collect();
                Ok(matvec(kp, &e))
            }
            Shaping::NegatedLearned => Ok(config_gradient(&self.model, &s.coords)?.into_iter().map(|v| -v).collect()),
        }
    }

    pub fn control(&self, state: &[f64]) -> Result<Vec<f64>> {
        match self.actuation {
            Actuation::PendulumSwingup => {
                Ok(vec![pendulum_swingup_controller(&self.model, state[0], state[1], state[2])?])
            }
            Actuation::FullyActuated => {
                let s = split_state(&self.model, state)?;
                let dv = config_gradient(&self.model, &s.coords)?;
                let vd = self.vd_grad(&s)?;
                let kdv = matvec(&self.kd, &s.rate);
                let r: Vec<f64> = (0..dv.len()).map(|i| dv[i] - vd[i] - kdv[i]).collect();
                actuation_solve(&self.model.input_matrix_at(&s.coords)?, &r)
            }
        }
    }
}

/// u = gᵀ(g gᵀ)⁻¹(∂V/∂q − K_p(q − q*) − K_d·rate) for a quadratic law.
pub fn pd_energy_controller(law: &ControlLaw, state: &[f64]) -> Result<Vec<f64>> {
    ensure(matches!(law.shaping, Shaping::Quadratic { .. }) && law.actuation == Actuation::FullyActuated, || {
        "the PD energy controller needs a quadratic V_d and full actuation".into()
    })?;
    law.control(state)
}

/// u = g⁻¹(2(−∂V/∂cos q·sin q + ∂V/∂sin q·cos q) − 3q̇).
pub fn pendulum_swingup_controller(model: &ModelBundle, c: f64, s: f64, qd: f64) -> Result<f64> {
    has_potential(model)?;
    ensure(model.dims.coord_dim() == 2 && model.dims.ctrl == 1, || {
        "the swing-up law needs (cos q, sin q) coordinates and one input".into()
    })?;
    let coords = [c, s];
    let (_, dv) = model.potential_grad(&coords)?;
    let g = model.input_matrix_at(&coords)?[0][0];
    if !(g.abs() >= 1e-6) {
        return Err(Error::SingularActuation(format!("learned g = {g:e} at (cos q, sin q) = ({c}, {s})")));
    }
    Ok((2.0 * (-dv[0] * s + dv[1] * c) - 3.0 * qd) / g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envsim::{truth_bundle, Task};
    use crate::hamdyn::{uniform_hidden, Dims, Variant, INPUT};
    use crate::netcore::expr::{c, input};
    use crate::netcore::{Component, Head};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn with_g(mut b: ModelBundle, g: f64) -> ModelBundle {
        b.components.insert(INPUT.into(), Component::closed(vec![c(g)], Head::InputMatrix { rows: 1, cols: 1 }));
        b
    }

    fn with_potential(mut b: ModelBundle, v: crate::netcore::Expr) -> ModelBundle {
        b.components.insert(POTENTIAL.into(), Component::closed(vec![v], Head::Raw));
        b
    }

    #[test]
    fn beta_examples() {
        let m = truth_bundle(Task::Task1).unwrap();
        let q = [PI / 2.0];
        let dv = config_gradient(&m, &q).unwrap();
        assert_eq!(potential_shaping_beta(&m, &q, &dv).unwrap(), vec![0.0]);
        let neg: Vec<f64> = dv.iter().map(|v| -v).collect();
        assert!((potential_shaping_beta(&m, &q, &neg).unwrap()[0] - 10.0).abs() < 1e-12);
        let m2 = with_g(m, 2.0);
        assert!((potential_shaping_beta(&m2, &q, &neg).unwrap()[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn damping_examples() {
        let m = truth_bundle(Task::Task2).unwrap();
        let kd = vec![vec![3.0]];
        assert_eq!(damping_injection(&m, &[1.0, 0.0], &[0.0], &kd).unwrap(), vec![-0.0]);
        assert_eq!(damping_injection(&m, &[1.0, 0.0], &[2.0], &kd).unwrap(), vec![-6.0]);
        for v in [-2.0, -0.1, 0.5, 4.0] {
            assert!(damping_injection(&m, &[0.0, 1.0], &[v], &kd).unwrap()[0] * v <= 0.0);
        }
    }

    #[test]
    fn pd_examples() {
        let m = truth_bundle(Task::Task1).unwrap();
        let law = ControlLaw::pd_diag(m, vec![0.0], 1.0, 1.0).unwrap();
        assert_eq!(pd_energy_controller(&law, &[0.0, 0.0]).unwrap(), vec![0.0]);

        let mut flat = truth_bundle(Task::Task3Fa).unwrap();
        flat = with_potential(flat, c(0.0));
        let law = ControlLaw::pd(flat, vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![1.0, 0.0], vec![0.0, 1.0]])
            .unwrap();
        let law = ControlLaw { kd: vec![vec![0.0; 2]; 2], ..law };
        let u = pd_energy_controller(&law, &[1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((u[0] + 1.0).abs() < 1e-15 && u[1].abs() < 1e-15);

        let quad = with_potential(truth_bundle(Task::Task1).unwrap(), c(0.5) * input(0) * input(0));
        let law = ControlLaw::pd_diag(quad, vec![0.0], 2.0, 1.0).unwrap();
        assert!((pd_energy_controller(&law, &[1.0, 0.0]).unwrap()[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn gains_are_validated() {
        let m = truth_bundle(Task::Task1).unwrap();
        assert!(ControlLaw::pd_diag(m.clone(), vec![0.0], -1.0, 1.0).is_err());
        assert!(ControlLaw::pd_diag(m.clone(), vec![0.0], 1.0, 0.0).is_err());
        assert!(ControlLaw::pd_diag(m, vec![0.0, 1.0], 1.0, 1.0).is_err());
        let naive = ModelBundle::build(Variant::NaiveBaseline, Dims::new(1, 0, 1), &uniform_hidden(&[4]), 0.01, 0).unwrap();
        assert!(matches!(ControlLaw::pd_diag(naive, vec![0.0], 1.0, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn swingup_examples() {
        let m = truth_bundle(Task::Task2).unwrap();
        assert!((pendulum_swingup_controller(&m, 0.0, 1.0, 0.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(pendulum_swingup_controller(&m, -1.0, 0.0, 0.0).unwrap().abs() < 1e-12);
        let a = pendulum_swingup_controller(&m, 0.6, 0.8, 0.0).unwrap();
        let b = pendulum_swingup_controller(&m, 0.6, 0.8, 1.7).unwrap();
        assert!((b - a + 3.0 * 1.7).abs() < 1e-12);
        let m2 = with_g(m.clone(), 2.0);
        let b2 = pendulum_swingup_controller(&m2, 0.6, 0.8, 1.7).unwrap();
        assert!((b2 - b / 2.0).abs() < 1e-12);
        let dead = with_g(m, 1e-8);
        assert!(matches!(pendulum_swingup_controller(&dead, 0.0, 1.0, 0.0), Err(Error::SingularActuation(_))));
    }

    #[test]
    fn underactuation_is_refused() {
        let m = truth_bundle(Task::Task3).unwrap();
        let r = ControlLaw::pd_diag(m, vec![0.0, 0.0], 1.0, 1.0).unwrap().control(&Task::Task3.embed(&[0.1, 0.2, 0.0, 0.0]));
        assert!(matches!(r, Err(Error::SingularActuation(_))));
    }

    #[test]
    fn shaped_field_is_hamiltonian_in_desired_energy() {
        // closed-loop field with β equals the field of ½pᵀM⁻¹p + V_d
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = ModelBundle::build(Variant::SymRn, Dims::new(2, 0, 2), &uniform_hidden(&[10, 10]), 0.01, 9).unwrap();
        let kp = vec![vec![2.0, 0.3], vec![0.3, 1.0]];
        let target = [0.4, -0.2];
        for _ in 0..200 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let e = [x[0] - target[0], x[1] - target[1]];
            let vd = matvec(&kp, &e);
            let beta = potential_shaping_beta(&m, &x[..2], &vd).unwrap();
            let closed = m.field(&x, &beta).unwrap();
            let free = m.field(&x, &[0.0, 0.0]).unwrap();
            let dv = config_gradient(&m, &x[..2]).unwrap();
            for i in 0..2 {
                assert!((closed[i] - free[i]).abs() < 1e-12);
                let want = free[2 + i] + dv[i] - vd[i];
                assert!((closed[2 + i] - want).abs() < 1e-10, "{} vs {want}", closed[2 + i]);
            }
        }
    }

    #[test]
    fn target_is_a_fixed_point() {
        let m = ModelBundle::build(Variant::SymRn, Dims::new(2, 0, 2), &uniform_hidden(&[10, 10]), 0.01, 2).unwrap();
        let law = ControlLaw::pd_diag(m.clone(), vec![0.3, -0.7], 1.5, 1.0).unwrap();
        let x = [0.3, -0.7, 0.0, 0.0];
        let f = m.field(&x, &law.control(&x).unwrap()).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-12), "{f:?}");
    }

    #[test]
    fn angles_wrap() {
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_angle(-PI), PI);
        assert_eq!(wrap_angle(0.25), 0.25);
    }
}
