//! Vector fields f_θ for SymODEN and its baselines, plus energies.

pub mod bundle;
mod field;
pub mod linalg;

pub use bundle::{
    layout, uniform_hidden, BoundBundle, Dims, ModelBundle, Variant, FIELD, GEOMETRIC, HAMILTONIAN, INPUT, MASS_INV, POTENTIAL,
};

use crate::diffkit::{DualVar, Tape, Tensor, Var};
use crate::error::{contract, ensure, Result};
use crate::netcore::{mass_inv_from_outputs, Head};

fn const_cols(t: &mut Tape, m: &Tensor) -> Vec<Var> {
    (0..m.cols()).map(|j| t.constant(Tensor::column(m.col_vec(j)))).collect()
}

impl ModelBundle {
    fn require(&self, variant: Variant) -> Result<()> {
        ensure(self.variant == variant, || format!("expected a {variant} bundle, got {}", self.variant))
    }

    /// Field at a batch of states (rows) under per-row controls.
    pub fn field_batch(&self, states: &Tensor, u: &Tensor) -> Result<Tensor> {
        ensure(states.rows() == u.rows(), || "states and controls differ in row count".into())?;
        let mut t = Tape::new();
        let b = self.bind(&mut t, false);
        let x = const_cols(&mut t, states);
        let uc = const_cols(&mut t, u);
        let out = self.field_tape(&b, &mut t, &x, &uc)?;
        let cols: Vec<Var> = out;
        let joined = t.concat_cols(&cols);
        Ok(t.value(joined).clone())
    }

    /// Field at a single state.
    pub fn field(&self, state: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.field_batch(&Tensor::row(state.to_vec()), &Tensor::row(u.to_vec()))?.into_data())
    }

    /// `(q̇, ṗ)` of a SymODEN model on ℝⁿ.
    pub fn vector_field_rn(&self, q: &[f64], p: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.require(Variant::SymRn)?;
        ensure(q.len() == self.dims.n && p.len() == self.dims.n, || "q and p must have length n".into())?;
        let mut f = self.field(&[q, p].concat(), u)?;
        let pd = f.split_off(self.dims.n);
        Ok((f, pd))
    }

    /// `(ẋ1, ẋ2, ẋ3)` for state `(cos q, sin q, q̇)`.
    pub fn vector_field_embedded(
        &self,
        x1: &[f64],
        x2: &[f64],
        x3: &[f64],
        u: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        self.require(Variant::SymEmbedded)?;
        let m = self.dims.m;
        ensure(x1.len() == m && x2.len() == m && x3.len() == m, || format!("each block must have length {m}"))?;
        let f = self.field(&[x1, x2, x3].concat(), u)?;
        Ok((f[..m].to_vec(), f[m..2 * m].to_vec(), f[2 * m..].to_vec()))
    }

    /// Derivative of `(r, cos φ, sin φ, ṙ, φ̇)`.
    #[allow(clippy::too_many_arguments)]
    pub fn vector_field_hybrid(
        &self,
        x1: &[f64],
        x2: &[f64],
        x3: &[f64],
        x4: &[f64],
        x5: &[f64],
        u: &[f64],
    ) -> Result<Vec<f64>> {
        self.require(Variant::SymHybrid)?;
        let Dims { n, m, .. } = self.dims;
        let ok = x1.len() == n && x4.len() == n && x2.len() == m && x3.len() == m && x5.len() == m;
        ensure(ok, || format!("hybrid blocks must have lengths ({n}, {m}, {m}, {n}, {m})"))?;
        self.field(&[x1, x2, x3, x4, x5].concat(), u)
    }

    pub fn vector_field_unstructured(&self, state: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.require(Variant::Unstructured)?;
        self.field(state, u)
    }

    pub fn vector_field_naive(&self, state: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.require(Variant::NaiveBaseline)?;
        self.field(state, u)
    }

    pub fn vector_field_geometric(&self, state: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.require(Variant::GeometricBaseline)?;
        self.field(state, u)
    }

    /// Energy H of a batch of states, in the variant's own coordinates.
    pub fn energy_batch(&self, states: &Tensor) -> Result<Vec<f64>> {
        let mut t = Tape::new();
        let b = self.bind(&mut t, false);
        let x: Vec<DualVar> = const_cols(&mut t, states).into_iter().map(|v| DualVar::constant(v, 0)).collect();
        let h = self.energy_dual(&b, &mut t, &x)?;
        Ok(t.value(h.v).data().to_vec())
    }

    pub fn energy_of(&self, state: &[f64]) -> Result<f64> {
        Ok(self.energy_batch(&Tensor::row(state.to_vec()))?[0])
    }

    /// dH/dt along the model's own field, by pushing the field through the
    /// energy in forward mode.
    pub fn energy_rate(&self, state: &[f64], u: &[f64]) -> Result<f64> {
        let f = self.field(state, u)?;
        let mut t = Tape::new();
        let b = self.bind(&mut t, false);
        let x: Vec<DualVar> = state
            .iter()
            .zip(&f)
            .map(|(&s, &fs)| {
                let v = t.constant(Tensor::scalar(s));
                let d = t.constant(Tensor::scalar(fs));
                DualVar::with_tangent(v, d)
            })
            .collect();
        let h = self.energy_dual(&b, &mut t, &x)?;
        Ok(h.d[0].map_or(0.0, |d| t.value(d).item()))
    }

    /// V and ∂V/∂coords.
    pub fn potential_grad(&self, coords: &[f64]) -> Result<(f64, Vec<f64>)> {
        let comp = self.component(POTENTIAL)?;
        let c = self.dims.coord_dim();
        ensure(coords.len() == c, || format!("expected {c} coordinates, got {}", coords.len()))?;
        let mut t = Tape::new();
        let b = comp.bind(&mut t, false);
        let x: Vec<DualVar> = coords
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let col = t.constant(Tensor::scalar(v));
                DualVar::seeded(&mut t, col, i, c)
            })
            .collect();
        let v = b.forward_dual(&mut t, &x).remove(0);
        let grad = (0..c).map(|k| v.d.get(k).copied().flatten().map_or(0.0, |d| t.value(d).item())).collect();
        Ok((t.value(v.v).item(), grad))
    }

    pub fn mass_inv_at(&self, coords: &[f64]) -> Result<Vec<Vec<f64>>> {
        let comp = self.component(crate::hamdyn::MASS_INV)?;
        let Head::MassInv { n, epsilon, factor } = comp.head else {
            return Err(contract("mass_inv component without a mass head"));
        };
        Ok(mass_inv_from_outputs(&comp.eval_raw(coords)?, n, epsilon, factor))
    }

    /// g(coords) as dof×ctrl rows.
    pub fn input_matrix_at(&self, coords: &[f64]) -> Result<Vec<Vec<f64>>> {
        let raw = self.component(INPUT)?.eval_raw(coords)?;
        Ok(raw.chunks(self.dims.ctrl).map(<[f64]>::to_vec).collect())
    }
}

/// Lifts `f(x, u)` to the constant-control field on `(x, u)`: the state
/// part is `f`, the control part is zero.
pub fn augment_with_control<F>(f: F, ctrl: usize) -> impl Fn(&[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &[f64]) -> Result<Vec<f64>>,
{
    move |xu: &[f64]| {
        ensure(xu.len() >= ctrl, || "augmented state shorter than the control".into())?;
        let (x, u) = xu.split_at(xu.len() - ctrl);
        let mut out = f(x, u)?;
        out.extend(std::iter::repeat_n(0.0, ctrl));
        Ok(out)
    }
}

#[cfg(test)]
mod tests;
