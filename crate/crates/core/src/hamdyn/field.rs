//! Vector fields and energies of every variant, recorded on a tape.
//!
//! State-space partials come from forward-mode tangents seeded on the
//! coordinate columns; the tangents of M⁻¹ are reused for d/dt(M⁻¹), which
//! is their combination weighted by the coordinate rates.

use super::bundle::*;
use super::linalg::{cholesky_solve, matvec, quad, quad_opt, strip_mat, sum_opt, DualMat};
use crate::diffkit::{DualVar, Tape, Var};
use crate::error::{ensure, Error, Result};
use crate::netcore::{mass_inv_dual, Head};

fn primal_cols(cols: &[Var]) -> Vec<DualVar> {
    cols.iter().map(|&v| DualVar::constant(v, 0)).collect()
}

/// Column `i` gets a unit tangent in direction `offset + i` of `dirs`.
fn seeded_cols(t: &mut Tape, cols: &[Var], offset: usize, dirs: usize) -> Vec<DualVar> {
    cols.iter().enumerate().map(|(i, &v)| DualVar::seeded(t, v, offset + i, dirs)).collect()
}

fn tangent(x: &DualVar, k: usize) -> Option<Var> {
    x.d.get(k).copied().flatten()
}

fn or_zero(t: &mut Tape, v: Option<Var>, rows: usize) -> Var {
    v.unwrap_or_else(|| t.filled(rows, 0.0))
}

impl ModelBundle {
    fn mass_dual(&self, b: &BoundBundle, t: &mut Tape, coords: &[DualVar]) -> Result<DualMat> {
        let Head::MassInv { n, epsilon, factor } = self.component(MASS_INV)?.head else {
            return Err(crate::error::contract("mass_inv component without a mass head"));
        };
        let raw = b.net(MASS_INV).forward_dual(t, coords);
        Ok(mass_inv_dual(t, &raw, n, epsilon, factor))
    }

    /// g(coords)·u, one column per degree of freedom.
    fn input_times_u(&self, b: &BoundBundle, t: &mut Tape, coords: &[Var], u: &[Var]) -> Vec<Var> {
        let raw = b.net(INPUT).forward_dual(t, &primal_cols(coords));
        let ctrl = self.dims.ctrl;
        (0..self.dims.dof())
            .map(|i| {
                let terms: Vec<Option<Var>> = (0..ctrl).map(|c| Some(t.mul(raw[i * ctrl + c].v, u[c]))).collect();
                sum_opt(t, terms).unwrap()
            })
            .collect()
    }

    /// Time derivative of the state columns `x` under controls `u`.
    pub fn field_tape(&self, b: &BoundBundle, t: &mut Tape, x: &[Var], u: &[Var]) -> Result<Vec<Var>> {
        let dims = self.dims;
        ensure(x.len() == dims.state_dim(), || {
            format!("{} expects a state of length {}, got {}", self.variant, dims.state_dim(), x.len())
        })?;
        ensure(u.len() == dims.ctrl, || format!("expected {} controls, got {}", dims.ctrl, u.len()))?;
        match self.variant {
            Variant::NaiveBaseline => {
                let mut cols = x.to_vec();
                cols.extend_from_slice(u);
                let inp = t.concat_cols(&cols);
                let y = b.net(FIELD).forward(t, inp);
                Ok((0..dims.state_dim()).map(|j| t.col(y, j)).collect())
            }
            Variant::SymRn => self.canonical_sym(b, t, x, u),
            Variant::Unstructured if dims.canonical() => self.canonical_unstructured(b, t, x, u),
            _ => self.angular(b, t, x, u),
        }
    }

    fn canonical_sym(&self, b: &BoundBundle, t: &mut Tape, x: &[Var], u: &[Var]) -> Result<Vec<Var>> {
        let n = self.dims.n;
        let (q, p) = x.split_at(n);
        let qd = seeded_cols(t, q, 0, n);
        let minv = self.mass_dual(b, t, &qd)?;
        let v = b.net(POTENTIAL).forward_dual(t, &qd).remove(0);
        let gu = self.input_times_u(b, t, q, u);
        let mut out: Vec<Var> = matvec(t, &strip_mat(&minv), &primal_cols(p)).into_iter().map(|d| d.v).collect();
        for k in 0..n {
            let tan: Vec<Vec<Option<Var>>> =
                minv.iter().map(|r| r.iter().map(|e| tangent(e, k)).collect()).collect();
            let kin = quad_opt(t, p, &tan).map(|s| t.scale(s, 0.5));
            let dh = sum_opt(t, [kin, tangent(&v, k)]);
            out.push(match dh {
                Some(dh) => t.sub(gu[k], dh),
                None => gu[k],
            });
        }
        Ok(out)
    }

    fn canonical_unstructured(&self, b: &BoundBundle, t: &mut Tape, x: &[Var], u: &[Var]) -> Result<Vec<Var>> {
        let n = self.dims.n;
        let rows = t.rows(x[0]);
        let inputs = seeded_cols(t, x, 0, 2 * n);
        let h = b.net(HAMILTONIAN).forward_dual(t, &inputs).remove(0);
        let gu = self.input_times_u(b, t, &x[..n], u);
        let mut out: Vec<Var> = (0..n).map(|i| or_zero(t, tangent(&h, n + i), rows)).collect();
        for i in 0..n {
            out.push(match tangent(&h, i) {
                Some(dh) => t.sub(gu[i], dh),
                None => gu[i],
            });
        }
        Ok(out)
    }

    fn angular(&self, b: &BoundBundle, t: &mut Tape, x: &[Var], u: &[Var]) -> Result<Vec<Var>> {
        let Dims { n, m, .. } = self.dims;
        let c = self.dims.coord_dim();
        let d = self.dims.dof();
        let rows = t.rows(x[0]);
        let (coords, vel) = x.split_at(c);
        let (cosv, sinv) = (&coords[n..n + m], &coords[n + m..]);

        let cd = seeded_cols(t, coords, 0, c);
        let minv = self.mass_dual(b, t, &cd)?;
        let p: Vec<Var> =
            cholesky_solve(t, &strip_mat(&minv), &primal_cols(vel))?.into_iter().map(|e| e.v).collect();

        let (qdot, pdot): (Vec<Var>, Vec<Var>) = if self.variant == Variant::GeometricBaseline {
            let mut inp = primal_cols(coords);
            inp.extend(primal_cols(&p));
            inp.extend(primal_cols(u));
            let out = b.net(GEOMETRIC).forward_dual(t, &inp);
            (out[..d].iter().map(|e| e.v).collect(), out[d..].iter().map(|e| e.v).collect())
        } else {
            let (dh, qdot): (Vec<Option<Var>>, Vec<Var>) = if self.variant == Variant::Unstructured {
                let mut inp = seeded_cols(t, coords, 0, c + d);
                inp.extend(seeded_cols(t, &p, c, c + d));
                let h = b.net(HAMILTONIAN).forward_dual(t, &inp).remove(0);
                let dh = (0..c).map(|k| tangent(&h, k)).collect();
                let qdot = (0..d).map(|i| or_zero(t, tangent(&h, c + i), rows)).collect();
                (dh, qdot)
            } else {
                let v = b.net(POTENTIAL).forward_dual(t, &cd).remove(0);
                let dh = (0..c)
                    .map(|k| {
                        let tan: Vec<Vec<Option<Var>>> =
                            minv.iter().map(|r| r.iter().map(|e| tangent(e, k)).collect()).collect();
                        let kin = quad_opt(t, &p, &tan).map(|s| t.scale(s, 0.5));
                        sum_opt(t, [kin, tangent(&v, k)])
                    })
                    .collect();
                let qdot = matvec(t, &strip_mat(&minv), &primal_cols(&p)).into_iter().map(|e| e.v).collect();
                (dh, qdot)
            };
            let gu = self.input_times_u(b, t, coords, u);
            let mut pdot = Vec::with_capacity(d);
            for i in 0..n {
                pdot.push(match dh[i] {
                    Some(g) => t.sub(gu[i], g),
                    None => gu[i],
                });
            }
            for j in 0..m {
                let a = dh[n + j].map(|g| t.mul(sinv[j], g));
                let bterm = dh[n + m + j].map(|g| {
                    let cg = t.mul(cosv[j], g);
                    t.neg(cg)
                });
                pdot.push(sum_opt(t, [a, bterm, Some(gu[n + j])]).unwrap());
            }
            (qdot, pdot)
        };

        let mut xdot: Vec<Var> = qdot[..n].to_vec();
        for j in 0..m {
            let sq = t.mul(sinv[j], qdot[n + j]);
            xdot.push(t.neg(sq));
        }
        for j in 0..m {
            xdot.push(t.mul(cosv[j], qdot[n + j]));
        }

        let mut vdot = Vec::with_capacity(d);
        for i in 0..d {
            let mut terms: Vec<Option<Var>> = Vec::new();
            for j in 0..d {
                let rate: Vec<Option<Var>> = (0..c)
                    .map(|k| tangent(&minv[i][j], k).map(|tk| t.mul(xdot[k], tk)))
                    .collect();
                if let Some(mdot) = sum_opt(t, rate) {
                    terms.push(Some(t.mul(mdot, p[j])));
                }
                terms.push(Some(t.mul(minv[i][j].v, pdot[j])));
            }
            vdot.push(sum_opt(t, terms).unwrap());
        }
        xdot.extend(vdot);
        Ok(xdot)
    }

    /// Energy of the state columns `x`; tangents carried by `x` propagate.
    pub fn energy_dual(&self, b: &BoundBundle, t: &mut Tape, x: &[DualVar]) -> Result<DualVar> {
        if !self.variant.has_energy() {
            return Err(Error::Unsupported(format!("{} has no energy function", self.variant)));
        }
        let dims = self.dims;
        ensure(x.len() == dims.state_dim(), || {
            format!("{} expects a state of length {}, got {}", self.variant, dims.state_dim(), x.len())
        })?;
        let c = dims.coord_dim();
        let (coords, second) = x.split_at(c);
        if self.variant == Variant::Unstructured {
            let mut inp = coords.to_vec();
            if self.momentum_state() {
                inp.extend_from_slice(second);
            } else {
                let minv = self.mass_dual(b, t, coords)?;
                inp.extend(cholesky_solve(t, &minv, second)?);
            }
            return Ok(b.net(HAMILTONIAN).forward_dual(t, &inp).remove(0));
        }
        let minv = self.mass_dual(b, t, coords)?;
        let p = if self.momentum_state() { second.to_vec() } else { cholesky_solve(t, &minv, second)? };
        let kin = quad(t, &p, &minv).scale(t, 0.5);
        let v = b.net(POTENTIAL).forward_dual(t, coords).remove(0);
        Ok(kin.add(t, &v))
    }
}
