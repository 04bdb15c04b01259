//! Forward mode layered on the tape: a [`DualVar`] carries a primal node and
//! one tangent node per seeded direction, all recorded on the same tape.
//! Directional derivatives therefore remain differentiable by a single
//! reverse sweep (reverse over forward).
//!
//! A `None` tangent is a structural zero and costs nothing.

use super::tape::{Tape, Var};

#[derive(Clone, Debug)]
pub struct DualVar {
    pub v: Var,
    pub d: Vec<Option<Var>>,
}

impl DualVar {
    /// A value with `dirs` structurally-zero tangents.
    pub fn constant(v: Var, dirs: usize) -> Self {
        Self { v, d: vec![None; dirs] }
    }

    /// A value seeded with a unit tangent in direction `dir` of `dirs`.
    pub fn seeded(tape: &mut Tape, v: Var, dir: usize, dirs: usize) -> Self {
        let rows = tape.rows(v);
        let one = tape.filled(rows, 1.0);
        let mut d = vec![None; dirs];
        d[dir] = Some(one);
        Self { v, d }
    }

    /// A value with one tangent direction given by `t`.
    pub fn with_tangent(v: Var, t: Var) -> Self {
        Self { v, d: vec![Some(t)] }
    }

    pub fn dirs(&self) -> usize {
        self.d.len()
    }

    /// Tangent in direction `k`, materialising zeros if structural.
    pub fn tangent(&self, tape: &mut Tape, k: usize) -> Var {
        match self.d[k] {
            Some(t) => t,
            None => {
                let rows = tape.rows(self.v);
                tape.filled(rows, 0.0)
            }
        }
    }

    /// Drops all tangents.
    pub fn primal(&self) -> DualVar {
        DualVar { v: self.v, d: Vec::new() }
    }

    pub fn add(&self, t: &mut Tape, o: &DualVar) -> DualVar {
        let v = t.add(self.v, o.v);
        let d = zip_tangents(&self.d, &o.d, |a, b| match (a, b) {
            (Some(a), Some(b)) => Some(t.add(a, b)),
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        });
        DualVar { v, d }
    }

    pub fn sub(&self, t: &mut Tape, o: &DualVar) -> DualVar {
        let v = t.sub(self.v, o.v);
        let d = zip_tangents(&self.d, &o.d, |a, b| match (a, b) {
            (Some(a), Some(b)) => Some(t.sub(a, b)),
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(t.neg(b)),
            (None, None) => None,
        });
        DualVar { v, d }
    }

    pub fn mul(&self, t: &mut Tape, o: &DualVar) -> DualVar {
        let v = t.mul(self.v, o.v);
        let (sv, ov) = (self.v, o.v);
        let d = zip_tangents(&self.d, &o.d, |a, b| {
            let left = a.map(|a| t.mul(a, ov));
            let right = b.map(|b| t.mul(sv, b));
            match (left, right) {
                (Some(l), Some(r)) => Some(t.add(l, r)),
                (l, r) => l.or(r),
            }
        });
        DualVar { v, d }
    }

    pub fn div(&self, t: &mut Tape, o: &DualVar) -> DualVar {
        let q = t.div(self.v, o.v);
        let ov = o.v;
        let d = zip_tangents(&self.d, &o.d, |a, b| {
            let num = match (a, b) {
                (Some(a), Some(b)) => {
                    let qb = t.mul(q, b);
                    Some(t.sub(a, qb))
                }
                (Some(a), None) => Some(a),
                (None, Some(b)) => {
                    let qb = t.mul(q, b);
                    Some(t.neg(qb))
                }
                (None, None) => None,
            };
            num.map(|n| t.div(n, ov))
        });
        DualVar { v: q, d }
    }

    pub fn affine(&self, t: &mut Tape, scale: f64, shift: f64) -> DualVar {
        let v = t.affine(self.v, scale, shift);
        let d = self.d.iter().map(|x| x.map(|x| t.scale(x, scale))).collect();
        DualVar { v, d }
    }

    pub fn scale(&self, t: &mut Tape, s: f64) -> DualVar {
        self.affine(t, s, 0.0)
    }

    pub fn neg(&self, t: &mut Tape) -> DualVar {
        self.affine(t, -1.0, 0.0)
    }

    pub fn sin(&self, t: &mut Tape) -> DualVar {
        let v = t.sin(self.v);
        let c = if self.d.iter().any(Option::is_some) { Some(t.cos(self.v)) } else { None };
        let d = self.d.iter().map(|x| x.map(|x| t.mul(x, c.unwrap()))).collect();
        DualVar { v, d }
    }

    pub fn cos(&self, t: &mut Tape) -> DualVar {
        let v = t.cos(self.v);
        let ns = if self.d.iter().any(Option::is_some) {
            let s = t.sin(self.v);
            Some(t.neg(s))
        } else {
            None
        };
        let d = self.d.iter().map(|x| x.map(|x| t.mul(x, ns.unwrap()))).collect();
        DualVar { v, d }
    }

    pub fn tanh(&self, t: &mut Tape) -> DualVar {
        let v = t.tanh(self.v);
        let slope = if self.d.iter().any(Option::is_some) {
            let sq = t.mul(v, v);
            Some(t.affine(sq, -1.0, 1.0))
        } else {
            None
        };
        let d = self.d.iter().map(|x| x.map(|x| t.mul(x, slope.unwrap()))).collect();
        DualVar { v, d }
    }

    pub fn sqrt(&self, t: &mut Tape) -> DualVar {
        let v = t.sqrt(self.v);
        let half_inv = if self.d.iter().any(Option::is_some) {
            let two_s = t.scale(v, 2.0);
            let one = t.filled(t.rows(v), 1.0);
            Some(t.div(one, two_s))
        } else {
            None
        };
        let d = self.d.iter().map(|x| x.map(|x| t.mul(x, half_inv.unwrap()))).collect();
        DualVar { v, d }
    }
}

fn zip_tangents(
    a: &[Option<Var>],
    b: &[Option<Var>],
    mut f: impl FnMut(Option<Var>, Option<Var>) -> Option<Var>,
) -> Vec<Option<Var>> {
    let n = a.len().max(b.len());
    (0..n).map(|k| f(a.get(k).copied().flatten(), b.get(k).copied().flatten())).collect()
}

/// Σ_k a_k·b_k over paired dual values.
pub fn dot(t: &mut Tape, a: &[DualVar], b: &[DualVar]) -> Option<DualVar> {
    let mut acc: Option<DualVar> = None;
    for (x, y) in a.iter().zip(b) {
        let p = x.mul(t, y);
        acc = Some(match acc {
            Some(s) => s.add(t, &p),
            None => p,
        });
    }
    acc
}
