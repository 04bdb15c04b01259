//! Small dense algebra on tape columns. Matrices are at most a few rows,
//! each entry a B×1 column, so everything is written out entrywise.

use crate::diffkit::{DualVar, Tape, Var};
use crate::error::{Error, Result};

pub type DualMat = Vec<Vec<DualVar>>;

pub const MAX_CONDITION: f64 = 1e12;

pub fn strip(x: &DualVar) -> DualVar {
    DualVar { v: x.v, d: Vec::new() }
}

pub fn strip_mat(a: &DualMat) -> DualMat {
    a.iter().map(|r| r.iter().map(strip).collect()).collect()
}

pub fn sum_all(t: &mut Tape, terms: Vec<DualVar>) -> Option<DualVar> {
    let mut it = terms.into_iter();
    let first = it.next()?;
    Some(it.fold(first, |acc, x| acc.add(t, &x)))
}

pub fn matvec(t: &mut Tape, a: &DualMat, x: &[DualVar]) -> Vec<DualVar> {
    a.iter()
        .map(|row| {
            let terms: Vec<DualVar> = row.iter().zip(x).map(|(a, x)| a.mul(t, x)).collect();
            sum_all(t, terms).unwrap()
        })
        .collect()
}

/// pᵀ A p.
pub fn quad(t: &mut Tape, p: &[DualVar], a: &DualMat) -> DualVar {
    let ap = matvec(t, a, p);
    let terms: Vec<DualVar> = p.iter().zip(&ap).map(|(x, y)| x.mul(t, y)).collect();
    sum_all(t, terms).unwrap()
}

/// Var-level sum of optional terms; `None` when all are structural zeros.
pub fn sum_opt(t: &mut Tape, terms: impl IntoIterator<Item = Option<Var>>) -> Option<Var> {
    terms.into_iter().flatten().reduce(|a, b| t.add(a, b))
}

/// pᵀ A p for a matrix of optional entries (tangent matrices).
pub fn quad_opt(t: &mut Tape, p: &[Var], a: &[Vec<Option<Var>>]) -> Option<Var> {
    let d = p.len();
    let mut terms = Vec::new();
    for i in 0..d {
        for j in 0..d {
            if let Some(aij) = a[i][j] {
                let x = t.mul(p[i], aij);
                terms.push(Some(t.mul(x, p[j])));
            }
        }
    }
    sum_opt(t, terms)
}

/// Solves A x = b for symmetric positive definite A via its Cholesky
/// factor. Fails when A is not positive definite or its condition number,
/// estimated from the factor's diagonal, exceeds [`MAX_CONDITION`].
pub fn cholesky_solve(t: &mut Tape, a: &DualMat, b: &[DualVar]) -> Result<Vec<DualVar>> {
    let d = a.len();
    let mut l: Vec<Vec<Option<DualVar>>> = vec![vec![None; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i][j].clone();
            for k in 0..j {
                let prod = l[i][k].as_ref().unwrap().mul(t, l[j][k].as_ref().unwrap());
                s = s.sub(t, &prod);
            }
            let e = if i == j { s.sqrt(t) } else { s.div(t, l[j][j].as_ref().unwrap()) };
            l[i][j] = Some(e);
        }
    }
    let diag: Vec<&DualVar> = (0..d).map(|i| l[i][i].as_ref().unwrap()).collect();
    let rows = t.rows(diag[0].v);
    for r in 0..rows {
        let vals: Vec<f64> = diag.iter().map(|x| t.value(x.v).get(r, 0)).collect();
        if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::NumericFault(format!("inverse mass matrix is not positive definite (row {r})")));
        }
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(0.0, f64::max);
        let cond = (hi / lo).powi(2);
        if cond > MAX_CONDITION {
            return Err(Error::NumericFault(format!("inverse mass matrix condition {cond:.3e} exceeds limit (row {r})")));
        }
    }
    let mut y: Vec<DualVar> = Vec::with_capacity(d);
    for i in 0..d {
        let mut s = b[i].clone();
        for k in 0..i {
            let prod = l[i][k].as_ref().unwrap().mul(t, &y[k]);
            s = s.sub(t, &prod);
        }
        y.push(s.div(t, diag[i]));
    }
    let mut x: Vec<Option<DualVar>> = vec![None; d];
    for i in (0..d).rev() {
        let mut s = y[i].clone();
        for k in i + 1..d {
            let prod = l[k][i].as_ref().unwrap().mul(t, x[k].as_ref().unwrap());
            s = s.sub(t, &prod);
        }
        x[i] = Some(s.div(t, diag[i]));
    }
    Ok(x.into_iter().map(Option::unwrap).collect())
}
