//! Forward-mode dual numbers for directional derivatives of plain functions.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{ensure, Result};

/// `primal + tangent·δ` with `δ² = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Dual {
    pub primal: f64,
    pub tangent: f64,
}

impl Dual {
    pub fn new(primal: f64, tangent: f64) -> Self {
        Self { primal, tangent }
    }

    pub fn constant(primal: f64) -> Self {
        Self { primal, tangent: 0.0 }
    }

    pub fn tanh(self) -> Self {
        let t = self.primal.tanh();
        Self::new(t, self.tangent * (1.0 - t * t))
    }

    pub fn sin(self) -> Self {
        Self::new(self.primal.sin(), self.tangent * self.primal.cos())
    }

    pub fn cos(self) -> Self {
        Self::new(self.primal.cos(), -self.tangent * self.primal.sin())
    }

    pub fn sqrt(self) -> Self {
        let s = self.primal.sqrt();
        Self::new(s, 0.5 * self.tangent / s)
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.primal + o.primal, self.tangent + o.tangent)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.primal - o.primal, self.tangent - o.tangent)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.primal * o.primal, self.primal * o.tangent + self.tangent * o.primal)
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let q = self.primal / o.primal;
        Dual::new(q, (self.tangent - q * o.tangent) / o.primal)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.primal, -self.tangent)
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, s: f64) -> Dual {
        Dual::new(self.primal * s, self.tangent * s)
    }
}

/// Row-major matrix (`rows` of equal length) times vector.
pub fn matvec(a: &[Vec<Dual>], x: &[Dual]) -> Vec<Dual> {
    a.iter()
        .map(|row| row.iter().zip(x).fold(Dual::constant(0.0), |acc, (&r, &v)| acc + r * v))
        .collect()
}

/// Jacobian-vector product `J_f(x)·v`, by seeding each input with its
/// tangent component.
pub fn jvp<F>(f: F, x: &[f64], v: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[Dual]) -> Vec<Dual>,
{
    ensure(x.len() == v.len(), || {
        format!("jvp: point has {} components but direction has {}", x.len(), v.len())
    })?;
    let seeded: Vec<Dual> = x.iter().zip(v).map(|(&p, &t)| Dual::new(p, t)).collect();
    Ok(f(&seeded).into_iter().map(|d| d.tangent).collect())
}
