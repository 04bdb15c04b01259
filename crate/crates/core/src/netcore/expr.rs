//! Closed-form component functions. They stand in for trained networks
//! wherever a known ground truth should be plugged into the same interfaces.

use serde::{Deserialize, Serialize};

use crate::diffkit::{DualVar, Tape};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Input(usize),
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Sqrt(Box<Expr>),
}

pub fn input(i: usize) -> Expr {
    Expr::Input(i)
}

pub fn c(v: f64) -> Expr {
    Expr::Const(v)
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, o: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(o))
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, o: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(o))
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, o: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(o))
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, o: Expr) -> Expr {
        Expr::Div(Box::new(self), Box::new(o))
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

impl Expr {
    pub fn sin(self) -> Expr {
        Expr::Sin(Box::new(self))
    }

    pub fn cos(self) -> Expr {
        Expr::Cos(Box::new(self))
    }

    pub fn sqrt(self) -> Expr {
        Expr::Sqrt(Box::new(self))
    }

    /// Largest input index referenced, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Input(i) => i + 1,
            Expr::Const(_) => 0,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.arity().max(b.arity()),
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Sqrt(a) => a.arity(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Input(i) => x[*i],
            Expr::Const(v) => *v,
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Neg(a) => -a.eval(x),
            Expr::Sin(a) => a.eval(x).sin(),
            Expr::Cos(a) => a.eval(x).cos(),
            Expr::Sqrt(a) => a.eval(x).sqrt(),
        }
    }

    /// Evaluates on tape columns, carrying tangents.
    pub fn eval_dual(&self, t: &mut Tape, x: &[DualVar], rows: usize) -> DualVar {
        let dirs = x.iter().map(DualVar::dirs).max().unwrap_or(0);
        match self {
            Expr::Input(i) => x[*i].clone(),
            Expr::Const(v) => {
                let k = t.filled(rows, *v);
                DualVar::constant(k, dirs)
            }
            Expr::Add(a, b) => {
                let (a, b) = (a.eval_dual(t, x, rows), b.eval_dual(t, x, rows));
                a.add(t, &b)
            }
            Expr::Sub(a, b) => {
                let (a, b) = (a.eval_dual(t, x, rows), b.eval_dual(t, x, rows));
                a.sub(t, &b)
            }
            Expr::Mul(a, b) => {
                let (a, b) = (a.eval_dual(t, x, rows), b.eval_dual(t, x, rows));
                a.mul(t, &b)
            }
            Expr::Div(a, b) => {
                let (a, b) = (a.eval_dual(t, x, rows), b.eval_dual(t, x, rows));
                a.div(t, &b)
            }
            Expr::Neg(a) => a.eval_dual(t, x, rows).neg(t),
            Expr::Sin(a) => a.eval_dual(t, x, rows).sin(t),
            Expr::Cos(a) => a.eval_dual(t, x, rows).cos(t),
            Expr::Sqrt(a) => a.eval_dual(t, x, rows).sqrt(t),
        }
    }
}
