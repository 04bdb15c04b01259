//! Named building blocks of a model: a network (or closed-form stand-in)
//! together with the head that interprets its raw outputs.

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::mlp::{init_params, mlp_eval, BoundMlp, MlpParams, MlpSpec};
use crate::diffkit::{DualVar, Tape, Tensor, Var};
use crate::error::{ensure, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Net {
    Mlp(MlpParams),
    Closed { closed_form: Vec<Expr> },
}

/// How the raw outputs of a mass head are turned into M⁻¹.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    /// Outputs fill a lower-triangular L; M⁻¹ = LLᵀ + εI.
    Cholesky,
    /// Outputs are the lower triangle of M⁻¹ itself (closed-form stand-ins).
    Direct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Head {
    /// Raw outputs used as they are.
    Raw,
    MassInv { n: usize, epsilon: f64, factor: Factor },
    InputMatrix { rows: usize, cols: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    #[serde(flatten)]
    pub net: Net,
    pub head: Head,
}

pub const DEFAULT_EPSILON: f64 = 0.01;

/// Position of raw output `k` in the row-ordered lower triangle.
pub fn lower_index(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (0..=i).map(move |j| (i, j))).collect()
}

impl Component {
    pub fn mlp(spec: &MlpSpec, seed: u64, head: Head) -> Self {
        Self { net: Net::Mlp(init_params(spec, seed)), head }
    }

    pub fn closed(exprs: Vec<Expr>, head: Head) -> Self {
        Self { net: Net::Closed { closed_form: exprs }, head }
    }

    /// Number of raw outputs the head expects.
    pub fn expected_outputs(&self) -> Option<usize> {
        match self.head {
            Head::Raw => None,
            Head::MassInv { n, .. } => Some(n * (n + 1) / 2),
            Head::InputMatrix { rows, cols } => Some(rows * cols),
        }
    }

    pub fn output_dim(&self) -> usize {
        match &self.net {
            Net::Mlp(p) => p.spec.output_dim(),
            Net::Closed { closed_form } => closed_form.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.expected_outputs() {
            ensure(e == self.output_dim(), || {
                format!("head {:?} needs {e} outputs, net has {}", self.head, self.output_dim())
            })?;
        }
        if let Head::MassInv { epsilon, factor: Factor::Cholesky, .. } = self.head {
            ensure(epsilon > 0.0, || format!("mass head epsilon must be positive, got {epsilon}"))?;
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        match &self.net {
            Net::Mlp(p) => p.param_count(),
            Net::Closed { .. } => 0,
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match &self.net {
            Net::Mlp(p) => p.params(),
            Net::Closed { .. } => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match &mut self.net {
            Net::Mlp(p) => p.params_mut(),
            Net::Closed { .. } => Vec::new(),
        }
    }

    /// Raw outputs at a single input.
    pub fn eval_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.net {
            Net::Mlp(p) => mlp_eval(p, x),
            Net::Closed { closed_form } => {
                let need = closed_form.iter().map(Expr::arity).max().unwrap_or(0);
                ensure(x.len() >= need, || format!("closed form reads {need} inputs, got {}", x.len()))?;
                Ok(closed_form.iter().map(|e| e.eval(x)).collect())
            }
        }
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundNet {
        match &self.net {
            Net::Mlp(p) => BoundNet::Mlp(p.bind(tape, trainable)),
            Net::Closed { closed_form } => BoundNet::Closed(closed_form.clone()),
        }
    }

    /// Binds to existing parameter nodes taken from the front of `leaves`
    /// (in [`Component::params`] order); returns the unused rest.
    pub fn bind_to<'a>(&self, leaves: &'a [Var]) -> Result<(BoundNet, &'a [Var])> {
        match &self.net {
            Net::Mlp(p) => {
                let k = 2 * p.layers.len();
                ensure(leaves.len() >= k, || format!("net needs {k} parameter nodes, {} left", leaves.len()))?;
                let layers = leaves[..k].chunks(2).map(|c| (c[0], c[1])).collect();
                Ok((BoundNet::Mlp(BoundMlp { layers }), &leaves[k..]))
            }
            Net::Closed { closed_form } => Ok((BoundNet::Closed(closed_form.clone()), leaves)),
        }
    }
}

#[derive(Clone, Debug)]
pub enum BoundNet {
    Mlp(BoundMlp),
    Closed(Vec<Expr>),
}

impl BoundNet {
    pub fn leaves(&self) -> Vec<Var> {
        match self {
            BoundNet::Mlp(b) => b.leaves(),
            BoundNet::Closed(_) => Vec::new(),
        }
    }

    /// Raw output columns for input columns.
    pub fn forward_dual(&self, t: &mut Tape, inputs: &[DualVar]) -> Vec<DualVar> {
        match self {
            BoundNet::Mlp(b) => b.forward_dual(t, inputs),
            BoundNet::Closed(exprs) => {
                let rows = t.rows(inputs[0].v);
                exprs.iter().map(|e| e.eval_dual(t, inputs, rows)).collect()
            }
        }
    }

    /// Raw outputs as one B×out node, without tangents.
    pub fn forward(&self, t: &mut Tape, x: Var) -> Var {
        match self {
            BoundNet::Mlp(b) => b.forward(t, x),
            BoundNet::Closed(exprs) => {
                let rows = t.rows(x);
                let cols: Vec<DualVar> =
                    (0..t.shape(x).1).map(|j| DualVar::constant(t.col(x, j), 0)).collect();
                let outs: Vec<Var> = exprs.iter().map(|e| e.eval_dual(t, &cols, rows).v).collect();
                if outs.len() == 1 {
                    outs[0]
                } else {
                    t.concat_cols(&outs)
                }
            }
        }
    }
}

/// Assembles the symmetric n×n M⁻¹ from raw head outputs.
pub fn mass_inv_from_outputs(out: &[f64], n: usize, epsilon: f64, factor: Factor) -> Vec<Vec<f64>> {
    let mut tri = vec![vec![0.0; n]; n];
    for (k, (i, j)) in lower_index(n).into_iter().enumerate() {
        tri[i][j] = out[k];
    }
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let v = match factor {
                Factor::Cholesky => (0..=j).map(|k| tri[i][k] * tri[j][k]).sum::<f64>() + if i == j { epsilon } else { 0.0 },
                Factor::Direct => tri[i][j],
            };
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

/// M⁻¹ at `coords` for a component with a mass head.
pub fn mass_inv(head: &Component, coords: &[f64]) -> Result<Vec<Vec<f64>>> {
    let Head::MassInv { n, epsilon, factor } = head.head else {
        return Err(crate::error::contract(format!("{:?} is not a mass head", head.head)));
    };
    head.validate()?;
    Ok(mass_inv_from_outputs(&head.eval_raw(coords)?, n, epsilon, factor))
}

/// Scalar potential V(coords).
pub fn potential_eval(params: &MlpParams, coords: &[f64]) -> Result<f64> {
    ensure(params.spec.output_dim() == 1, || "potential net must have one output".into())?;
    Ok(mlp_eval(params, coords)?[0])
}

/// g(coords) reshaped row-major into n×m.
pub fn input_matrix_eval(params: &MlpParams, coords: &[f64], n: usize, m: usize) -> Result<Vec<Vec<f64>>> {
    ensure(params.spec.output_dim() == n * m, || {
        format!("input-matrix net has {} outputs, need {}", params.spec.output_dim(), n * m)
    })?;
    let out = mlp_eval(params, coords)?;
    Ok(out.chunks(m).map(<[f64]>::to_vec).collect())
}

/// Tape version of [`mass_inv_from_outputs`]; tangents propagate.
pub fn mass_inv_dual(t: &mut Tape, out: &[DualVar], n: usize, epsilon: f64, factor: Factor) -> Vec<Vec<DualVar>> {
    let mut tri: Vec<Vec<Option<DualVar>>> = vec![vec![None; n]; n];
    for (k, (i, j)) in lower_index(n).into_iter().enumerate() {
        tri[i][j] = Some(out[k].clone());
    }
    let mut m: Vec<Vec<Option<DualVar>>> = vec![vec![None; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let v = match factor {
                Factor::Direct => tri[i][j].clone().unwrap(),
                Factor::Cholesky => {
                    let mut acc: Option<DualVar> = None;
                    for k in 0..=j {
                        let p = tri[i][k].as_ref().unwrap().mul(t, tri[j][k].as_ref().unwrap());
                        acc = Some(match acc {
                            Some(a) => a.add(t, &p),
                            None => p,
                        });
                    }
                    let s = acc.unwrap();
                    if i == j {
                        s.affine(t, 1.0, epsilon)
                    } else {
                        s
                    }
                }
            };
            m[j][i] = Some(v.clone());
            m[i][j] = Some(v);
        }
    }
    m.into_iter().map(|r| r.into_iter().map(Option::unwrap).collect()).collect()
}

/// Tape version of the n×m reshape of g.
pub fn input_matrix_dual(out: &[DualVar], rows: usize, cols: usize) -> Vec<Vec<DualVar>> {
    (0..rows).map(|i| out[i * cols..(i + 1) * cols].to_vec()).collect()
}
