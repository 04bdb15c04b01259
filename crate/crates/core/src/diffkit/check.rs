//! Central-difference gradient checking, used as a test oracle.

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::Result;

/// Worst relative error between the reverse-mode gradient of `f` at `x` and
/// central differences with step `h`.
///
/// `f` receives the point as a 1×n leaf and must return a 1×1 node. Each
/// comparison uses the denominator `max(|analytic|, |numeric|, 1e-8)`; any
/// failure or non-finite value counts as an infinite error.
pub fn grad_check<F>(f: F, x: &[f64], h: f64) -> f64
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    grad_check_leaves(|t, v| f(t, v[0]), &[Tensor::row(x.to_vec())], h, None)
}

/// [`grad_check`] over several leaf tensors at once. With `max_coords` set,
/// only that many evenly spaced entries of each leaf are perturbed.
pub fn grad_check_leaves<F>(f: F, leaves: &[Tensor], h: f64, max_coords: Option<usize>) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |vals: &[Tensor]| -> Option<f64> {
        let mut t = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|v| t.constant(v.clone())).collect();
        let out = f(&mut t, &vars).ok()?;
        let v = t.value(out);
        (v.shape() == (1, 1)).then(|| v.item())
    };

    let mut t = Tape::new();
    let vars: Vec<Var> = leaves.iter().map(|v| t.leaf(v.clone())).collect();
    let Ok(out) = f(&mut t, &vars) else { return f64::INFINITY };
    let Ok(grads) = t.backward(out) else { return f64::INFINITY };

    let mut worst = 0.0f64;
    let mut work: Vec<Tensor> = leaves.to_vec();
    for (li, leaf) in leaves.iter().enumerate() {
        let analytic = grads.get_or_zeros(&t, vars[li]);
        let len = leaf.data().len();
        let count = max_coords.map_or(len, |m| m.min(len));
        for s in 0..count {
            let k = if count == len { s } else { s * len / count };
            let orig = leaf.data()[k];
            work[li].data_mut()[k] = orig + h;
            let up = eval(&work);
            work[li].data_mut()[k] = orig - h;
            let down = eval(&work);
            work[li].data_mut()[k] = orig;
            let (Some(up), Some(down)) = (up, down) else { return f64::INFINITY };
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.data()[k];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if !err.is_finite() {
                return f64::INFINITY;
            }
            worst = worst.max(err);
        }
    }
    worst
}
