//! End-to-end training through the unrolled integrator.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::integrate::{make_windows, Trajectory};
use super::loss::{finite_differences, integrated_error_tape, matching_error_tape, stack_windows};
use crate::diffkit::{Tape, Tensor};
use crate::error::{ensure, Error, Result};
use crate::hamdyn::ModelBundle;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// τ-step rollouts through RK4.
    Integrated,
    /// Field against finite-difference derivatives.
    GradientMatching,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub tau: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub objective: Objective,
    /// Rows per tape; bounds memory and sets the unit of parallel work.
    pub chunk_rows: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let a = AdamConfig::default();
        Self {
            tau: 3,
            epochs: 300,
            learning_rate: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
            seed: 0,
            objective: Objective::Integrated,
            chunk_rows: 256,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.learning_rate, beta1: self.beta1, beta2: self.beta2, eps: self.eps }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_error: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub records: Vec<EpochRecord>,
}

impl LossReport {
    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.train_error).collect()
    }

    pub fn wall_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.wall_time_s)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_error,wall_time_s\n");
        for r in &self.records {
            s.push_str(&format!("{},{},{}\n", r.epoch, r.train_error, r.wall_time_s));
        }
        s
    }
}

/// One minibatch, stacked row-wise.
enum Batch {
    Windows { roots: Tensor, u: Tensor, targets: Vec<Tensor>, h: f64 },
    Points { states: Tensor, u: Tensor, derivs: Tensor },
}

impl Batch {
    fn rows(&self) -> usize {
        match self {
            Batch::Windows { roots, .. } => roots.rows(),
            Batch::Points { states, .. } => states.rows(),
        }
    }

    /// Number of terms the summed error is averaged over.
    fn denominator(&self) -> f64 {
        match self {
            Batch::Windows { roots, .. } => roots.rows() as f64,
            Batch::Points { states, .. } => (states.rows() * states.cols()) as f64,
        }
    }

    /// Summed error over rows `a..b` and its parameter gradients.
    fn chunk(&self, model: &ModelBundle, a: usize, b: usize) -> Result<(f64, Vec<Tensor>)> {
        let mut t = Tape::new();
        let bound = model.bind(&mut t, true);
        let err = match self {
            Batch::Windows { roots, u, targets, h } => {
                let targets: Vec<Tensor> = targets.iter().map(|y| y.slice_rows(a, b)).collect();
                integrated_error_tape(model, &bound, &mut t, &roots.slice_rows(a, b), &u.slice_rows(a, b), &targets, *h)?
            }
            Batch::Points { states, u, derivs } => matching_error_tape(
                model,
                &bound,
                &mut t,
                &states.slice_rows(a, b),
                &u.slice_rows(a, b),
                &derivs.slice_rows(a, b),
            )?,
        };
        let value = t.value(err).item();
        let grads = t.backward(err)?;
        Ok((value, bound.leaves().into_iter().map(|l| grads.get_or_zeros(&t, l)).collect()))
    }

    /// Mean loss and its gradient, summing chunks in a fixed order.
    fn loss_and_grad(&self, model: &ModelBundle, chunk_rows: usize) -> Result<(f64, Vec<Tensor>)> {
        let n = self.rows();
        let bounds: Vec<(usize, usize)> =
            (0..n).step_by(chunk_rows).map(|a| (a, (a + chunk_rows).min(n))).collect();
        let parts: Vec<(f64, Vec<Tensor>)> =
            bounds.par_iter().map(|&(a, b)| self.chunk(model, a, b)).collect::<Result<_>>()?;
        let mut iter = parts.into_iter();
        let (mut total, mut grads) = iter.next().expect("non-empty batch");
        for (v, g) in iter {
            total += v;
            for (acc, g) in grads.iter_mut().zip(&g) {
                acc.add_assign(g);
            }
        }
        let scale = 1.0 / self.denominator();
        Ok((total * scale, grads.into_iter().map(|g| g.map(|x| x * scale)).collect()))
    }
}

/// Groups trajectories by control level, in order of first appearance.
pub fn group_by_control(trajs: &[Trajectory]) -> Vec<Vec<usize>> {
    let mut keys: Vec<Vec<u64>> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, tr) in trajs.iter().enumerate() {
        let key: Vec<u64> = tr.u.iter().map(|v| v.to_bits()).collect();
        match keys.iter().position(|k| *k == key) {
            Some(g) => groups[g].push(i),
            None => {
                keys.push(key);
                groups.push(vec![i]);
            }
        }
    }
    groups
}

fn make_batch(trajs: &[&Trajectory], cfg: &TrainConfig) -> Result<Batch> {
    let h = trajs[0].dt;
    ensure(trajs.iter().all(|t| t.dt == h), || "trajectories in a batch differ in step size".into())?;
    match cfg.objective {
        Objective::Integrated => {
            let mut windows = Vec::new();
            for t in trajs {
                windows.extend(make_windows(t, cfg.tau)?);
            }
            let (roots, u, targets) = stack_windows(&windows)?;
            Ok(Batch::Windows { roots, u, targets, h })
        }
        Objective::GradientMatching => {
            let (mut states, mut u, mut derivs) = (Vec::new(), Vec::new(), Vec::new());
            for t in trajs {
                derivs.extend(finite_differences(t)?);
                states.extend(t.states.iter().cloned());
                u.extend(std::iter::repeat_n(t.u.clone(), t.states.len()));
            }
            Ok(Batch::Points {
                states: Tensor::from_rows(&states),
                u: Tensor::from_rows(&u),
                derivs: Tensor::from_rows(&derivs),
            })
        }
    }
}

/// Trains `model` in place. Each epoch visits one minibatch per control
/// level, in an order shuffled from `cfg.seed`, taking one Adam step per
/// batch. The recorded train error is the mean pre-update batch loss.
pub fn train(model: &mut ModelBundle, trajs: &[Trajectory], cfg: &TrainConfig) -> Result<LossReport> {
    ensure(!trajs.is_empty(), || "no training trajectories".into())?;
    ensure(cfg.chunk_rows >= 1, || "chunk_rows must be at least 1".into())?;
    let dim = model.dims.state_dim();
    ensure(trajs.iter().all(|t| t.state_dim() == dim && t.u.len() == model.dims.ctrl), || {
        format!("trajectories do not match the model's state dimension {dim} and control dimension {}", model.dims.ctrl)
    })?;
    let batches: Vec<Batch> = group_by_control(trajs)
        .iter()
        .map(|g| make_batch(&g.iter().map(|&i| &trajs[i]).collect::<Vec<_>>(), cfg))
        .collect::<Result<_>>()?;

    let adam = cfg.adam();
    let mut state = AdamState::zeros_like(&model.params());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..batches.len()).collect();
    let mut report = LossReport::default();
    let mut step = 0u64;
    let start = Instant::now();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for &bi in &order {
            let (loss, grads) = batches[bi]
                .loss_and_grad(model, cfg.chunk_rows)
                .map_err(|e| e.context(format!("epoch {epoch}, batch {bi}")))?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NumericFault(format!("epoch {epoch}, batch {bi}: non-finite loss or gradient")));
            }
            step += 1;
            adam_step(&mut model.params_mut(), &grads, &mut state, step, &adam);
            sum += loss;
        }
        report.records.push(EpochRecord {
            epoch,
            train_error: sum / batches.len() as f64,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(report)
}
