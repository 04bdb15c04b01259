use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use symoden_core::envsim::{mean_std, model_rollouts, per_trajectory_errors, prediction_truth, Dataset, Task};
use symoden_core::hamdyn::ModelBundle;
use symoden_core::Result;

use super::train::load_dataset;
use super::{read_file, write_file};
use crate::config::usage;

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Model checkpoints (repeatable).
    #[arg(long = "checkpoint", required = true)]
    pub checkpoints: Vec<PathBuf>,
    /// Length of the prediction rollouts.
    #[arg(long, default_value_t = 40)]
    pub pred_steps: usize,
    /// Metrics CSV; the per-step curves go next to it as `<stem>_curves.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub variant: String,
    pub checkpoint: String,
    pub n_init: usize,
    pub params: usize,
    pub train_error: f64,
    pub train_std: f64,
    pub test_error: f64,
    pub test_std: f64,
    pub prediction_error: f64,
    pub prediction_std: f64,
    #[serde(default)]
    pub tau: Option<usize>,
}

/// Mean squared error and truth energy along the prediction rollouts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub variant: String,
    pub step: usize,
    pub t: f64,
    pub mse: f64,
    pub energy: f64,
}

pub fn load_model(path: &Path) -> Result<ModelBundle> {
    ModelBundle::from_json(&read_file(path)?).map_err(|e| usage(format!("bad checkpoint {}: {e}", path.display())))
}

pub fn check_compatible(model: &ModelBundle, task: Task, what: &Path) -> Result<()> {
    if model.dims != task.dims() {
        return Err(usage(format!(
            "checkpoint {} ({} with dims {:?}) does not fit {task} data (dims {:?})",
            what.display(),
            model.variant,
            model.dims,
            task.dims()
        )));
    }
    Ok(())
}

pub fn score(model: &ModelBundle, ds: &Dataset, pred_steps: usize, checkpoint: &str) -> Result<MetricsRow> {
    let (train_error, train_std) = mean_std(&per_trajectory_errors(model, &ds.train)?);
    let (test_error, test_std) = mean_std(&per_trajectory_errors(model, &ds.test)?);
    let truth = prediction_truth(ds, pred_steps)?;
    let pred: Vec<f64> = per_trajectory_errors(model, &truth)?;
    let (prediction_error, prediction_std) = mean_std(&pred);
    Ok(MetricsRow {
        variant: model.variant.name().into(),
        checkpoint: checkpoint.into(),
        n_init: ds.meta.n_init,
        params: model.param_count(),
        train_error,
        train_std,
        test_error,
        test_std,
        prediction_error,
        prediction_std,
        tau: None,
    })
}

fn curve(label: &str, task: Task, dt: f64, runs: &[Vec<Vec<f64>>], truth: &[Vec<Vec<f64>>]) -> Result<Vec<CurveRow>> {
    let steps = truth.first().map_or(0, Vec::len);
    let n = truth.len().max(1) as f64;
    (0..steps)
        .map(|k| {
            let mut mse = 0.0;
            let mut energy = 0.0;
            for (p, t) in runs.iter().zip(truth) {
                let d = t[k].len() as f64;
                mse += p[k].iter().zip(&t[k]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / d;
                energy += task.energy(&p[k])?;
            }
            Ok(CurveRow { variant: label.into(), step: k, t: k as f64 * dt, mse: mse / n, energy: energy / n })
        })
        .collect()
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| usage(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| usage(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn curves_path(metrics: &Path) -> PathBuf {
    let stem = metrics.file_stem().and_then(|s| s.to_str()).unwrap_or("metrics");
    metrics.with_file_name(format!("{stem}_curves.csv"))
}

pub fn run(a: &EvalArgs, out: &Path) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let task = ds.task();
    let truth = prediction_truth(&ds, a.pred_steps)?;
    let truth_states: Vec<Vec<Vec<f64>>> = truth.iter().map(|t| t.states.clone()).collect();
    let mut rows = Vec::new();
    let mut curves = curve("truth", task, ds.meta.dt, &truth_states, &truth_states)?;
    for p in &a.checkpoints {
        let model = load_model(p)?;
        check_compatible(&model, task, p)?;
        let row = score(&model, &ds, a.pred_steps, &p.display().to_string())?;
        let runs = model_rollouts(&model, &truth)?;
        curves.extend(curve(&row.variant, task, ds.meta.dt, &runs, &truth_states)?);
        println!(
            "{:<20} params {:>8}  train {:.4e}  test {:.4e}  prediction {:.4e} ± {:.4e}",
            row.variant, row.params, row.train_error, row.test_error, row.prediction_error, row.prediction_std
        );
        rows.push(row);
    }
    let path = a.output.clone().unwrap_or_else(|| out.join("metrics.csv"));
    write_file(&path, &to_csv(&rows)?)?;
    write_file(&curves_path(&path), &to_csv(&curves)?)?;
    println!("wrote {} and {}", path.display(), curves_path(&path).display());
    Ok(())
}
