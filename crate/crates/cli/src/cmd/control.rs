use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use symoden_core::energyctl::{closed_loop_rollout, wrap_angle, ControlLaw};
use symoden_core::envsim::{truth_bundle, Task};
use symoden_core::{Error, Result};

use super::eval::{check_compatible, load_model};
use super::write_file;
use crate::config::usage;

#[derive(Args, Debug)]
pub struct ControlArgs {
    #[arg(long)]
    pub task: Task,
    /// Learned model; the analytic stand-in is used when absent.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Initial state in generalized coordinates, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Target configuration for the PD law, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub target: Option<Vec<f64>>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Diagonal stiffness of the PD law.
    #[arg(long)]
    pub kp: Option<f64>,
    /// Diagonal damping of the PD law.
    #[arg(long)]
    pub kd: Option<f64>,
    /// Directory for `closed_loop.csv` and `summary.json`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Initial state, target, gains, steps and step size used when not given.
pub struct Defaults {
    pub x0: Vec<f64>,
    pub target: Vec<f64>,
    pub gain: f64,
    pub steps: usize,
    pub dt: f64,
}

pub fn defaults(task: Task) -> Defaults {
    let (x0, target, gain, steps, dt) = match task {
        Task::Task1 => (vec![0.0, 0.0], vec![PI], 1.0, 400, 0.05),
        Task::Task2 => (vec![1e-3, 0.0], vec![PI], 1.0, 1000, 0.05),
        Task::Task3 | Task::Task3Fa => (vec![0.5, PI, 0.0, 0.0], vec![0.0, 0.0], 1.0, 750, 0.02),
        Task::Task4 | Task::Task4Fa => (vec![0.0, 0.0, 0.0, 0.0], vec![PI, 0.0], 5.0, 600, 0.05),
    };
    Defaults { x0, target, gain, steps, dt }
}

/// Whether a generalized state is inside the task's target region.
pub fn on_target(task: Task, g: &[f64]) -> bool {
    match task {
        Task::Task1 | Task::Task2 => g[0].cos() < -0.95 && g[1].abs() < 0.1,
        Task::Task3 | Task::Task3Fa => g[0].abs() < 0.1 && g[1].cos() > 0.95,
        Task::Task4 | Task::Task4Fa => g[0].cos() < -0.9 && wrap_angle(g[1]).abs() < 0.5,
    }
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub task: Task,
    pub law: &'static str,
    pub model: String,
    pub steps: usize,
    pub dt: f64,
    pub x0: Vec<f64>,
    pub final_state: Vec<f64>,
    pub success: bool,
    pub first_on_target_s: Option<f64>,
    pub max_abs_u: f64,
}

pub fn run(a: &ControlArgs, out: &Path) -> Result<()> {
    let task = a.task;
    if !task.fully_actuated() {
        return Err(Error::SingularActuation(format!(
            "{task} is underactuated: potential energy shaping alone cannot place its equilibrium; use {task}-fa"
        )));
    }
    let d = defaults(task);
    let model = match &a.checkpoint {
        Some(p) => {
            let m = load_model(p)?;
            check_compatible(&m, task, p)?;
            m
        }
        None => truth_bundle(task)?,
    };
    let model_name = a.checkpoint.as_ref().map_or("analytic stand-in".to_string(), |p| p.display().to_string());
    let dof = task.dims().dof();
    let x0 = a.x0.clone().unwrap_or(d.x0);
    if x0.len() != 2 * dof {
        return Err(usage(format!("{task} needs {} generalized initial values, got {}", 2 * dof, x0.len())));
    }
    let (law, name) = if task == Task::Task2 {
        (ControlLaw::swingup(model)?, "swing-up")
    } else {
        let target = a.target.clone().unwrap_or(d.target);
        (ControlLaw::pd_diag(model, target, a.kp.unwrap_or(d.gain), a.kd.unwrap_or(d.gain))?, "pd-energy")
    };
    let steps = a.steps.unwrap_or(d.steps);
    let dt = a.dt.unwrap_or(d.dt);
    if !(dt > 0.0) {
        return Err(usage(format!("dt must be positive, got {dt}")));
    }
    let run = closed_loop_rollout(&task, &law, &task.embed(&x0), steps, dt)?;
    let gen: Vec<Vec<f64>> = run.states.iter().map(|s| task.generalize(s)).collect::<Result<_>>()?;
    let final_state = gen.last().cloned().unwrap_or_default();
    let summary = Summary {
        task,
        law: name,
        model: model_name,
        steps,
        dt,
        x0,
        success: on_target(task, &final_state),
        final_state,
        first_on_target_s: gen.iter().position(|g| on_target(task, g)).map(|k| k as f64 * dt),
        max_abs_u: run.max_abs_control(),
    };
    let dir = a.output.clone().unwrap_or_else(|| out.join("control").join(task.name()));
    write_file(&dir.join("closed_loop.csv"), &run.to_csv(&task.state_names()))?;
    write_file(&dir.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    println!(
        "{task} {name}: success {}, final {:?}, max |u| {:.3}; wrote {}",
        summary.success,
        summary.final_state.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
        summary.max_abs_u,
        dir.display()
    );
    Ok(())
}
