//! Dataset generation and the JSON-lines file format.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::task::Task;
use crate::error::{contract, ensure, Error, Result};
use crate::odeflow::Trajectory;

pub const DEFAULT_CONTROLS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

/// How initial conditions are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampling {
    /// Independent uniform draws within the task's ranges.
    Uniform,
    /// Pendulum tasks only: the (angle, rate) pair uniform in angle and
    /// radius on an annulus around the origin.
    Annulus { r_min: f64, r_max: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub task: Task,
    pub n_init: usize,
    pub controls: Vec<f64>,
    pub steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub sampling: Sampling,
    pub ranges: Vec<Range>,
    pub state_names: Vec<String>,
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub train: Vec<Trajectory>,
    pub test: Vec<Trajectory>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: DatasetMeta,
}

#[derive(Serialize, Deserialize)]
struct Line {
    task: Task,
    split: Split,
    dt: f64,
    u: Vec<f64>,
    states: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Split {
    Train,
    Test,
}

/// Control vector for level `k`. Single-input tasks use the level as is;
/// multi-input tasks put it on channel `k mod ctrl`.
pub fn control_vector(task: Task, k: usize, level: f64) -> Vec<f64> {
    let ctrl = task.dims().ctrl;
    let mut u = vec![0.0; ctrl];
    u[k % ctrl] = level;
    u
}

/// Draws `count` generalized initial states.
pub fn sample_initial(task: Task, count: usize, sampling: Sampling, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let ranges = task.ranges();
    match sampling {
        Sampling::Uniform => {
            Ok((0..count).map(|_| ranges.iter().map(|&(_, lo, hi)| rng.gen_range(lo..hi)).collect()).collect())
        }
        Sampling::Annulus { r_min, r_max } => {
            ensure(matches!(task, Task::Task1 | Task::Task2), || {
                format!("annulus sampling is defined for the pendulum tasks, not {task}")
            })?;
            ensure(0.0 <= r_min && r_min < r_max, || format!("bad annulus radii [{r_min}, {r_max}]"))?;
            Ok((0..count)
                .map(|_| {
                    let phi = rng.gen_range(-PI..PI);
                    let r = rng.gen_range(r_min..r_max);
                    vec![r * phi.cos(), r * phi.sin()]
                })
                .collect())
        }
    }
}

/// Everything [`generate_dataset`] needs, with the sampling mode exposed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub task: Task,
    pub n_init: usize,
    pub controls: Vec<f64>,
    pub steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub sampling: Sampling,
}

impl GenConfig {
    /// Task defaults: five control levels, 20 steps, the task's step size.
    pub fn new(task: Task, n_init: usize, seed: u64) -> Self {
        Self {
            task,
            n_init,
            controls: DEFAULT_CONTROLS.to_vec(),
            steps: 20,
            dt: task.dt(),
            seed,
            sampling: Sampling::Uniform,
        }
    }

    pub fn generate(&self) -> Result<Dataset> {
        let task = self.task;
        ensure(self.n_init >= 1, || "n_init must be at least 1".into())?;
        ensure(!self.controls.is_empty(), || "at least one control level is required".into())?;
        ensure(self.steps >= 1, || "steps must be at least 1".into())?;
        ensure(self.dt > 0.0, || format!("dt must be positive, got {}", self.dt))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let inits = sample_initial(task, 2 * self.n_init, self.sampling, &mut rng)?;
        let (train_init, test_init) = inits.split_at(self.n_init);
        let run = |init: &[Vec<f64>]| -> Result<Vec<Trajectory>> {
            let jobs: Vec<(Vec<f64>, &Vec<f64>)> = self
                .controls
                .iter()
                .enumerate()
                .flat_map(|(k, &c)| init.iter().map(move |g| (control_vector(task, k, c), g)))
                .collect();
            jobs.par_iter().map(|(u, g)| task.simulate(&task.embed(g), u, self.steps, self.dt)).collect()
        };
        let meta = DatasetMeta {
            task,
            n_init: self.n_init,
            controls: self.controls.clone(),
            steps: self.steps,
            dt: self.dt,
            seed: self.seed,
            sampling: self.sampling,
            ranges: task.ranges().into_iter().map(|(n, lo, hi)| Range { name: n.into(), lo, hi }).collect(),
            state_names: task.state_names().into_iter().map(String::from).collect(),
            params: task.params(),
        };
        Ok(Dataset { meta, train: run(train_init)?, test: run(test_init)? })
    }
}

/// `n_init × |controls|` training trajectories of `steps` RK4 steps on the
/// truth system, plus a test set of the same size from fresh initial states.
pub fn generate_dataset(task: Task, n_init: usize, controls: &[f64], steps: usize, dt: f64, seed: u64) -> Result<Dataset> {
    GenConfig { controls: controls.to_vec(), steps, dt, ..GenConfig::new(task, n_init, seed) }.generate()
}

impl Dataset {
    pub fn task(&self) -> Task {
        self.meta.task
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&Header { meta: self.meta.clone() })?;
        out.push('\n');
        for (split, trajs) in [(Split::Train, &self.train), (Split::Test, &self.test)] {
            for t in trajs {
                let line = Line { task: self.meta.task, split, dt: t.dt, u: t.u.clone(), states: t.states.clone() };
                out.push_str(&serde_json::to_string(&line)?);
                out.push('\n');
            }
        }
        Ok(out)
    }

    pub fn from_jsonl(s: &str) -> Result<Self> {
        let mut lines = s.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or_else(|| contract("empty dataset file"))?;
        let Header { meta } = serde_json::from_str(head).map_err(|e| Error::from(e).context("line 1"))?;
        let dim = meta.task.dims().state_dim();
        let ctrl = meta.task.dims().ctrl;
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (i, raw) in lines {
            let at = || format!("line {}", i + 1);
            let line: Line = serde_json::from_str(raw).map_err(|e| Error::from(e).context(at()))?;
            ensure(line.task == meta.task, || format!("{}: task {} differs from header task {}", at(), line.task, meta.task))?;
            ensure(line.u.len() == ctrl, || format!("{}: control has {} entries, expected {ctrl}", at(), line.u.len()))?;
            ensure(line.states.len() >= 2, || format!("{}: trajectory needs at least two states", at()))?;
            ensure(line.states.iter().all(|s| s.len() == dim && s.iter().all(|v| v.is_finite())), || {
                format!("{}: states must be finite with {dim} components", at())
            })?;
            ensure(line.dt > 0.0, || format!("{}: dt must be positive", at()))?;
            let t = Trajectory { states: line.states, u: line.u, dt: line.dt };
            match line.split {
                Split::Train => train.push(t),
                Split::Test => test.push(t),
            }
        }
        Ok(Dataset { meta, train, test })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()?).map_err(|e| Error::from(e).context(path.display().to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
        Self::from_jsonl(&s).map_err(|e| e.context(path.display().to_string()))
    }

    /// Distinct initial states of the training set, in order.
    pub fn train_initial_states(&self) -> Vec<Vec<f64>> {
        let mut seen: Vec<Vec<u64>> = Vec::new();
        let mut out = Vec::new();
        for t in &self.train {
            let key: Vec<u64> = t.states[0].iter().map(|v| v.to_bits()).collect();
            if !seen.contains(&key) {
                seen.push(key);
                out.push(t.states[0].clone());
            }
        }
        out
    }
}
