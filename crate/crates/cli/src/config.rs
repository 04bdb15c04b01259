//! Experiment configuration: a JSON file overlaid with command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use symoden_core::envsim::{Sampling, Scale, Task, DEFAULT_CONTROLS};
use symoden_core::hamdyn::Variant;
use symoden_core::odeflow::{Objective, TrainConfig};
use symoden_core::{Error, Result};

pub fn usage(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

/// Everything an experiment needs. Missing entries fall back to task defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub task: Option<Task>,
    pub variant: Option<Variant>,
    pub n_init: Option<usize>,
    pub steps: Option<usize>,
    pub dt: Option<f64>,
    pub controls: Option<Vec<f64>>,
    pub data_seed: Option<u64>,
    pub sampling: Option<Sampling>,
    pub scale: Option<Scale>,
    pub out: Option<PathBuf>,
    #[serde(flatten)]
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("bad config {}: {e}", path.display())))
    }

    pub fn task(&self) -> Result<Task> {
        self.task.ok_or_else(|| usage("no task given (use --task or a config file)"))
    }

    pub fn n_init(&self) -> usize {
        self.n_init.unwrap_or(64)
    }

    pub fn scale(&self) -> Scale {
        self.scale.unwrap_or(Scale::Desk)
    }

    pub fn controls(&self) -> Vec<f64> {
        self.controls.clone().unwrap_or_else(|| DEFAULT_CONTROLS.to_vec())
    }

    /// The task's structured model unless a variant was named; illegal
    /// pairings are refused.
    pub fn variant(&self) -> Result<Variant> {
        let task = self.task()?;
        let v = self.variant.unwrap_or_else(|| task.symoden_variant());
        check_variant(task, v)?;
        Ok(v)
    }
}

pub fn check_variant(task: Task, v: Variant) -> Result<()> {
    let legal = task.variants();
    if legal.contains(&v) {
        Ok(())
    } else {
        let names: Vec<&str> = legal.iter().map(|v| v.name()).collect();
        Err(usage(format!("variant {v} is not available for {task} (choose from {})", names.join(", "))))
    }
}

fn parse_objective(s: &str) -> std::result::Result<Objective, String> {
    match s {
        "integrated" => Ok(Objective::Integrated),
        "gradient_matching" => Ok(Objective::GradientMatching),
        _ => Err(format!("unknown objective `{s}` (expected integrated or gradient_matching)")),
    }
}

/// Flags shared by the experiment subcommands; each one overrides the config file.
#[derive(Args, Clone, Debug, Default)]
pub struct ExpArgs {
    /// JSON experiment config; flags take precedence over its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<Task>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub n_init: Option<usize>,
    /// Steps per trajectory.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Constant control levels, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub controls: Option<Vec<f64>>,
    /// Seed for initial-condition sampling.
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// desk (default) or full.
    #[arg(long)]
    pub scale: Option<Scale>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub tau: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Seed for weight initialization and batch order.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_objective)]
    pub objective: Option<Objective>,
    #[arg(long)]
    pub chunk_rows: Option<usize>,
}

impl ExpArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! over {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { c.$f = Some(v); } )* };
        }
        over!(task, variant, n_init, steps, dt, controls, data_seed, scale);
        if let Some(v) = self.epochs {
            c.train.epochs = v;
        }
        if let Some(v) = self.tau {
            c.train.tau = v;
        }
        if let Some(v) = self.lr {
            c.train.learning_rate = v;
        }
        if let Some(v) = self.seed {
            c.train.seed = v;
        }
        if let Some(v) = self.objective {
            c.train.objective = v;
        }
        if let Some(v) = self.chunk_rows {
            c.train.chunk_rows = v;
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"task":"task2","n_init":8,"epochs":5,"tau":2}"#).unwrap();
        let args = ExpArgs { config: Some(p), n_init: Some(16), tau: Some(1), ..ExpArgs::default() };
        let c = args.resolve().unwrap();
        assert_eq!(c.task, Some(Task::Task2));
        assert_eq!(c.n_init, Some(16));
        assert_eq!(c.train.epochs, 5);
        assert_eq!(c.train.tau, 1);
        assert_eq!(c.variant().unwrap(), Variant::SymEmbedded);
    }

    #[test]
    fn illegal_variant_refused() {
        let c = ExperimentConfig { task: Some(Task::Task2), variant: Some(Variant::SymRn), ..Default::default() };
        assert!(matches!(c.variant(), Err(Error::Contract(_))));
    }

    #[test]
    fn unknown_config_entries_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"task":"task9"}"#).unwrap();
        assert!(ExperimentConfig::load(&p).is_err());
    }
}
