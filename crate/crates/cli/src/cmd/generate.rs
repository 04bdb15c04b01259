use std::path::{Path, PathBuf};

use clap::Args;
use symoden_core::envsim::{Dataset, GenConfig, Sampling};
use symoden_core::Result;

use super::write_file;
use crate::config::{ExpArgs, ExperimentConfig};

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub exp: ExpArgs,
    /// Dataset path; defaults to `<out>/data/<task>-n<n_init>-s<seed>.jsonl`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn gen_config(c: &ExperimentConfig) -> Result<GenConfig> {
    let task = c.task()?;
    Ok(GenConfig {
        task,
        n_init: c.n_init(),
        controls: c.controls(),
        steps: c.steps.unwrap_or(20),
        dt: c.dt.unwrap_or(task.dt()),
        seed: c.data_seed.unwrap_or(0),
        sampling: c.sampling.unwrap_or(Sampling::Uniform),
    })
}

pub fn default_path(out: &Path, g: &GenConfig) -> PathBuf {
    out.join("data").join(format!("{}-n{}-s{}.jsonl", g.task, g.n_init, g.seed))
}

pub fn summary(ds: &Dataset) -> String {
    let m = &ds.meta;
    format!(
        "{} train + {} test trajectories ({}, n_init {}, {} controls, {} steps of {})",
        ds.train.len(),
        ds.test.len(),
        m.task,
        m.n_init,
        m.controls.len(),
        m.steps,
        m.dt
    )
}

pub fn run(a: &GenerateArgs, out: &Path) -> Result<()> {
    let c = a.exp.resolve()?;
    let g = gen_config(&c)?;
    let ds = g.generate()?;
    let path = a.output.clone().unwrap_or_else(|| default_path(c.out.as_deref().unwrap_or(out), &g));
    write_file(&path, &ds.to_jsonl()?)?;
    println!("wrote {}: {}", path.display(), summary(&ds));
    Ok(())
}
