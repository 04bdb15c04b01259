use std::path::{Path, PathBuf};

use clap::Args;
use symoden_core::envsim::{build_model, Dataset, Scale};
use symoden_core::odeflow::train;
use symoden_core::{Error, Result};

use super::generate::{gen_config, summary};
use super::write_file;
use crate::config::{check_variant, usage, ExpArgs};

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub exp: ExpArgs,
    /// Dataset to train on; generated from the config when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Run directory; defaults to `<out>/runs/<task>-<variant>-n<n_init>`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::read(path).map_err(|e| match e {
        Error::Io(io) => usage(format!("cannot read dataset {}: {io}", path.display())),
        e => usage(format!("bad dataset {}: {e}", path.display())),
    })
}

pub fn run(a: &TrainArgs, out: &Path) -> Result<()> {
    let mut c = a.exp.resolve()?;
    let ds = match &a.data {
        Some(p) => {
            let ds = load_dataset(p)?;
            if let Some(t) = c.task.filter(|&t| t != ds.task()) {
                return Err(usage(format!("dataset {} holds {} trajectories but the config names {t}", p.display(), ds.task())));
            }
            c.task = Some(ds.task());
            c.n_init = Some(ds.meta.n_init);
            ds
        }
        None => {
            let ds = gen_config(&c)?.generate()?;
            println!("generated {}", summary(&ds));
            ds
        }
    };
    let task = ds.task();
    let variant = c.variant()?;
    check_variant(task, variant)?;
    if c.scale() == Scale::Full {
        eprintln!("warning: full-scale networks train for hours on a CPU");
    }
    let root = c.out.clone().unwrap_or_else(|| out.to_path_buf());
    let dir = a.output.clone().unwrap_or_else(|| root.join("runs").join(format!("{task}-{variant}-n{}", ds.meta.n_init)));
    let mut model = build_model(task, variant, c.scale(), c.train.seed)?;
    let report = train(&mut model, &ds.train, &c.train)?;
    write_file(&dir.join("model.json"), &model.to_json()?)?;
    write_file(&dir.join("history.csv"), &report.to_csv())?;
    if a.data.is_none() {
        write_file(&dir.join("data.jsonl"), &ds.to_jsonl()?)?;
    }
    write_file(&dir.join("config.json"), &serde_json::to_string_pretty(&c)?)?;
    let last = report.errors().last().copied().unwrap_or(f64::NAN);
    println!(
        "trained {variant} on {task}: {} parameters, {} epochs, final train error {last:.6e}, {:.1}s; wrote {}",
        model.param_count(),
        c.train.epochs,
        report.wall_time(),
        dir.display()
    );
    Ok(())
}
