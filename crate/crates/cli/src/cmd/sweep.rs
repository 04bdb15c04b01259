use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use symoden_core::envsim::{build_model, Dataset};
use symoden_core::hamdyn::Variant;
use symoden_core::odeflow::train;
use symoden_core::Result;

use super::eval::{score, to_csv, MetricsRow};
use super::generate::gen_config;
use super::write_file;
use crate::config::{check_variant, usage, ExpArgs};

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub exp: ExpArgs,
    /// Dataset sizes: a list (`16,64`) or a doubling range (`16..1024`).
    #[arg(long, default_value = "16..1024")]
    pub sizes: String,
    /// Variants to train; the task's full comparison set when absent.
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<Variant>>,
    /// Horizons τ; the configured one when absent.
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<usize>>,
    /// Seeded repetitions per cell.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Cells trained at once.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = 40)]
    pub pred_steps: usize,
    /// Sweep directory; defaults to `<out>/sweep-<task>`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    let bad = || usage(format!("cannot read dataset sizes `{s}` (expected e.g. `16,64` or `16..1024`)"));
    let sizes: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a == 0 || b < a {
            return Err(bad());
        }
        std::iter::successors(Some(a), |&n| Some(2 * n)).take_while(|&n| n <= b).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(bad());
    }
    Ok(sizes)
}

struct Cell {
    size: usize,
    variant: Variant,
    tau: usize,
    repeat: usize,
}

pub fn run(a: &SweepArgs, out: &Path) -> Result<()> {
    let c = a.exp.resolve()?;
    let task = c.task()?;
    let sizes = parse_sizes(&a.sizes)?;
    let variants = a.variants.clone().or_else(|| c.variant.map(|v| vec![v])).unwrap_or_else(|| task.variants());
    for &v in &variants {
        check_variant(task, v)?;
    }
    let taus = a.taus.clone().unwrap_or_else(|| vec![c.train.tau]);
    if a.repeats == 0 || a.jobs == 0 {
        return Err(usage("--repeats and --jobs must be at least 1"));
    }
    let dir = a.output.clone().unwrap_or_else(|| c.out.clone().unwrap_or_else(|| out.to_path_buf()).join(format!("sweep-{task}")));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs).build().map_err(|e| usage(e.to_string()))?;

    let datasets: Vec<Dataset> = pool.install(|| {
        sizes
            .par_iter()
            .map(|&n| {
                let mut cfg = c.clone();
                cfg.n_init = Some(n);
                let ds = gen_config(&cfg)?.generate()?;
                write_file(&dir.join(format!("data-n{n}.jsonl")), &ds.to_jsonl()?)?;
                Ok(ds)
            })
            .collect::<Result<_>>()
    })?;
    let mut cells = Vec::new();
    for (i, &size) in sizes.iter().enumerate() {
        for &variant in &variants {
            for &tau in &taus {
                for repeat in 0..a.repeats {
                    cells.push((i, Cell { size, variant, tau, repeat }));
                }
            }
        }
    }
    println!("{} cells: {} sizes × {} variants × {} horizons × {} repeats", cells.len(), sizes.len(), variants.len(), taus.len(), a.repeats);
    let rows: Vec<MetricsRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|(i, cell)| {
                let ds = &datasets[*i];
                let cell_dir = dir.join(format!("n{}-{}-tau{}-r{}", cell.size, cell.variant, cell.tau, cell.repeat));
                let mut tc = c.train.clone();
                tc.tau = cell.tau;
                tc.seed = c.train.seed + cell.repeat as u64;
                let mut model = build_model(task, cell.variant, c.scale(), tc.seed)?;
                let report = train(&mut model, &ds.train, &tc).map_err(|e| e.context(cell_dir.display()))?;
                let ckpt = cell_dir.join("model.json");
                write_file(&ckpt, &model.to_json()?)?;
                write_file(&cell_dir.join("history.csv"), &report.to_csv())?;
                let mut row = score(&model, ds, a.pred_steps, &ckpt.display().to_string())?;
                row.tau = Some(cell.tau);
                write_file(&cell_dir.join("metrics.csv"), &to_csv(std::slice::from_ref(&row))?)?;
                println!(
                    "n_init {:>5} {:<20} τ={} r{}: train {:.4e} prediction {:.4e}",
                    cell.size, cell.variant, cell.tau, cell.repeat, row.train_error, row.prediction_error
                );
                Ok(row)
            })
            .collect::<Result<_>>()
    })?;
    let path = dir.join("metrics.csv");
    write_file(&path, &to_csv(&rows)?)?;
    println!("wrote {}", path.display());
    Ok(())
}
