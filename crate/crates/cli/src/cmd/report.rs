use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use symoden_core::hamdyn::Variant;
use symoden_core::Result;

use super::eval::{curves_path, CurveRow, MetricsRow};
use super::{read_file, write_file};
use crate::config::usage;
use crate::svg::{Plot, Series};

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Metrics CSVs from `eval` or `sweep` (repeatable).
    #[arg(long = "metrics")]
    pub metrics: Vec<PathBuf>,
    /// Curve CSVs; `<stem>_curves.csv` next to each metrics file is picked up too.
    #[arg(long = "curves")]
    pub curves: Vec<PathBuf>,
    /// Report directory; defaults to `<out>/report`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = read_file(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| usage(format!("malformed {} (record {}): {e}", path.display(), i + 1))))
        .collect()
}

fn series_label(r: &MetricsRow, many_taus: bool) -> String {
    match (many_taus, r.tau) {
        (true, Some(t)) => format!("{} τ={t}", r.variant),
        _ => r.variant.clone(),
    }
}

/// Mean of `metric` per (series, n_init), in dataset-size order.
fn size_series(rows: &[MetricsRow], metric: fn(&MetricsRow) -> f64) -> Vec<Series> {
    let taus: std::collections::BTreeSet<_> = rows.iter().map(|r| r.tau).collect();
    let mut acc: BTreeMap<String, BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
    for r in rows {
        let e = acc.entry(series_label(r, taus.len() > 1)).or_default().entry(r.n_init).or_insert((0.0, 0));
        e.0 += metric(r);
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(name, pts)| Series { name, points: pts.into_iter().map(|(n, (s, c))| (n as f64, s / c as f64)).collect() })
        .collect()
}

fn curve_series(rows: &[CurveRow], value: fn(&CurveRow) -> f64, keep: impl Fn(&str) -> bool) -> Vec<Series> {
    let mut acc: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| keep(&r.variant)) {
        acc.entry(r.variant.clone()).or_default().push((r.t, value(r)));
    }
    acc.into_iter().map(|(name, points)| Series { name, points }).collect()
}

fn has_energy(label: &str) -> bool {
    label == "truth" || label.parse::<Variant>().is_ok_and(Variant::has_energy)
}

pub fn run(a: &ReportArgs, out: &Path) -> Result<()> {
    if a.metrics.is_empty() {
        return Err(usage("no metrics files given (use --metrics FILE)"));
    }
    let mut rows: Vec<MetricsRow> = Vec::new();
    for p in &a.metrics {
        let r: Vec<MetricsRow> = read_csv(p)?;
        if r.is_empty() {
            return Err(usage(format!("{} has no metric rows", p.display())));
        }
        rows.extend(r);
    }
    let mut curve_files = a.curves.clone();
    curve_files.extend(a.metrics.iter().map(|p| curves_path(p)).filter(|p| p.exists() && !a.curves.contains(p)));
    let mut curves: Vec<CurveRow> = Vec::new();
    for p in &curve_files {
        curves.extend(read_csv::<CurveRow>(p)?);
    }

    let dir = a.output.clone().unwrap_or_else(|| out.join("report"));
    let mut sizes: Vec<f64> = rows.iter().map(|r| r.n_init as f64).collect();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    let mut figures = Vec::new();
    let size_plot = |title: &str, y: &str, metric: fn(&MetricsRow) -> f64| Plot {
        title: title.into(),
        x_label: "initial conditions".into(),
        y_label: y.into(),
        log_x: true,
        log_y: true,
        x_ticks: sizes.clone(),
        series: size_series(&rows, metric),
    };
    for (file, plot) in [
        ("train_error_vs_size.svg", size_plot("Train error per trajectory", "train error", |r| r.train_error)),
        ("prediction_error_vs_size.svg", size_plot("Prediction error per trajectory", "prediction error", |r| r.prediction_error)),
    ] {
        write_file(&dir.join(file), &plot.render())?;
        figures.push(file);
    }
    if !curves.is_empty() {
        let mse = Plot {
            title: "Mean squared error along predictions".into(),
            x_label: "t".into(),
            y_label: "MSE".into(),
            series: curve_series(&curves, |r| r.mse, |v| v != "truth"),
            ..Plot::default()
        };
        let energy = Plot {
            title: "Total energy along predictions".into(),
            x_label: "t".into(),
            y_label: "energy".into(),
            series: curve_series(&curves, |r| r.energy, has_energy),
            ..Plot::default()
        };
        write_file(&dir.join("mse_vs_time.svg"), &mse.render())?;
        write_file(&dir.join("energy_vs_time.svg"), &energy.render())?;
        figures.extend(["mse_vs_time.svg", "energy_vs_time.svg"]);
    }

    let mut md = String::from("# Results\n\n");
    md.push_str("| variant | n_init | tau | params | train error | test error | prediction error |\n");
    md.push_str("|---|---:|---:|---:|---:|---:|---:|\n");
    for r in &rows {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {:.4e} ± {:.2e} | {:.4e} ± {:.2e} | {:.4e} ± {:.2e} |",
            r.variant,
            r.n_init,
            r.tau.map_or("-".into(), |t| t.to_string()),
            r.params,
            r.train_error,
            r.train_std,
            r.test_error,
            r.test_std,
            r.prediction_error,
            r.prediction_std
        );
    }
    md.push_str("\n## Figures\n\n");
    for f in &figures {
        let _ = writeln!(md, "![{f}]({f})");
    }
    write_file(&dir.join("summary.md"), &md)?;
    println!("wrote {} figures and summary.md to {}", figures.len(), dir.display());
    Ok(())
}
