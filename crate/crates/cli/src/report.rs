//! Aligns metrics timelines from several runs into plain column files.
//!
//! Each metric gets one `.dat` file whose first column is the sample time and
//! whose remaining columns are the runs, in the order given. When the runs
//! were sampled on different grids, every series is resampled onto the
//! coarsest one by carrying the latest sample at or before each grid time.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use vne_core::sim::{read_metrics, MetricSample};

pub struct Run {
    pub label: String,
    pub samples: Vec<MetricSample>,
}

struct Metric {
    file: &'static str,
    title: &'static str,
    get: fn(&MetricSample) -> Option<f64>,
}

const METRICS: [Metric; 3] = [
    Metric { file: "acceptance_ratio.dat", title: "acceptance ratio", get: |s| s.acceptance_ratio },
    Metric { file: "avg_revenue.dat", title: "long-term average revenue", get: |s| Some(s.avg_revenue) },
    Metric { file: "revenue_cost_ratio.dat", title: "revenue / cost", get: |s| s.revenue_cost_ratio },
];

fn label_for(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name
        .strip_suffix(".metrics.csv")
        .or_else(|| name.strip_suffix(".csv"))
        .unwrap_or(&name);
    stem.split_whitespace().collect::<Vec<_>>().join("_")
}

pub fn load(paths: &[PathBuf]) -> Result<Vec<Run>> {
    let mut runs: Vec<Run> = Vec::new();
    for path in paths {
        let file = fs::File::open(path).with_context(|| path.display().to_string())?;
        let samples = read_metrics(file).with_context(|| path.display().to_string())?;
        if samples.is_empty() {
            bail!("{}: no samples", path.display());
        }
        let mut label = label_for(path);
        if runs.iter().any(|r| r.label == label) {
            label = format!("{label}#{}", runs.len() + 1);
        }
        runs.push(Run { label, samples });
    }
    Ok(runs)
}

fn step(samples: &[MetricSample]) -> u64 {
    match samples {
        [a, b, ..] => b.time - a.time,
        [a] => a.time,
        [] => 0,
    }
}

/// The common time grid, and whether any run had to be resampled onto it.
pub fn common_grid(runs: &[Run]) -> (Vec<u64>, bool) {
    let times = |r: &Run| r.samples.iter().map(|s| s.time).collect::<Vec<_>>();
    let first = times(&runs[0]);
    if runs.iter().all(|r| times(r) == first) {
        return (first, false);
    }
    let end = runs.iter().map(|r| r.samples.last().map_or(0, |s| s.time)).min().unwrap_or(0);
    let coarsest = runs
        .iter()
        .max_by_key(|r| (step(&r.samples), std::cmp::Reverse(r.samples.len())))
        .unwrap();
    let grid = coarsest.samples.iter().map(|s| s.time).filter(|&t| t <= end).collect();
    (grid, true)
}

fn value_at(samples: &[MetricSample], t: u64, get: fn(&MetricSample) -> Option<f64>) -> Option<f64> {
    let idx = samples.partition_point(|s| s.time <= t);
    idx.checked_sub(1).and_then(|i| get(&samples[i]))
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x}"))
}

pub fn plot_data(runs: &[Run], grid: &[u64]) -> Vec<(&'static str, String)> {
    METRICS
        .iter()
        .map(|m| {
            let mut text = format!("# {}\n# time", m.title);
            for r in runs {
                let _ = write!(text, " {}", r.label);
            }
            text.push('\n');
            for &t in grid {
                let _ = write!(text, "{t}");
                for r in runs {
                    let _ = write!(text, " {}", cell(value_at(&r.samples, t, m.get)));
                }
                text.push('\n');
            }
            (m.file, text)
        })
        .collect()
}

pub fn summary_table(runs: &[Run]) -> String {
    let width = runs.iter().map(|r| r.label.len()).max().unwrap_or(0).max(3);
    let mut out = format!(
        "{:<width$}  {:>8}  {:>8}  {:>8}  {:>10}  {:>12}  {:>12}  {:>8}\n",
        "run", "time", "accepted", "rejected", "acceptance", "avg_revenue", "avg_cost", "r/cost"
    );
    let na = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
    for r in runs {
        let s = r.samples.last().expect("runs are non-empty");
        let _ = writeln!(
            out,
            "{:<width$}  {:>8}  {:>8}  {:>8}  {:>10}  {:>12.2}  {:>12.2}  {:>8}",
            r.label,
            s.time,
            s.accepted,
            s.rejected,
            na(s.acceptance_ratio),
            s.avg_revenue,
            s.avg_cost,
            na(s.revenue_cost_ratio)
        );
    }
    out
}

fn gnuplot_script(runs: &[Run]) -> String {
    let mut out = String::from("set terminal pngcairo size 900,600\nset key left top\nset xlabel 'time'\n");
    for m in &METRICS {
        let png = m.file.replace(".dat", ".png");
        let _ = write!(out, "\nset output '{png}'\nset ylabel '{}'\nplot", m.title);
        for (i, r) in runs.iter().enumerate() {
            let sep = if i == 0 { " " } else { ", \\\n     " };
            let _ = write!(out, "{sep}'{}' using 1:{} with lines title '{}'", m.file, i + 2, r.label);
        }
        out.push('\n');
    }
    out
}

pub fn report(paths: &[PathBuf], out: &Path) -> Result<()> {
    let runs = load(paths)?;
    let (grid, resampled) = common_grid(&runs);
    if resampled {
        let step = grid.get(1).zip(grid.first()).map_or(0, |(b, a)| b - a);
        eprintln!(
            "warning: sample grids differ; resampled every run onto the coarsest grid ({} points, step {step})",
            grid.len()
        );
    }
    fs::create_dir_all(out).with_context(|| out.display().to_string())?;
    for (name, text) in plot_data(&runs, &grid) {
        let path = out.join(name);
        fs::write(&path, text).with_context(|| path.display().to_string())?;
    }
    let table = summary_table(&runs);
    let path = out.join("summary.txt");
    fs::write(&path, &table).with_context(|| path.display().to_string())?;
    let path = out.join("plot.gp");
    fs::write(&path, gnuplot_script(&runs)).with_context(|| path.display().to_string())?;
    print!("{table}");
    Ok(())
}
