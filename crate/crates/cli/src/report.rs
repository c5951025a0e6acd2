//! `report`: SVG plots from the CSV/JSON artifacts of earlier runs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

use crate::commands::{CURVE_FILE, HISTORY_FILE, TIMINGS_FILE};
use crate::svg::{Plot, Series};
use crate::CliError;

const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

#[derive(Debug, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub objective: f64,
    pub volume: f64,
    pub model_used: String,
    pub adjoint_seconds: f64,
    pub max_change: f64,
}

#[derive(Debug, Deserialize)]
struct CurveRow {
    n_basis: usize,
    error: f64,
}

#[derive(Debug, Deserialize)]
struct Timings {
    n_free: usize,
    speedup: Option<f64>,
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<T>> {
    let mut rdr =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    rdr.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

fn label(dir: &Path) -> String {
    dir.file_name().map_or_else(
        || dir.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    )
}

/// `(n_free, speedup)` pairs sorted by problem size.
pub fn speedup_points(runs: &[(usize, Option<f64>)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(usize, f64)> = runs.iter().filter_map(|&(n, s)| Some((n, s?))).collect();
    pts.sort_by_key(|p| p.0);
    pts.into_iter().map(|(n, s)| (n as f64, s)).collect()
}

pub fn history_plot(runs: &[(String, Vec<HistoryRow>)]) -> Plot {
    let mut series = Vec::new();
    for (k, (name, rows)) in runs.iter().enumerate() {
        for (model, color) in [
            ("full", COLORS[(2 * k) % COLORS.len()]),
            ("reduced", COLORS[(2 * k + 1) % COLORS.len()]),
        ] {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.model_used == model)
                .map(|r| (r.iteration as f64, r.adjoint_seconds))
                .collect();
            if !points.is_empty() {
                series.push(Series {
                    label: format!("{name}: {model}"),
                    color,
                    points,
                    line: false,
                });
            }
        }
    }
    Plot {
        title: "Adjoint time per iteration".into(),
        x_label: "iteration".into(),
        y_label: "adjoint seconds".into(),
        log_y: false,
        series,
        empty_message: "optimization history is empty: no iterations were recorded".into(),
    }
}

pub fn run(dirs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let mut curves = Vec::new();
    let mut histories = Vec::new();
    let mut timings = Vec::new();
    for dir in dirs {
        if !dir.is_dir() {
            return Err(CliError::Validation(format!(
                "{} is not a directory",
                dir.display()
            )));
        }
        let name = label(dir);
        let p = dir.join(CURVE_FILE);
        if p.exists() {
            let rows: Vec<CurveRow> = read_csv(&p)?;
            curves.push((name.clone(), rows));
        }
        let p = dir.join(HISTORY_FILE);
        if p.exists() {
            histories.push((name.clone(), read_csv::<HistoryRow>(&p)?));
        }
        let p = dir.join(TIMINGS_FILE);
        if p.exists() {
            let text = fs::read_to_string(&p)?;
            let t: Timings =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            timings.push((t.n_free, t.speedup));
        }
    }
    if curves.is_empty() && histories.is_empty() {
        return Err(CliError::Validation(format!(
            "no {CURVE_FILE} or {HISTORY_FILE} found in the given directories"
        )));
    }
    fs::create_dir_all(out)?;
    let mut written = Vec::new();

    if !curves.is_empty() {
        let series = curves
            .iter()
            .enumerate()
            .map(|(k, (name, rows))| Series {
                label: name.clone(),
                color: COLORS[k % COLORS.len()],
                points: rows.iter().map(|r| (r.n_basis as f64, r.error)).collect(),
                line: true,
            })
            .collect();
        let plot = Plot {
            title: "Greedy error vs basis size".into(),
            x_label: "basis vectors".into(),
            y_label: "relative error".into(),
            log_y: true,
            series,
            empty_message: "greedy curve is empty".into(),
        };
        fs::write(out.join("greedy_error.svg"), plot.render())?;
        written.push("greedy_error.svg");
    }

    if !histories.is_empty() {
        if histories.iter().all(|(_, rows)| rows.is_empty()) {
            eprintln!("note: optimization history is empty; writing a placeholder plot");
        }
        fs::write(
            out.join("adjoint_time.svg"),
            history_plot(&histories).render(),
        )?;
        written.push("adjoint_time.svg");

        let pts = speedup_points(&timings);
        let plot = Plot {
            title: "Adjoint speedup vs problem size".into(),
            x_label: "free dofs".into(),
            y_label: "mean full / mean reduced adjoint time".into(),
            log_y: false,
            series: vec![Series {
                label: "speedup".into(),
                color: COLORS[0],
                points: pts,
                line: true,
            }],
            empty_message: "no run used both adjoint models".into(),
        };
        fs::write(out.join("speedup.svg"), plot.render())?;
        written.push("speedup.svg");
    }
    println!("report: wrote {} to {}", written.join(", "), out.display());
    Ok(())
}
