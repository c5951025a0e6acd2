//! The forward, gradcheck, offline and optimize commands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use adjrom::estimator::fnn::{train_error_model, ErrorModel};
use adjrom::estimator::{ErrorEstimator, GainTable};
use adjrom::optimize::write_history_csv;
use adjrom::rom::{
    greedy_offline, load_basis, save_basis, BasisMetadata, ErrorOracle, GreedyConfig, SampleSet,
};
use adjrom::vtk::write_density_vtk;
use adjrom::{
    optimize as run_optimization, sample_designs, Direction, LoadKind, Mesh, ModelChoice,
    Objective, OnlineRom, Problem,
};
use anyhow::{anyhow, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{EstimatorChoice, RunConfig};
use crate::CliError;

pub const GRADCHECK_THRESHOLD: f64 = 1e-4;

pub const BASIS_FILE: &str = "basis.rbm";
pub const MODEL_FILE: &str = "error_model.json";
pub const GAIN_FILE: &str = "gain_table.json";
pub const CURVE_FILE: &str = "greedy_curve.csv";
pub const HISTORY_FILE: &str = "history.csv";
pub const TIMINGS_FILE: &str = "timings.json";

pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub force: bool,
}

/// Creates `dir`, refusing to reuse a non-empty one unless forced.
pub fn prepare_output(dir: &Path, force: bool) -> Result<(), CliError> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(CliError::Validation(format!(
                "{} exists and is not a directory",
                dir.display()
            )));
        }
        let occupied = fs::read_dir(dir)?.next().is_some();
        if occupied && !force {
            return Err(CliError::Validation(format!(
                "output directory {} is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> anyhow::Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Node whose motion is recorded by `forward`.
fn monitor_node(problem: &Problem) -> usize {
    match problem.load.kind {
        LoadKind::PointTransient { node, .. } | LoadKind::RotatingConstant { node, .. } => node,
        LoadKind::GroundAcceleration { .. } => match problem.load.lumped_masses.first() {
            Some(lm) => lm.node,
            None => problem
                .mesh
                .nearest_node(problem.mesh.lx(), problem.mesh.ly()),
        },
    }
}

pub fn forward(cfg: &RunConfig, opts: &RunOptions) -> Result<(), CliError> {
    let problem = cfg.build_problem()?;
    prepare_output(&opts.out, opts.force)?;
    let b = problem.uniform_design(cfg.optimizer.volume_fraction)?;
    let an = problem.analyze(&b)?;
    let node = monitor_node(&problem);
    let dofs = problem.mesh.dof_map();
    let mut cols = Vec::new();
    let mut labels = Vec::new();
    for (dir, name) in [(Direction::X, "x"), (Direction::Y, "y")] {
        if let Some(k) = dofs.free(Mesh::dof(node, dir)) {
            cols.push(k);
            labels.push(format!("node{node}_{name}"));
        }
    }
    let mut w = create(&opts.out, "trajectory.csv")?;
    an.traj.write_csv(&mut w, &cols, &labels)?;
    w.flush().map_err(anyhow::Error::from)?;

    let energy = an.traj.energy(&an.sys);
    let peak_displacement = cols
        .iter()
        .map(|&k| an.traj.peak_abs(k))
        .fold(0.0f64, f64::max);
    let peak_target = match problem.objective {
        Objective::SquaredTargetDisplacement { target } => Some(an.traj.peak_abs(target)),
        _ => None,
    };
    write_json(
        &opts.out,
        "summary.json",
        &json!({
            "problem_hash": cfg.problem_hash(),
            "n_free": problem.n_free(),
            "n_steps": problem.grid.n_steps(),
            "objective": problem.objective.name(),
            "objective_value": an.objective,
            "monitor_node": node,
            "peak_displacement": peak_displacement,
            "peak_target_displacement": peak_target,
            "peak_energy": energy.iter().fold(0.0f64, |m, e| m.max(*e)),
            "final_energy": energy.last().copied(),
        }),
    )?;
    println!(
        "forward: objective {:.6e}, peak displacement {:.6e}",
        an.objective, peak_displacement
    );
    Ok(())
}

pub fn gradcheck(cfg: &RunConfig, opts: &RunOptions) -> Result<(), CliError> {
    let problem = cfg.build_problem()?;
    prepare_output(&opts.out, opts.force)?;
    let seed = opts.seed.unwrap_or(cfg.rom.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = problem.n_elements();
    let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..0.8)).collect();
    let k = cfg.gradcheck.probes.min(n);
    let mut elements = rand::seq::index::sample(&mut rng, n, k).into_vec();
    elements.sort_unstable();
    let probes = problem.check_gradient(&b, &elements, cfg.gradcheck.fd_step)?;

    let mut w = create(&opts.out, "gradcheck.csv")?;
    writeln!(w, "element,analytic,finite_difference,relative_error")
        .map_err(anyhow::Error::from)?;
    for p in &probes {
        writeln!(
            w,
            "{},{:e},{:e},{:e}",
            p.element, p.analytic, p.finite_difference, p.relative_error
        )
        .map_err(anyhow::Error::from)?;
    }
    w.flush().map_err(anyhow::Error::from)?;
    let worst = probes.iter().fold(0.0f64, |m, p| m.max(p.relative_error));
    let pass = worst < GRADCHECK_THRESHOLD;
    write_json(
        &opts.out,
        "gradcheck.json",
        &json!({
            "objective": problem.objective.name(),
            "probes": probes.len(),
            "fd_step": cfg.gradcheck.fd_step,
            "seed": seed,
            "max_relative_error": worst,
            "threshold": GRADCHECK_THRESHOLD,
            "pass": pass,
        }),
    )?;
    println!(
        "gradcheck: {} probes, max relative error {worst:.3e} ({})",
        probes.len(),
        if pass { "pass" } else { "FAIL" }
    );
    if pass {
        Ok(())
    } else {
        Err(anyhow!(
            "gradient check failed: max relative error {worst:.3e} ≥ {GRADCHECK_THRESHOLD:e}"
        )
        .into())
    }
}

pub fn offline(cfg: &RunConfig, opts: &RunOptions) -> Result<(), CliError> {
    let problem = cfg.build_problem()?;
    prepare_output(&opts.out, opts.force)?;
    let rom = &cfg.rom;
    let seed = opts.seed.unwrap_or(rom.seed);
    let designs = sample_designs(&problem, &cfg.optimizer, rom.sample_iterations, rom.samples)?;
    let n_samples = designs.len();
    let mut set = SampleSet::new(&problem, designs)?;
    let greedy_cfg = GreedyConfig {
        tol: rom.tol,
        max_basis: rom.max_basis,
        seed,
    };
    let rep = greedy_offline(&mut set, &greedy_cfg, &ErrorOracle::True)?;

    let meta = BasisMetadata {
        problem_hash: cfg.problem_hash(),
        dt: problem.grid.dt(),
        n_steps: problem.grid.n_steps(),
        hht: problem.hht,
    };
    save_basis(&opts.out.join(BASIS_FILE), &rep.basis, &meta)?;
    let mut w = create(&opts.out, CURVE_FILE)?;
    writeln!(w, "n_basis,error").map_err(anyhow::Error::from)?;
    for (n, e) in &rep.curve {
        writeln!(w, "{n},{e:e}").map_err(anyhow::Error::from)?;
    }
    w.flush().map_err(anyhow::Error::from)?;

    write_json(&opts.out, GAIN_FILE, &rep.gain_table(&set)?)?;
    let pairs = rep.training_pairs();
    let estimator = if pairs.len() >= 2 {
        let model = train_error_model(&pairs, &rom.train.to_train_config(seed))?;
        model.save_json(&opts.out.join(MODEL_FILE))?;
        let s = &model.summary;
        json!({
            "n_train": s.n_train,
            "n_holdout": s.n_holdout,
            "epochs": s.epochs,
            "final_loss": s.final_loss,
            "holdout_rmse": s.holdout_rmse,
            "holdout_r2": if s.holdout_r2.is_finite() { json!(s.holdout_r2) } else { json!(null) },
        })
    } else {
        json!(null)
    };
    let achieved = rep.final_error();
    write_json(
        &opts.out,
        "offline_summary.json",
        &json!({
            "problem_hash": meta.problem_hash,
            "samples": n_samples,
            "n_basis": rep.basis.n_basis(),
            "tol": rom.tol,
            "achieved_error": achieved,
            "converged": rep.converged,
            "selected": rep.selected,
            "training_pairs": pairs.len(),
            "estimator": estimator,
        }),
    )?;
    if !rep.converged {
        eprintln!(
            "warning: greedy stopped at {} basis vectors with error {achieved:.3e} above tolerance {:.3e}",
            rep.basis.n_basis(),
            rom.tol
        );
    }
    println!(
        "offline: {} basis vectors, error {achieved:.3e}, {} training pairs",
        rep.basis.n_basis(),
        pairs.len()
    );
    Ok(())
}

enum LoadedEstimator {
    Fnn(ErrorModel),
    Gain(GainTable),
}

impl LoadedEstimator {
    fn as_dyn(&self) -> &dyn ErrorEstimator {
        match self {
            LoadedEstimator::Fnn(m) => m,
            LoadedEstimator::Gain(g) => g,
        }
    }
}

fn load_estimator(dir: &Path, choice: EstimatorChoice) -> anyhow::Result<Option<LoadedEstimator>> {
    Ok(match choice {
        EstimatorChoice::True => None,
        EstimatorChoice::Fnn => {
            let path = dir.join(MODEL_FILE);
            Some(LoadedEstimator::Fnn(
                ErrorModel::load_json(&path)
                    .with_context(|| format!("loading {}", path.display()))?,
            ))
        }
        EstimatorChoice::GainBaseline => {
            let path = dir.join(GAIN_FILE);
            let file = File::open(&path).with_context(|| format!("loading {}", path.display()))?;
            Some(LoadedEstimator::Gain(serde_json::from_reader(
                std::io::BufReader::new(file),
            )?))
        }
    })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn optimize(cfg: &RunConfig, opts: &RunOptions) -> Result<(), CliError> {
    let problem = cfg.build_problem()?;
    let offline = if cfg.rom.enabled {
        let dir = cfg.rom.artifacts.clone().ok_or_else(|| {
            anyhow!("rom is enabled but rom.artifacts names no offline directory")
        })?;
        let basis_path = dir.join(BASIS_FILE);
        if !basis_path.exists() {
            return Err(anyhow!(
                "missing offline artifacts: {} not found (run `offline` first)",
                basis_path.display()
            )
            .into());
        }
        let (basis, meta) = load_basis(&basis_path)?;
        if meta.problem_hash != cfg.problem_hash() {
            return Err(anyhow!(
                "offline artifacts in {} were built for a different problem",
                dir.display()
            )
            .into());
        }
        let est = load_estimator(&dir, cfg.rom.estimator)?;
        Some((basis, est))
    } else {
        None
    };
    prepare_output(&opts.out, opts.force)?;

    let rom = offline.as_ref().map(|(basis, est)| OnlineRom {
        basis,
        estimator: est.as_ref().map(LoadedEstimator::as_dyn),
        fallback_tol: est.as_ref().and(cfg.rom.fallback_tol),
    });
    let result = run_optimization(&problem, &cfg.optimizer, rom.as_ref(), None)?;

    let mut w = create(&opts.out, HISTORY_FILE)?;
    write_history_csv(&mut w, &result.history)?;
    w.flush().map_err(anyhow::Error::from)?;
    if cfg.output.vtk {
        let mut w = create(&opts.out, "design.vtk")?;
        write_density_vtk(
            &mut w,
            &problem.mesh,
            &problem.physical_density(&result.design),
        )?;
        w.flush().map_err(anyhow::Error::from)?;
    }
    let mut w = create(&opts.out, "design.csv")?;
    writeln!(w, "element,density").map_err(anyhow::Error::from)?;
    for (e, b) in result.design.iter().enumerate() {
        writeln!(w, "{e},{b:e}").map_err(anyhow::Error::from)?;
    }
    w.flush().map_err(anyhow::Error::from)?;

    let secs = |m: ModelChoice| -> Vec<f64> {
        result
            .history
            .iter()
            .filter(|r| r.model == m)
            .map(|r| r.adjoint_seconds)
            .collect()
    };
    let (full_s, red_s) = (secs(ModelChoice::Full), secs(ModelChoice::Reduced));
    let (mean_full, mean_red) = (mean(&full_s), mean(&red_s));
    let speedup = match (mean_full, mean_red) {
        (Some(f), Some(r)) if r > 0.0 => Some(f / r),
        _ => None,
    };
    write_json(
        &opts.out,
        TIMINGS_FILE,
        &json!({
            "n_free": problem.n_free(),
            "mean_full_adjoint_seconds": mean_full,
            "mean_reduced_adjoint_seconds": mean_red,
            "speedup": speedup,
            "iterations": result.history.iter().map(|r| json!({
                "iteration": r.iteration,
                "model_used": r.model.as_str(),
                "adjoint_seconds": r.adjoint_seconds,
            })).collect::<Vec<_>>(),
        }),
    )?;
    write_json(
        &opts.out,
        "summary.json",
        &json!({
            "problem_hash": cfg.problem_hash(),
            "n_free": problem.n_free(),
            "iterations": result.history.len(),
            "final_objective": result.final_objective,
            "final_volume_fraction": result.final_volume,
            "converged": result.converged,
            "aborted": result.aborted,
            "full_iterations": full_s.len(),
            "reduced_iterations": red_s.len(),
        }),
    )?;
    if let Some(msg) = &result.aborted {
        return Err(anyhow!("optimization aborted: {msg}").into());
    }
    println!(
        "optimize: {} iterations ({} reduced), final objective {:.6e}, volume fraction {:.6}",
        result.history.len(),
        red_s.len(),
        result.final_objective,
        result.final_volume
    );
    Ok(())
}
