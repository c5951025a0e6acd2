//! Volume-constrained design loop with an adaptive full/reduced adjoint.

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::estimator::ErrorEstimator;
use crate::problem::Problem;
use crate::rom::pod::ReducedBasis;
use crate::rom::reduced::{compute_residuals, project_operators, solve_adjoint_reduced};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Full,
    Reduced,
}

impl ModelChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelChoice::Full => "full",
            ModelChoice::Reduced => "reduced",
        }
    }
}

/// Reduced iff at most `n·eps2` design variables moved by `eps1` or more
/// since the previous iterate. Without a previous iterate the full model is
/// used.
pub fn adaptive_model_select(
    b: &[f64],
    b_prev: Option<&[f64]>,
    eps1: f64,
    eps2: f64,
) -> Result<ModelChoice> {
    let Some(prev) = b_prev else {
        return Ok(ModelChoice::Full);
    };
    check_len("model selection", b.len(), prev.len())?;
    let count = b
        .iter()
        .zip(prev)
        .filter(|(x, y)| (*x - *y).abs() >= eps1)
        .count();
    Ok(if count as f64 <= b.len() as f64 * eps2 {
        ModelChoice::Reduced
    } else {
        ModelChoice::Full
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptConfig {
    pub volume_fraction: f64,
    pub max_iterations: usize,
    pub move_limit: f64,
    /// Stop once the largest design change falls below this.
    pub tol: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            volume_fraction: 0.5,
            max_iterations: 60,
            move_limit: 0.2,
            tol: 1e-3,
            eps1: 0.01,
            eps2: 0.05,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.volume_fraction > 0.0 && self.volume_fraction < 1.0) {
            return Err(invalid("volume_fraction must lie in (0, 1)"));
        }
        if !(self.eps1 > 0.0 && self.eps1 < 1.0) {
            return Err(invalid("eps1 must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.eps2) {
            return Err(invalid("eps2 must lie in [0, 1)"));
        }
        if !(self.move_limit > 0.0 && self.move_limit <= 1.0) {
            return Err(invalid("move_limit must lie in (0, 1]"));
        }
        if !(self.tol >= 0.0) {
            return Err(invalid("tol must be non-negative"));
        }
        Ok(())
    }
}

/// Asymptote history of the moving-asymptote update.
#[derive(Clone, Debug, Default)]
pub struct MmaState {
    low: Vec<f64>,
    upp: Vec<f64>,
    prev: Vec<Vec<f64>>,
}

const ASYM_INIT: f64 = 0.5;
const ASYM_SHRINK: f64 = 0.7;
const ASYM_GROW: f64 = 1.2;
const BISECTION_MAX: usize = 200;

impl MmaState {
    pub fn new() -> Self {
        Self::default()
    }

    fn update_asymptotes(&mut self, x: &[f64]) {
        let n = x.len();
        if self.prev.len() < 2 {
            self.low = x.iter().map(|v| v - ASYM_INIT).collect();
            self.upp = x.iter().map(|v| v + ASYM_INIT).collect();
        } else {
            let (x1, x2) = (&self.prev[1], &self.prev[0]);
            for j in 0..n {
                let trend = (x[j] - x1[j]) * (x1[j] - x2[j]);
                let gamma = if trend < 0.0 {
                    ASYM_SHRINK
                } else if trend > 0.0 {
                    ASYM_GROW
                } else {
                    1.0
                };
                self.low[j] =
                    (x[j] - gamma * (x1[j] - self.low[j])).clamp(x[j] - 10.0, x[j] - 0.01);
                self.upp[j] =
                    (x[j] + gamma * (self.upp[j] - x1[j])).clamp(x[j] + 0.01, x[j] + 10.0);
            }
        }
        self.prev.push(x.to_vec());
        if self.prev.len() > 2 {
            self.prev.remove(0);
        }
    }
}

/// One moving-asymptote step for `min f` subject to `volume(b) ≤ target`.
/// The multiplier is found by bisection on the true constraint, so the
/// returned design is feasible with `|g| ≤ 1e-6·target` whenever the
/// constraint is active.
pub fn update_density(
    b: &[f64],
    gradient: &[f64],
    volume_gradient: &[f64],
    volume: &dyn Fn(&[f64]) -> f64,
    target: f64,
    move_limit: f64,
    state: &mut MmaState,
) -> Result<Vec<f64>> {
    let n = b.len();
    check_len("density update (gradient)", n, gradient.len())?;
    check_len("density update (volume gradient)", n, volume_gradient.len())?;
    if gradient
        .iter()
        .chain(volume_gradient)
        .any(|g| !g.is_finite())
    {
        return Err(Error::NonFinite(
            "gradient passed to the density update".into(),
        ));
    }
    state.update_asymptotes(b);
    let gmax = gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let vmax = volume_gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let gscale = if gmax > 0.0 { 1.0 / gmax } else { 0.0 };
    let vscale = if vmax > 0.0 { 1.0 / vmax } else { 0.0 };

    let mut p0 = vec![0.0; n];
    let mut q0 = vec![0.0; n];
    let mut p1 = vec![0.0; n];
    let mut q1 = vec![0.0; n];
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for j in 0..n {
        let (l, u, x) = (state.low[j], state.upp[j], b[j]);
        let g = gradient[j] * gscale;
        let reg = 1e-3 * g.abs() + 1e-6;
        p0[j] = (u - x).powi(2) * (g.max(0.0) + reg);
        q0[j] = (x - l).powi(2) * ((-g).max(0.0) + reg);
        let v = volume_gradient[j] * vscale;
        p1[j] = (u - x).powi(2) * v.max(0.0);
        q1[j] = (x - l).powi(2) * (-v).max(0.0);
        lo[j] = 0.0f64.max(l + 0.1 * (x - l)).max(x - move_limit);
        hi[j] = 1.0f64.min(u - 0.1 * (u - x)).min(x + move_limit);
    }
    let solve = |lambda: f64| -> Vec<f64> {
        (0..n)
            .map(|j| {
                let p = (p0[j] + lambda * p1[j]).sqrt();
                let q = (q0[j] + lambda * q1[j]).sqrt();
                let x = if p + q > 0.0 {
                    (state.low[j] * p + state.upp[j] * q) / (p + q)
                } else {
                    b[j]
                };
                x.clamp(lo[j], hi[j])
            })
            .collect()
    };
    let tol = 1e-6 * target;
    let g = |x: &[f64]| volume(x) - target;

    let x0 = solve(0.0);
    if g(&x0) <= 0.0 {
        return Ok(x0);
    }
    let mut lam_lo = 0.0;
    let mut lam_hi = 1.0;
    let mut x_hi = solve(lam_hi);
    let mut iters = 0;
    while g(&x_hi) > 0.0 {
        lam_lo = lam_hi;
        lam_hi *= 10.0;
        x_hi = solve(lam_hi);
        iters += 1;
        if iters > 60 {
            return Err(Error::Convergence(
                "volume constraint cannot be met within the move limits".into(),
            ));
        }
    }
    for _ in 0..BISECTION_MAX {
        if g(&x_hi) >= -tol {
            return Ok(x_hi);
        }
        let mid = 0.5 * (lam_lo + lam_hi);
        let x_mid = solve(mid);
        if g(&x_mid) > 0.0 {
            lam_lo = mid;
        } else {
            lam_hi = mid;
            x_hi = x_mid;
        }
    }
    Err(Error::Convergence(format!(
        "multiplier bisection did not converge in {BISECTION_MAX} iterations (g = {:e})",
        g(&x_hi)
    )))
}

/// Offline artifacts for the reduced adjoint.
pub struct OnlineRom<'a> {
    pub basis: &'a ReducedBasis,
    /// When set together with `fallback_tol`, each reduced solve is checked
    /// and replaced by a full solve if the estimated relative error is too
    /// large.
    pub estimator: Option<&'a dyn ErrorEstimator>,
    pub fallback_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    /// Volume fraction of the iterate the objective belongs to.
    pub volume: f64,
    pub model: ModelChoice,
    pub adjoint_seconds: f64,
    /// Largest change of any design variable in the update that followed.
    pub max_change: f64,
    pub gradient_norm: f64,
    pub estimated_error: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct OptResult {
    pub history: Vec<IterationRecord>,
    pub design: Vec<f64>,
    /// Objective of `design` (one extra forward solve).
    pub final_objective: f64,
    pub final_volume: f64,
    pub converged: bool,
    /// Set when the loop stopped on a non-finite objective or gradient;
    /// `design` is then the offending iterate.
    pub aborted: Option<String>,
}

impl OptResult {
    pub fn count(&self, model: ModelChoice) -> usize {
        self.history.iter().filter(|r| r.model == model).count()
    }
}

/// Runs the design loop from the uniform feasible design (or `initial`).
pub fn optimize(
    problem: &Problem,
    config: &OptConfig,
    rom: Option<&OnlineRom>,
    initial: Option<Vec<f64>>,
) -> Result<OptResult> {
    config.validate()?;
    let mut b = match initial {
        Some(b) => {
            check_len("initial design", problem.n_elements(), b.len())?;
            b
        }
        None => problem.uniform_design(config.volume_fraction)?,
    };
    if let Some(r) = rom {
        check_len("reduced basis rows", problem.n_free(), r.basis.n_full())?;
    }
    let target = config.volume_fraction * problem.mesh.total_volume();
    let volume = |x: &[f64]| problem.volume(x);
    let mut state = MmaState::new();
    let mut history = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    let mut converged = false;

    for k in 0..config.max_iterations {
        let an = match problem.analyze(&b) {
            Ok(an) => an,
            Err(Error::NonFinite(msg)) => return aborted(problem, history, b, k, &msg),
            Err(e) => return Err(e),
        };
        let mut model = match rom {
            Some(_) => adaptive_model_select(&b, prev.as_deref(), config.eps1, config.eps2)?,
            None => ModelChoice::Full,
        };
        let start = Instant::now();
        let mut estimated_error = None;
        let mut vartheta: Option<Vec<DVector<f64>>> = None;
        if let (ModelChoice::Reduced, Some(r)) = (model, rom) {
            let red = project_operators(&an.sys, &an.eff, r.basis)?;
            let sol = solve_adjoint_reduced(&red, &an.partials, &problem.grid, &problem.hht)?;
            if let (Some(est), Some(tol)) = (r.estimator, r.fallback_tol) {
                let res = compute_residuals(
                    &an.sys,
                    &an.eff,
                    &sol.lifted,
                    &an.partials,
                    &problem.grid,
                    &problem.hht,
                )?;
                let e: f64 = est.estimate_errors(&an.physical, &res.norms)?.iter().sum();
                let s: f64 = sol.lifted.iter().map(|v| v.norm()).sum();
                let rel = if s > 0.0 { e / s } else { f64::INFINITY };
                estimated_error = Some(rel);
                if rel > tol {
                    model = ModelChoice::Full;
                }
            }
            if model == ModelChoice::Reduced {
                vartheta = Some(sol.lifted);
            }
        }
        let vartheta = match vartheta {
            Some(v) => v,
            None => problem.full_adjoint(&an)?.vartheta,
        };
        let adjoint_seconds = start.elapsed().as_secs_f64();
        let grad = problem.gradient_from_adjoint(&an, &vartheta)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return aborted(problem, history, b, k, "non-finite gradient");
        }
        let vgrad = problem.volume_gradient(&b);
        let next = update_density(
            &b,
            &grad,
            &vgrad,
            &volume,
            target,
            config.move_limit,
            &mut state,
        )?;
        let max_change = next
            .iter()
            .zip(&b)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        history.push(IterationRecord {
            iteration: k,
            objective: an.objective,
            volume: problem.volume_fraction(&b),
            model,
            adjoint_seconds,
            max_change,
            gradient_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
            estimated_error,
        });
        prev = Some(std::mem::replace(&mut b, next));
        if max_change < config.tol {
            converged = true;
            break;
        }
    }
    let final_objective = problem.evaluate(&b)?;
    Ok(OptResult {
        history,
        final_volume: problem.volume_fraction(&b),
        design: b,
        final_objective,
        converged,
        aborted: None,
    })
}

fn aborted(
    problem: &Problem,
    history: Vec<IterationRecord>,
    b: Vec<f64>,
    k: usize,
    msg: &str,
) -> Result<OptResult> {
    Ok(OptResult {
        history,
        final_volume: problem.volume_fraction(&b),
        design: b,
        final_objective: f64::NAN,
        converged: false,
        aborted: Some(format!("iteration {k}: {msg}")),
    })
}

/// CSV with columns `iteration,objective,volume,model_used,adjoint_seconds,max_change`.
/// Training designs for the offline phase: the iterates of a short
/// full-order run (at most `iterations` updates from the uniform start,
/// stopping once the design change drops below `config.tol`), thinned evenly
/// to at most `count` members. First and last iterates are kept.
pub fn sample_designs(
    problem: &Problem,
    config: &OptConfig,
    iterations: usize,
    count: usize,
) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    if count == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let target = config.volume_fraction * problem.mesh.total_volume();
    let volume = |x: &[f64]| problem.volume(x);
    let mut state = MmaState::new();
    let mut b = problem.uniform_design(config.volume_fraction)?;
    let mut all = vec![b.clone()];
    for _ in 0..iterations {
        let (_, g) = problem.gradient(&b)?;
        let vg = problem.volume_gradient(&b);
        let next = update_density(&b, &g, &vg, &volume, target, config.move_limit, &mut state)?;
        let change = next
            .iter()
            .zip(&b)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        b = next;
        all.push(b.clone());
        if change < config.tol {
            break;
        }
    }
    if count >= all.len() {
        return Ok(all);
    }
    if count == 1 {
        return Ok(vec![all.swap_remove(0)]);
    }
    let last = all.len() - 1;
    let picks: Vec<usize> = (0..count)
        .map(|j| (j * last + (count - 1) / 2) / (count - 1))
        .collect();
    Ok(picks.into_iter().map(|i| all[i].clone()).collect())
}

pub fn write_history_csv<W: Write>(mut out: W, history: &[IterationRecord]) -> Result<()> {
    writeln!(
        out,
        "iteration,objective,volume,model_used,adjoint_seconds,max_change"
    )?;
    for r in history {
        writeln!(
            out,
            "{},{:e},{:.9},{},{:.6},{:e}",
            r.iteration,
            r.objective,
            r.volume,
            r.model.as_str(),
            r.adjoint_seconds,
            r.max_change
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::cantilever;
    use crate::time::TimeGrid;

    #[test]
    fn first_iteration_is_full() {
        assert_eq!(
            adaptive_model_select(&[0.5; 4], None, 0.1, 0.5).unwrap(),
            ModelChoice::Full
        );
    }

    #[test]
    fn countif_boundary() {
        let prev = vec![0.5; 100];
        assert_eq!(
            adaptive_model_select(&prev, Some(&prev), 0.1, 0.05).unwrap(),
            ModelChoice::Reduced
        );
        let mut six = prev.clone();
        six[..6].iter_mut().for_each(|x| *x += 0.2);
        assert_eq!(
            adaptive_model_select(&six, Some(&prev), 0.1, 0.05).unwrap(),
            ModelChoice::Full
        );
        let mut five = prev.clone();
        five[..5].iter_mut().for_each(|x| *x += 0.2);
        assert_eq!(
            adaptive_model_select(&five, Some(&prev), 0.1, 0.05).unwrap(),
            ModelChoice::Reduced
        );
        // a change of exactly eps1 counts
        let mut exact = vec![0.0; 10];
        exact[0] = 0.25;
        assert_eq!(
            adaptive_model_select(&exact, Some(&[0.0; 10]), 0.25, 0.0).unwrap(),
            ModelChoice::Full
        );
        assert!(adaptive_model_select(&[0.0; 3], Some(&[0.0; 2]), 0.1, 0.1).is_err());
    }

    #[test]
    fn zero_eps2_forces_full_after_any_change() {
        let prev = vec![0.5; 20];
        let mut b = prev.clone();
        b[3] = 0.7;
        assert_eq!(
            adaptive_model_select(&b, Some(&prev), 0.1, 0.0).unwrap(),
            ModelChoice::Full
        );
        b[3] = 0.55;
        assert_eq!(
            adaptive_model_select(&b, Some(&prev), 0.1, 0.0).unwrap(),
            ModelChoice::Reduced
        );
    }

    fn linear_volume(x: &[f64]) -> f64 {
        x.iter().sum()
    }

    #[test]
    fn zero_gradient_does_not_move() {
        let b = vec![0.3, 0.5, 0.2, 0.4];
        let mut st = MmaState::new();
        let next =
            update_density(&b, &[0.0; 4], &[1.0; 4], &linear_volume, 2.0, 0.2, &mut st).unwrap();
        assert!(next.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-14));
    }

    #[test]
    fn active_constraint_is_met_exactly() {
        let b = vec![0.5; 10];
        let grad: Vec<f64> = (0..10).map(|i| -1.0 - i as f64).collect();
        let mut st = MmaState::new();
        let next =
            update_density(&b, &grad, &[1.0; 10], &linear_volume, 5.0, 0.2, &mut st).unwrap();
        let g = linear_volume(&next) - 5.0;
        assert!(g <= 0.0 && g.abs() <= 1e-6 * 5.0, "{g}");
        // stiffer elements gain material
        assert!(next[9] > next[0]);
    }

    #[test]
    fn move_limit_is_respected() {
        let b = vec![0.5; 6];
        let grad = [-5.0, 4.0, -3.0, 2.0, -1.0, 0.5];
        let mut st = MmaState::new();
        let next = update_density(&b, &grad, &[1.0; 6], &linear_volume, 3.0, 0.2, &mut st).unwrap();
        assert!(next
            .iter()
            .zip(&b)
            .all(|(x, y)| (x - y).abs() <= 0.2 + 1e-15));
        assert!(next.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn infeasible_start_is_repaired() {
        let b = vec![0.9; 5];
        let mut st = MmaState::new();
        let next =
            update_density(&b, &[-1.0; 5], &[1.0; 5], &linear_volume, 4.0, 0.3, &mut st).unwrap();
        assert!((linear_volume(&next) - 4.0).abs() <= 4e-6);
    }

    #[test]
    fn zero_iterations_return_initial_design() {
        let p = cantilever(4, 2).unwrap();
        let cfg = OptConfig {
            max_iterations: 0,
            ..Default::default()
        };
        let res = optimize(&p, &cfg, None, None).unwrap();
        assert!(res.history.is_empty());
        assert_eq!(res.design, p.uniform_design(0.5).unwrap());
    }

    #[test]
    fn short_full_order_run_stays_feasible_and_improves() {
        let mut p = cantilever(12, 6).unwrap();
        p.grid = TimeGrid::new(40, 0.05).unwrap();
        let cfg = OptConfig {
            max_iterations: 12,
            ..Default::default()
        };
        let res = optimize(&p, &cfg, None, None).unwrap();
        for r in &res.history {
            assert!(r.volume <= 0.5 * (1.0 + 1e-6), "{}", r.volume);
            assert_eq!(r.model, ModelChoice::Full);
        }
        assert!(res.final_volume <= 0.5 * (1.0 + 1e-6));
        assert!(res.final_objective < res.history[0].objective);
        let mut csv = Vec::new();
        write_history_csv(&mut csv, &res.history).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text
            .starts_with("iteration,objective,volume,model_used,adjoint_seconds,max_change\n0,"));
        assert_eq!(text.lines().count(), res.history.len() + 1);
    }

    #[test]
    fn design_samples_are_thinned_evenly() {
        let mut p = cantilever(8, 4).unwrap();
        p.grid = TimeGrid::new(5, 0.05).unwrap();
        let cfg = OptConfig::default();
        let all = sample_designs(&p, &cfg, 6, 100).unwrap();
        assert_eq!(all.len(), 7);
        let few = sample_designs(&p, &cfg, 6, 3).unwrap();
        assert_eq!(few, vec![all[0].clone(), all[3].clone(), all[6].clone()]);
        assert!(sample_designs(&p, &cfg, 6, 0).is_err());
    }
}
