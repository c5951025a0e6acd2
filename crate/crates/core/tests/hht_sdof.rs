//! Single-dof oracles for the HHT-α integrator.

use adjrom::time::balance_residual;
use adjrom::{
    cantilever, hht_solve, CsrMatrix, EffectiveOperators, HhtParams, SystemMatrices, TimeGrid,
};
use nalgebra::DVector;
use std::f64::consts::PI;

fn sdof(m: f64, c: f64, k: f64) -> SystemMatrices {
    let one = |v| CsrMatrix::from_triplets(1, 1, &[(0, 0, v)]);
    SystemMatrices::from_matrices(one(m), one(c), one(k)).unwrap()
}

fn free_vibration(n_steps: usize, alpha: f64) -> (TimeGrid, Vec<f64>) {
    let sys = sdof(1.0, 0.0, 4.0 * PI * PI);
    let grid = TimeGrid::new(n_steps, 1.0).unwrap();
    let hht = HhtParams::from_alpha(alpha).unwrap();
    let eff = EffectiveOperators::new(&sys, &grid, &hht).unwrap();
    let f = vec![DVector::zeros(1); n_steps + 1];
    let d0 = DVector::from_element(1, 1.0);
    let traj = hht_solve(&sys, &eff, &f, &grid, &hht, &d0, &DVector::zeros(1)).unwrap();
    (grid, traj.d.iter().map(|d| d[0]).collect())
}

fn max_error(n_steps: usize) -> f64 {
    let (grid, d) = free_vibration(n_steps, 0.05);
    d.iter()
        .enumerate()
        .map(|(i, x)| (x - (2.0 * PI * grid.time(i)).cos()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn undamped_oscillator_matches_cosine() {
    assert!(max_error(100) < 5e-3, "{}", max_error(100));
}

#[test]
fn second_order_convergence() {
    let (e1, e2, e3) = (max_error(100), max_error(200), max_error(400));
    for ratio in [e1 / e2, e2 / e3] {
        assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}");
    }
}

/// Scalar HHT written in displacement form, solved for `d_{i+1}` directly.
fn reference_hht(
    m: f64,
    c: f64,
    k: f64,
    f: &[f64],
    dt: f64,
    alpha: f64,
    d0: f64,
    v0: f64,
) -> Vec<f64> {
    let beta = (1.0 + alpha).powi(2) / 4.0;
    let delta = (1.0 + 2.0 * alpha) / 2.0;
    let mut d = d0;
    let mut v = v0;
    let mut a = (f[0] - c * v0 - k * d0) / m;
    let mut out = vec![d];
    for i in 0..f.len() - 1 {
        // a' = ad·d' + a0 ; v' = vd·d' + v0'
        let ad = 1.0 / (beta * dt * dt);
        let a0 = -(d + dt * v) / (beta * dt * dt) - (1.0 / (2.0 * beta) - 1.0) * a;
        let vd = dt * delta * ad;
        let vv0 = v + dt * ((1.0 - delta) * a + delta * a0);
        let lhs = m * ad + (1.0 - alpha) * (c * vd + k);
        let rhs = (1.0 - alpha) * f[i + 1] + alpha * f[i]
            - m * a0
            - (1.0 - alpha) * c * vv0
            - alpha * (c * v + k * d);
        let dn = rhs / lhs;
        let an = ad * dn + a0;
        let vn = vd * dn + vv0;
        d = dn;
        v = vn;
        a = an;
        out.push(d);
    }
    out
}

#[test]
fn matches_independent_displacement_form() {
    let (m, c, k) = (2.0, 0.7, 90.0);
    let grid = TimeGrid::new(80, 2.0).unwrap();
    let forces: Vec<f64> = grid.times().map(|t| (3.0 * t).sin() + 0.5).collect();
    for alpha in [0.0, 0.05, 0.3] {
        let hht = HhtParams::from_alpha(alpha).unwrap();
        let sys = sdof(m, c, k);
        let eff = EffectiveOperators::new(&sys, &grid, &hht).unwrap();
        let f: Vec<_> = forces
            .iter()
            .map(|x| DVector::from_element(1, *x))
            .collect();
        let traj = hht_solve(
            &sys,
            &eff,
            &f,
            &grid,
            &hht,
            &DVector::from_element(1, 0.1),
            &DVector::from_element(1, -0.2),
        )
        .unwrap();
        let reference = reference_hht(m, c, k, &forces, grid.dt(), alpha, 0.1, -0.2);
        let scale = reference.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        for (x, y) in traj.d.iter().zip(&reference) {
            assert!(
                (x[0] - y).abs() <= 1e-10 * scale,
                "alpha {alpha}: {} vs {y}",
                x[0]
            );
        }
    }
}

#[test]
fn free_vibration_energy_never_grows() {
    let sys = sdof(1.0, 0.0, 4.0 * PI * PI);
    let grid = TimeGrid::new(300, 3.0).unwrap();
    for alpha in [0.0, 0.05, 1.0 / 3.0] {
        let hht = HhtParams::from_alpha(alpha).unwrap();
        let eff = EffectiveOperators::new(&sys, &grid, &hht).unwrap();
        let f = vec![DVector::zeros(1); 301];
        let traj = hht_solve(
            &sys,
            &eff,
            &f,
            &grid,
            &hht,
            &DVector::from_element(1, 1.0),
            &DVector::zeros(1),
        )
        .unwrap();
        let e = traj.energy(&sys);
        assert!(
            e.iter().all(|x| *x <= e[0] * (1.0 + 1e-12)),
            "alpha {alpha}"
        );
        if alpha > 0.0 {
            assert!(e[300] < e[0]);
        }
    }
}

#[test]
fn heavily_damped_system_reaches_static_deflection() {
    let sys = sdof(1.0, 40.0, 100.0);
    let grid = TimeGrid::new(400, 20.0).unwrap();
    let hht = HhtParams::default();
    let eff = EffectiveOperators::new(&sys, &grid, &hht).unwrap();
    let f = vec![DVector::from_element(1, 3.0); 401];
    let z = DVector::zeros(1);
    let traj = hht_solve(&sys, &eff, &f, &grid, &hht, &z, &z).unwrap();
    assert!((traj.d[400][0] - 0.03).abs() < 1e-9);
}

#[test]
fn cantilever_trajectory_satisfies_balance() {
    let mut p = cantilever(8, 4).unwrap();
    p.grid = TimeGrid::new(30, 0.05).unwrap();
    let an = p.analyze(&vec![0.6; 32]).unwrap();
    for i in 1..=30 {
        assert!(balance_residual(&an.sys, &an.traj, &p.hht, i) < 1e-12);
    }
    let tip = match p.objective {
        adjrom::Objective::SquaredTargetDisplacement { target } => target,
        _ => unreachable!(),
    };
    let peak = an.traj.peak_abs(tip);
    assert!(peak.is_finite() && peak > 0.0);
}
