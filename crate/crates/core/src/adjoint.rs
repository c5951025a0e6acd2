//! Discrete adjoint of the HHT-α recursion and the design gradient.
//!
//! The forward scheme is treated as the discrete constraint set
//!
//! ```text
//! R_0 = M a_0 + C v_0 + K d_0 − f_0
//! R_i = M̂₁ a_i + M̂₀ a_{i−1} + Ĉ₀ v_{i−1} + K d_{i−1} − F_i        (i ≥ 1)
//! ```
//!
//! together with the Newmark updates, and differentiated exactly. Stationarity
//! of the Lagrangian with respect to `d_i`, `v_i` and `a_i` yields the backward
//! recursion
//!
//! ```text
//! ς_{N_t} = ∂f/∂d_{N_t},  τ_{N_t} = 0,  M̂₁ϑ_{N_t} = −βς_{N_t}Δt² − δτ_{N_t}Δt
//! ς_{i−1} = ∂f/∂d_{i−1} + Kϑ_i + ς_i
//! τ_{i−1} = Ĉ₀ϑ_i + ς_iΔt + τ_i
//! M̂₁ϑ_{i−1} = −M̂₀ϑ_i − [βς_{i−1} + (½−β)ς_i]Δt² − [δτ_{i−1} + (1−δ)τ_i]Δt   (i = N_t … 2)
//! Mϑ_0 = −M̂₀ϑ_1 − (½−β)ς_1Δt² − (1−δ)τ_1Δt
//! ```
//!
//! and the gradient `df/db_e = ∂f/∂b_e + Σ_i ϑ_iᵀ ∂R_i/∂b_e`.

use std::io::Write;

use nalgebra::DVector;

use crate::assembly::SystemMatrices;
use crate::element::ElementVector;
use crate::error::{check_len, invalid, Result};
use crate::load::LoadCase;
use crate::objective::Objective;
use crate::time::{EffectiveOperators, HhtParams, TimeGrid, Trajectory};

/// Adjoint history. `varsigma[0]` and `tau[0]` are never needed by the
/// recursion and are left at zero.
#[derive(Clone, Debug)]
pub struct AdjointTrajectory {
    pub vartheta: Vec<DVector<f64>>,
    pub varsigma: Vec<DVector<f64>>,
    pub tau: Vec<DVector<f64>>,
    /// Number of (pre-factorized) linear solves performed.
    pub linear_solves: usize,
}

/// Running-term update shared by the full, reduced, and residual recursions:
/// returns `(ς_{i−1}, τ_{i−1})` given `Kx_i` and `Ĉ₀x_i`.
pub(crate) fn running_terms(
    partial_prev: &DVector<f64>,
    k_x: &DVector<f64>,
    c_x: &DVector<f64>,
    s_i: &DVector<f64>,
    t_i: &DVector<f64>,
    dt: f64,
) -> (DVector<f64>, DVector<f64>) {
    let s_prev = partial_prev + k_x + s_i;
    let mut t_prev = c_x + t_i;
    t_prev.axpy(dt, s_i, 1.0);
    (s_prev, t_prev)
}

/// `−[βς_{i−1} + (½−β)ς_i]Δt² − [δτ_{i−1} + (1−δ)τ_i]Δt`
pub(crate) fn running_forcing(
    s_prev: &DVector<f64>,
    s_i: &DVector<f64>,
    t_prev: &DVector<f64>,
    t_i: &DVector<f64>,
    hht: &HhtParams,
    dt: f64,
) -> DVector<f64> {
    let dt2 = dt * dt;
    let mut out = s_prev * (-hht.beta * dt2);
    out.axpy(-(0.5 - hht.beta) * dt2, s_i, 1.0);
    out.axpy(-hht.delta * dt, t_prev, 1.0);
    out.axpy(-(1.0 - hht.delta) * dt, t_i, 1.0);
    out
}

/// Forcing of the initial-step equation: `−(½−β)ς_1Δt² − (1−δ)τ_1Δt`.
pub(crate) fn initial_forcing(
    s1: &DVector<f64>,
    t1: &DVector<f64>,
    hht: &HhtParams,
    dt: f64,
) -> DVector<f64> {
    let mut out = s1 * (-(0.5 - hht.beta) * dt * dt);
    out.axpy(-(1.0 - hht.delta) * dt, t1, 1.0);
    out
}

fn check_partials(partials: &[DVector<f64>], grid: &TimeGrid, n: usize) -> Result<()> {
    check_len(
        "adjoint (state partials)",
        grid.n_steps() + 1,
        partials.len(),
    )?;
    for p in partials {
        check_len("adjoint (partial length)", n, p.len())?;
    }
    Ok(())
}

/// Full-order backward recursion. Reuses the factorizations of `M̂₁` and `M`
/// held by `eff`.
pub fn solve_adjoint_full(
    sys: &SystemMatrices,
    eff: &EffectiveOperators,
    partials: &[DVector<f64>],
    grid: &TimeGrid,
    hht: &HhtParams,
) -> Result<AdjointTrajectory> {
    let n = sys.n_free();
    check_partials(partials, grid, n)?;
    let nt = grid.n_steps();
    let dt = grid.dt();
    let zero = DVector::zeros(n);
    let mut vartheta = vec![zero.clone(); nt + 1];
    let mut varsigma = vec![zero.clone(); nt + 1];
    let mut tau = vec![zero.clone(); nt + 1];
    let mut solves = 0;

    varsigma[nt] = partials[nt].clone();
    let mut rhs = running_forcing(&varsigma[nt], &zero, &tau[nt], &zero, hht, dt);
    eff.factor_m_hat1().solve_in_place(rhs.as_mut_slice());
    solves += 1;
    vartheta[nt] = rhs;

    let mut k_x = zero.clone();
    let mut c_x = zero.clone();
    for i in (2..=nt).rev() {
        sys.k()
            .mul_vec_into(vartheta[i].as_slice(), k_x.as_mut_slice());
        eff.c_hat0
            .mul_vec_into(vartheta[i].as_slice(), c_x.as_mut_slice());
        let (s_prev, t_prev) =
            running_terms(&partials[i - 1], &k_x, &c_x, &varsigma[i], &tau[i], dt);
        let mut rhs = running_forcing(&s_prev, &varsigma[i], &t_prev, &tau[i], hht, dt);
        eff.m_hat0
            .mul_vec_add(-1.0, vartheta[i].as_slice(), rhs.as_mut_slice());
        eff.factor_m_hat1().solve_in_place(rhs.as_mut_slice());
        solves += 1;
        vartheta[i - 1] = rhs;
        varsigma[i - 1] = s_prev;
        tau[i - 1] = t_prev;
    }

    let mut rhs0 = initial_forcing(&varsigma[1], &tau[1], hht, dt);
    eff.m_hat0
        .mul_vec_add(-1.0, vartheta[1].as_slice(), rhs0.as_mut_slice());
    eff.factor_m().solve_in_place(rhs0.as_mut_slice());
    solves += 1;
    vartheta[0] = rhs0;

    Ok(AdjointTrajectory {
        vartheta,
        varsigma,
        tau,
        linear_solves: solves,
    })
}

/// Element-local state combinations whose products with the unit mass and
/// stiffness matrices give `∂R_i/∂b_e`.
struct ResidualDesignTerms<'a> {
    sys: &'a SystemMatrices,
    traj: &'a Trajectory,
    hht: &'a HhtParams,
    ground: Option<(crate::mesh::Direction, Vec<f64>)>,
    weights: [f64; 5],
}

impl<'a> ResidualDesignTerms<'a> {
    fn new(
        sys: &'a SystemMatrices,
        traj: &'a Trajectory,
        load: &LoadCase,
        hht: &'a HhtParams,
    ) -> Self {
        let ground = if load.is_design_dependent() {
            let samples: Vec<_> = traj
                .grid
                .times()
                .map(|t| load.ground_acceleration(t).unwrap())
                .collect();
            Some((samples[0].0, samples.into_iter().map(|(_, a)| a).collect()))
        } else {
            None
        };
        Self {
            sys,
            traj,
            hht,
            ground,
            weights: hht.operator_weights(traj.grid.dt()),
        }
    }

    /// `(x_M, x_K)` with `∂R_i/∂b_e = dV̄_e·M_e·x_M + dĒ_e·K_e·x_K`.
    fn terms(&self, e: usize, i: usize) -> (ElementVector, ElementVector) {
        let (am, ak) = self.sys.rayleigh();
        let [c1, c2, c3, c4, c5] = self.weights;
        let g = |v: &DVector<f64>| self.sys.gather(e, v);
        let t = self.traj;
        let (mut xm, xk);
        if i == 0 {
            let (a0, v0, d0) = (g(&t.a[0]), g(&t.v[0]), g(&t.d[0]));
            xm = a0 + v0 * am;
            xk = v0 * ak + d0;
        } else {
            let (ai, ap, vp, dp) = (g(&t.a[i]), g(&t.a[i - 1]), g(&t.v[i - 1]), g(&t.d[i - 1]));
            let damp = ai * c1 + ap * c3 + vp;
            xm = ai + damp * am;
            xk = damp * ak + ai * c2 + ap * c4 + vp * c5 + dp;
        }
        if let Some((dir, ag)) = &self.ground {
            let blend = if i == 0 {
                ag[0]
            } else {
                (1.0 - self.hht.alpha) * ag[i] + self.hht.alpha * ag[i - 1]
            };
            xm += self.sys.element_influence(e, *dir) * blend;
        }
        (xm, xk)
    }
}

/// Element-local `∂R_i/∂b_e` for every step `i = 0 … N_t` (ordered like the
/// element's local dofs; constrained entries are zero).
pub fn partial_residual_design(
    e: usize,
    traj: &Trajectory,
    sys: &SystemMatrices,
    load: &LoadCase,
    hht: &HhtParams,
) -> Result<Vec<ElementVector>> {
    if e >= sys.n_elements() {
        return Err(invalid(format!("element {e} out of range")));
    }
    let terms = ResidualDesignTerms::new(sys, traj, load, hht);
    let (dv, de) = (
        sys.mass_scale_derivative()[e],
        sys.stiffness_scale_derivative()[e],
    );
    Ok((0..=traj.n_steps())
        .map(|i| {
            let (xm, xk) = terms.terms(e, i);
            sys.unit_mass() * xm * dv + sys.unit_stiffness() * xk * de
        })
        .collect())
}

/// `df/db_e = ∂f/∂b_e + Σ_i ϑ_iᵀ ∂R_i/∂b_e` with respect to the physical
/// (post-filter) densities the system was assembled from.
pub fn assemble_gradient(
    vartheta: &[DVector<f64>],
    traj: &Trajectory,
    sys: &SystemMatrices,
    load: &LoadCase,
    objective: &Objective,
    hht: &HhtParams,
) -> Result<Vec<f64>> {
    check_len(
        "gradient (adjoint steps)",
        traj.n_steps() + 1,
        vartheta.len(),
    )?;
    for v in vartheta {
        check_len("gradient (adjoint length)", sys.n_free(), v.len())?;
    }
    let mut grad = objective.design_partial_explicit(traj, sys, load)?;
    let terms = ResidualDesignTerms::new(sys, traj, load, hht);
    let (me, ke) = (sys.unit_mass(), sys.unit_stiffness());
    let (dvs, des) = (
        sys.mass_scale_derivative(),
        sys.stiffness_scale_derivative(),
    );
    for (e, g) in grad.iter_mut().enumerate() {
        let mut mass_part = 0.0;
        let mut stiff_part = 0.0;
        for (i, theta) in vartheta.iter().enumerate() {
            let th = sys.gather(e, theta);
            if th.iter().all(|x| *x == 0.0) {
                continue;
            }
            let (xm, xk) = terms.terms(e, i);
            mass_part += (me * th).dot(&xm);
            stiff_part += (ke * th).dot(&xk);
        }
        *g += dvs[e] * mass_part + des[e] * stiff_part;
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(crate::error::Error::NonFinite(format!(
            "gradient entry {i}"
        )));
    }
    Ok(grad)
}

/// CSV with columns `element,gradient`.
pub fn write_gradient_csv<W: Write>(mut out: W, grad: &[f64]) -> Result<()> {
    writeln!(out, "element,gradient")?;
    for (e, g) in grad.iter().enumerate() {
        writeln!(out, "{e},{g:e}")?;
    }
    Ok(())
}
