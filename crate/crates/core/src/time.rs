//! HHT-α direct time integration.
//!
//! Substituting the Newmark relations into the α-modified balance
//!
//! ```text
//! M a_i + (1−α)C v_i + αC v_{i−1} + (1−α)K d_i + αK d_{i−1} = (1−α)f_i + αf_{i−1}
//! ```
//!
//! gives one constant-matrix solve per step,
//!
//! ```text
//! M̂₁ a_i = (1−α)f_i + αf_{i−1} − M̂₀ a_{i−1} − Ĉ₀ v_{i−1} − K d_{i−1}
//! ```
//!
//! followed by the Newmark updates of `d_i` and `v_i`.

use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::assembly::SystemMatrices;
use crate::error::{check_len, invalid, Error, Result};
use crate::sparse::{CsrMatrix, SkylineCholesky};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(n_steps: usize, total_time: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(invalid("time grid needs at least one step"));
        }
        if !(total_time > 0.0) || !total_time.is_finite() {
            return Err(invalid("total time must be positive"));
        }
        Ok(Self {
            n_steps,
            dt: total_time / n_steps as f64,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn total_time(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// `t_0, …, t_{N_t}`
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|i| self.time(i))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HhtParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

impl HhtParams {
    /// `β = (1+α)²/4`, `δ = (1+2α)/2`; second order and unconditionally
    /// stable for `0 ≤ α ≤ 1/3`.
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0 / 3.0).contains(&alpha) {
            return Err(invalid(format!("HHT alpha {alpha} outside [0, 1/3]")));
        }
        Ok(Self {
            alpha,
            beta: (1.0 + alpha).powi(2) / 4.0,
            delta: (1.0 + 2.0 * alpha) / 2.0,
        })
    }

    /// Scalar weights `(c₁, c₂, c₃, c₄, c₅)` such that
    /// `M̂₁ = M + c₁C + c₂K`, `M̂₀ = c₃C + c₄K`, `Ĉ₀ = C + c₅K`.
    pub fn operator_weights(&self, dt: f64) -> [f64; 5] {
        let one_m_a = 1.0 - self.alpha;
        [
            one_m_a * self.delta * dt,
            one_m_a * self.beta * dt * dt,
            one_m_a * (1.0 - self.delta) * dt,
            one_m_a * (0.5 - self.beta) * dt * dt,
            one_m_a * dt,
        ]
    }
}

impl Default for HhtParams {
    fn default() -> Self {
        Self::from_alpha(0.05).unwrap()
    }
}

/// The constant operators of the residual form and the two factorizations
/// shared by the forward and adjoint passes.
#[derive(Clone, Debug)]
pub struct EffectiveOperators {
    pub m_hat1: CsrMatrix,
    pub m_hat0: CsrMatrix,
    pub c_hat0: CsrMatrix,
    factor_m_hat1: SkylineCholesky,
    factor_m: SkylineCholesky,
}

impl EffectiveOperators {
    pub fn new(sys: &SystemMatrices, grid: &TimeGrid, hht: &HhtParams) -> Result<Self> {
        let [c1, c2, c3, c4, c5] = hht.operator_weights(grid.dt());
        let (m, c, k) = (sys.m(), sys.c(), sys.k());
        let m_hat1 = CsrMatrix::linear_combination(&[(1.0, m), (c1, c), (c2, k)])?;
        let m_hat0 = CsrMatrix::linear_combination(&[(c3, c), (c4, k)])?;
        let c_hat0 = CsrMatrix::linear_combination(&[(1.0, c), (c5, k)])?;
        let factor_m_hat1 = SkylineCholesky::factor(&m_hat1)
            .map_err(|e| Error::Singular(format!("effective matrix M̂₁: {e}")))?;
        let factor_m =
            SkylineCholesky::factor(m).map_err(|e| Error::Singular(format!("mass matrix: {e}")))?;
        Ok(Self {
            m_hat1,
            m_hat0,
            c_hat0,
            factor_m_hat1,
            factor_m,
        })
    }

    pub fn factor_m_hat1(&self) -> &SkylineCholesky {
        &self.factor_m_hat1
    }

    pub fn factor_m(&self) -> &SkylineCholesky {
        &self.factor_m
    }
}

/// Consistent initial acceleration `a₀ = M⁻¹(f₀ − C v₀ − K d₀)`.
pub fn initial_acceleration(
    sys: &SystemMatrices,
    factor_m: &SkylineCholesky,
    f0: &DVector<f64>,
    d0: &DVector<f64>,
    v0: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = sys.n_free();
    check_len("initial acceleration (f0)", n, f0.len())?;
    check_len("initial acceleration (d0)", n, d0.len())?;
    check_len("initial acceleration (v0)", n, v0.len())?;
    let mut rhs = f0.clone();
    sys.c().mul_vec_add(-1.0, v0.as_slice(), rhs.as_mut_slice());
    sys.k().mul_vec_add(-1.0, d0.as_slice(), rhs.as_mut_slice());
    factor_m.solve_in_place(rhs.as_mut_slice());
    Ok(rhs)
}

/// Displacement, velocity, acceleration, and load at `t_0 … t_{N_t}`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub d: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
    pub a: Vec<DVector<f64>>,
    pub f: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }

    pub fn n_dofs(&self) -> usize {
        self.d.first().map_or(0, |d| d.len())
    }

    pub fn peak_abs(&self, dof: usize) -> f64 {
        self.d.iter().fold(0.0, |m, d| m.max(d[dof].abs()))
    }

    /// Kinetic plus strain energy `½vᵀMv + ½dᵀKd` per step.
    pub fn energy(&self, sys: &SystemMatrices) -> Vec<f64> {
        self.d
            .iter()
            .zip(&self.v)
            .map(|(d, v)| 0.5 * v.dot(&sys.m().mul_vec(v)) + 0.5 * d.dot(&sys.k().mul_vec(d)))
            .collect()
    }

    /// CSV with columns `step,t,<dof columns>`; `dofs` are free-dof indices
    /// and `labels` their column names.
    pub fn write_csv<W: Write>(&self, mut out: W, dofs: &[usize], labels: &[String]) -> Result<()> {
        check_len("trajectory csv (labels)", dofs.len(), labels.len())?;
        write!(out, "step,t")?;
        for l in labels {
            write!(out, ",{l}")?;
        }
        writeln!(out)?;
        for (i, d) in self.d.iter().enumerate() {
            write!(out, "{},{}", i, self.grid.time(i))?;
            for &k in dofs {
                write!(out, ",{:e}", d[k])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Integrates the forward problem from `(d0, v0)` under the sampled loads
/// `forces[0..=N_t]`.
pub fn hht_solve(
    sys: &SystemMatrices,
    eff: &EffectiveOperators,
    forces: &[DVector<f64>],
    grid: &TimeGrid,
    hht: &HhtParams,
    d0: &DVector<f64>,
    v0: &DVector<f64>,
) -> Result<Trajectory> {
    let n = sys.n_free();
    let nt = grid.n_steps();
    check_len("hht solve (force samples)", nt + 1, forces.len())?;
    for f in forces {
        check_len("hht solve (force length)", n, f.len())?;
    }
    let dt = grid.dt();
    let (alpha, beta, delta) = (hht.alpha, hht.beta, hht.delta);

    let a0 = initial_acceleration(sys, eff.factor_m(), &forces[0], d0, v0)?;
    let mut d = Vec::with_capacity(nt + 1);
    let mut v = Vec::with_capacity(nt + 1);
    let mut a = Vec::with_capacity(nt + 1);
    d.push(d0.clone());
    v.push(v0.clone());
    a.push(a0);

    for i in 1..=nt {
        let (dp, vp, ap) = (&d[i - 1], &v[i - 1], &a[i - 1]);
        let mut rhs = &forces[i] * (1.0 - alpha) + &forces[i - 1] * alpha;
        let r = rhs.as_mut_slice();
        eff.m_hat0.mul_vec_add(-1.0, ap.as_slice(), r);
        eff.c_hat0.mul_vec_add(-1.0, vp.as_slice(), r);
        sys.k().mul_vec_add(-1.0, dp.as_slice(), r);
        eff.factor_m_hat1().solve_in_place(r);
        let ai = rhs;
        let vi = vp + (ap * (1.0 - delta) + &ai * delta) * dt;
        let di = dp + vp * dt + (ap * (0.5 - beta) + &ai * beta) * (dt * dt);
        if !di.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite(format!("displacement at step {i}")));
        }
        d.push(di);
        v.push(vi);
        a.push(ai);
    }
    Ok(Trajectory {
        grid: *grid,
        d,
        v,
        a,
        f: forces.to_vec(),
    })
}

/// Relative residual of the α-modified balance at step `i ≥ 1`.
pub fn balance_residual(sys: &SystemMatrices, traj: &Trajectory, hht: &HhtParams, i: usize) -> f64 {
    let alpha = hht.alpha;
    let mut r = sys.m().mul_vec(&traj.a[i]);
    let rs = r.as_mut_slice();
    sys.c().mul_vec_add(1.0 - alpha, traj.v[i].as_slice(), rs);
    sys.c().mul_vec_add(alpha, traj.v[i - 1].as_slice(), rs);
    sys.k().mul_vec_add(1.0 - alpha, traj.d[i].as_slice(), rs);
    sys.k().mul_vec_add(alpha, traj.d[i - 1].as_slice(), rs);
    let load = &traj.f[i] * (1.0 - alpha) + &traj.f[i - 1] * alpha;
    let scale =
        load.norm() + sys.m().mul_vec(&traj.a[i]).norm() + sys.k().mul_vec(&traj.d[i]).norm();
    let res = (r - load).norm();
    if scale > 0.0 {
        res / scale
    } else {
        res
    }
}
