//! Time-averaged objectives over a discrete trajectory.
//!
//! Every sum runs over `t_0 … t_{N_t}` (N_t + 1 terms) with a `1/N_t`
//! normalization.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::assembly::SystemMatrices;
use crate::error::{invalid, Result};
use crate::load::LoadCase;
use crate::time::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Objective {
    /// `(1/N_t) Σ f_iᵀ d_i`
    MeanDynamicCompliance,
    /// `(1/2N_t) Σ d_iᵀ K d_i`
    MeanStrainEnergy,
    /// `(1/N_t) Σ (Lᵀ d_i)²` with `L` selecting one free dof.
    SquaredTargetDisplacement { target: usize },
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::MeanDynamicCompliance => "mean_dynamic_compliance",
            Objective::MeanStrainEnergy => "mean_strain_energy",
            Objective::SquaredTargetDisplacement { .. } => "squared_target_displacement",
        }
    }

    fn check(&self, traj: &Trajectory) -> Result<()> {
        if let Objective::SquaredTargetDisplacement { target } = *self {
            if target >= traj.n_dofs() {
                return Err(invalid(format!(
                    "target dof {target} outside trajectory with {} dofs",
                    traj.n_dofs()
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, traj: &Trajectory, sys: &SystemMatrices) -> Result<f64> {
        self.check(traj)?;
        let nt = traj.n_steps() as f64;
        let sum: f64 = match *self {
            Objective::MeanDynamicCompliance => {
                traj.f.iter().zip(&traj.d).map(|(f, d)| f.dot(d)).sum()
            }
            Objective::MeanStrainEnergy => {
                0.5 * traj
                    .d
                    .iter()
                    .map(|d| d.dot(&sys.k().mul_vec(d)))
                    .sum::<f64>()
            }
            Objective::SquaredTargetDisplacement { target } => {
                traj.d.iter().map(|d| d[target] * d[target]).sum()
            }
        };
        Ok(sum / nt)
    }

    /// `∂f/∂d_i` for `i = 0 … N_t`.
    pub fn state_partials(
        &self,
        traj: &Trajectory,
        sys: &SystemMatrices,
    ) -> Result<Vec<DVector<f64>>> {
        self.check(traj)?;
        let inv = 1.0 / traj.n_steps() as f64;
        let n = traj.n_dofs();
        Ok(match *self {
            Objective::MeanDynamicCompliance => traj.f.iter().map(|f| f * inv).collect(),
            Objective::MeanStrainEnergy => {
                traj.d.iter().map(|d| sys.k().mul_vec(d) * inv).collect()
            }
            Objective::SquaredTargetDisplacement { target } => traj
                .d
                .iter()
                .map(|d| {
                    let mut p = DVector::zeros(n);
                    p[target] = 2.0 * d[target] * inv;
                    p
                })
                .collect(),
        })
    }

    /// Explicit design dependence `∂f/∂b_e` with the trajectory held fixed.
    pub fn design_partial_explicit(
        &self,
        traj: &Trajectory,
        sys: &SystemMatrices,
        load: &LoadCase,
    ) -> Result<Vec<f64>> {
        self.check(traj)?;
        let ne = sys.n_elements();
        let inv = 1.0 / traj.n_steps() as f64;
        let mut out = vec![0.0; ne];
        match *self {
            Objective::MeanStrainEnergy => {
                let ke = sys.unit_stiffness();
                let dscale = sys.stiffness_scale_derivative();
                for (e, g) in out.iter_mut().enumerate() {
                    let energy: f64 = traj
                        .d
                        .iter()
                        .map(|d| {
                            let de = sys.gather(e, d);
                            de.dot(&(ke * de))
                        })
                        .sum();
                    *g = 0.5 * inv * dscale[e] * energy;
                }
            }
            Objective::MeanDynamicCompliance => {
                // only mass-proportional (ground) loads depend on the design
                if load.is_design_dependent() {
                    let me = sys.unit_mass();
                    let dscale = sys.mass_scale_derivative();
                    let samples: Vec<_> = traj
                        .grid
                        .times()
                        .map(|t| load.ground_acceleration(t).unwrap())
                        .collect();
                    let dir = samples[0].0;
                    for (e, g) in out.iter_mut().enumerate() {
                        let m_iota = me * sys.element_influence(e, dir);
                        let acc: f64 = traj
                            .d
                            .iter()
                            .zip(&samples)
                            .map(|(d, &(_, ag))| -ag * m_iota.dot(&sys.gather(e, d)))
                            .sum();
                        *g = inv * dscale[e] * acc;
                    }
                }
            }
            Objective::SquaredTargetDisplacement { .. } => {}
        }
        Ok(out)
    }
}
