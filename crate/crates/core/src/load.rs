//! Transient load cases.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::assembly::SystemMatrices;
use crate::error::{invalid, Result};
use crate::mesh::{Direction, Mesh};
use crate::time::TimeGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LoadKind {
    /// Half-cycle sine pulse `A·sin(π t / duration)` for `t ≤ duration`, zero after.
    PointTransient {
        node: usize,
        direction: Direction,
        amplitude: f64,
        duration: f64,
    },
    /// Constant magnitude force rotating at `omega` rad/s: `A·(cos ωt, sin ωt)`.
    RotatingConstant {
        node: usize,
        amplitude: f64,
        omega: f64,
    },
    /// Base excitation `a_g(t) = A·sin(ωt)`, applied as `f = −M·ι·a_g(t)`.
    GroundAcceleration {
        direction: Direction,
        amplitude: f64,
        omega: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LumpedMass {
    pub node: usize,
    /// kg
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadCase {
    pub kind: LoadKind,
    #[serde(default)]
    pub lumped_masses: Vec<LumpedMass>,
}

impl LoadCase {
    pub fn new(kind: LoadKind) -> Self {
        Self {
            kind,
            lumped_masses: Vec::new(),
        }
    }

    pub fn with_lumped_mass(mut self, node: usize, mass: f64) -> Self {
        self.lumped_masses.push(LumpedMass { node, mass });
        self
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        let check_node = |n: usize| {
            if n >= mesh.n_nodes() {
                Err(invalid(format!("load node {n} out of range")))
            } else {
                Ok(())
            }
        };
        match &self.kind {
            LoadKind::PointTransient {
                node,
                duration,
                amplitude,
                ..
            } => {
                check_node(*node)?;
                if !(*duration > 0.0) || !amplitude.is_finite() {
                    return Err(invalid(
                        "half-sine load needs a positive duration and finite amplitude",
                    ));
                }
            }
            LoadKind::RotatingConstant {
                node,
                amplitude,
                omega,
            } => {
                check_node(*node)?;
                if !amplitude.is_finite() || !omega.is_finite() {
                    return Err(invalid("rotating load parameters must be finite"));
                }
            }
            LoadKind::GroundAcceleration {
                amplitude, omega, ..
            } => {
                if !amplitude.is_finite() || !omega.is_finite() {
                    return Err(invalid("ground acceleration parameters must be finite"));
                }
            }
        }
        for lm in &self.lumped_masses {
            check_node(lm.node)?;
            if !(lm.mass > 0.0) {
                return Err(invalid("lumped masses must be positive"));
            }
        }
        Ok(())
    }

    /// Ground acceleration `a_g(t)`, or `None` when the load does not depend
    /// on the mass matrix.
    pub fn ground_acceleration(&self, t: f64) -> Option<(Direction, f64)> {
        match self.kind {
            LoadKind::GroundAcceleration {
                direction,
                amplitude,
                omega,
            } => Some((direction, amplitude * (omega * t).sin())),
            _ => None,
        }
    }

    pub fn is_design_dependent(&self) -> bool {
        matches!(self.kind, LoadKind::GroundAcceleration { .. })
    }

    /// Free-dof force vectors at every grid instant `t_0 … t_{N_t}`.
    pub fn forces(&self, sys: &SystemMatrices, grid: &TimeGrid) -> Vec<DVector<f64>> {
        let n = sys.n_free();
        let dofs = sys.dofs();
        let point = |node: usize, dir: Direction| dofs.free(Mesh::dof(node, dir));
        match self.kind {
            LoadKind::PointTransient {
                node,
                direction,
                amplitude,
                duration,
            } => {
                let target = point(node, direction);
                grid.times()
                    .map(|t| {
                        let mut f = DVector::zeros(n);
                        if let Some(i) = target {
                            f[i] = half_sine(amplitude, duration, t);
                        }
                        f
                    })
                    .collect()
            }
            LoadKind::RotatingConstant {
                node,
                amplitude,
                omega,
            } => {
                let (ix, iy) = (point(node, Direction::X), point(node, Direction::Y));
                grid.times()
                    .map(|t| {
                        let mut f = DVector::zeros(n);
                        if let Some(i) = ix {
                            f[i] = amplitude * (omega * t).cos();
                        }
                        if let Some(i) = iy {
                            f[i] = amplitude * (omega * t).sin();
                        }
                        f
                    })
                    .collect()
            }
            LoadKind::GroundAcceleration { direction, .. } => {
                let m_iota = sys.m().mul_vec(&sys.influence_vector(direction));
                grid.times()
                    .map(|t| {
                        let (_, ag) = self.ground_acceleration(t).unwrap();
                        &m_iota * (-ag)
                    })
                    .collect()
            }
        }
    }
}

fn half_sine(amplitude: f64, duration: f64, t: f64) -> f64 {
    if t <= duration {
        amplitude * (std::f64::consts::PI * t / duration).sin()
    } else {
        0.0
    }
}
