//! A complete transient design problem and the per-design analysis pipeline.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::adjoint::{assemble_gradient, solve_adjoint_full, AdjointTrajectory};
use crate::assembly::{assemble, SystemMatrices};
use crate::error::{check_len, invalid, Error, Result};
use crate::load::{LoadCase, LoadKind};
use crate::material::{volume_projection, DensityFilter, MaterialParams};
use crate::mesh::{Direction, Mesh};
use crate::objective::Objective;
use crate::time::{hht_solve, EffectiveOperators, HhtParams, TimeGrid, Trajectory};

#[derive(Clone, Debug)]
pub struct Problem {
    pub mesh: Mesh,
    pub material: MaterialParams,
    pub load: LoadCase,
    pub objective: Objective,
    pub grid: TimeGrid,
    pub hht: HhtParams,
    pub filter: Option<DensityFilter>,
}

/// Everything the adjoint needs about one design: the assembled system, the
/// factorized effective operators, the forward trajectory and `∂f/∂d_i`.
#[derive(Clone, Debug)]
pub struct Analysis {
    /// Densities after filtering (what the system was assembled from).
    pub physical: Vec<f64>,
    pub sys: SystemMatrices,
    pub eff: EffectiveOperators,
    pub traj: Trajectory,
    pub objective: f64,
    pub partials: Vec<DVector<f64>>,
}

/// One entry of a finite-difference gradient check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientProbe {
    pub element: usize,
    pub analytic: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Cantilever,
    Support,
    Building,
}

impl Benchmark {
    pub fn default_mesh(self) -> (usize, usize) {
        match self {
            Benchmark::Cantilever => (60, 30),
            Benchmark::Support => (40, 40),
            Benchmark::Building => (12, 30),
        }
    }

    pub fn build(self, nx: usize, ny: usize) -> Result<Problem> {
        match self {
            Benchmark::Cantilever => cantilever(nx, ny),
            Benchmark::Support => support(nx, ny),
            Benchmark::Building => building(nx, ny),
        }
    }
}

/// 4 m × 2 m steel cantilever, 10 mm thick, clamped on the left. A 1 kN
/// downward half-sine pulse lasting half the horizon acts at mid-height of the
/// free end; the objective is the squared vertical displacement there.
/// 200 steps over 0.05 s.
pub fn cantilever(nx: usize, ny: usize) -> Result<Problem> {
    let mut mesh = Mesh::structured(nx, ny, 4.0, 2.0, 0.01)?;
    mesh.fix_left_edge();
    let tip = mesh.nearest_node(4.0, 1.0);
    let grid = TimeGrid::new(200, 0.05)?;
    let load = LoadCase::new(LoadKind::PointTransient {
        node: tip,
        direction: Direction::Y,
        amplitude: -1000.0,
        duration: 0.5 * grid.total_time(),
    });
    let target = mesh
        .dof_map()
        .free(Mesh::dof(tip, Direction::Y))
        .ok_or_else(|| invalid("cantilever tip is constrained"))?;
    Problem::new(
        mesh,
        MaterialParams::steel(),
        load,
        Objective::SquaredTargetDisplacement { target },
        grid,
        HhtParams::default(),
    )
}

/// 4 m × 4 m support clamped along its base, carrying a 1 kN load rotating at
/// 20π rad/s at the middle of the top edge. Mean dynamic compliance.
pub fn support(nx: usize, ny: usize) -> Result<Problem> {
    let mut mesh = Mesh::structured(nx, ny, 4.0, 4.0, 0.01)?;
    mesh.fix_bottom_edge();
    let node = mesh.nearest_node(2.0, 4.0);
    let load = LoadCase::new(LoadKind::RotatingConstant {
        node,
        amplitude: 1000.0,
        omega: 20.0 * std::f64::consts::PI,
    });
    Problem::new(
        mesh,
        MaterialParams::steel(),
        load,
        Objective::MeanDynamicCompliance,
        TimeGrid::new(200, 0.05)?,
        HhtParams::default(),
    )
}

/// 30 m × 75 m building on shaking ground `a_g = 5·sin(2.5πt)` with a
/// 0.4·10⁶ kg lumped mass at the middle of the roof. Mean strain energy,
/// 200 steps over 4.8 s.
pub fn building(nx: usize, ny: usize) -> Result<Problem> {
    let mut mesh = Mesh::structured(nx, ny, 30.0, 75.0, 1.0)?;
    mesh.fix_bottom_edge();
    let roof = mesh.nearest_node(15.0, 75.0);
    let load = LoadCase::new(LoadKind::GroundAcceleration {
        direction: Direction::X,
        amplitude: 5.0,
        omega: 2.5 * std::f64::consts::PI,
    })
    .with_lumped_mass(roof, 0.4e6);
    Problem::new(
        mesh,
        MaterialParams::steel(),
        load,
        Objective::MeanStrainEnergy,
        TimeGrid::new(200, 4.8)?,
        HhtParams::default(),
    )
}

impl Problem {
    pub fn new(
        mesh: Mesh,
        material: MaterialParams,
        load: LoadCase,
        objective: Objective,
        grid: TimeGrid,
        hht: HhtParams,
    ) -> Result<Self> {
        material.validate()?;
        load.validate(&mesh)?;
        if let Objective::SquaredTargetDisplacement { target } = objective {
            if target >= mesh.dof_map().n_free() {
                return Err(invalid(format!("target dof {target} is not a free dof")));
            }
        }
        Ok(Self {
            mesh,
            material,
            load,
            objective,
            grid,
            hht,
            filter: None,
        })
    }

    pub fn with_filter(mut self, radius: f64) -> Result<Self> {
        self.filter = Some(DensityFilter::new(&self.mesh, radius)?);
        Ok(self)
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.n_elements()
    }

    pub fn n_free(&self) -> usize {
        self.mesh.dof_map().n_free()
    }

    fn check_design(&self, b: &[f64]) -> Result<()> {
        check_len("design", self.n_elements(), b.len())?;
        if let Some(x) = b.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(invalid(format!("design value {x} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn physical_density(&self, b: &[f64]) -> Vec<f64> {
        match &self.filter {
            Some(f) => f.apply(b),
            None => b.to_vec(),
        }
    }

    pub fn assemble(&self, b: &[f64]) -> Result<SystemMatrices> {
        self.check_design(b)?;
        assemble(
            &self.mesh,
            &self.physical_density(b),
            &self.material,
            &self.load.lumped_masses,
        )
    }

    /// Forward solve from rest, objective value and its state partials.
    pub fn analyze(&self, b: &[f64]) -> Result<Analysis> {
        let sys = self.assemble(b)?;
        let eff = EffectiveOperators::new(&sys, &self.grid, &self.hht)?;
        let forces = self.load.forces(&sys, &self.grid);
        let zero = DVector::zeros(sys.n_free());
        let traj = hht_solve(&sys, &eff, &forces, &self.grid, &self.hht, &zero, &zero)?;
        let objective = self.objective.eval(&traj, &sys)?;
        if !objective.is_finite() {
            return Err(Error::NonFinite("objective".into()));
        }
        let partials = self.objective.state_partials(&traj, &sys)?;
        Ok(Analysis {
            physical: self.physical_density(b),
            sys,
            eff,
            traj,
            objective,
            partials,
        })
    }

    pub fn evaluate(&self, b: &[f64]) -> Result<f64> {
        Ok(self.analyze(b)?.objective)
    }

    pub fn full_adjoint(&self, an: &Analysis) -> Result<AdjointTrajectory> {
        solve_adjoint_full(&an.sys, &an.eff, &an.partials, &self.grid, &self.hht)
    }

    /// Gradient with respect to the design variables given any adjoint
    /// history (full or lifted from a reduced solve).
    pub fn gradient_from_adjoint(
        &self,
        an: &Analysis,
        vartheta: &[DVector<f64>],
    ) -> Result<Vec<f64>> {
        let g = assemble_gradient(
            vartheta,
            &an.traj,
            &an.sys,
            &self.load,
            &self.objective,
            &self.hht,
        )?;
        Ok(match &self.filter {
            Some(f) => f.backpropagate(&g),
            None => g,
        })
    }

    /// Objective and full-order adjoint gradient.
    pub fn gradient(&self, b: &[f64]) -> Result<(f64, Vec<f64>)> {
        let an = self.analyze(b)?;
        let adj = self.full_adjoint(&an)?;
        let g = self.gradient_from_adjoint(&an, &adj.vartheta)?;
        Ok((an.objective, g))
    }

    /// Adjoint gradient against central differences of full forward solves
    /// at the listed elements. The relative error uses
    /// `max(|fd|, 1e-6·max|g|)` as denominator so near-zero entries do not
    /// blow it up.
    pub fn check_gradient(
        &self,
        b: &[f64],
        elements: &[usize],
        step: f64,
    ) -> Result<Vec<GradientProbe>> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid("finite-difference step must be positive"));
        }
        if let Some(e) = elements.iter().find(|e| **e >= self.n_elements()) {
            return Err(invalid(format!("probe element {e} out of range")));
        }
        let (_, g) = self.gradient(b)?;
        let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        elements
            .iter()
            .map(|&e| {
                let mut plus = b.to_vec();
                plus[e] += step;
                let mut minus = b.to_vec();
                minus[e] -= step;
                let fd = (self.evaluate(&plus)? - self.evaluate(&minus)?) / (2.0 * step);
                let denom = fd.abs().max(1e-6 * gmax);
                let relative_error = if denom > 0.0 {
                    (fd - g[e]).abs() / denom
                } else {
                    0.0
                };
                Ok(GradientProbe {
                    element: e,
                    analytic: g[e],
                    finite_difference: fd,
                    relative_error,
                })
            })
            .collect()
    }

    /// Solid volume `Σ v_e V(b̃_e)`, using the projected (not floored) volume
    /// fraction.
    pub fn volume(&self, b: &[f64]) -> f64 {
        let (chi, eta) = (self.material.chi, self.material.eta);
        self.physical_density(b)
            .iter()
            .zip(self.mesh.element_volumes())
            .map(|(&x, v)| v * volume_projection(x, chi, eta))
            .sum()
    }

    pub fn volume_fraction(&self, b: &[f64]) -> f64 {
        self.volume(b) / self.mesh.total_volume()
    }

    pub fn volume_gradient(&self, b: &[f64]) -> Vec<f64> {
        let (chi, eta) = (self.material.chi, self.material.eta);
        let den = (chi * eta).tanh() + (chi * (1.0 - eta)).tanh();
        let g: Vec<f64> = self
            .physical_density(b)
            .iter()
            .zip(self.mesh.element_volumes())
            .map(|(&x, v)| {
                let t = (chi * (x - eta)).tanh();
                v * chi * (1.0 - t * t) / den
            })
            .collect();
        match &self.filter {
            Some(f) => f.backpropagate(&g),
            None => g,
        }
    }

    /// Uniform design whose projected volume fraction equals `fraction`.
    pub fn uniform_design(&self, fraction: f64) -> Result<Vec<f64>> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(invalid("volume fraction must lie in (0, 1)"));
        }
        let (chi, eta) = (self.material.chi, self.material.eta);
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if volume_projection(mid, chi, eta) < fraction {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(vec![0.5 * (lo + hi); self.n_elements()])
    }
}
