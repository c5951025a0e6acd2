//! Shared fixtures for the benchmarks.

use adjrom::rom::{pod, project_operators, snapshot_matrix, solve_adjoint_reduced, ReducedAdjoint};
use adjrom::{cantilever, AdjointTrajectory, Analysis, Problem, ReducedBasis, Result};

/// A cantilever at the uniform half-density design, analyzed once, with a
/// POD basis taken from its own full adjoint.
pub struct AdjointFixture {
    pub problem: Problem,
    pub analysis: Analysis,
    pub basis: ReducedBasis,
}

impl AdjointFixture {
    pub fn new(nx: usize, ny: usize, n_basis: usize) -> Result<Self> {
        let problem = cantilever(nx, ny)?;
        let analysis = problem.analyze(&problem.uniform_design(0.5)?)?;
        let adj = problem.full_adjoint(&analysis)?;
        let basis = pod(&snapshot_matrix(&adj.vartheta)?, n_basis)?.basis;
        Ok(Self {
            problem,
            analysis,
            basis,
        })
    }

    pub fn full(&self) -> Result<AdjointTrajectory> {
        self.problem.full_adjoint(&self.analysis)
    }

    /// Projection plus the reduced recursion, as done once per optimizer iteration.
    pub fn reduced(&self) -> Result<ReducedAdjoint> {
        let red = project_operators(&self.analysis.sys, &self.analysis.eff, &self.basis)?;
        solve_adjoint_reduced(
            &red,
            &self.analysis.partials,
            &self.problem.grid,
            &self.problem.hht,
        )
    }
}
