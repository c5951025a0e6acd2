//! Adjoint sensitivities and reduced-order adjoint solves for transient
//! density-based topology optimization of 2-D elastic structures.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod assembly;
pub mod element;
pub mod error;
pub mod estimator;
pub mod load;
pub mod material;
pub mod mesh;
pub mod objective;
pub mod optimize;
pub mod problem;
pub mod rom;
pub mod sparse;
pub mod time;
pub mod vtk;

pub use adjoint::{assemble_gradient, solve_adjoint_full, AdjointTrajectory};
pub use assembly::{assemble, SystemMatrices};
pub use error::{Error, Result};
pub use estimator::{ErrorEstimator, ErrorModel, GainTable};
pub use load::{LoadCase, LoadKind, LumpedMass};
pub use material::{DensityField, DensityFilter, MaterialParams};
pub use mesh::{Direction, DofMap, Mesh};
pub use objective::Objective;
pub use optimize::{
    adaptive_model_select, optimize, sample_designs, update_density, ModelChoice, OnlineRom,
    OptConfig, OptResult,
};
pub use problem::{building, cantilever, support, Analysis, Benchmark, GradientProbe, Problem};
pub use rom::{ReducedBasis, ReducedOperators};
pub use sparse::{CsrMatrix, SkylineCholesky};
pub use time::{hht_solve, EffectiveOperators, HhtParams, TimeGrid, Trajectory};
