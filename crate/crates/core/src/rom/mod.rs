//! Reduced-basis approximation of the adjoint problem.

pub mod greedy;
pub mod persist;
pub mod pod;
pub mod reduced;

pub use greedy::{
    evaluate_sample, greedy_offline, ErrorOracle, GreedyConfig, GreedyReport, SampleSet,
    TrainingPair,
};
pub use persist::{load_basis, save_basis, BasisMetadata};
pub use pod::{pod, snapshot_matrix, PodResult, ReducedBasis};
pub use reduced::{
    compute_residuals, project_operators, solve_adjoint_reduced, ReducedAdjoint, ReducedOperators,
    ResidualHistory,
};
