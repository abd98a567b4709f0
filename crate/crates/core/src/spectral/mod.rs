//! Eigenstructure of normalized adjacency matrices and the smoothing
//! quantities derived from it.

mod eigen;
mod resistance;
mod smoothing;
mod trajectory;

pub use eigen::{analyze, subspace_distance, SpectralReport, DEFAULT_CLUSTER_TOL};
pub use resistance::{
    effective_resistance, resistance_matrix, verify_resistance_bound, ResistanceBoundReport,
};
pub use smoothing::{
    empirical_smoothing_layer, relaxed_smoothing_layer, smoothing_probe, spectral_norm,
    sup_singular_value, LayerBound, SmoothingProbe, DEFAULT_EPSILON,
};
pub use trajectory::{theorem1_trajectory, TrajectoryReport, TrajectoryStep};
