//! Dirichlet Laplacian of the walk on finite domains: principal eigenpair,
//! killed heat kernel, survival probabilities and shape diagnostics.

mod domain;
mod eigen;
mod geometry;
mod kernel;

pub use domain::IndexedDomain;
pub use eigen::{principal_eigen, principal_eigen_indexed, SpectralPair, DEFAULT_TOL};
pub use geometry::{
    faber_krahn_report, level_sets, unit_volume_ball_lambda, FaberKrahnReport, LevelSetReport,
};
pub use kernel::{
    evolve, evolve_in_place, killed_heat_kernel, log_heat_kernel_indexed, log_killed_heat_kernel,
    log_min_return_probability, log_survival_exact, log_survival_indexed, survival_exact,
};
