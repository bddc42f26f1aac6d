//! Point-to-point Lyapunov exponents of the annealed crossing cost and the
//! norm they define.

pub mod crossing;
pub mod fit;
pub mod norm;

pub use crossing::{crossing_probability, sandwich, CrossingEstimate, CrossingMethod};
pub use fit::{estimate_beta, BetaFit};
pub use norm::{direction_grid, fit_norm_model, Criticality, DualNorm, NormFitConfig, NormModel};
