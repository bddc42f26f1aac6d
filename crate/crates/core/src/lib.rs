//! Simple random walk among Bernoulli obstacles.
//!
//! The annealed polymer measure weights a walk path by `p^{|range|}` and an
//! exponential tilt `exp(<h, S_N>)`. This crate provides the lattice
//! primitives, Dirichlet spectral tools, exact and Monte Carlo samplers for
//! the polymer measures, Lyapunov norm estimation and the coarse-grained
//! structure detectors used to study confinement of such paths.

pub mod error;
pub mod lattice;
pub mod lyapunov;
pub mod polymer;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod structure;
pub mod walk;

pub use error::{Error, Result};
pub use lattice::{
    compute_rho1_and_cdp, BoxWindow, LatticeRegion, ModelParams, ObstacleField, Point, Site,
};
pub use walk::{HittingRecord, LatticePath};
