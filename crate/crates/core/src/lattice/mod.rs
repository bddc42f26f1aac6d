//! Lattice primitives: sites, regions, obstacle fields and model constants.

mod constants;
mod field;
mod region;
mod site;

pub use constants::{
    compute_rho1_and_cdp, continuum_lambda, first_bessel_zero, unit_ball_volume, ModelParams,
    Rho1Cdp,
};
pub use field::{ObstacleField, PlantedBall};
pub use region::{BoxIter, BoxWindow, Grid, LatticeRegion};
pub use site::{dir_letter, dir_of, letter_dir, opposite, Point, Site, MAX_DIM};
