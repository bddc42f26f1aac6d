//! Detectors for the structure of typical configurations: the coarse-grained
//! empty set, the vacant ball and its inner and outer companions, the density
//! scan around obstacles and path events around a candidate center.

pub mod coarse;
pub mod detect;
pub mod dichotomy;
pub mod events;

use serde::{Deserialize, Serialize};

pub use coarse::{
    empty_box_set, environment_cost_bound, volume_cost_check, CoarseGrainConfig, EmptySet, VolumeCostReport,
};
pub use detect::{detect_vacant_ball, squared_distance_transform, DetectConfig, VacantBallReport};
pub use dichotomy::{density_dichotomy_scan, dyadic_scales, DensityFlag, DensityScan};
pub use events::{event_g, target_time, visit_statistics, EventGReport, PrimeFlags, VisitSummary};

/// Unnamed constants of the ball radii and the outside time. All radii are
/// clamped at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct StructureConstants {
    /// Exponent in `delta_{N,x} = max(rho_N^{-a}, |x| / rho_N^d)`.
    pub delta_exponent: f64,
    pub c_vacant: f64,
    pub c_outside: f64,
    pub c_outer: f64,
    pub epsilon: f64,
}

impl Default for StructureConstants {
    fn default() -> Self {
        StructureConstants { delta_exponent: 0.2, c_vacant: 1.0, c_outside: 1.0, c_outer: 1.0, epsilon: 0.1 }
    }
}

impl StructureConstants {
    pub fn radius_inner(&self, delta: f64, rho_n: f64) -> f64 {
        ((1.0 - delta.powf(self.c_vacant)) * rho_n).max(0.0)
    }

    pub fn radius_minus(&self, delta: f64, rho_n: f64) -> f64 {
        ((1.0 - 2.0 * delta.powf(self.c_vacant)) * rho_n).max(0.0)
    }

    pub fn radius_plus(&self, delta: f64, rho_n: f64, n: u64) -> f64 {
        (1.0 + delta.powf(self.c_outer / 2.0) * (n as f64).ln().powi(3)) * rho_n
    }
}
