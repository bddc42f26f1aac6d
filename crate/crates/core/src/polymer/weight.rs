use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{ModelParams, Point, MAX_DIM};
use crate::walk::LatticePath;

/// Path weight `p^{|S[0,N]|} exp(<h, S_N - S_0>)`. Unlike [`ModelParams`],
/// `p = 1` (no obstacles) is allowed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolymerWeight {
    pub d: usize,
    pub p: f64,
    pub h: Point,
}

impl PolymerWeight {
    pub fn new(d: usize, p: f64, h: &[f64]) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&d) {
            return invalid(format!("dimension {d} out of range"));
        }
        if !(p > 0.0 && p <= 1.0) {
            return invalid(format!("p = {p} must lie in (0, 1]"));
        }
        if h.len() != d {
            return invalid("drift dimension mismatch");
        }
        Ok(PolymerWeight { d, p, h: Point::new(h) })
    }

    pub fn unbiased(d: usize, p: f64) -> Result<Self> {
        PolymerWeight::new(d, p, &vec![0.0; d])
    }

    pub fn from_params(m: &ModelParams) -> Self {
        PolymerWeight { d: m.d(), p: m.p(), h: *m.h() }
    }

    #[inline]
    pub fn log_p(&self) -> f64 {
        self.p.ln()
    }

    pub fn log_weight(&self, path: &LatticePath) -> f64 {
        let disp = path.endpoint().sub(&path.start());
        path.range_size() as f64 * self.log_p() + self.h.dot_site(&disp)
    }
}
