use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::Site;
use crate::lyapunov::crossing::{crossing_probability, CrossingEstimate, CrossingMethod};
use crate::polymer::PolymerWeight;
use crate::rng::derive_seed;
use crate::stats::weighted_least_squares;

/// Residual RMS (in standard errors) above which a fit is flagged.
const RESIDUAL_FLAG: f64 = 3.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BetaFit {
    /// Integer direction `v`; `beta` estimates `beta(v)`.
    pub direction: Site,
    pub beta: f64,
    pub stderr: f64,
    pub log_coefficient: f64,
    pub intercept: f64,
    pub cells: Vec<CrossingEstimate>,
    /// RMS of standardized fit residuals.
    pub residual_rms: f64,
    pub flagged: bool,
    /// Pairs `(m, n)` from the grid with `a_{m+n} > a_m + a_n` beyond 3 combined stderr.
    pub subadditivity_violations: Vec<(usize, usize)>,
}

/// Fit `a_n = beta n + gamma log n + C` to `a_n = -log E[p^{range up to tau_{n v}}]`.
/// For exact enumeration, `cap` counts the steps allowed beyond `|n v|_1`.
pub fn estimate_beta(
    w: &PolymerWeight,
    direction: &Site,
    n_list: &[usize],
    method: CrossingMethod,
    samples: u64,
    seed: u64,
) -> Result<BetaFit> {
    if n_list.len() < 3 {
        return invalid("need at least three scales");
    }
    if n_list.windows(2).any(|p| p[0] >= p[1]) || n_list[0] == 0 {
        return invalid("scales must be positive and increasing");
    }
    let mut cells = Vec::with_capacity(n_list.len());
    for (i, &n) in n_list.iter().enumerate() {
        let m = match method {
            CrossingMethod::ExactEnum { cap } => {
                CrossingMethod::ExactEnum { cap: cap + n * direction.l1() as usize }
            }
            other => other,
        };
        cells.push(crossing_probability(w, direction, n, m, samples, derive_seed(seed, i as u64))?);
    }
    let a: Vec<f64> = cells.iter().map(|c| c.value * c.n as f64).collect();
    let sd: Vec<f64> = cells.iter().map(|c| c.stderr * c.n as f64).collect();
    let floor = 1e-6;
    let wts: Vec<f64> = sd.iter().map(|s| 1.0 / (s * s + floor * floor)).collect();
    let x: Vec<Vec<f64>> = n_list.iter().map(|&n| vec![n as f64, (n as f64).ln(), 1.0]).collect();
    let (coef, cov) = weighted_least_squares(&x, &a, &wts)
        .ok_or_else(|| Error::Estimator("singular beta fit".into()))?;
    let resid: f64 = x
        .iter()
        .zip(&a)
        .zip(&wts)
        .map(|((row, y), wt)| {
            let fit: f64 = row.iter().zip(&coef).map(|(r, c)| r * c).sum();
            (y - fit).powi(2) * wt
        })
        .sum::<f64>();
    let dof = (n_list.len() as f64 - 3.0).max(1.0);
    let residual_rms = (resid / dof).sqrt();
    // Inflate the slope error when the model underfits.
    let stderr = cov[0][0].sqrt() * residual_rms.max(1.0);

    let mut violations = Vec::new();
    for (i, &m) in n_list.iter().enumerate() {
        for (j, &n) in n_list.iter().enumerate().skip(i) {
            if let Some(k) = n_list.iter().position(|&t| t == m + n) {
                let se = (sd[i].powi(2) + sd[j].powi(2) + sd[k].powi(2)).sqrt();
                if a[k] > a[i] + a[j] + 3.0 * se + 1e-12 {
                    violations.push((m, n));
                }
            }
        }
    }
    Ok(BetaFit {
        direction: *direction,
        beta: coef[0],
        stderr,
        log_coefficient: coef[1],
        intercept: coef[2],
        cells,
        residual_rms,
        flagged: residual_rms > RESIDUAL_FLAG,
        subadditivity_violations: violations,
    })
}
