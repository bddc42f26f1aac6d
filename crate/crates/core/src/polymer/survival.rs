//! Monte Carlo estimators of the annealed survival probability
//! `P x P(tau_O > n) = E[p^{|S[0,n]|}]`.

use rand::Rng as _;
use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{invalid, Result};
use crate::lattice::Site;
use crate::polymer::weight::PolymerWeight;
use crate::rng::{child_rng, derive_seed, Rng};
use crate::stats::{Estimate, MeanVar};

pub(crate) const BLOCK: u64 = 1024;
const PILOT_THETAS: [f64; 7] = [0.0, -0.25, -0.5, -1.0, -1.5, -2.0, -3.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "camelCase")]
pub enum SurvivalMethod {
    /// Simple random walk, score `p^{range}`.
    Plain,
    /// Steps onto fresh sites reweighted by `exp(theta)`; `None` picks theta by a pilot run.
    Tilted { theta: Option<f64> },
}

/// One sample: `(p^{range} * likelihood ratio)`.
fn sample_once(w: &PolymerWeight, n: usize, theta: f64, rng: &mut Rng, seen: &mut FxHashSet<Site>) -> f64 {
    let d = w.d;
    let two_d = 2 * d;
    seen.clear();
    let mut pos = Site::origin(d);
    seen.insert(pos);
    let mut log_lr = 0.0;
    if theta == 0.0 {
        for _ in 0..n {
            pos = pos.step(rng.gen_range(0..two_d) as u8);
            seen.insert(pos);
        }
    } else {
        let et = theta.exp();
        let mut fresh = [false; 8];
        for _ in 0..n {
            let mut total = 0.0;
            for (k, f) in fresh.iter_mut().enumerate().take(two_d) {
                *f = !seen.contains(&pos.step(k as u8));
                total += if *f { et } else { 1.0 };
            }
            let mut u = rng.gen::<f64>() * total;
            let mut k = 0;
            loop {
                let wk = if fresh[k] { et } else { 1.0 };
                if u < wk || k == two_d - 1 {
                    break;
                }
                u -= wk;
                k += 1;
            }
            let q = if fresh[k] { et } else { 1.0 } / total;
            log_lr -= (two_d as f64 * q).ln();
            pos = pos.step(k as u8);
            seen.insert(pos);
        }
    }
    (seen.len() as f64 * w.log_p() + log_lr).exp()
}

/// Mean and variance over `samples` draws, aggregated block by block in index
/// order so the result does not depend on the thread count.
pub(crate) fn blocked_mean(
    samples: u64,
    seed: u64,
    f: impl Fn(&mut Rng, &mut FxHashSet<Site>) -> f64 + Sync,
) -> MeanVar {
    let blocks = samples.div_ceil(BLOCK);
    let parts: Vec<MeanVar> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = child_rng(seed, b);
            let mut seen = FxHashSet::default();
            let count = BLOCK.min(samples - b * BLOCK);
            let mut m = MeanVar::default();
            for _ in 0..count {
                m.push(f(&mut rng, &mut seen));
            }
            m
        })
        .collect();
    let mut total = MeanVar::default();
    for p in &parts {
        total.merge(p);
    }
    total
}

fn relative_variance(m: &MeanVar) -> f64 {
    if m.mean <= 0.0 {
        f64::INFINITY
    } else {
        m.variance() / (m.mean * m.mean)
    }
}

/// Tilt with the smallest pilot relative variance; ties go to the earlier
/// (less tilted) candidate.
fn pilot_theta(w: &PolymerWeight, n: usize, samples: u64, seed: u64) -> f64 {
    let pilot = (samples / 20).max(256);
    let mut best = (f64::INFINITY, 0.0);
    for (i, &theta) in PILOT_THETAS.iter().enumerate() {
        let m = blocked_mean(pilot, derive_seed(seed, (1u64 << 40) | i as u64), |rng, seen| {
            sample_once(w, n, theta, rng, seen)
        });
        let rv = relative_variance(&m);
        if rv < best.0 {
            best = (rv, theta);
        }
    }
    best.1
}

/// Estimate `E[p^{|S[0,n]|}]`. The drift of `w` is ignored.
pub fn annealed_survival_estimate(
    w: &PolymerWeight,
    n: usize,
    method: SurvivalMethod,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    if samples < 2 {
        return invalid("need at least two samples");
    }
    let (name, theta) = match method {
        SurvivalMethod::Plain => ("plain", 0.0),
        SurvivalMethod::Tilted { theta: Some(t) } => ("tilted", t),
        SurvivalMethod::Tilted { theta: None } => ("tilted", pilot_theta(w, n, samples, seed)),
    };
    let m = blocked_mean(samples, seed, |rng, seen| sample_once(w, n, theta, rng, seen));
    Ok(Estimate {
        value: m.mean,
        stderr: m.stderr(),
        samples,
        seed,
        params: json!({ "method": name, "theta": theta, "n": n, "d": w.d, "p": w.p }),
        degenerate: m.variance() == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_one_is_degenerate() {
        let w = PolymerWeight::unbiased(2, 1.0).unwrap();
        for m in [SurvivalMethod::Plain, SurvivalMethod::Tilted { theta: None }] {
            let e = annealed_survival_estimate(&w, 50, m, 4000, 1).unwrap();
            assert_eq!(e.value, 1.0);
            assert_eq!(e.stderr, 0.0);
            assert!(e.degenerate);
        }
    }

    #[test]
    fn tilted_is_unbiased_for_two_steps() {
        let p: f64 = 0.5;
        let w = PolymerWeight::unbiased(2, p).unwrap();
        let exact = (4.0 * p * p + 12.0 * p.powi(3)) / 16.0;
        for theta in [0.0, -1.0, 0.7] {
            let e = annealed_survival_estimate(&w, 2, SurvivalMethod::Tilted { theta: Some(theta) }, 200_000, 3)
                .unwrap();
            assert!((e.value - exact).abs() < 4.0 * e.stderr + 1e-12, "theta {theta}: {e:?}");
        }
    }
}
