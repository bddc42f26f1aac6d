//! Estimators of the annealed crossing probability `E[p^{|S[0, tau_z]|}]`.

use rand::Rng as _;
use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{invalid, Error, Result};
use crate::lattice::{Point, Site};
use crate::polymer::{for_each_path, PolymerWeight, SurvivalMethod, Variant};
use crate::rng::{child_rng, derive_seed, Rng};
use crate::stats::{Estimate, MeanVar};

const PILOT_THETAS: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 3.0];
/// Paths whose vacancy weight falls this far (in log) below the trivial lower
/// bound are abandoned by the importance sampler.
const LOG_CUTOFF: f64 = 25.0;
const BLOCK: u64 = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "camelCase")]
pub enum CrossingMethod {
    /// Exhaustive sum over paths hitting the target within `cap` steps.
    ExactEnum { cap: usize },
    /// Steps tilted toward the target by `exp(theta <e_k, unit(z - S)>)`; `None` = pilot-tuned.
    TiltedIs { theta: Option<f64> },
    /// Multilevel splitting on l1 distance to the target, factor 2, annealed killing.
    Splitting,
}

impl CrossingMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            CrossingMethod::ExactEnum { .. } => "exactEnum",
            CrossingMethod::TiltedIs { .. } => "tiltedIS",
            CrossingMethod::Splitting => "splitting",
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, CrossingMethod::ExactEnum { .. })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CrossingEstimate {
    pub direction: Site,
    pub n: usize,
    /// `-(1/n) log E[p^{range up to tau_{n x}}]`.
    pub value: f64,
    pub stderr: f64,
    pub method: String,
    /// The underlying expectation.
    pub expectation: Estimate,
    /// `(2d)^{-|z|_1} p^{|z|_1 + 1}`.
    pub lower: f64,
    /// `p^{|z|_1 + 1}`.
    pub upper: f64,
    /// Bound on mass lost to truncation, when the method truncates.
    pub truncation_bound: Option<f64>,
}

impl CrossingEstimate {
    /// Expectation inside the sandwich, exactly for enumeration and within
    /// `k` standard errors otherwise.
    pub fn within_sandwich(&self, k: f64) -> bool {
        let v = self.expectation.value;
        let slack = k * self.expectation.stderr;
        v + slack >= self.lower * (1.0 - 1e-12) && v - slack <= self.upper * (1.0 + 1e-12)
    }
}

pub fn sandwich(d: usize, p: f64, z: &Site) -> (f64, f64) {
    let l = z.l1() as f64;
    let upper = p.powf(l + 1.0);
    let lower = (2.0 * d as f64).powf(-l) * upper;
    (lower, upper)
}

/// Estimate `E[p^{|S[0, tau_z]|}]` for `z = n * direction`.
pub fn crossing_probability(
    w: &PolymerWeight,
    direction: &Site,
    n: usize,
    method: CrossingMethod,
    samples: u64,
    seed: u64,
) -> Result<CrossingEstimate> {
    let z = scale(direction, n);
    if z.l1() == 0 {
        return invalid("target must differ from the origin");
    }
    if z.dim() != w.d {
        return Err(Error::DimensionMismatch { expected: w.d, got: z.dim() });
    }
    let (lower, upper) = sandwich(w.d, w.p, &z);
    let (expectation, truncation_bound) = match method {
        CrossingMethod::ExactEnum { cap } => exact_enum(w, &z, cap, samples, seed)?,
        CrossingMethod::TiltedIs { theta } => (tilted_is(w, &z, theta, lower, samples, seed)?, None),
        CrossingMethod::Splitting => (splitting(w, &z, samples, seed)?, None),
    };
    if expectation.value <= 0.0 {
        return Err(Error::Estimator(format!("{} produced a zero estimate for {z}", method.tag())));
    }
    let nf = n as f64;
    Ok(CrossingEstimate {
        direction: *direction,
        n,
        value: -expectation.value.ln() / nf,
        stderr: expectation.stderr / expectation.value / nf,
        method: method.tag().to_string(),
        expectation,
        lower,
        upper,
        truncation_bound,
    })
}

pub(crate) fn scale(v: &Site, n: usize) -> Site {
    let mut z = *v;
    for i in 0..v.dim() {
        z.set(i, v.get(i) * n as i32);
    }
    z
}

fn exact_enum(w: &PolymerWeight, z: &Site, cap: usize, samples: u64, seed: u64) -> Result<(Estimate, Option<f64>)> {
    if cap < z.l1() as usize {
        return invalid("cap below the l1 distance to the target");
    }
    let w0 = PolymerWeight::unbiased(w.d, w.p)?;
    let mut total = 0.0;
    let leaves = for_each_path(&w0, 1, Variant::Hitting { x: *z, cap }, |leaf| total += leaf.weight)?;
    // Paths still alive at the cap carry at most E[p^{|S[0,cap]|}].
    let bound = if samples >= 2 {
        let e = crate::polymer::annealed_survival_estimate(&w0, cap, SurvivalMethod::Plain, samples, seed)?;
        Some(e.value + 3.0 * e.stderr)
    } else {
        None
    };
    let est = Estimate {
        value: total,
        stderr: 0.0,
        samples: leaves,
        seed,
        params: json!({ "method": "exactEnum", "cap": cap, "target": z }),
        degenerate: false,
    };
    Ok((est, bound))
}

fn unit_toward(from: &Site, to: &Site) -> Point {
    to.sub(from).to_point().normalized().unwrap_or(Point::zero(from.dim()))
}

fn tilted_sample(w: &PolymerWeight, z: &Site, theta: f64, log_floor: f64, rng: &mut Rng, seen: &mut FxHashSet<Site>) -> f64 {
    let d = w.d;
    let two_d = 2 * d;
    let log_p = w.log_p();
    seen.clear();
    let mut pos = Site::origin(d);
    seen.insert(pos);
    let mut log_w = log_p;
    let mut log_lr = 0.0;
    let cap = 200 * z.l1() as usize + 10_000;
    let mut q = [0.0f64; 8];
    for _ in 0..cap {
        if pos == *z {
            return (log_w + log_lr).exp();
        }
        let u = unit_toward(&pos, z);
        let mut total = 0.0;
        for (k, qk) in q.iter_mut().enumerate().take(two_d) {
            let axis = k / 2;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            *qk = (theta * sign * u.get(axis)).exp();
            total += *qk;
        }
        let mut r = rng.gen::<f64>() * total;
        let mut k = 0;
        while k + 1 < two_d && r >= q[k] {
            r -= q[k];
            k += 1;
        }
        log_lr += (total / (two_d as f64 * q[k])).ln();
        pos = pos.step(k as u8);
        if seen.insert(pos) {
            log_w += log_p;
            if log_w < log_floor {
                return 0.0;
            }
        }
    }
    0.0
}

fn blocked(samples: u64, seed: u64, f: impl Fn(&mut Rng, &mut FxHashSet<Site>) -> f64 + Sync) -> MeanVar {
    let blocks = samples.div_ceil(BLOCK);
    let parts: Vec<MeanVar> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = child_rng(seed, b);
            let mut seen = FxHashSet::default();
            let mut m = MeanVar::default();
            for _ in 0..BLOCK.min(samples - b * BLOCK) {
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

fn tilted_is(w: &PolymerWeight, z: &Site, theta: Option<f64>, lower: f64, samples: u64, seed: u64) -> Result<Estimate> {
    if samples < 2 {
        return invalid("need at least two samples");
    }
    let log_floor = lower.ln() - LOG_CUTOFF;
    let theta = match theta {
        Some(t) => t,
        None => {
            let pilot = (samples / 10).max(200);
            let mut best = (f64::INFINITY, PILOT_THETAS[0]);
            for (i, &t) in PILOT_THETAS.iter().enumerate() {
                let m = blocked(pilot, derive_seed(seed, (1u64 << 40) | i as u64), |rng, seen| {
                    tilted_sample(w, z, t, log_floor, rng, seen)
                });
                let rv = if m.mean > 0.0 { m.variance() / (m.mean * m.mean) } else { f64::INFINITY };
                if rv < best.0 {
                    best = (rv, t);
                }
            }
            best.1
        }
    };
    let m = blocked(samples, seed, |rng, seen| tilted_sample(w, z, theta, log_floor, rng, seen));
    Ok(Estimate {
        value: m.mean,
        stderr: m.stderr(),
        samples,
        seed,
        params: json!({ "method": "tiltedIS", "theta": theta, "target": z }),
        degenerate: m.variance() == 0.0,
    })
}

struct Particle {
    pos: Site,
    seen: FxHashSet<Site>,
    weight: f64,
    best: i64,
    age: usize,
}

/// One root of the splitting tree: total weight of descendants reaching `z`.
fn splitting_root(w: &PolymerWeight, z: &Site, rng: &mut Rng) -> f64 {
    let two_d = 2 * w.d as u32;
    let max_age = 50 * (z.l1() as usize).pow(2) + 1000;
    let origin = Site::origin(w.d);
    // The origin must be vacant too.
    if rng.gen::<f64>() >= w.p {
        return 0.0;
    }
    let mut seen = FxHashSet::default();
    seen.insert(origin);
    let mut stack = vec![Particle { pos: origin, seen, weight: 1.0, best: z.l1(), age: 0 }];
    let mut score = 0.0;
    while let Some(mut pt) = stack.pop() {
        loop {
            if pt.age >= max_age {
                break;
            }
            pt.pos = pt.pos.step(rng.gen_range(0..two_d) as u8);
            pt.age += 1;
            if pt.seen.insert(pt.pos) && rng.gen::<f64>() >= w.p {
                break;
            }
            if pt.pos == *z {
                score += pt.weight;
                break;
            }
            let dist = pt.pos.sub(z).l1();
            if dist < pt.best {
                pt.best = dist;
                pt.weight *= 0.5;
                stack.push(Particle {
                    pos: pt.pos,
                    seen: pt.seen.clone(),
                    weight: pt.weight,
                    best: pt.best,
                    age: pt.age,
                });
            }
        }
    }
    score
}

fn splitting(w: &PolymerWeight, z: &Site, samples: u64, seed: u64) -> Result<Estimate> {
    if samples < 2 {
        return invalid("need at least two samples");
    }
    let m = blocked(samples, seed, |rng, _| splitting_root(w, z, rng));
    if m.mean == 0.0 {
        return Err(Error::Estimator(format!("splitting: all {samples} replicas went extinct before {z}")));
    }
    Ok(Estimate {
        value: m.mean,
        stderr: m.stderr(),
        samples,
        seed,
        params: json!({ "method": "splitting", "factor": 2, "target": z }),
        degenerate: m.variance() == 0.0,
    })
}
