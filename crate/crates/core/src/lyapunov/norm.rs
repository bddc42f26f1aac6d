use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{invalid, Result};
use crate::lattice::{BoxWindow, LatticeRegion, Point, Site};
use crate::lyapunov::crossing::CrossingMethod;
use crate::lyapunov::fit::{estimate_beta, BetaFit};
use crate::polymer::PolymerWeight;
use crate::rng::derive_seed;
use crate::stats::solve_dense;

/// Fitted Lyapunov norm: `beta` on a grid of unit directions, extended to R^d
/// as the gauge of the convex hull of `u_i / beta(u_i)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NormModel {
    pub directions: Vec<Point>,
    pub beta_values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Primitive integer vectors behind `directions`, when known.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub integer_directions: Vec<Site>,
    #[serde(default)]
    pub fit_meta: serde_json::Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DualNorm {
    pub value: f64,
    pub argmax: Point,
    /// Rough bound on the error from the finite direction grid.
    pub grid_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NormFitConfig {
    pub n_list: Vec<usize>,
    pub method: CrossingMethod,
    pub samples: u64,
    /// Fit one direction per orbit of the lattice symmetry group and copy it.
    pub symmetrize: bool,
    /// Directions are primitive integer vectors of Euclidean norm at most this.
    pub radius: f64,
}

impl Default for NormFitConfig {
    fn default() -> Self {
        NormFitConfig {
            n_list: vec![2, 4, 6, 8, 12],
            method: CrossingMethod::TiltedIs { theta: None },
            samples: 20_000,
            symmetrize: true,
            radius: 3.0,
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Primitive integer vectors with Euclidean norm at most `radius`, sorted.
pub fn direction_grid(d: usize, radius: f64) -> Vec<Site> {
    let r = radius.floor() as i32;
    BoxWindow::centered(d, r)
        .sites()
        .filter(|s| s.norm_sq() > 0 && s.norm_sq() as f64 <= radius * radius + 1e-9)
        .filter(|s| s.coords().iter().fold(0i64, |g, &c| gcd(g, c as i64)) == 1)
        .collect()
}

/// Orbit representative under coordinate permutations and sign changes.
fn canonical(v: &Site) -> Site {
    let mut c: Vec<i32> = v.coords().iter().map(|x| x.abs()).collect();
    c.sort_unstable_by(|a, b| b.cmp(a));
    Site::new(&c)
}

impl NormModel {
    pub fn dim(&self) -> usize {
        self.directions[0].dim()
    }

    /// Model with `beta(u) = f(u)` on the integer direction grid.
    pub fn from_fn(d: usize, radius: f64, f: impl Fn(&Point) -> f64) -> Self {
        let ints = direction_grid(d, radius);
        let directions: Vec<Point> = ints.iter().map(|v| v.to_point().normalized().unwrap()).collect();
        let beta_values = directions.iter().map(&f).collect();
        NormModel {
            stderr: vec![0.0; directions.len()],
            directions,
            beta_values,
            integer_directions: ints,
            fit_meta: json!({ "source": "function" }),
        }
    }

    /// Evaluate the norm: minimum of `sum lambda_i beta_i` over nonnegative
    /// representations `x = sum lambda_i u_i` by at most `d` grid directions.
    pub fn beta(&self, x: &Point) -> f64 {
        let norm = x.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let d = self.dim();
        let xu = x.scale(1.0 / norm);
        if let Some(i) = self.directions.iter().position(|u| u.sub(&xu).norm() < 1e-12) {
            return norm * self.beta_values[i];
        }
        let mut order: Vec<usize> = (0..self.directions.len()).collect();
        order.sort_by(|&a, &b| xu.dot(&self.directions[b]).total_cmp(&xu.dot(&self.directions[a])));
        let k = if d <= 2 { order.len() } else { order.len().min(20) };
        let cand = &order[..k];
        let mut best = f64::INFINITY;
        let mut idx = vec![0usize; d];
        subsets(k, d, 0, 0, &mut idx, &mut |sel| {
            let cols: Vec<&Point> = sel.iter().map(|&i| &self.directions[cand[i]]).collect();
            let a: Vec<Vec<f64>> = (0..d).map(|r| cols.iter().map(|c| c.get(r)).collect()).collect();
            if let Some(lam) = solve_dense(a, xu.coords().to_vec()) {
                if lam.iter().all(|&l| l >= -1e-12) {
                    let check: f64 = (0..d)
                        .map(|r| (cols.iter().zip(&lam).map(|(c, l)| c.get(r) * l).sum::<f64>() - xu.get(r)).abs())
                        .fold(0.0, f64::max);
                    if check < 1e-9 {
                        let v: f64 = sel.iter().zip(&lam).map(|(&i, l)| l * self.beta_values[cand[i]]).sum();
                        best = best.min(v);
                    }
                }
            }
        });
        norm * best
    }

    pub fn beta_site(&self, x: &Site) -> f64 {
        self.beta(&x.to_point())
    }

    /// `beta*(h) = max_u <h, u> / beta(u)` over the grid.
    pub fn dual(&self, h: &Point) -> DualNorm {
        if h.is_zero() {
            return DualNorm { value: 0.0, argmax: Point::zero(h.dim()), grid_error: 0.0 };
        }
        let (i, value) = self
            .directions
            .iter()
            .zip(&self.beta_values)
            .map(|(u, b)| h.dot(u) / b)
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let u = self.directions[i];
        let gap = self
            .directions
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, v)| u.dot(v).clamp(-1.0, 1.0).acos())
            .fold(f64::INFINITY, f64::min);
        let grid_error = value.abs() * (1.0 / (gap / 2.0).cos() - 1.0);
        DualNorm { value, argmax: u, grid_error }
    }

    pub fn classify(&self, h: &Point) -> Criticality {
        let v = self.dual(h).value;
        if v < 1.0 {
            Criticality::Subcritical
        } else if v > 1.0 {
            Criticality::Supercritical
        } else {
            Criticality::Critical
        }
    }

    /// `min beta(x - y)` over boundary sites `y` of `region`; 0 inside.
    pub fn dist_beta(&self, x: &Site, region: &LatticeRegion) -> f64 {
        if region.contains(x) {
            return 0.0;
        }
        region
            .sites()
            .into_iter()
            .filter(|y| y.neighbors().any(|z| !region.contains(&z)))
            .map(|y| self.beta_site(&x.sub(&y)))
            .fold(f64::INFINITY, f64::min)
    }

    /// `beta`-distance from `x` to the Euclidean ball `B(center, radius)`.
    pub fn dist_beta_ball(&self, x: &Point, center: &Point, radius: f64) -> f64 {
        let rel = x.sub(center);
        if rel.norm() <= radius {
            return 0.0;
        }
        boundary_directions(x.dim())
            .iter()
            .map(|u| self.beta(&rel.sub(&u.scale(radius))))
            .fold(f64::INFINITY, f64::min)
    }

    /// Grid pairs `(a, b)` with `a + b` on the grid and
    /// `beta(a + b) > beta(a) + beta(b) + k * combined stderr`.
    pub fn triangle_violations(&self, k: f64) -> Vec<(Site, Site)> {
        let ints = &self.integer_directions;
        let value = |i: usize| (ints[i].norm() * self.beta_values[i], ints[i].norm() * self.stderr[i]);
        let mut out = Vec::new();
        for i in 0..ints.len() {
            for j in 0..ints.len() {
                let s = ints[i].add(&ints[j]);
                if s.norm_sq() == 0 {
                    continue;
                }
                let g = s.coords().iter().fold(0i64, |g, &c| gcd(g, c as i64));
                let prim = Site::new(&s.coords().iter().map(|&c| c / g as i32).collect::<Vec<_>>());
                if let Some(m) = ints.iter().position(|v| *v == prim) {
                    let (bs, ss) = value(m);
                    let (bs, ss) = (bs * g as f64, ss * g as f64);
                    let (bi, si) = value(i);
                    let (bj, sj) = value(j);
                    let se = (ss * ss + si * si + sj * sj).sqrt();
                    if bs > bi + bj + k * se + 1e-9 {
                        out.push((ints[i], ints[j]));
                    }
                }
            }
        }
        out
    }

    /// Grid directions whose negative differs by more than `k` combined stderr.
    pub fn symmetry_violations(&self, k: f64) -> Vec<Site> {
        let ints = &self.integer_directions;
        let mut out = Vec::new();
        for (i, v) in ints.iter().enumerate() {
            if let Some(j) = ints.iter().position(|w| *w == v.neg()) {
                let se = (self.stderr[i].powi(2) + self.stderr[j].powi(2)).sqrt();
                if (self.beta_values[i] - self.beta_values[j]).abs() > k * se + 1e-12 {
                    out.push(*v);
                }
            }
        }
        out
    }
}

fn subsets(n: usize, k: usize, start: usize, depth: usize, idx: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if depth == k {
        f(idx);
        return;
    }
    for i in start..n {
        idx[depth] = i;
        subsets(n, k, i + 1, depth + 1, idx, f);
    }
}

fn boundary_directions(d: usize) -> Vec<Point> {
    match d {
        1 => vec![Point::new(&[1.0]), Point::new(&[-1.0])],
        2 => (0..2048)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 2048.0;
                Point::new(&[t.cos(), t.sin()])
            })
            .collect(),
        _ => {
            // Fibonacci points on the sphere in the first three coordinates.
            let m = 4000;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    let mut c = vec![0.0; d];
                    c[0] = r * t.cos();
                    c[1] = r * t.sin();
                    c[2] = z;
                    Point::new(&c)
                })
                .collect()
        }
    }
}

/// Fit the norm on the primitive direction grid.
pub fn fit_norm_model(w: &PolymerWeight, cfg: &NormFitConfig, seed: u64) -> Result<NormModel> {
    if cfg.radius < 1.0 {
        return invalid("direction radius must be at least 1");
    }
    let ints = direction_grid(w.d, cfg.radius);
    let mut fits: Vec<(Site, BetaFit)> = Vec::new();
    let mut beta_values = Vec::with_capacity(ints.len());
    let mut stderr = Vec::with_capacity(ints.len());
    for (i, v) in ints.iter().enumerate() {
        let key = if cfg.symmetrize { canonical(v) } else { *v };
        let fit = match fits.iter().find(|(k, _)| *k == key) {
            Some((_, f)) => f.clone(),
            None => {
                let stream = if cfg.symmetrize { ints.iter().position(|u| canonical(u) == key).unwrap() } else { i };
                let f = estimate_beta(w, &key, &cfg.n_list, cfg.method, cfg.samples, derive_seed(seed, stream as u64))?;
                fits.push((key, f.clone()));
                f
            }
        };
        let len = v.norm();
        beta_values.push(fit.beta / len);
        stderr.push(fit.stderr / len);
    }
    let meta = json!({
        "nList": cfg.n_list,
        "method": cfg.method,
        "samples": cfg.samples,
        "symmetrize": cfg.symmetrize,
        "radius": cfg.radius,
        "seed": seed,
        "d": w.d,
        "p": w.p,
        "fits": fits.iter().map(|(k, f)| json!({
            "direction": k,
            "beta": f.beta,
            "stderr": f.stderr,
            "logCoefficient": f.log_coefficient,
            "intercept": f.intercept,
            "residualRms": f.residual_rms,
            "flagged": f.flagged,
            "subadditivityViolations": f.subadditivity_violations,
        })).collect::<Vec<_>>(),
    });
    Ok(NormModel {
        directions: ints.iter().map(|v| v.to_point().normalized().unwrap()).collect(),
        beta_values,
        stderr,
        integer_directions: ints,
        fit_meta: meta,
    })
}
