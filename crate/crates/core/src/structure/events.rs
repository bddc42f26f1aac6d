//! Path events around a candidate center `z`: vacancy, confinement between
//! the first and last visits to `B^-(z)`, duration, and the stricter variant
//! with early entry, late exit and frequent returns.

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::lattice::{LatticeRegion, ModelParams, ObstacleField, Point, Site};
use crate::lyapunov::NormModel;
use crate::structure::detect::VacantBallReport;
use crate::structure::StructureConstants;
use crate::walk::LatticePath;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PrimeFlags {
    /// `tau_{B^-} <= eps N` and `tau_x^N - last_{B^-} <= eps N`.
    pub short_ok: bool,
    /// Path inside `B^+(z)` between the first and last visits.
    pub outer_ok: bool,
    /// Every window of `rho_N^2` steps in that interval meets `B^-(z)`.
    /// `max_gap` is the longest run of steps spent outside it.
    pub return_ok: bool,
    pub max_gap: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EventGReport {
    pub z: Site,
    pub delta: f64,
    pub radius_inner: f64,
    pub radius_minus: f64,
    pub radius_plus: f64,
    pub tau_minus: Option<usize>,
    pub last_minus: Option<usize>,
    pub tau_target: Option<usize>,
    pub t_out: f64,
    pub vacant_ok: bool,
    pub confined_ok: bool,
    pub time_ok: bool,
    pub holds: bool,
    pub prime: PrimeFlags,
    pub holds_prime: bool,
    pub rz: f64,
    pub rxz: f64,
    pub reasons: Vec<String>,
}

/// First time at or after `n` the path sits at `x`.
pub fn target_time(path: &LatticePath, x: &Site, n: usize) -> Option<usize> {
    path.positions().iter().enumerate().skip(n).find(|(_, s)| *s == x).map(|(k, _)| k)
}

fn first_last(path: &LatticePath, region: &LatticeRegion, until: usize) -> Option<(usize, usize)> {
    let pos = &path.positions()[..=until.min(path.len())];
    let first = pos.iter().position(|s| region.contains(s))?;
    let last = pos.iter().rposition(|s| region.contains(s))?;
    Some((first, last))
}

/// Longest run of steps outside `region` between consecutive visits within
/// `[from, to]`.
fn max_gap(path: &LatticePath, region: &LatticeRegion, from: usize, to: usize) -> usize {
    let mut run = 0;
    let mut gap = 0;
    for k in from..=to {
        if region.contains(&path.position(k)) {
            gap = gap.max(run);
            run = 0;
        } else {
            run += 1;
        }
    }
    gap
}

pub fn event_g(
    field: &ObstacleField,
    path: &LatticePath,
    params: &ModelParams,
    x: &Site,
    z: &Site,
    norm: &NormModel,
    c: &StructureConstants,
) -> EventGReport {
    let n = params.n() as usize;
    let rho = params.rho_n();
    let delta = params.delta_nx_with_exponent(&x.to_point(), c.delta_exponent);
    let radius_inner = c.radius_inner(delta, rho);
    let radius_minus = c.radius_minus(delta, rho);
    let radius_plus = c.radius_plus(delta, rho, params.n());
    let zp = z.to_point();
    let b_minus = LatticeRegion::ball(zp, radius_minus);
    let b_plus = LatticeRegion::ball(zp, radius_plus);
    let mut reasons = Vec::new();

    let vacant_ok = field.occupied_in(&LatticeRegion::ball(zp, radius_inner)).is_empty();
    if !vacant_ok {
        reasons.push("obstacle-in-ball".to_string());
    }

    let t_out = delta.powf(c.c_outside) * (z.l1() + x.sub(z).l1()) as f64 * rho * rho;
    let tau_target = target_time(path, x, n);
    if tau_target.is_none() {
        reasons.push("no-target".to_string());
    }
    let horizon = tau_target.unwrap_or(path.len());
    let visits = first_last(path, &b_minus, horizon);
    if visits.is_none() {
        reasons.push("no-entry".to_string());
    }

    let (mut confined_ok, mut time_ok) = (false, false);
    let mut prime = PrimeFlags { short_ok: false, outer_ok: false, return_ok: false, max_gap: None };
    if let (Some((tau, last)), Some(target)) = (visits, tau_target) {
        let seg = &path.positions()[tau..=last];
        let seen: FxHashSet<Site> = seg.iter().copied().collect();
        let covered = b_minus.sites().iter().all(|s| seen.contains(s));
        let inside = seg.iter().all(|s| b_plus.contains(s));
        let clean = seg.iter().all(|s| !field.is_occupied(s));
        if !covered {
            reasons.push("not-covered".to_string());
        }
        if !inside {
            reasons.push("left-outer-ball".to_string());
        }
        if !clean {
            reasons.push("hit-obstacle".to_string());
        }
        confined_ok = covered && inside && clean;
        time_ok = (last - tau) as f64 >= n as f64 - t_out;
        if !time_ok {
            reasons.push("too-short".to_string());
        }

        let eps_n = c.epsilon * n as f64;
        prime.short_ok = tau.max(target - last) as f64 <= eps_n;
        if !prime.short_ok {
            reasons.push("late-entry-or-early-exit".to_string());
        }
        prime.outer_ok = inside;
        let gap = max_gap(path, &b_minus, tau, last);
        prime.max_gap = Some(gap);
        prime.return_ok = (gap as f64) < rho * rho;
        if !prime.return_ok {
            reasons.push("no-return".to_string());
        }
    }
    let holds = vacant_ok && confined_ok && time_ok;
    let holds_prime = vacant_ok && prime.short_ok && prime.outer_ok && prime.return_ok;

    let origin = Point::zero(x.dim());
    let rz = norm.dist_beta_ball(&origin, &zp, radius_plus);
    let xp = x.to_point();
    let to_ball = if xp.sub(&zp).norm() <= radius_plus { 0.0 } else { norm.dist_beta_ball(&xp, &zp, radius_plus) };
    let rxz = to_ball.min((norm.beta(&xp) - rz).max(0.0)).max(0.0);

    EventGReport {
        z: *z,
        delta,
        radius_inner,
        radius_minus,
        radius_plus,
        tau_minus: visits.map(|v| v.0),
        last_minus: visits.map(|v| v.1),
        tau_target,
        t_out,
        vacant_ok,
        confined_ok,
        time_ok,
        holds,
        prime,
        holds_prime,
        rz,
        rxz,
        reasons,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VisitSummary {
    pub tau_minus: Option<usize>,
    /// `tau_x^N - last_{B^-}`; the path end replaces `tau_x^N` when `x` is not hit.
    pub tail: Option<usize>,
    pub confined: bool,
    pub max_gap: Option<usize>,
    /// Fraction of steps `0..=end` outside `B(center, (1 + eps) rho_N)`.
    pub fraction_outside: f64,
    pub target_hit: bool,
}

pub fn visit_statistics(
    path: &LatticePath,
    params: &ModelParams,
    x: &Site,
    report: &VacantBallReport,
    epsilon: f64,
) -> VisitSummary {
    let n = params.n() as usize;
    let target = target_time(path, x, n);
    let end = target.unwrap_or(path.len());
    let b_minus = report.ball_minus();
    let b_plus = report.ball_plus();
    let visits = first_last(path, &b_minus, end);
    let (confined, gap) = match visits {
        Some((t, l)) => (
            path.positions()[t..=l].iter().all(|s| b_plus.contains(s)),
            Some(max_gap(path, &b_minus, t, l)),
        ),
        None => (false, None),
    };
    let r = (1.0 + epsilon) * report.rho_n;
    let c = report.center.to_point();
    let outside = path.positions()[..=end].iter().filter(|s| c.dist_sq_site(s) > r * r).count();
    VisitSummary {
        tau_minus: visits.map(|v| v.0),
        tail: visits.map(|v| end - v.1),
        confined,
        max_gap: gap,
        fraction_outside: outside as f64 / (end + 1) as f64,
        target_hit: target.is_some(),
    }
}
