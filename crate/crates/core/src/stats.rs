//! Small statistics helpers shared by the estimators.

use serde::{Deserialize, Serialize};

/// A Monte Carlo estimate with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
    #[serde(default)]
    pub params: serde_json::Value,
    /// Set when the estimator could not produce a meaningful error bar.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
}

impl Estimate {
    /// `log(value)` with a delta-method standard error.
    pub fn log_value(&self) -> (f64, f64) {
        (self.value.ln(), self.stderr / self.value)
    }
}

/// Running mean and variance (Welford), mergeable in a fixed order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeanVar {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, o: &MeanVar) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * (self.n as f64) * (o.n as f64) / n as f64;
        self.n = n;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

impl FromIterator<f64> for MeanVar {
    fn from_iter<I: IntoIterator<Item = f64>>(it: I) -> Self {
        let mut m = MeanVar::default();
        for x in it {
            m.push(x);
        }
        m
    }
}

/// Total variation distance between two discrete laws given as sorted
/// `(key, probability)` lists.
pub fn total_variation<K: Ord>(a: &[(K, f64)], b: &[(K, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut s = 0.0;
    while i < a.len() || j < b.len() {
        if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
            s += a[i].1.abs();
            i += 1;
        } else if i >= a.len() || b[j].0 < a[i].0 {
            s += b[j].1.abs();
            j += 1;
        } else {
            s += (a[i].1 - b[j].1).abs();
            i += 1;
            j += 1;
        }
    }
    0.5 * s
}

/// Integrated autocorrelation time with Sokal's self-consistent window (c = 5).
pub fn integrated_autocorrelation_time(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 1.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for lag in 1..n / 2 {
        let c: f64 =
            (0..n - lag).map(|i| (xs[i] - mean) * (xs[i + lag] - mean)).sum::<f64>() / n as f64;
        tau += 2.0 * c / var;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

/// Solve a small dense system by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Weighted least squares `y ~ X beta`; returns coefficients and their covariance.
pub fn weighted_least_squares(
    x: &[Vec<f64>],
    y: &[f64],
    w: &[f64],
) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let k = x.first()?.len();
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for ((row, &yi), &wi) in x.iter().zip(y).zip(w) {
        for a in 0..k {
            xty[a] += wi * row[a] * yi;
            for b in 0..k {
                xtx[a][b] += wi * row[a] * row[b];
            }
        }
    }
    let beta = solve_dense(xtx.clone(), xty)?;
    let mut cov = vec![vec![0.0; k]; k];
    for j in 0..k {
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        let col = solve_dense(xtx.clone(), e)?;
        for i in 0..k {
            cov[i][j] = col[i];
        }
    }
    Some((beta, cov))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64).collect();
        let all: MeanVar = xs.iter().copied().collect();
        let mut a: MeanVar = xs[..40].iter().copied().collect();
        let b: MeanVar = xs[40..].iter().copied().collect();
        a.merge(&b);
        assert!((a.mean - all.mean).abs() < 1e-12);
        assert!((a.variance() - all.variance()).abs() < 1e-10);
    }

    #[test]
    fn tv_of_disjoint_and_equal() {
        let a = vec![(0, 0.5), (1, 0.5)];
        let b = vec![(2, 1.0)];
        assert_eq!(total_variation(&a, &b), 1.0);
        assert_eq!(total_variation(&a, &a), 0.0);
        let c = vec![(0, 0.25), (1, 0.75)];
        assert!((total_variation(&a, &c) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn wls_recovers_line() {
        let x: Vec<Vec<f64>> = (1..10).map(|i| vec![i as f64, 1.0]).collect();
        let y: Vec<f64> = (1..10).map(|i| 2.0 * i as f64 - 3.0).collect();
        let (b, _) = weighted_least_squares(&x, &y, &vec![1.0; 9]).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-12 && (b[1] + 3.0).abs() < 1e-12);
    }
}
