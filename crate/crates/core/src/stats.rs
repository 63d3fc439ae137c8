//! Goodness-of-fit machinery: Kolmogorov–Smirnov tests with asymptotic
//! critical values, moment checks and an empirical characteristic function
//! comparison against `(1 - it)^{-a}`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::specfun::gamma_cf_value;

/// Asymptotic KS constant `c(α) = sqrt(-ln(α/2) / 2)`.
pub fn ks_c_alpha(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("alpha = {alpha} must lie in (0,1)")))
    }
}

fn check_sorted(xs: &[f64]) -> Result<()> {
    if xs.iter().any(|x| x.is_nan()) || xs.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Unsorted);
    }
    Ok(())
}

/// Sorted copy of `xs`; NaN is rejected.
pub fn sorted_copy(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Unsorted);
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Empirical CDF of a sorted sample at `x`.
pub fn ecdf(sorted: &[f64], x: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64
}

/// Verdict of a one- or two-sample KS test. `m` is 0 for one-sample tests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsReport {
    pub test: String,
    pub statistic: f64,
    pub critical: f64,
    pub n: u64,
    pub m: u64,
    pub alpha: f64,
    pub pass: bool,
}

impl KsReport {
    pub fn labeled(mut self, test: impl Into<String>) -> Self {
        self.test = test.into();
        self
    }
}

/// One-sample KS of a sorted sample against `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F, alpha: f64) -> Result<KsReport> {
    check_alpha(alpha)?;
    check_sorted(sorted)?;
    if sorted.is_empty() {
        return Err(Error::Precondition("KS test needs at least one sample".into()));
    }
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x).clamp(0.0, 1.0);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d = d.max(above).max(below);
    }
    let statistic = d.clamp(0.0, 1.0);
    let critical = ks_c_alpha(alpha) / n.sqrt();
    Ok(KsReport {
        test: "ks_one_sample".into(),
        statistic,
        critical,
        n: sorted.len() as u64,
        m: 0,
        alpha,
        pass: statistic <= critical,
    })
}

/// Two-sample KS between sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsReport> {
    check_alpha(alpha)?;
    check_sorted(a)?;
    check_sorted(b)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::Precondition("KS test needs non-empty samples".into()));
    }
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let (nf, mf) = (n as f64, m as f64);
    let critical = ks_c_alpha(alpha) * ((nf + mf) / (nf * mf)).sqrt();
    Ok(KsReport {
        test: "ks_two_sample".into(),
        statistic: d,
        critical,
        n: n as u64,
        m: m as u64,
        alpha,
        pass: d <= critical,
    })
}

/// Raw moments `E X^k`, `k = 1..=k_max`, of Beta(a, b).
pub fn beta_moments(a: f64, b: f64, k_max: usize) -> Result<Vec<f64>> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain("beta_moments", format!("a = {a}, b = {b}")));
    }
    if k_max > 8 {
        return Err(Error::domain("beta_moments", format!("k_max = {k_max} > 8")));
    }
    let mut out = Vec::with_capacity(k_max);
    let mut m = 1.0;
    for j in 0..k_max {
        let j = j as f64;
        m *= (a + j) / (a + b + j);
        out.push(m);
    }
    Ok(out)
}

/// Raw moments `E X^k`, `k = 1..=k_max`, of Gamma(shape).
pub fn gamma_moments(shape: f64, k_max: usize) -> Result<Vec<f64>> {
    if !(shape > 0.0) || !shape.is_finite() || k_max > 8 {
        return Err(Error::domain(
            "gamma_moments",
            format!("shape = {shape}, k_max = {k_max}"),
        ));
    }
    let mut out = Vec::with_capacity(k_max);
    let mut m = 1.0;
    for j in 0..k_max {
        m *= shape + j as f64;
        out.push(m);
    }
    Ok(out)
}

/// Empirical raw moments compared with predicted ones in units of the
/// Monte Carlo standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub n: u64,
    pub empirical: Vec<f64>,
    pub predicted: Vec<f64>,
    /// `|empirical - predicted| / σ̂` per order.
    pub z_scores: Vec<f64>,
    pub n_sigma: f64,
    pub pass: bool,
}

pub fn moment_compare(samples: &[f64], predicted: &[f64], n_sigma: f64) -> Result<MomentReport> {
    if samples.len() < 2 {
        return Err(Error::Precondition(
            "moment comparison needs at least two samples".into(),
        ));
    }
    let n = samples.len() as f64;
    let mut empirical = Vec::with_capacity(predicted.len());
    let mut z_scores = Vec::with_capacity(predicted.len());
    for (k, &target) in predicted.iter().enumerate() {
        let p = (k + 1) as i32;
        let mean = samples.iter().map(|x| x.powi(p)).sum::<f64>() / n;
        let var = samples.iter().map(|x| (x.powi(p) - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let gap = (mean - target).abs();
        empirical.push(mean);
        z_scores.push(if se > 0.0 {
            gap / se
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    let pass = z_scores.iter().all(|z| *z <= n_sigma);
    Ok(MomentReport {
        n: samples.len() as u64,
        empirical,
        predicted: predicted.to_vec(),
        z_scores,
        n_sigma,
        pass,
    })
}

/// Slack added to the Monte Carlo bound in [`empirical_cf_compare`].
pub const CF_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CfReport {
    pub t_grid: Vec<f64>,
    pub max_abs_gap: f64,
    pub mc_error_bound: f64,
    pub pass: bool,
}

/// Compare `(1/n) Σ exp(i t X_j)` with `(1 - it)^{-shape_a}`, real and
/// imaginary parts separately, on `t_grid`.
pub fn empirical_cf_compare(samples: &[f64], shape_a: f64, t_grid: &[f64]) -> Result<CfReport> {
    if samples.len() < 10_000 {
        return Err(Error::Precondition(format!(
            "empirical CF needs n >= 10^4, got {}",
            samples.len()
        )));
    }
    if let Some(t) = t_grid.iter().find(|t| !t.is_finite() || t.abs() > 2.0) {
        return Err(Error::Precondition(format!("t = {t} outside [-2, 2]")));
    }
    if !(shape_a > 0.0) {
        return Err(Error::domain("empirical_cf_compare", format!("shape = {shape_a}")));
    }
    let n = samples.len() as f64;
    let mut gap: f64 = 0.0;
    for &t in t_grid {
        let sum: Complex64 = samples.iter().map(|&x| Complex64::from_polar(1.0, t * x)).sum();
        let diff = sum / n - gamma_cf_value(shape_a, t);
        gap = gap.max(diff.re.abs()).max(diff.im.abs());
    }
    let mc_error_bound = 2.0 / n.sqrt();
    Ok(CfReport {
        t_grid: t_grid.to_vec(),
        max_abs_gap: gap,
        mc_error_bound,
        pass: gap <= 3.0 * mc_error_bound + CF_TOLERANCE,
    })
}
