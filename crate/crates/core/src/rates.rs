//! Closed-form capacities, upper bounds and prelog utilities.
//!
//! All logarithms are base 2 and rates are in bits per channel use.

use std::fmt;
use std::ops::Add;

use serde::{Serialize, Serializer};

use crate::channel::{BcSpec, Correlation, FeedbackNoiseSpec, IcSpec, DEGENERACY_TOL};
use crate::error::{Error, Result};

/// A rate that may be infinite (the `-log 0 = inf` convention).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Finite(f64),
    Infinite,
}

impl Rate {
    pub fn bits(self) -> f64 {
        match self {
            Rate::Finite(r) => r,
            Rate::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Rate::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Rate::Finite(r) => Some(r),
            Rate::Infinite => None,
        }
    }
}

impl From<f64> for Rate {
    fn from(r: f64) -> Self {
        if r == f64::INFINITY {
            Rate::Infinite
        } else {
            Rate::Finite(r)
        }
    }
}

impl Add for Rate {
    type Output = Rate;
    fn add(self, rhs: Rate) -> Rate {
        match (self, rhs) {
            (Rate::Finite(a), Rate::Finite(b)) => Rate::Finite(a + b),
            _ => Rate::Infinite,
        }
    }
}

impl PartialOrd for Rate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.bits().partial_cmp(&other.bits())
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rate::Finite(r) => write!(f, "{r}"),
            Rate::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Rate::Finite(r) => s.serialize_f64(*r),
            Rate::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Per-user rates together with the formula that produced them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub source: &'static str,
    pub rates: Vec<Rate>,
}

impl RateReport {
    pub fn new(source: &'static str, rates: Vec<Rate>) -> Self {
        RateReport { source, rates }
    }

    pub fn finite(source: &'static str, rates: impl IntoIterator<Item = f64>) -> Self {
        RateReport {
            source,
            rates: rates.into_iter().map(Rate::Finite).collect(),
        }
    }

    pub fn sum(&self) -> Rate {
        self.rates.iter().fold(Rate::Finite(0.0), |acc, r| acc + *r)
    }

    pub fn is_finite(&self) -> bool {
        self.rates.iter().all(|r| r.is_finite())
    }

    pub fn bits(&self) -> Vec<f64> {
        self.rates.iter().map(|r| r.bits()).collect()
    }
}

/// `0.5 log2(x)`.
pub fn half_log2(x: f64) -> f64 {
    0.5 * x.log2()
}

/// `0.5 log2+(x) = max(0, 0.5 log2 x)`.
pub fn half_log2_plus(x: f64) -> f64 {
    half_log2(x).max(0.0)
}

/// `0.5 log2(1 + x)` without losing precision for small `x`.
pub fn half_log2_1p(x: f64) -> f64 {
    0.5 * x.ln_1p() / std::f64::consts::LN_2
}

/// Sum capacity without feedback, which also equals the feedback sum
/// capacity of a physically degraded channel.
///
/// ```
/// use fbcast::{channel::BcSpec, rates::no_feedback_sum_capacity};
/// let spec = BcSpec::new(1.0, 4.0, 0.0, 3.0).unwrap();
/// assert!((no_feedback_sum_capacity(&spec) - 1.0).abs() < 1e-15);
/// ```
pub fn no_feedback_sum_capacity(spec: &BcSpec) -> f64 {
    half_log2_1p(spec.power() / spec.sigma1_sq().min(spec.sigma2_sq()))
}

/// Which closed form defines the high-SNR sum capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HiSnrBranch {
    /// Physically degraded: no-feedback capacity.
    Degraded,
    /// Fully correlated, not degraded: two separate links.
    TwoLinks,
    /// Partially correlated: as if the receivers cooperated.
    Cooperative,
}

pub fn hi_snr_branch(spec: &BcSpec, tol: f64) -> HiSnrBranch {
    match spec.classify(tol) {
        Correlation::Degraded => HiSnrBranch::Degraded,
        Correlation::Full => HiSnrBranch::TwoLinks,
        Correlation::Partial => HiSnrBranch::Cooperative,
    }
}

/// High-SNR approximation of the feedback sum capacity; the difference to
/// the true sum capacity vanishes as the power grows.
pub fn hi_snr_sum_capacity(spec: &BcSpec) -> f64 {
    hi_snr_sum_capacity_tol(spec, DEGENERACY_TOL)
}

pub fn hi_snr_sum_capacity_tol(spec: &BcSpec, tol: f64) -> f64 {
    let p = spec.power();
    match hi_snr_branch(spec, tol) {
        HiSnrBranch::Degraded => no_feedback_sum_capacity(spec),
        HiSnrBranch::TwoLinks => half_log2(p / spec.sigma1_sq()) + half_log2(p / spec.sigma2_sq()),
        HiSnrBranch::Cooperative => half_log2(p * cooperative_gain(spec)),
    }
}

fn cooperative_gain(spec: &BcSpec) -> f64 {
    let (s1, s2, r) = (spec.sigma1(), spec.sigma2(), spec.rho());
    (s1 * s1 + s2 * s2 - 2.0 * r * s1 * s2) / (s1 * s1 * s2 * s2 * (1.0 - r * r))
}

/// The power offset `gamma(rho)`.
///
/// Infinite at `|rho| = 1` when the variances differ; undefined there when
/// they are equal.
pub fn power_offset(sigma1_sq: f64, sigma2_sq: f64, rho: f64) -> Result<f64> {
    if !(sigma1_sq > 0.0 && sigma2_sq > 0.0) {
        return Err(Error::invalid("variance", "must be > 0"));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::invalid("rho", format!("must lie in [-1, 1], got {rho}")));
    }
    if rho.abs() == 1.0 {
        if sigma1_sq == sigma2_sq {
            return Err(Error::Undefined("power offset at |rho| = 1 with equal variances"));
        }
        return Ok(f64::INFINITY);
    }
    let (s1, s2) = (sigma1_sq.sqrt(), sigma2_sq.sqrt());
    Ok((sigma1_sq + sigma2_sq - 2.0 * rho * s1 * s2) / (sigma1_sq * sigma2_sq * (1.0 - rho * rho)))
}

/// Location and value of the minimum of the power offset.
pub fn power_offset_minimum(sigma1_sq: f64, sigma2_sq: f64) -> (f64, f64) {
    let r = (sigma1_sq / sigma2_sq).sqrt();
    (r.min(1.0 / r), 1.0 / sigma1_sq.min(sigma2_sq))
}

/// Sum of the two single-receiver cut-set bounds.
pub fn cutset_two_cuts(spec: &BcSpec) -> f64 {
    half_log2_1p(spec.power() / spec.sigma1_sq()) + half_log2_1p(spec.power() / spec.sigma2_sq())
}

/// Full-cooperation cut-set bound, infinite when `|rho| = 1`.
pub fn cutset_single_cut(spec: &BcSpec) -> Rate {
    if spec.rho().abs() == 1.0 {
        return Rate::Infinite;
    }
    Rate::Finite(half_log2_1p(spec.power() * cooperative_gain(spec)))
}

/// Variances of the reduced noises of the less noisy channel built from
/// noisy feedback.
pub fn less_noisy_variances(spec: &BcSpec, fb: &FeedbackNoiseSpec) -> Result<(f64, f64)> {
    let (w1, w2) = (fb.sigma_w1_sq(), fb.sigma_w2_sq());
    if !(w1 > 0.0 && w2 > 0.0) {
        return Err(Error::invalid("feedback noise", "both variances must be > 0"));
    }
    let (s1, s2, r) = (spec.sigma1_sq(), spec.sigma2_sq(), spec.rho());
    let den = (s1 + w1) * (s2 + w2) - s1 * s2 * r * r;
    let v1 = s1 * (w1 * s2 * (1.0 - r * r) + w1 * w2) / den;
    let v2 = s2 * (w2 * s1 * (1.0 - r * r) + w2 * w1) / den;
    Ok((v1, v2))
}

/// The fully correlated specialisation of [`less_noisy_variances`].
pub fn less_noisy_variances_full_corr(spec: &BcSpec, fb: &FeedbackNoiseSpec) -> Result<(f64, f64)> {
    let (w1, w2) = (fb.sigma_w1_sq(), fb.sigma_w2_sq());
    if !(w1 > 0.0 && w2 > 0.0) {
        return Err(Error::invalid("feedback noise", "both variances must be > 0"));
    }
    let (s1, s2) = (spec.sigma1_sq(), spec.sigma2_sq());
    let den = s1 * w2 + s2 * w1 + w1 * w2;
    Ok((s1 * w1 * w2 / den, s2 * w1 * w2 / den))
}

/// Upper bound on the sum capacity with noisy feedback.
pub fn less_noisy_sum_capacity(spec: &BcSpec, fb: &FeedbackNoiseSpec) -> Result<f64> {
    let (v1, v2) = less_noisy_variances(spec, fb)?;
    Ok(half_log2_1p(spec.power() / v1.min(v2)))
}

/// Where `eta -> log2(1 + xi^(eta-1) zeta) / (2 eta)` peaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaOptimum {
    One,
    Infinity,
}

/// `log2(1 + xi^(eta-1) zeta) / (2 eta)`, evaluated without overflow.
pub fn eta_objective(xi: f64, zeta: f64, eta: u32) -> f64 {
    let t = (eta as f64 - 1.0) * xi.log2() + zeta.log2();
    log2_1p_exp2(t) / (2.0 * eta as f64)
}

/// `log2(1 + 2^t)` without overflow for large `t`.
pub fn log2_1p_exp2(t: f64) -> f64 {
    if t == f64::INFINITY {
        t
    } else if t > 0.0 {
        t + (-t).exp2().ln_1p() / std::f64::consts::LN_2
    } else {
        t.exp2().ln_1p() / std::f64::consts::LN_2
    }
}

/// Maximiser and supremum of [`eta_objective`] over positive integers.
///
/// ```
/// use fbcast::rates::{eta_tradeoff, EtaOptimum};
/// let (at, sup) = eta_tradeoff(4.0, 1.0).unwrap();
/// assert_eq!(at, EtaOptimum::Infinity);
/// assert!((sup - 1.0).abs() < 1e-15);
/// ```
pub fn eta_tradeoff(xi: f64, zeta: f64) -> Result<(EtaOptimum, f64)> {
    if !(xi > 0.0 && zeta > 0.0) || !xi.is_finite() || !zeta.is_finite() {
        return Err(Error::invalid("xi, zeta", "must be finite and > 0"));
    }
    if 1.0 + zeta >= xi {
        Ok((EtaOptimum::One, half_log2_1p(zeta)))
    } else {
        Ok((EtaOptimum::Infinity, half_log2(xi)))
    }
}

/// Cut-set bounds on the individual rates of the interference channel.
pub fn ic_cutset_bounds(ic: &IcSpec) -> (f64, f64) {
    let p = ic.power();
    let b = |k: usize, var: f64| {
        let g = ic.a(k, 0).abs() + ic.a(k, 1).abs();
        half_log2_1p(g * g * p / var)
    };
    (b(0, ic.sigma1_sq()), b(1, ic.sigma2_sq()))
}

/// `Var(Z1 | Z2 - (a22/a12) Z1)`.
pub fn genie_conditional_variance(ic: &IcSpec) -> f64 {
    let c = ic.a(1, 1) / ic.a(0, 1);
    let (s1, s2, r) = (ic.noise().sigma1(), ic.noise().sigma2(), ic.rho());
    let var_u = s2 * s2 + c * c * s1 * s1 - 2.0 * c * r * s1 * s2;
    let cov = r * s1 * s2 - c * s1 * s1;
    s1 * s1 - cov * cov / var_u
}

/// Genie-aided MAC bound on the interference-channel sum rate, valid for
/// `|rho| < 1`. Its prelog is one.
pub fn ic_genie_mac_bound(ic: &IcSpec) -> Result<f64> {
    if ic.rho().abs() >= 1.0 {
        return Err(Error::invalid("rho", "genie bound needs |rho| < 1"));
    }
    let g = ic.a(0, 0).abs() + ic.a(0, 1).abs();
    Ok(half_log2_1p(g * g * ic.power() / genie_conditional_variance(ic)))
}

/// Least-squares slope of `rate_fn(P)` against `0.5 log2(1 + P)`.
///
/// ```
/// use fbcast::{channel::BcSpec, rates::{cutset_two_cuts, prelog_estimate}};
/// let grid = [1e4, 1e5, 1e6, 1e7, 1e8];
/// let slope = prelog_estimate(
///     |p| cutset_two_cuts(&BcSpec::new(1.0, 1.0, 0.0, p).unwrap()),
///     &grid,
/// )
/// .unwrap();
/// assert!((slope - 2.0).abs() < 0.02);
/// ```
pub fn prelog_estimate<F: Fn(f64) -> f64>(rate_fn: F, p_grid: &[f64]) -> Result<f64> {
    if p_grid.len() < 2 {
        return Err(Error::invalid("power grid", "need at least two points"));
    }
    if p_grid.windows(2).any(|w| !(w[1] > w[0])) || p_grid[0] <= 0.0 {
        return Err(Error::invalid("power grid", "must be positive and strictly increasing"));
    }
    let xs: Vec<f64> = p_grid.iter().map(|&p| half_log2_1p(p)).collect();
    let ys: Vec<f64> = p_grid.iter().map(|&p| rate_fn(p)).collect();
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::invalid("rate function", "returned a non-finite rate"));
    }
    Ok(ls_slope(&xs, &ys))
}

pub(crate) fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// `n` points evenly spaced in `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// `n` points evenly spaced in `[log10 a, log10 b]`.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.log10(), b.log10(), n)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect()
}
