use serde::Serialize;

use super::params::{boundary_q, SchemeParams, DELTA_TOL};
use crate::channel::{BcSpec, Correlation, DEGENERACY_TOL};
use crate::rates::{half_log2_plus, logspace, no_feedback_sum_capacity};

const GRID: usize = 200;
const GOLDEN_ITERS: usize = 80;

/// Best two-user sum rate found by the parameter search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizeResult {
    /// Best feedback parameters, if any are feasible.
    pub params: Option<SchemeParams>,
    /// `max(feedback_sum_rate, no-feedback sum capacity)`.
    pub sum_rate: f64,
    pub feedback_sum_rate: f64,
    /// The no-feedback rate was at least as large as the best feedback rate.
    pub used_fallback: bool,
}

/// Sum of the limiting two-user rates with `q` on the power boundary.
pub fn bc2_limit_sum_on_boundary(spec: &BcSpec, delta: f64) -> f64 {
    if !delta.is_finite() || delta.abs() <= DELTA_TOL || (delta + 1.0).abs() <= DELTA_TOL {
        return f64::NEG_INFINITY;
    }
    match boundary_q(spec, delta) {
        Some(q) => {
            let g = q * q * (1.0 + delta).powi(2);
            half_log2_plus(g) + half_log2_plus(g * delta * delta)
        }
        None => f64::NEG_INFINITY,
    }
}

/// The three sign regions of `delta`, each parametrised by `y > 0`.
#[derive(Clone, Copy)]
enum Region {
    Positive,
    Between,
    Below,
}

impl Region {
    fn delta(self, y: f64) -> f64 {
        match self {
            Region::Positive => y,
            Region::Between => -1.0 / (1.0 + y),
            Region::Below => -1.0 - y,
        }
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn anchors(spec: &BcSpec) -> Vec<f64> {
    let (s1, s2, r) = (spec.sigma1(), spec.sigma2(), spec.rho());
    match spec.classify(DEGENERACY_TOL) {
        Correlation::Partial => vec![(s1 / s2) * (s1 - r * s2) / (s2 - r * s1)],
        Correlation::Full => vec![-r.signum() * s1 / s2],
        Correlation::Degraded => vec![],
    }
}

/// Maximises the limiting two-user sum rate over `delta`, with `q` on the
/// power boundary, by a log-spaced grid in each sign region of `delta`
/// followed by golden-section refinement.
///
/// ```
/// use fbcast::{channel::BcSpec, scheme::optimize_bc2_sum_rate};
/// let r = optimize_bc2_sum_rate(&BcSpec::new(1.0, 1.0, -1.0, 4.0).unwrap());
/// assert!(r.sum_rate >= 2.0 - 1e-12);
/// ```
pub fn optimize_bc2_sum_rate(spec: &BcSpec) -> OptimizeResult {
    let f = |d: f64| bc2_limit_sum_on_boundary(spec, d);
    let ys = logspace(1e-4, 1e4, GRID);
    let mut best_delta = f64::NAN;
    let mut best = f64::NEG_INFINITY;
    for region in [Region::Positive, Region::Between, Region::Below] {
        let vals: Vec<f64> = ys.iter().map(|&y| f(region.delta(y))).collect();
        let (i, &v) = vals
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        if !v.is_finite() {
            continue;
        }
        let lo = ys[i.saturating_sub(1)].ln();
        let hi = ys[(i + 1).min(GRID - 1)].ln();
        let (ly, fv) = golden_max(|ly| f(region.delta(ly.exp())), lo, hi);
        let (d, v) = if fv >= v {
            (region.delta(ly.exp()), fv)
        } else {
            (region.delta(ys[i]), v)
        };
        if v > best {
            best = v;
            best_delta = d;
        }
    }
    for d in anchors(spec) {
        let v = f(d);
        if v > best {
            best = v;
            best_delta = d;
        }
    }
    let params = if best.is_finite() {
        boundary_q(spec, best_delta).and_then(|q| SchemeParams::new(best_delta, q).ok())
    } else {
        None
    };
    let nofb = no_feedback_sum_capacity(spec);
    OptimizeResult {
        params,
        sum_rate: best.max(nofb),
        feedback_sum_rate: best,
        used_fallback: !(best > nofb),
    }
}
