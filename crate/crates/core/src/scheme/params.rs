use serde::Serialize;

use crate::channel::{BcSpec, Correlation, DEGENERACY_TOL};
use crate::error::{Error, Result};

/// Tolerance for the excluded values `delta in {-1, 0}`.
pub const DELTA_TOL: f64 = 1e-9;

/// The `(delta, q)` pair that fixes a two-user broadcast scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeParams {
    delta: f64,
    q: f64,
}

impl SchemeParams {
    pub fn new(delta: f64, q: f64) -> Result<Self> {
        if !delta.is_finite() || delta.abs() <= DELTA_TOL || (delta + 1.0).abs() <= DELTA_TOL {
            return Err(Error::invalid(
                "delta",
                format!("must be finite and not in {{-1, 0}}, got {delta}"),
            ));
        }
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::invalid("q", format!("must be finite and > 0, got {q}")));
        }
        Ok(SchemeParams { delta, q })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn a1(&self) -> f64 {
        self.q
    }

    pub fn a2(&self) -> f64 {
        -self.delta * self.delta * self.q
    }

    pub fn b1(&self) -> f64 {
        -self.delta * (1.0 + self.delta) * self.q * self.q
    }

    pub fn b2(&self) -> f64 {
        -self.delta * self.delta * (1.0 + self.delta) * self.q * self.q
    }

    /// Left-hand side of the block power constraint.
    pub fn power_lhs(&self, spec: &BcSpec) -> f64 {
        let (a, b) = power_coefficients(spec, self.delta);
        let q2 = self.q * self.q;
        q2 * a + q2 * q2 * b
    }

    /// Whether the power constraint holds, allowing `1e-9 P` of slack.
    pub fn is_feasible(&self, spec: &BcSpec) -> bool {
        self.power_lhs(spec) <= spec.power() * (1.0 + 1e-9)
    }
}

/// `(A, B)` with the power constraint reading `q^2 A + q^4 B <= P`.
pub fn power_coefficients(spec: &BcSpec, delta: f64) -> (f64, f64) {
    let (s1, s2, r) = (spec.sigma1(), spec.sigma2(), spec.rho());
    let d2 = delta * delta;
    let one_minus_r2 = (1.0 - r) * (1.0 + r);
    let a = (s1 - r * d2 * s2).powi(2) + d2 * d2 * s2 * s2 * one_minus_r2;
    let c = (s1 + r * delta * s2).powi(2) + d2 * s2 * s2 * one_minus_r2;
    let b = (1.0 + delta).powi(2) * d2 * c;
    (a, b)
}

/// Largest `q` meeting the power constraint with equality for this `delta`.
pub fn boundary_q(spec: &BcSpec, delta: f64) -> Option<f64> {
    let (a, b) = power_coefficients(spec, delta);
    let p = spec.power();
    let q2 = 2.0 * p / (a + (a * a + 4.0 * b * p).sqrt());
    (q2.is_finite() && q2 > 0.0).then(|| q2.sqrt())
}

fn check_not_degraded(spec: &BcSpec) -> Result<()> {
    if spec.classify(DEGENERACY_TOL) == Correlation::Degraded {
        Err(Error::PhysicallyDegraded { rho: spec.rho() })
    } else {
        Ok(())
    }
}

/// Partial-correlation parameter choice together with its power threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialCorrChoice {
    pub params: SchemeParams,
    /// Smallest power at which the choice meets the power constraint.
    pub threshold: f64,
    pub feasible: bool,
}

impl PartialCorrChoice {
    pub fn require_feasible(self, power: f64) -> Result<SchemeParams> {
        if self.feasible {
            Ok(self.params)
        } else {
            Err(Error::BelowThreshold {
                power,
                threshold: self.threshold,
            })
        }
    }
}

/// The parameter choice that attains the cooperative high-SNR sum rate for
/// `|rho| < 1`, up to a power fraction `eps`.
///
/// ```
/// use fbcast::{channel::BcSpec, scheme::choose_params_partial_corr};
/// let spec = BcSpec::new(1.0, 1.0, 0.0, 16.0).unwrap();
/// let c = choose_params_partial_corr(&spec, 0.5).unwrap();
/// assert_eq!(c.params.delta(), 1.0);
/// assert!((c.params.q() - 1.0).abs() < 1e-15);
/// assert!(c.feasible);
/// ```
pub fn choose_params_partial_corr(spec: &BcSpec, eps: f64) -> Result<PartialCorrChoice> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid("eps", format!("must lie in (0, 1), got {eps}")));
    }
    check_not_degraded(spec)?;
    if spec.is_fully_correlated() {
        return Err(Error::invalid("rho", "partial-correlation choice needs |rho| < 1"));
    }
    let (s1, s2, r) = (spec.sigma1(), spec.sigma2(), spec.rho());
    let delta = (s1 / s2) * (s1 - r * s2) / (s2 - r * s1);
    let c = s1 * s1 + delta * delta * s2 * s2 + 2.0 * delta * r * s1 * s2;
    let d = delta * delta * (1.0 + delta).powi(2) * c;
    let p = spec.power();
    let q = ((1.0 - eps) * p / d).powf(0.25);
    let params = SchemeParams::new(delta, q)?;
    let (a, _) = power_coefficients(spec, delta);
    let threshold = a * a * (1.0 - eps) / (d * eps * eps);
    Ok(PartialCorrChoice {
        params,
        threshold,
        feasible: params.is_feasible(spec),
    })
}

/// The parameter choice for `|rho| = 1`; it meets the power constraint with
/// equality.
pub fn choose_params_full_corr(spec: &BcSpec) -> Result<SchemeParams> {
    check_not_degraded(spec)?;
    if !spec.is_fully_correlated() {
        return Err(Error::invalid("rho", "full-correlation choice needs |rho| = 1"));
    }
    let r = spec.rho().signum();
    let (s1, s2) = (spec.sigma1(), spec.sigma2());
    let delta = -r * s1 / s2;
    let q = (spec.power() / (s1 * s1 * (1.0 - r * s1 / s2).powi(2))).sqrt();
    let params = SchemeParams::new(delta, q)?;
    debug_assert!(params.is_feasible(spec));
    Ok(params)
}
