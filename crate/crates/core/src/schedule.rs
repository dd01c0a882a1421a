//! Correlation schedules `rho(P) = s (1 - c / P^zeta)` and the parameter
//! choices that attain their generalized prelog.

use serde::{Deserialize, Serialize};

use crate::channel::BcSpec;
use crate::error::{Error, Result};
use crate::rates::ls_slope;
use crate::scheme::SchemeParams;

/// Powers at which the growth of `P C(P)` is probed.
pub const KAPPA_PROBES: [f64; 4] = [1e3, 1e6, 1e9, 1e12];

/// Log-slope of `P C(P)` above which `kappa` is classified infinite.
pub const KAPPA_SLOPE_TOL: f64 = 0.01;

/// `rho(P) = sign (1 - factor / P^zeta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    sign: f64,
    zeta: f64,
    factor: f64,
}

impl ScheduleSpec {
    /// `sign` must be `+1` or `-1`, `zeta` in `[0, 1]` and `factor >= 0`.
    pub fn new(sign: f64, zeta: f64, factor: f64) -> Result<Self> {
        if sign != 1.0 && sign != -1.0 {
            return Err(Error::invalid("sign", format!("must be +1 or -1, got {sign}")));
        }
        if !(0.0..=1.0).contains(&zeta) {
            return Err(Error::invalid("zeta", format!("must lie in [0, 1], got {zeta}")));
        }
        if !(factor >= 0.0 && factor.is_finite()) {
            return Err(Error::invalid(
                "factor",
                format!("must be finite and >= 0, got {factor}"),
            ));
        }
        Ok(ScheduleSpec { sign, zeta, factor })
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    /// Correlation at power `p`; errors if it leaves `[-1, 1]`.
    pub fn rho(&self, p: f64) -> Result<f64> {
        let gap = self.factor / p.powf(self.zeta);
        if !(0.0..=2.0).contains(&gap) {
            return Err(Error::invalid(
                "schedule",
                format!("rho({p}) = {} leaves [-1, 1]", self.sign * (1.0 - gap)),
            ));
        }
        Ok(self.sign * (1.0 - gap))
    }

    /// `1 - rho(P)^2`, computed without cancellation near `|rho| = 1`.
    pub fn one_minus_rho_sq(&self, p: f64) -> f64 {
        let gap = self.factor / p.powf(self.zeta);
        gap * (2.0 - gap)
    }

    /// Whether `rho(P)` tends to `target` (`+1` or `-1`).
    fn tends_to(&self, target: f64) -> bool {
        self.sign == target && (self.zeta > 0.0 || self.factor == 0.0)
    }

    /// `limsup -log(1 + rho(P)) / log P`.
    pub fn zeta_minus(&self) -> f64 {
        self.exponent_towards(-1.0)
    }

    /// `limsup -log(1 - rho(P)) / log P`.
    pub fn zeta_plus(&self) -> f64 {
        self.exponent_towards(1.0)
    }

    fn exponent_towards(&self, target: f64) -> f64 {
        if self.sign != target {
            // rho tends to -target or stays at a constant different from target.
            return if self.zeta == 0.0 && self.factor == 2.0 {
                f64::INFINITY
            } else {
                0.0
            };
        }
        if self.factor == 0.0 {
            f64::INFINITY
        } else {
            self.zeta
        }
    }
}

/// Generalized prelog of the feedback sum capacity along the schedule:
/// `min{1 + zeta_minus, 2}` for equal variances and
/// `min{1 + max{zeta_minus, zeta_plus}, 2}` otherwise.
///
/// ```
/// use fbcast::schedule::{generalized_prelog, ScheduleSpec};
/// let s = ScheduleSpec::new(-1.0, 0.5, 1.0).unwrap();
/// assert_eq!(generalized_prelog(1.0, 1.0, &s), 1.5);
/// ```
pub fn generalized_prelog(sigma1_sq: f64, sigma2_sq: f64, sched: &ScheduleSpec) -> f64 {
    let z = if sigma1_sq == sigma2_sq {
        sched.zeta_minus()
    } else {
        sched.zeta_minus().max(sched.zeta_plus())
    };
    (1.0 + z).min(2.0)
}

/// The limit `kappa` of `P (s1^2 + delta^2 s2^2 + 2 delta rho s1 s2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kappa {
    Finite(f64),
    Infinite,
}

/// Parameters chosen for one power level of a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleChoice {
    pub params: SchemeParams,
    pub rho: f64,
    pub kappa: Kappa,
    /// Power-constraint left-hand side at this power.
    pub power_lhs: f64,
}

fn delta_for(s1: f64, s2: f64, rho: f64) -> f64 {
    if rho.abs() < 1.0 {
        (s1 / s2) * (s1 - rho * s2) / (s2 - rho * s1)
    } else {
        -rho * s1 / s2
    }
}

/// `s1^2 + delta^2 s2^2 + 2 delta rho s1 s2` for the `delta` of
/// [`delta_for`], written so that `1 - rho^2` enters as a factor.
fn cross_term(s1: f64, s2: f64, rho: f64, one_minus_rho_sq: f64) -> f64 {
    if rho.abs() < 1.0 {
        s1 * s1 * (s1 * s1 + s2 * s2 - 2.0 * rho * s1 * s2) * one_minus_rho_sq / (s2 - rho * s1).powi(2)
    } else {
        0.0
    }
}

/// Classifies `kappa` from the log-slope of `P C(P)` over [`KAPPA_PROBES`];
/// a slope above [`KAPPA_SLOPE_TOL`] counts as unbounded growth, otherwise
/// the value at the largest probe is the limit.
pub fn classify_kappa(sigma1_sq: f64, sigma2_sq: f64, sched: &ScheduleSpec) -> Result<Kappa> {
    let (s1, s2) = (sigma1_sq.sqrt(), sigma2_sq.sqrt());
    let mut vals = Vec::with_capacity(KAPPA_PROBES.len());
    for &p in &KAPPA_PROBES {
        let rho = sched.rho(p)?;
        vals.push(p * cross_term(s1, s2, rho, sched.one_minus_rho_sq(p)).max(0.0));
    }
    let last = *vals.last().expect("probes are nonempty");
    if vals.iter().any(|&v| !(v > 0.0)) {
        return Ok(Kappa::Finite(last.max(0.0)));
    }
    let xs: Vec<f64> = KAPPA_PROBES.iter().map(|p| p.log10()).collect();
    let ys: Vec<f64> = vals.iter().map(|v| v.log10()).collect();
    if ls_slope(&xs, &ys) > KAPPA_SLOPE_TOL {
        Ok(Kappa::Infinite)
    } else {
        Ok(Kappa::Finite(last))
    }
}

/// Positive root of `c0 beta (1 + beta kappa / s2^2) = 1`.
pub fn beta_root(c0: f64, kappa: f64, sigma2_sq: f64) -> f64 {
    let a = c0 * kappa / sigma2_sq;
    2.0 / (c0 + (c0 * c0 + 4.0 * a).sqrt())
}

/// `(delta, q)` for power `p` along the schedule, with power fraction `eps`
/// kept in reserve. `kappa` overrides the numeric classification.
///
/// Errors with `Undefined` for equal variances and `rho(P) -> +1`, and with
/// `BelowThreshold` when the choice violates the power constraint at `p`.
///
/// ```
/// use fbcast::schedule::{schedule_params, ScheduleSpec};
/// let s = ScheduleSpec::new(-1.0, 0.0, 0.0).unwrap();
/// let c = schedule_params(1.0, 1.0, &s, 100.0, 0.5, None).unwrap();
/// assert_eq!(c.params.delta(), 1.0);
/// assert!((c.params.q() - (0.25f64 * 0.5 * 100.0).sqrt()).abs() < 1e-12);
/// ```
pub fn schedule_params(
    sigma1_sq: f64,
    sigma2_sq: f64,
    sched: &ScheduleSpec,
    p: f64,
    eps: f64,
    kappa: Option<Kappa>,
) -> Result<ScheduleChoice> {
    let choice = schedule_choice(sigma1_sq, sigma2_sq, sched, p, eps, kappa)?;
    if choice.power_lhs > p * (1.0 + 1e-9) {
        let threshold = schedule_threshold(sigma1_sq, sigma2_sq, sched, eps, kappa).unwrap_or(f64::INFINITY);
        return Err(Error::BelowThreshold { power: p, threshold });
    }
    Ok(choice)
}

fn schedule_choice(
    sigma1_sq: f64,
    sigma2_sq: f64,
    sched: &ScheduleSpec,
    p: f64,
    eps: f64,
    kappa: Option<Kappa>,
) -> Result<ScheduleChoice> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid("eps", format!("must lie in (0, 1), got {eps}")));
    }
    if sigma1_sq == sigma2_sq && sched.tends_to(1.0) {
        return Err(Error::Undefined("equal noise variances with rho(P) -> +1"));
    }
    let rho = sched.rho(p)?;
    let spec = BcSpec::new(sigma1_sq, sigma2_sq, rho, p)?;
    let (s1, s2) = (spec.sigma1(), spec.sigma2());
    let delta = delta_for(s1, s2, rho);
    let kappa = match kappa {
        Some(k) => k,
        None => classify_kappa(sigma1_sq, sigma2_sq, sched)?,
    };
    let q = match kappa {
        Kappa::Infinite => {
            let c = cross_term(s1, s2, rho, sched.one_minus_rho_sq(p));
            ((1.0 - eps) * p / (delta * delta * (1.0 + delta).powi(2) * c)).powf(0.25)
        }
        Kappa::Finite(k) => {
            let ratio = if sched.sign() < 0.0 {
                1.0 + s1 / s2
            } else {
                1.0 - s1 / s2
            };
            let c0 = sigma1_sq * ratio * ratio;
            (beta_root(c0, k, sigma2_sq) * (1.0 - eps) * p).sqrt()
        }
    };
    let params = SchemeParams::new(delta, q)?;
    Ok(ScheduleChoice {
        params,
        rho,
        kappa,
        power_lhs: params.power_lhs(&spec),
    })
}

/// Smallest power on a doubling grid from `1e-3` to `1e15`, refined by
/// bisection, beyond which every grid power meets the power constraint.
pub fn schedule_threshold(
    sigma1_sq: f64,
    sigma2_sq: f64,
    sched: &ScheduleSpec,
    eps: f64,
    kappa: Option<Kappa>,
) -> Option<f64> {
    let kappa = match kappa {
        Some(k) => k,
        None => classify_kappa(sigma1_sq, sigma2_sq, sched).ok()?,
    };
    let feasible = |p: f64| {
        schedule_choice(sigma1_sq, sigma2_sq, sched, p, eps, Some(kappa))
            .map(|c| c.power_lhs <= p * (1.0 + 1e-9))
            .unwrap_or(false)
    };
    let grid: Vec<f64> = (0..60).map(|i| 1e-3 * 2f64.powi(i)).collect();
    let ok: Vec<bool> = grid.iter().map(|&p| feasible(p)).collect();
    if !*ok.last()? {
        return None;
    }
    let first = (0..grid.len()).rev().take_while(|&i| ok[i]).last()?;
    if first == 0 {
        return Some(grid[0]);
    }
    let (mut lo, mut hi) = (grid[first - 1], grid[first]);
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::prelog_estimate;
    use crate::scheme::bc2_limit_rates;

    #[test]
    fn exponents() {
        let s = ScheduleSpec::new(-1.0, 0.5, 1.0).unwrap();
        assert_eq!((s.zeta_minus(), s.zeta_plus()), (0.5, 0.0));
        let c = ScheduleSpec::new(1.0, 0.0, 1.0).unwrap();
        assert_eq!((c.zeta_minus(), c.zeta_plus()), (0.0, 0.0));
        assert_eq!(generalized_prelog(1.0, 1.0, &c), 1.0);
        let up = ScheduleSpec::new(1.0, 0.3, 1.0).unwrap();
        assert_eq!(generalized_prelog(1.0, 1.0, &up), 1.0);
        assert_eq!(generalized_prelog(1.0, 2.0, &up), 1.3);
        assert!(ScheduleSpec::new(0.5, 0.3, 1.0).is_err());
        assert!(ScheduleSpec::new(1.0, 1.3, 1.0).is_err());
    }

    #[test]
    fn constant_anticorrelation_example() {
        let s = ScheduleSpec::new(-1.0, 0.0, 0.0).unwrap();
        assert_eq!(classify_kappa(1.0, 1.0, &s).unwrap(), Kappa::Finite(0.0));
        assert_eq!(beta_root(4.0, 0.0, 1.0), 0.25);
    }

    #[test]
    fn kappa_for_unit_exponent() {
        let s = ScheduleSpec::new(-1.0, 1.0, 1.0).unwrap();
        match classify_kappa(1.0, 1.0, &s).unwrap() {
            Kappa::Finite(k) => assert!((k - 2.0).abs() < 1e-6),
            Kappa::Infinite => panic!("kappa should be finite"),
        }
        let b = beta_root(4.0, 2.0, 1.0);
        assert!((8.0 * b * b + 4.0 * b - 1.0).abs() < 1e-15);
        let half = ScheduleSpec::new(-1.0, 0.5, 1.0).unwrap();
        assert_eq!(classify_kappa(1.0, 1.0, &half).unwrap(), Kappa::Infinite);
    }

    #[test]
    fn equal_variances_towards_plus_one_is_undefined() {
        let s = ScheduleSpec::new(1.0, 0.5, 1.0).unwrap();
        assert!(matches!(
            schedule_params(1.0, 1.0, &s, 1e4, 0.5, None),
            Err(Error::Undefined(_))
        ));
        assert!(schedule_params(1.0, 2.0, &s, 1e6, 0.5, None).is_ok());
    }

    #[test]
    fn prelog_follows_exponent() {
        let grid = [1e4, 1e5, 1e6, 1e7, 1e8];
        for zeta in [0.25, 0.5, 1.0] {
            let s = ScheduleSpec::new(-1.0, zeta, 1.0).unwrap();
            let slope = prelog_estimate(
                |p| {
                    let c = schedule_params(1.0, 1.0, &s, p, 0.5, None).unwrap();
                    bc2_limit_rates(&c.params).sum().bits()
                },
                &grid,
            )
            .unwrap();
            assert!((slope - (1.0 + zeta)).abs() < 0.1, "zeta {zeta}: {slope}");
        }
    }

    #[test]
    fn threshold_separates_feasibility() {
        let s = ScheduleSpec::new(-1.0, 0.25, 1.0).unwrap();
        let t = schedule_threshold(1.0, 1.0, &s, 0.1, None).unwrap();
        assert!(schedule_params(1.0, 1.0, &s, t * 1.01, 0.1, None).is_ok());
        if t > 1e-3 {
            assert!(matches!(
                schedule_params(1.0, 1.0, &s, t * 0.99, 0.1, None),
                Err(Error::BelowThreshold { .. })
            ));
        }
    }
}
