use serde::Serialize;

use super::params::SchemeParams;
use crate::channel::{BcSpec, IcSpec, KUserSpec};
use crate::error::{Error, Result};
use crate::rates::{half_log2_plus, log2_1p_exp2, Rate, RateReport};
use crate::scheme::build::{ic_is_degenerate, kuser_directions};

/// `log2(1 + 2^log2_snr) / (2 eta)`.
fn rate(log2_snr: f64, eta: usize) -> Rate {
    if log2_snr == f64::INFINITY {
        Rate::Infinite
    } else {
        Rate::Finite(log2_1p_exp2(log2_snr) / (2.0 * eta as f64))
    }
}

fn check_eta(eta: usize, min: usize) -> Result<()> {
    if eta < min {
        Err(Error::invalid("eta", format!("must be >= {min}, got {eta}")))
    } else {
        Ok(())
    }
}

/// Point-to-point rate with a block of length `eta`: `log2(1 + (P/s2)^eta) / (2 eta)`.
///
/// ```
/// let r = fbcast::scheme::p2p_finite_rate(1.0, 1.0, 3);
/// assert!((r - 1.0 / 6.0).abs() < 1e-15);
/// ```
pub fn p2p_finite_rate(power: f64, sigma_sq: f64, eta: usize) -> f64 {
    rate(eta as f64 * (power / sigma_sq).log2(), eta).bits()
}

/// Limit of [`p2p_finite_rate`] as `eta` grows: `0.5 log2+(P/s2)`.
pub fn p2p_limit_rate(power: f64, sigma_sq: f64) -> f64 {
    half_log2_plus(power / sigma_sq)
}

/// Finite-block rates of the two-user scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bc2FiniteRates {
    /// Rates with the exact residual noise variances.
    pub exact: RateReport,
    /// Rates with the cross-covariance term dropped from the variances.
    pub printed: RateReport,
    pub residual_var: [f64; 2],
    pub residual_var_printed: [f64; 2],
    pub snr: [f64; 2],
    /// The two variants differ by more than `1e-9` relative in some rate.
    pub disagree: bool,
}

/// Rates of the two-user scheme for `eta >= 2`.
pub fn bc2_finite_rates(spec: &BcSpec, params: &SchemeParams, eta: usize) -> Result<Bc2FiniteRates> {
    check_eta(eta, 2)?;
    let (d, q) = (params.delta(), params.q());
    let (s1, s2, r) = (spec.sigma1(), spec.sigma2(), spec.rho());
    let (s1sq, s2sq) = (s1 * s1, s2 * s2);
    let p = spec.power();
    let (q2, d2) = (q * q, d * d);
    let cross = 2.0 * d * d2 * q2 * r * s1 * s2;
    let var1p = (q2 * d2 + 1.0) * s1sq + q2 * d2 * d2 * s2sq;
    let var2p = (q2 * d2 + 1.0) * s2sq + q2 * s1sq;
    let var1 = var1p + cross;
    let var2 = var2p + 2.0 * d * q2 * r * s1 * s2;
    let r1 = params.b1() / params.a1();
    let r2 = params.b2() / params.a2();
    let c1sq = p / (2.0 + 2.0 * r1 * r1);
    let c2sq = p / (2.0 + 2.0 * r2 * r2);
    let n = (eta - 1) as f64;
    let sig1 = c1sq.log2() + 2.0 * (1.0 + d).abs().log2() + n * (q2 * (1.0 + d).powi(2)).log2();
    let sig2 = c2sq.log2() + 2.0 * (1.0 + 1.0 / d).abs().log2() + n * (q2 * d2 * (1.0 + d).powi(2)).log2();
    let report = |v1: f64, v2: f64| {
        let l1 = if v1 > 0.0 { sig1 - v1.log2() } else { f64::INFINITY };
        let l2 = if v2 > 0.0 { sig2 - v2.log2() } else { f64::INFINITY };
        RateReport::new("finite-eta two-user scheme", vec![rate(l1, eta), rate(l2, eta)])
    };
    let exact = report(var1, var2);
    let printed = report(var1p, var2p);
    let disagree = exact.rates.iter().zip(&printed.rates).any(|(a, b)| match (a, b) {
        (Rate::Finite(x), Rate::Finite(y)) => (x - y).abs() > 1e-9 * x.abs().max(y.abs()).max(1e-300),
        (a, b) => a != b,
    });
    Ok(Bc2FiniteRates {
        exact,
        printed,
        residual_var: [var1, var2],
        residual_var_printed: [var1p, var2p],
        snr: [sig1.exp2() / var1, sig2.exp2() / var2],
        disagree,
    })
}

/// Limiting rates of the two-user scheme as `eta` grows.
///
/// ```
/// use fbcast::scheme::{bc2_limit_rates, SchemeParams};
/// let r = bc2_limit_rates(&SchemeParams::new(1.0, 1.0).unwrap());
/// assert_eq!(r.bits(), vec![1.0, 1.0]);
/// ```
pub fn bc2_limit_rates(params: &SchemeParams) -> RateReport {
    let (d, q) = (params.delta(), params.q());
    let g = q * q * (1.0 + d).powi(2);
    RateReport::finite("two-user limit", [half_log2_plus(g), half_log2_plus(g * d * d)])
}

/// Sum rate attained by the partial-correlation parameter choice.
pub fn partial_corr_limit_sum(spec: &BcSpec, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid("eps", format!("must lie in (0, 1), got {eps}")));
    }
    if spec.is_fully_correlated() {
        return Err(Error::invalid("rho", "needs |rho| < 1"));
    }
    let (s1, s2, r) = (spec.sigma1(), spec.sigma2(), spec.rho());
    let num = (1.0 - eps) * spec.power() * (s1 * s1 + s2 * s2 - 2.0 * r * s1 * s2);
    let den = s1 * s1 * s2 * s2 * (1.0 - r * r);
    Ok(half_log2_plus(num / den))
}

/// Limiting rates for `|rho| = 1`: `0.5 log2+(P / sigma_k^2)`.
pub fn full_corr_limit_rates(spec: &BcSpec) -> Result<RateReport> {
    super::params::choose_params_full_corr(spec)?;
    let p = spec.power();
    Ok(RateReport::finite(
        "full-correlation limit",
        [
            half_log2_plus(p / spec.sigma1_sq()),
            half_log2_plus(p / spec.sigma2_sq()),
        ],
    ))
}

/// Finite-block rates of the two-user scheme with the full-correlation
/// parameter choice. The expression is also evaluated at `eta = 1`, where
/// the scheme itself degenerates to plain superposition.
pub fn full_corr_finite_rates(spec: &BcSpec, eta: usize) -> Result<RateReport> {
    check_eta(eta, 1)?;
    super::params::choose_params_full_corr(spec)?;
    let (s1sq, s2sq) = (spec.sigma1_sq(), spec.sigma2_sq());
    let (s1, s2, r) = (spec.sigma1(), spec.sigma2(), spec.rho());
    let p = spec.power();
    let n = (eta - 1) as f64;
    let l1 =
        n * (p / s1sq).log2() + 2.0 * (1.0 - r * s1 / s2).abs().log2() + (p / s1sq / (2.0 + 2.0 * p / s2sq)).log2();
    let l2 =
        n * (p / s2sq).log2() + 2.0 * (1.0 - r * s2 / s1).abs().log2() + (p / s2sq / (2.0 + 2.0 * p / s1sq)).log2();
    Ok(RateReport::new(
        "full-correlation finite eta",
        vec![rate(l1, eta), rate(l2, eta)],
    ))
}

/// Rates of the dedicated full-correlation scheme with one resent noise
/// stream.
pub fn fullcorr_motivation_rates(spec: &BcSpec, eta: usize) -> Result<RateReport> {
    check_eta(eta, 1)?;
    if !spec.is_fully_correlated() || spec.is_physically_degraded() {
        return Err(Error::invalid("rho", "needs |rho| = 1 and a non-degraded channel"));
    }
    let (s1sq, s2sq) = (spec.sigma1_sq(), spec.sigma2_sq());
    let (s1, s2, r) = (spec.sigma1(), spec.sigma2(), spec.rho());
    let p = spec.power();
    let g2 = (1.0 / (2.0 + p / s1sq + p / s2sq)).log2();
    let e = eta as f64;
    let l1 = g2 + e * (p / s1sq).log2() + 2.0 * (1.0 - r * s1 / s2).abs().log2();
    let l2 = g2 + e * (p / s2sq).log2() + 2.0 * (1.0 - r * s2 / s1).abs().log2();
    Ok(RateReport::new(
        "full-correlation one-stream scheme",
        vec![rate(l1, eta), rate(l2, eta)],
    ))
}

/// Finite-block rates of the K-user scheme; needs distinct alphas and
/// `eta >= K`.
pub fn kuser_finite_rates(spec: &KUserSpec, eta: usize) -> Result<RateReport> {
    let k = spec.k();
    if spec.n_alpha() != k {
        return Err(Error::invalid("alphas", "duplicate alphas"));
    }
    check_eta(eta, k)?;
    let dirs = kuser_directions(spec.alphas())?;
    let p = spec.power();
    let rates = spec
        .alphas()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let l =
                (eta - k) as f64 * p.log2() + 2.0 * dirs.alignment(i).abs().log2() - 2.0 * eta as f64 * a.abs().log2();
            rate(l, eta)
        })
        .collect();
    Ok(RateReport::new("K-user finite eta", rates))
}

/// Limiting rates of the K-user scheme: `0.5 log2+(P / alpha_k^2)`.
pub fn kuser_limit_rates(spec: &KUserSpec) -> RateReport {
    let p = spec.power();
    RateReport::finite(
        "K-user limit",
        spec.alphas().iter().map(|a| half_log2_plus(p / (a * a))),
    )
}

fn check_ic(ic: &IcSpec) -> Result<()> {
    if !ic.noise().is_fully_correlated() {
        return Err(Error::invalid("rho", "needs |rho| = 1"));
    }
    if ic_is_degenerate(ic) {
        return Err(Error::invalid("gains", "a21/a11 or a22/a12 equals rho sigma2/sigma1"));
    }
    Ok(())
}

/// Finite-block rates of the interference-channel scheme, including the
/// power scalings of both signaling vectors.
pub fn ic_finite_rates(ic: &IcSpec, eta: usize) -> Result<RateReport> {
    check_ic(ic)?;
    check_eta(eta, 1)?;
    let (s1sq, s2sq) = (ic.sigma1_sq(), ic.sigma2_sq());
    let (s1, s2, r) = (ic.noise().sigma1(), ic.noise().sigma2(), ic.rho());
    let p = ic.power();
    let (a11, a12, a21, a22) = (ic.a(0, 0), ic.a(0, 1), ic.a(1, 0), ic.a(1, 1));
    let n = (eta - 1) as f64;
    let l1 = (0.5 * p * s2sq / (s2sq + p * a21 * a21)).log2()
        + n * (a11 * a11 * p / s1sq).log2()
        + 2.0 * (a11 * (1.0 - a21 * s1 / (a11 * r * s2))).abs().log2()
        - s1sq.log2();
    let l2 = (s1sq / (2.0 * a12 * a12)).log2()
        + n * (a21 * a21 * p / s2sq).log2()
        + 2.0 * (a22 - a12 * r * s2 / s1).abs().log2()
        - s2sq.log2();
    Ok(RateReport::new(
        "interference finite eta",
        vec![rate(l1, eta), rate(l2, eta)],
    ))
}

/// Limiting interference-channel rates:
/// `(0.5 log2+(a11^2 P / s1^2), 0.5 log2+(a21^2 P / s2^2))`.
pub fn ic_limit_rates(ic: &IcSpec) -> Result<RateReport> {
    check_ic(ic)?;
    let p = ic.power();
    Ok(RateReport::finite(
        "interference limit",
        [
            half_log2_plus(ic.a(0, 0).powi(2) * p / ic.sigma1_sq()),
            half_log2_plus(ic.a(1, 0).powi(2) * p / ic.sigma2_sq()),
        ],
    ))
}

/// Limiting rates with the roles of the transmitters exchanged:
/// `(0.5 log2+(a12^2 P / s1^2), 0.5 log2+(a22^2 P / s2^2))`.
pub fn ic_limit_rates_swapped(ic: &IcSpec) -> Result<RateReport> {
    check_ic(ic)?;
    let p = ic.power();
    Ok(RateReport::finite(
        "interference limit, roles exchanged",
        [
            half_log2_plus(ic.a(0, 1).powi(2) * p / ic.sigma1_sq()),
            half_log2_plus(ic.a(1, 1).powi(2) * p / ic.sigma2_sq()),
        ],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::{
        build_bc2_fullcorr_scheme, build_bc2_scheme, build_ic_scheme, build_kuser_scheme, build_p2p_scheme,
        choose_params_full_corr, equivalent_channel,
    };

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn p2p_examples() {
        assert!(close(p2p_finite_rate(4.0, 1.0, 1), 0.5 * 5f64.log2(), 1e-15));
        assert_eq!(p2p_limit_rate(4.0, 1.0), 1.0);
        assert!(close(p2p_finite_rate(4.0, 1.0, 2000), 1.0, 1e-3));
        let s = build_p2p_scheme(4.0, 1.0, 2).unwrap();
        let eq = equivalent_channel(&s, s.noise_basis());
        assert!(close(eq.rates[0].bits(), p2p_finite_rate(4.0, 1.0, 2), 1e-12));
    }

    #[test]
    fn bc2_closed_form_matches_matrix_algebra() {
        let spec = BcSpec::new(1.3, 0.6, 0.3, 50.0).unwrap();
        for (delta, q) in [(0.7, 0.4), (-0.3, 0.2), (-2.5, 0.1)] {
            let params = SchemeParams::new(delta, q).unwrap();
            for eta in 2..8 {
                let s = build_bc2_scheme(&spec, &params, eta).unwrap();
                let eq = equivalent_channel(&s, &spec.noise_cov());
                let f = bc2_finite_rates(&spec, &params, eta).unwrap();
                for k in 0..2 {
                    assert!(close(eq.residual_var(k), f.residual_var[k], 1e-9));
                    assert!(close(eq.snr[k], f.snr[k], 1e-9), "{} vs {}", eq.snr[k], f.snr[k]);
                    assert!(close(eq.rates[k].bits(), f.exact.rates[k].bits(), 1e-9));
                }
                assert!(f.disagree);
            }
        }
    }

    #[test]
    fn printed_variant_agrees_without_cross_term() {
        let spec = BcSpec::new(1.0, 2.0, 0.0, 50.0).unwrap();
        let f = bc2_finite_rates(&spec, &SchemeParams::new(0.5, 0.3).unwrap(), 4).unwrap();
        assert!(!f.disagree);
    }

    #[test]
    fn full_corr_finite_matches_scheme_and_example() {
        let spec = BcSpec::new(1.0, 1.0, -1.0, 1e6).unwrap();
        let r = full_corr_finite_rates(&spec, 1).unwrap();
        assert!(close(
            r.rates[0].bits(),
            0.5 * (1.0f64 + 4e6 / (2.0 + 2e6)).log2(),
            1e-12
        ));
        let spec = BcSpec::new(1.0, 2.5, 1.0, 7.0).unwrap();
        let params = choose_params_full_corr(&spec).unwrap();
        for eta in 2..7 {
            let s = build_bc2_scheme(&spec, &params, eta).unwrap();
            let eq = equivalent_channel(&s, &spec.noise_cov());
            let r = full_corr_finite_rates(&spec, eta).unwrap();
            for k in 0..2 {
                assert!(close(eq.rates[k].bits(), r.rates[k].bits(), 1e-9));
            }
        }
    }

    #[test]
    fn fullcorr_scheme_matches_closed_form() {
        let spec = BcSpec::new(1.0, 3.0, -1.0, 20.0).unwrap();
        for eta in 2..7 {
            let s = build_bc2_fullcorr_scheme(&spec, eta).unwrap();
            let eq = equivalent_channel(&s, s.noise_basis());
            let r = fullcorr_motivation_rates(&spec, eta).unwrap();
            for k in 0..2 {
                assert!(close(eq.rates[k].bits(), r.rates[k].bits(), 1e-9));
            }
        }
    }

    #[test]
    fn kuser_matches_closed_form() {
        let spec = KUserSpec::new(vec![0.7, -1.2, 1.9], 30.0).unwrap();
        for eta in 3..8 {
            let s = build_kuser_scheme(&spec, eta).unwrap();
            let eq = equivalent_channel(&s, s.noise_basis());
            let r = kuser_finite_rates(&spec, eta).unwrap();
            for k in 0..3 {
                assert!(close(eq.rates[k].bits(), r.rates[k].bits(), 1e-9));
            }
        }
        let lim = kuser_limit_rates(&KUserSpec::new(vec![1.0, -1.0], 16.0).unwrap());
        assert_eq!(lim.bits(), vec![2.0, 2.0]);
    }

    #[test]
    fn ic_matches_closed_form() {
        let ic = IcSpec::new([[1.2, 0.7], [0.5, -1.1]], 1.0, 2.0, 1.0, 40.0).unwrap();
        for eta in 2..8 {
            let s = build_ic_scheme(&ic, eta).unwrap();
            let eq = equivalent_channel(&s, s.noise_basis());
            let r = ic_finite_rates(&ic, eta).unwrap();
            for k in 0..2 {
                assert!(close(eq.rates[k].bits(), r.rates[k].bits(), 1e-9), "eta {eta} k {k}");
            }
        }
        let sym = IcSpec::new([[1.0, 1.0], [1.0, 1.0]], 1.0, 1.0, -1.0, 16.0).unwrap();
        assert_eq!(ic_limit_rates(&sym).unwrap().bits(), vec![2.0, 2.0]);
        assert_eq!(ic_limit_rates_swapped(&sym).unwrap().bits(), vec![2.0, 2.0]);
    }
}
