use nalgebra::{DMatrix, DVector};

use super::{geometric, shift, BlockScheme, ModelTag, NoiseModel, SchemeParams, Topology};
use crate::channel::{BcSpec, Correlation, IcSpec, KUserSpec, NoiseCovariance, DEGENERACY_TOL};
use crate::error::{Error, Result};

fn check_eta(eta: usize, min: usize) -> Result<()> {
    if eta < min {
        Err(Error::invalid("eta", format!("must be >= {min}, got {eta}")))
    } else {
        Ok(())
    }
}

fn first_two(eta: usize, x0: f64, x1: f64) -> DVector<f64> {
    let mut u = DVector::zeros(eta);
    u[0] = x0;
    if eta > 1 {
        u[1] = x1;
    }
    u
}

/// Point-to-point scheme: send `sqrt(P) Xi`, then keep resending the last
/// noise sample scaled to power `P`.
///
/// ```
/// use fbcast::scheme::{build_p2p_scheme, equivalent_channel};
/// let s = build_p2p_scheme(4.0, 1.0, 2).unwrap();
/// let eq = equivalent_channel(&s, s.noise_basis());
/// assert!((eq.snr[0] - 16.0).abs() < 1e-12);
/// ```
pub fn build_p2p_scheme(power: f64, sigma_sq: f64, eta: usize) -> Result<BlockScheme> {
    check_eta(eta, 1)?;
    if !(power > 0.0 && sigma_sq > 0.0) {
        return Err(Error::invalid("power, sigma_sq", "must be > 0"));
    }
    let g = (power / sigma_sq).sqrt();
    let u = first_two(eta, power.sqrt(), 0.0);
    let v = geometric(-g, eta);
    let b = shift(eta) * g;
    let noise = NoiseModel {
        basis: NoiseCovariance::diagonal(&[sigma_sq])?,
        mixing: DMatrix::from_element(1, 1, 1.0),
    };
    Ok(BlockScheme::new(
        ModelTag::P2p,
        eta,
        power,
        vec![u],
        vec![v],
        vec![b],
        noise,
        Topology::Broadcast,
        1,
    ))
}

fn toeplitz2(eta: usize, a: f64, b: f64) -> DMatrix<f64> {
    DMatrix::from_fn(eta, eta, |i, j| {
        if i == j + 1 {
            a
        } else if i == j + 2 {
            b
        } else {
            0.0
        }
    })
}

/// Two-user scheme for general correlation. Feedback matrices are Toeplitz
/// with `a_k` on the first and `b_k` on the second subdiagonal.
///
/// Blocks of length 1 and 2 are the natural truncations; only `eta >= 2`
/// cancels the unintended symbol.
pub fn build_bc2_scheme(spec: &BcSpec, params: &SchemeParams, eta: usize) -> Result<BlockScheme> {
    check_eta(eta, 1)?;
    let lhs = params.power_lhs(spec);
    if lhs > spec.power() * (1.0 + 1e-9) {
        return Err(Error::invalid(
            "params",
            format!("power constraint violated: {lhs} > P = {}", spec.power()),
        ));
    }
    let p = spec.power();
    let (a1, a2, b1, b2) = (params.a1(), params.a2(), params.b1(), params.b2());
    let (r1, r2) = (b1 / a1, b2 / a2);
    let u1 = first_two(eta, 1.0, r1) * (p / (2.0 + 2.0 * r1 * r1)).sqrt();
    let u2 = first_two(eta, 1.0, r2) * (p / (2.0 + 2.0 * r2 * r2)).sqrt();
    let v1 = geometric(-r2, eta);
    let v2 = geometric(-r1, eta);
    let noise = NoiseModel {
        basis: spec.noise_cov(),
        mixing: DMatrix::identity(2, 2),
    };
    Ok(BlockScheme::new(
        ModelTag::Bc2,
        eta,
        p,
        vec![u1, u2],
        vec![v1, v2],
        vec![toeplitz2(eta, a1, b1), toeplitz2(eta, a2, b2)],
        noise,
        Topology::Broadcast,
        2,
    ))
}

fn check_full_corr_not_degraded(spec: &BcSpec) -> Result<()> {
    match spec.classify(DEGENERACY_TOL) {
        Correlation::Full => Ok(()),
        Correlation::Degraded => Err(Error::PhysicallyDegraded { rho: spec.rho() }),
        Correlation::Partial => Err(Error::invalid("rho", "scheme needs |rho| = 1")),
    }
}

/// Two-user scheme for fully correlated noises, where a single resent noise
/// stream serves both receivers.
pub fn build_bc2_fullcorr_scheme(spec: &BcSpec, eta: usize) -> Result<BlockScheme> {
    check_full_corr_not_degraded(spec)?;
    check_eta(eta, 2)?;
    let p = spec.power();
    let (s1, s2, r) = (spec.sigma1(), spec.sigma2(), spec.rho().signum());
    let gamma = (p / (2.0 + p / (s1 * s1) + p / (s2 * s2))).sqrt();
    let g1 = (p / (s1 * s1)).sqrt();
    let g2 = (p / (s2 * s2)).sqrt();
    let u1 = first_two(eta, gamma, gamma * r * g2);
    let u2 = first_two(eta, gamma, gamma * g1);
    let v1 = geometric(-g1, eta);
    let v2 = geometric(-r * g2, eta);
    let noise = NoiseModel {
        basis: NoiseCovariance::diagonal(&[s1 * s1])?,
        mixing: DMatrix::from_column_slice(2, 1, &[1.0, r * s2 / s1]),
    };
    Ok(BlockScheme::new(
        ModelTag::Bc2FullCorr,
        eta,
        p,
        vec![u1, u2],
        vec![v1, v2],
        vec![shift(eta) * g1, DMatrix::zeros(eta, eta)],
        noise,
        Topology::Broadcast,
        1,
    ))
}

/// Vandermonde vectors of the K-user scheme and their normalised
/// components orthogonal to the other users' vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct KUserDirections {
    /// `(1, -alpha_k, alpha_k^2, ..., (-alpha_k)^(K-1))`.
    pub vandermonde: Vec<DVector<f64>>,
    /// Unit vectors orthogonal to every other user's Vandermonde vector.
    pub w: Vec<DVector<f64>>,
}

impl KUserDirections {
    /// `alpha_k' w_k`, nonzero for distinct alphas.
    pub fn alignment(&self, k: usize) -> f64 {
        self.vandermonde[k].dot(&self.w[k])
    }
}

/// Computes the directions by least-squares projection onto the span of the
/// other users' Vandermonde vectors.
pub fn kuser_directions(alphas: &[f64]) -> Result<KUserDirections> {
    let k = alphas.len();
    let vandermonde: Vec<DVector<f64>> = alphas
        .iter()
        .map(|&a| DVector::from_fn(k, |j, _| (-a).powi(j as i32)))
        .collect();
    let mut w = Vec::with_capacity(k);
    for i in 0..k {
        let target = &vandermonde[i];
        let residual = if k == 1 {
            target.clone()
        } else {
            let others: Vec<DVector<f64>> = (0..k).filter(|&j| j != i).map(|j| vandermonde[j].clone()).collect();
            let a = DMatrix::from_columns(&others);
            let x = a
                .clone()
                .svd(true, true)
                .solve(target, 1e-14)
                .map_err(|_| Error::invalid("alphas", "projection failed"))?;
            target - a * x
        };
        let norm = residual.norm();
        if !(norm > 1e-12 * target.norm()) {
            return Err(Error::invalid("alphas", "Vandermonde vectors are linearly dependent"));
        }
        w.push(residual / norm);
    }
    Ok(KUserDirections { vandermonde, w })
}

/// K-user scheme for a rank-one noise covariance with distinct alphas.
pub fn build_kuser_scheme(spec: &KUserSpec, eta: usize) -> Result<BlockScheme> {
    let k = spec.k();
    if spec.n_alpha() != k {
        return Err(Error::invalid(
            "alphas",
            "duplicate alphas; reduce to distinct representatives first",
        ));
    }
    check_eta(eta, k)?;
    let p = spec.power();
    if p <= k as f64 {
        return Err(Error::BelowThreshold {
            power: p,
            threshold: k as f64,
        });
    }
    let dirs = kuser_directions(spec.alphas())?;
    let sp = p.sqrt();
    let u = dirs
        .w
        .iter()
        .map(|w| DVector::from_fn(eta, |t, _| if t < k { w[t] / sp.powi((k - 1 - t) as i32) } else { 0.0 }))
        .collect();
    let v = spec.alphas().iter().map(|&a| geometric(-sp / a, eta)).collect();
    let alpha1 = spec.alphas()[0];
    let mut b = vec![DMatrix::zeros(eta, eta); k];
    b[0] = shift(eta) * (sp / alpha1);
    let noise = NoiseModel {
        basis: NoiseCovariance::diagonal(&[1.0])?,
        mixing: DMatrix::from_column_slice(k, 1, spec.alphas()),
    };
    Ok(BlockScheme::new(
        ModelTag::KUser,
        eta,
        p,
        u,
        v,
        b,
        noise,
        Topology::Broadcast,
        1,
    ))
}

/// Whether a gain ratio of the interference channel coincides with the
/// noise ratio `rho sigma2 / sigma1`, which defeats the scheme.
pub fn ic_is_degenerate(ic: &IcSpec) -> bool {
    let c = ic.rho() * ic.noise().sigma2() / ic.noise().sigma1();
    let close = |x: f64| (x - c).abs() <= DEGENERACY_TOL * c.abs().max(1.0);
    close(ic.a(1, 0) / ic.a(0, 0)) || close(ic.a(1, 1) / ic.a(0, 1))
}

/// Smallest block length meeting both transmitters' power constraints.
pub fn ic_eta_threshold(ic: &IcSpec) -> usize {
    let p = ic.power();
    let s1 = ic.sigma1_sq();
    let a12 = ic.a(0, 1);
    let need = (s1 / (2.0 * p)).max(s1 / (2.0 * a12 * a12 * p)).ceil();
    (need as usize).max(2)
}

/// Interference-channel scheme for fully correlated noises. Transmitter 1
/// resends its receiver's noise; transmitter 2 uses no feedback.
pub fn build_ic_scheme(ic: &IcSpec, eta: usize) -> Result<BlockScheme> {
    if !ic.noise().is_fully_correlated() {
        return Err(Error::invalid("rho", "interference scheme needs |rho| = 1"));
    }
    if ic_is_degenerate(ic) {
        return Err(Error::invalid("gains", "a21/a11 or a22/a12 equals rho sigma2/sigma1"));
    }
    check_eta(eta, ic_eta_threshold(ic))?;
    let p = ic.power();
    let (s1, s2, r) = (ic.noise().sigma1(), ic.noise().sigma2(), ic.rho().signum());
    let (a11, a12, a21) = (ic.a(0, 0), ic.a(0, 1), ic.a(1, 0));
    let sp = p.sqrt();
    let c1 = ((p / 2.0) / (1.0 + a21 * a21 * p / (s2 * s2))).sqrt();
    let u1 = first_two(eta, c1, c1 * a21 * sp / (r * s2));
    let u2 = first_two(eta, (s1 * s1 / (2.0 * a12 * a12)).sqrt(), 0.0);
    let v1 = geometric(-a11 * sp / s1, eta);
    let v2 = geometric(-a21 * sp / (r * s2), eta);
    let noise = NoiseModel {
        basis: NoiseCovariance::diagonal(&[s1 * s1])?,
        mixing: DMatrix::from_column_slice(2, 1, &[1.0, r * s2 / s1]),
    };
    Ok(BlockScheme::new(
        ModelTag::Ic,
        eta,
        p,
        vec![u1, u2],
        vec![v1, v2],
        vec![shift(eta) * (sp / s1), DMatrix::zeros(eta, eta)],
        noise,
        Topology::Interference { gains: ic.gains() },
        1,
    ))
}
