//! Channel instances and correlated Gaussian noise.
//!
//! Three network models share one noise description: a two-user broadcast
//! channel ([`BcSpec`]), a K-user broadcast channel whose noise covariance has
//! rank one ([`KUserSpec`]), and a two-user interference channel
//! ([`IcSpec`]). Noise is always centered Gaussian, IID over time, with a
//! per-time covariance given by a [`NoiseCovariance`].

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for deciding whether a correlation sits exactly on a
/// degenerate value (physically degraded, fully correlated).
pub const DEGENERACY_TOL: f64 = 1e-12;

fn check_variance(what: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(what, format!("must be finite and > 0, got {v}")))
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && (-1.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::invalid("rho", format!("must lie in [-1, 1], got {rho}")))
    }
}

/// Correlation class of a two-user noise pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correlation {
    /// One output is a degraded version of the other.
    Degraded,
    /// `|rho| = 1` and not degraded.
    Full,
    /// `|rho| < 1` and not degraded.
    Partial,
}

/// Two-user Gaussian broadcast channel `Y_k = x + Z_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBc", into = "RawBc")]
pub struct BcSpec {
    sigma1_sq: f64,
    sigma2_sq: f64,
    rho: f64,
    power: f64,
}

#[derive(Serialize, Deserialize)]
struct RawBc {
    sigma1_sq: f64,
    sigma2_sq: f64,
    rho: f64,
    power: f64,
}

impl TryFrom<RawBc> for BcSpec {
    type Error = Error;
    fn try_from(r: RawBc) -> Result<Self> {
        BcSpec::new(r.sigma1_sq, r.sigma2_sq, r.rho, r.power)
    }
}

impl From<BcSpec> for RawBc {
    fn from(s: BcSpec) -> Self {
        RawBc {
            sigma1_sq: s.sigma1_sq,
            sigma2_sq: s.sigma2_sq,
            rho: s.rho,
            power: s.power,
        }
    }
}

impl BcSpec {
    pub fn new(sigma1_sq: f64, sigma2_sq: f64, rho: f64, power: f64) -> Result<Self> {
        check_variance("sigma1_sq", sigma1_sq)?;
        check_variance("sigma2_sq", sigma2_sq)?;
        check_rho(rho)?;
        check_variance("power", power)?;
        Ok(BcSpec {
            sigma1_sq,
            sigma2_sq,
            rho,
            power,
        })
    }

    pub fn sigma1_sq(&self) -> f64 {
        self.sigma1_sq
    }

    pub fn sigma2_sq(&self) -> f64 {
        self.sigma2_sq
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma1_sq.sqrt()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2_sq.sqrt()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn with_power(&self, power: f64) -> Result<Self> {
        BcSpec::new(self.sigma1_sq, self.sigma2_sq, self.rho, power)
    }

    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        BcSpec::new(self.sigma1_sq, self.sigma2_sq, rho, self.power)
    }

    /// Classifies the noise pair, treating values within `tol` of a
    /// degenerate correlation as degenerate.
    pub fn classify(&self, tol: f64) -> Correlation {
        let r = self.sigma1() / self.sigma2();
        if (self.rho - r).abs() <= tol || (self.rho - 1.0 / r).abs() <= tol {
            Correlation::Degraded
        } else if (self.rho.abs() - 1.0).abs() <= tol {
            Correlation::Full
        } else {
            Correlation::Partial
        }
    }

    pub fn is_physically_degraded(&self) -> bool {
        self.classify(DEGENERACY_TOL) == Correlation::Degraded
    }

    /// `|rho| = 1` within [`DEGENERACY_TOL`], degraded or not.
    pub fn is_fully_correlated(&self) -> bool {
        (self.rho.abs() - 1.0).abs() <= DEGENERACY_TOL
    }

    pub fn noise_cov(&self) -> NoiseCovariance {
        bc_noise_cov(self)
    }
}

/// Covariance of the noise pair of a broadcast channel.
///
/// ```
/// use fbcast::channel::{bc_noise_cov, BcSpec};
/// let spec = BcSpec::new(1.0, 1.0, -1.0, 1.0).unwrap();
/// let k = bc_noise_cov(&spec);
/// assert_eq!(k.get(0, 1), -1.0);
/// ```
pub fn bc_noise_cov(spec: &BcSpec) -> NoiseCovariance {
    let c = spec.rho * spec.sigma1() * spec.sigma2();
    let m = DMatrix::from_row_slice(2, 2, &[spec.sigma1_sq, c, c, spec.sigma2_sq]);
    NoiseCovariance { matrix: m }
}

/// Variances of the feedback-link noises. Zero marks noise-free feedback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackNoiseSpec {
    sigma_w1_sq: f64,
    sigma_w2_sq: f64,
}

impl FeedbackNoiseSpec {
    pub fn new(sigma_w1_sq: f64, sigma_w2_sq: f64) -> Result<Self> {
        for (what, v) in [("sigma_w1_sq", sigma_w1_sq), ("sigma_w2_sq", sigma_w2_sq)] {
            if !(v >= 0.0) || v.is_nan() {
                return Err(Error::invalid(what, format!("must be >= 0, got {v}")));
            }
        }
        Ok(FeedbackNoiseSpec {
            sigma_w1_sq,
            sigma_w2_sq,
        })
    }

    pub fn noise_free() -> Self {
        FeedbackNoiseSpec {
            sigma_w1_sq: 0.0,
            sigma_w2_sq: 0.0,
        }
    }

    pub fn sigma_w1_sq(&self) -> f64 {
        self.sigma_w1_sq
    }

    pub fn sigma_w2_sq(&self) -> f64 {
        self.sigma_w2_sq
    }

    pub fn is_noise_free(&self) -> bool {
        self.sigma_w1_sq == 0.0 && self.sigma_w2_sq == 0.0
    }
}

/// K-user broadcast channel whose noises are all multiples of one unit
/// Gaussian: `Z_k = alpha_k W`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KUserSpec {
    alphas: Vec<f64>,
    power: f64,
}

impl KUserSpec {
    pub fn new(alphas: Vec<f64>, power: f64) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::invalid("alphas", "need at least one receiver"));
        }
        if let Some(a) = alphas.iter().find(|a| !a.is_finite() || **a == 0.0) {
            return Err(Error::invalid(
                "alphas",
                format!("entries must be finite and nonzero, got {a}"),
            ));
        }
        check_variance("power", power)?;
        Ok(KUserSpec { alphas, power })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn k(&self) -> usize {
        self.alphas.len()
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn with_power(&self, power: f64) -> Result<Self> {
        KUserSpec::new(self.alphas.clone(), power)
    }

    /// Number of distinct values among the alphas.
    pub fn n_alpha(&self) -> usize {
        self.distinct_representatives().len()
    }

    /// Index of the first receiver carrying each distinct alpha.
    pub fn distinct_representatives(&self) -> Vec<usize> {
        let mut reps: Vec<usize> = Vec::new();
        for (i, a) in self.alphas.iter().enumerate() {
            if !reps.iter().any(|&j| self.alphas[j] == *a) {
                reps.push(i);
            }
        }
        reps
    }

    /// Restriction to the receivers with distinct alphas.
    pub fn reduced(&self) -> KUserSpec {
        let alphas = self
            .distinct_representatives()
            .into_iter()
            .map(|i| self.alphas[i])
            .collect();
        KUserSpec {
            alphas,
            power: self.power,
        }
    }

    /// `K_z` with entries `alpha_j alpha_k`.
    pub fn noise_cov(&self) -> NoiseCovariance {
        let a = DVector::from_column_slice(&self.alphas);
        NoiseCovariance {
            matrix: &a * a.transpose(),
        }
    }
}

/// Two-user Gaussian interference channel
/// `Y_1 = a11 x_1 + a12 x_2 + Z_1`, `Y_2 = a21 x_1 + a22 x_2 + Z_2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IcSpec {
    gains: [[f64; 2]; 2],
    noise: BcSpec,
}

impl IcSpec {
    pub fn new(gains: [[f64; 2]; 2], sigma1_sq: f64, sigma2_sq: f64, rho: f64, power: f64) -> Result<Self> {
        if gains.iter().flatten().any(|a| !a.is_finite() || *a == 0.0) {
            return Err(Error::invalid(
                "gains",
                format!("all four must be finite and nonzero, got {gains:?}"),
            ));
        }
        Ok(IcSpec {
            gains,
            noise: BcSpec::new(sigma1_sq, sigma2_sq, rho, power)?,
        })
    }

    /// Gain from transmitter `j` to receiver `k`, zero-based.
    pub fn a(&self, k: usize, j: usize) -> f64 {
        self.gains[k][j]
    }

    pub fn gains(&self) -> [[f64; 2]; 2] {
        self.gains
    }

    /// Noise variances, correlation and per-transmitter power.
    pub fn noise(&self) -> &BcSpec {
        &self.noise
    }

    pub fn sigma1_sq(&self) -> f64 {
        self.noise.sigma1_sq
    }

    pub fn sigma2_sq(&self) -> f64 {
        self.noise.sigma2_sq
    }

    pub fn rho(&self) -> f64 {
        self.noise.rho
    }

    pub fn power(&self) -> f64 {
        self.noise.power
    }

    pub fn with_power(&self, power: f64) -> Result<Self> {
        Ok(IcSpec {
            gains: self.gains,
            noise: self.noise.with_power(power)?,
        })
    }

    pub fn noise_cov(&self) -> NoiseCovariance {
        bc_noise_cov(&self.noise)
    }
}

/// Symmetric positive semidefinite per-time noise covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovariance {
    matrix: DMatrix<f64>,
}

impl NoiseCovariance {
    /// Validates symmetry and positive semidefiniteness up to a tolerance
    /// scaled by the largest diagonal entry.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::invalid("covariance", "must be a nonempty square matrix"));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("covariance", "entries must be finite"));
        }
        let scale = matrix.diagonal().amax().max(f64::MIN_POSITIVE);
        let tol = 1e-12 * scale;
        let n = matrix.nrows();
        for i in 0..n {
            if matrix[(i, i)] < 0.0 {
                return Err(Error::NotPositiveSemidefinite(matrix[(i, i)]));
            }
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > tol {
                    return Err(Error::invalid("covariance", "must be symmetric"));
                }
            }
        }
        let min_eig = matrix.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 * scale {
            return Err(Error::NotPositiveSemidefinite(min_eig));
        }
        Ok(NoiseCovariance { matrix })
    }

    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        NoiseCovariance::new(DMatrix::from_diagonal(&DVector::from_column_slice(variances)))
    }

    pub fn zeros(dim: usize) -> Self {
        NoiseCovariance {
            matrix: DMatrix::zeros(dim.max(1), dim.max(1)),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        self.matrix.clone().symmetric_eigenvalues()
    }

    /// Builds the sampler used by [`sample_noise`].
    pub fn sampler(&self) -> Sampler {
        Sampler::new(self)
    }
}

/// Strategy for drawing `N(0, K)` vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampler {
    /// Every entry is zero.
    Zero { dim: usize },
    /// Rank one: `Z_k = coeffs[k] * Z_pivot` exactly.
    Proportional { pivot: usize, std: f64, coeffs: Vec<f64> },
    /// `Z = L g` with `L` a Cholesky (or eigen) factor and `g` standard normal.
    Factor { factor: DMatrix<f64> },
}

impl Sampler {
    pub fn new(cov: &NoiseCovariance) -> Sampler {
        let m = &cov.matrix;
        let n = m.nrows();
        let scale = m.diagonal().amax();
        if scale == 0.0 {
            return Sampler::Zero { dim: n };
        }
        let pivot = (0..n).find(|&i| m[(i, i)] > 0.0).unwrap_or(0);
        let cpp = m[(pivot, pivot)];
        let coeffs: Vec<f64> = (0..n).map(|k| m[(k, pivot)] / cpp).collect();
        let rank_one = (0..n).all(|i| (0..n).all(|j| (m[(i, j)] - coeffs[i] * coeffs[j] * cpp).abs() <= 1e-12 * scale));
        if rank_one {
            return Sampler::Proportional {
                pivot,
                std: cpp.sqrt(),
                coeffs,
            };
        }
        if let Some(ch) = m.clone().cholesky() {
            return Sampler::Factor { factor: ch.l() };
        }
        let eig = m.clone().symmetric_eigen();
        let mut factor = eig.eigenvectors.clone();
        for (j, lambda) in eig.eigenvalues.iter().enumerate() {
            let s = lambda.max(0.0).sqrt();
            factor.column_mut(j).scale_mut(s);
        }
        Sampler::Factor { factor }
    }

    pub fn dim(&self) -> usize {
        match self {
            Sampler::Zero { dim } => *dim,
            Sampler::Proportional { coeffs, .. } => coeffs.len(),
            Sampler::Factor { factor } => factor.nrows(),
        }
    }

    /// Fills `out` with one draw.
    pub fn draw_into<R: rand::Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Sampler::Zero { .. } => out.fill(0.0),
            Sampler::Proportional { std, coeffs, .. } => {
                let g: f64 = StandardNormal.sample(rng);
                let z = std * g;
                for (o, c) in out.iter_mut().zip(coeffs) {
                    *o = c * z;
                }
            }
            Sampler::Factor { factor } => {
                let n = factor.ncols();
                let mut g = [0.0f64; 16];
                let mut heap;
                let g: &mut [f64] = if n <= 16 {
                    &mut g[..n]
                } else {
                    heap = vec![0.0; n];
                    &mut heap
                };
                for x in g.iter_mut() {
                    *x = StandardNormal.sample(rng);
                }
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..n).map(|j| factor[(i, j)] * g[j]).sum();
                }
            }
        }
    }

    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        self.draw_into(rng, v.as_mut_slice());
        v
    }
}

/// The generator owned by draw `index` under master seed `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `n` IID draws from `N(0, cov)`. Draw `i` depends only on `(seed, i)`.
///
/// ```
/// use fbcast::channel::{sample_noise, BcSpec};
/// let cov = BcSpec::new(1.0, 1.0, -1.0, 1.0).unwrap().noise_cov();
/// for z in sample_noise(&cov, 5, 3).unwrap() {
///     assert_eq!(z[1], -z[0]);
/// }
/// ```
pub fn sample_noise(cov: &NoiseCovariance, n: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one sample"));
    }
    let cov = NoiseCovariance::new(cov.matrix.clone())?;
    let sampler = cov.sampler();
    Ok((0..n as u64).map(|i| sampler.draw(&mut trial_rng(seed, i))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bc_cov_entries() {
        let k = BcSpec::new(1.0, 1.0, 0.0, 1.0).unwrap().noise_cov();
        assert_eq!(k.matrix(), &DMatrix::identity(2, 2));

        let k = BcSpec::new(2.0, 0.25, 1.0, 1.0).unwrap().noise_cov();
        assert!((k.get(0, 1) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(k.matrix().determinant().abs() < 1e-15);

        let k = BcSpec::new(1.0, 1.0, -1.0, 1.0).unwrap().noise_cov();
        let mut ev: Vec<f64> = k.eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-15 && (ev[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn spec_validation() {
        assert!(BcSpec::new(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(BcSpec::new(1.0, 1.0, 1.5, 1.0).is_err());
        assert!(BcSpec::new(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(BcSpec::new(1.0, 1.0, f64::NAN, 1.0).is_err());
        assert!(KUserSpec::new(vec![1.0, 0.0], 1.0).is_err());
        assert!(IcSpec::new([[1.0, 0.0], [1.0, 1.0]], 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(FeedbackNoiseSpec::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn degraded_classification() {
        let s = BcSpec::new(2.0, 0.25, (1.0f64 / 8.0).sqrt(), 1.0).unwrap();
        assert!(s.is_physically_degraded());
        let s = BcSpec::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(s.classify(DEGENERACY_TOL), Correlation::Degraded);
        let s = BcSpec::new(1.0, 1.0, -1.0, 1.0).unwrap();
        assert_eq!(s.classify(DEGENERACY_TOL), Correlation::Full);
        let s = BcSpec::new(2.0, 0.25, 0.35355, 1.0).unwrap();
        assert_eq!(s.classify(DEGENERACY_TOL), Correlation::Partial);
        assert_eq!(s.classify(1e-5), Correlation::Degraded);
    }

    #[test]
    fn n_alpha_counts_distinct() {
        let s = KUserSpec::new(vec![1.0, -1.0, 1.0, 2.0], 5.0).unwrap();
        assert_eq!(s.n_alpha(), 3);
        assert_eq!(s.reduced().alphas(), &[1.0, -1.0, 2.0]);
        let k = s.noise_cov();
        assert_eq!(k.get(1, 3), -2.0);
    }

    #[test]
    fn covariance_rejects_negative_eigenvalue() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            NoiseCovariance::new(m),
            Err(Error::NotPositiveSemidefinite(_))
        ));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(NoiseCovariance::new(m).is_err());
    }

    #[test]
    fn sampler_kinds() {
        let id = NoiseCovariance::diagonal(&[1.0, 1.0]).unwrap();
        assert!(matches!(id.sampler(), Sampler::Factor { .. }));
        assert!(matches!(NoiseCovariance::zeros(2).sampler(), Sampler::Zero { .. }));
        let full = BcSpec::new(2.0, 0.25, 1.0, 1.0).unwrap().noise_cov();
        assert!(matches!(full.sampler(), Sampler::Proportional { .. }));
    }

    #[test]
    fn rank_one_samples_are_exactly_proportional() {
        let cov = KUserSpec::new(vec![1.0, -1.0, 2.0], 4.0).unwrap().noise_cov();
        let z = &sample_noise(&cov, 1, 11).unwrap()[0];
        assert_eq!(z[1], -z[0]);
        assert_eq!(z[2], 2.0 * z[0]);

        let spec = BcSpec::new(2.0, 0.25, -1.0, 1.0).unwrap();
        for z in sample_noise(&spec.noise_cov(), 100, 5).unwrap() {
            let lhs = z[0] / spec.sigma1();
            let rhs = spec.rho() * z[1] / spec.sigma2();
            assert!((lhs - rhs).abs() <= 1e-15 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn singular_rank_two_falls_back_to_eigen() {
        let a = DVector::from_column_slice(&[1.0, 0.0, 1.0]);
        let b = DVector::from_column_slice(&[0.0, 1.0, 1.0]);
        let m = &a * a.transpose() + &b * b.transpose();
        let cov = NoiseCovariance::new(m).unwrap();
        let s = cov.sampler();
        let z = s.draw(&mut trial_rng(1, 0));
        assert!((z[2] - z[0] - z[1]).abs() < 1e-9);
    }

    #[test]
    fn identity_sample_covariance() {
        let n = 100_000;
        let cov = NoiseCovariance::diagonal(&[1.0, 1.0]).unwrap();
        let zs = sample_noise(&cov, n, 7).unwrap();
        let se = 1.0 / (n as f64).sqrt();
        for i in 0..2 {
            for j in 0..2 {
                let s: f64 = zs.iter().map(|z| z[i] * z[j]).sum::<f64>() / n as f64;
                let (want, sd) = if i == j { (1.0, 2f64.sqrt()) } else { (0.0, 1.0) };
                assert!((s - want).abs() < 4.0 * sd * se, "({i},{j}) = {s}");
            }
        }
    }

    #[test]
    fn sample_covariance_bound_over_seeds() {
        let n = 100_000;
        let cov = NoiseCovariance::diagonal(&[1.0, 1.0]).unwrap();
        let tol = 4.0 / (n as f64).sqrt();
        let passed = (0..20u64)
            .filter(|&seed| {
                let zs = sample_noise(&cov, n, seed).unwrap();
                (0..2).all(|i| {
                    (0..2).all(|j| {
                        let s: f64 = zs.iter().map(|z| z[i] * z[j]).sum::<f64>() / n as f64;
                        (s - if i == j { 1.0 } else { 0.0 }).abs() < tol
                    })
                })
            })
            .count();
        assert!(passed >= 18, "{passed} of 20 seeds within 4/sqrt(n)");
    }

    #[test]
    fn draws_are_keyed_by_index() {
        let cov = NoiseCovariance::diagonal(&[1.0, 2.0]).unwrap();
        let a = sample_noise(&cov, 10, 99).unwrap();
        let b = sample_noise(&cov, 4, 99).unwrap();
        assert_eq!(a[..4], b[..]);
        let c = sample_noise(&cov, 4, 100).unwrap();
        assert_ne!(a[0], c[0]);
    }

    #[test]
    fn spec_round_trips_through_serde() {
        let s = BcSpec::new(2.0, 0.25, 0.3, 10.0).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<BcSpec>(&j).unwrap(), s);
        assert!(serde_json::from_str::<BcSpec>(r#"{"sigma1_sq":1,"sigma2_sq":1,"rho":2,"power":1}"#).is_err());
    }
}
