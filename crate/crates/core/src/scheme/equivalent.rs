use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{BlockScheme, Topology};
use crate::channel::NoiseCovariance;
use crate::rates::{half_log2_1p, Rate};

/// The block viewed as a linear map from symbols and basis noises to
/// transmit and receive signals.
///
/// Transmitter `t` sends `sum_j tx_signal[t][j] Xi_j + sum_r tx_noise[t][r] W_r`
/// and receiver `k` observes `sum_j rx_signal[k][j] Xi_j + sum_r rx_noise[k][r] W_r`,
/// where `W_r` is the length-`eta` sequence of basis noise `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearResponse {
    pub tx_signal: Vec<Vec<DVector<f64>>>,
    pub tx_noise: Vec<Vec<DMatrix<f64>>>,
    pub rx_signal: Vec<Vec<DVector<f64>>>,
    pub rx_noise: Vec<Vec<DMatrix<f64>>>,
}

impl LinearResponse {
    pub fn new(s: &BlockScheme) -> Self {
        let eta = s.eta();
        let users = s.users();
        let m = &s.noise_model().mixing;
        let nb = m.ncols();
        let id = DMatrix::<f64>::identity(eta, eta);
        match s.topology() {
            Topology::Broadcast => {
                let sig: Vec<DVector<f64>> = (0..users).map(|j| s.u(j).clone()).collect();
                let xn: Vec<DMatrix<f64>> = (0..nb)
                    .map(|r| (0..users).fold(DMatrix::zeros(eta, eta), |acc, k| acc + s.b(k) * m[(k, r)]))
                    .collect();
                let rx_noise = (0..users)
                    .map(|k| (0..nb).map(|r| &xn[r] + &id * m[(k, r)]).collect())
                    .collect();
                LinearResponse {
                    tx_signal: vec![sig.clone()],
                    rx_signal: vec![sig; users],
                    tx_noise: vec![xn],
                    rx_noise,
                }
            }
            Topology::Interference { gains } => {
                let n = 2 * eta;
                let mut coupling = DMatrix::<f64>::identity(n, n);
                coupling
                    .view_mut((0, eta), (eta, eta))
                    .copy_from(&(s.b(0) * -gains[0][1]));
                coupling
                    .view_mut((eta, 0), (eta, eta))
                    .copy_from(&(s.b(1) * -gains[1][0]));
                let t = coupling.try_inverse().expect("feedback coupling is invertible");
                let block = |x: &DMatrix<f64>, tx: usize| x.view((tx * eta, 0), (eta, x.ncols())).into_owned();
                let mut tx_signal = vec![Vec::new(); 2];
                let mut tx_noise = vec![Vec::new(); 2];
                let sig_cols: Vec<DMatrix<f64>> = (0..2)
                    .map(|j| {
                        let mut e = DMatrix::zeros(n, 1);
                        e.view_mut((j * eta, 0), (eta, 1)).copy_from(s.u(j));
                        &t * e
                    })
                    .collect();
                let noise_cols: Vec<DMatrix<f64>> = (0..nb)
                    .map(|r| {
                        let mut e = DMatrix::zeros(n, eta);
                        for k in 0..2 {
                            e.view_mut((k * eta, 0), (eta, eta)).copy_from(&(s.b(k) * m[(k, r)]));
                        }
                        &t * e
                    })
                    .collect();
                for tx in 0..2 {
                    tx_signal[tx] = sig_cols.iter().map(|c| block(c, tx).column(0).into_owned()).collect();
                    tx_noise[tx] = noise_cols.iter().map(|c| block(c, tx)).collect();
                }
                let rx_signal = (0..2)
                    .map(|k| {
                        (0..2)
                            .map(|j| &tx_signal[0][j] * gains[k][0] + &tx_signal[1][j] * gains[k][1])
                            .collect()
                    })
                    .collect();
                let rx_noise = (0..2)
                    .map(|k| {
                        (0..nb)
                            .map(|r| &tx_noise[0][r] * gains[k][0] + &tx_noise[1][r] * gains[k][1] + &id * m[(k, r)])
                            .collect()
                    })
                    .collect();
                LinearResponse {
                    tx_signal,
                    tx_noise,
                    rx_signal,
                    rx_noise,
                }
            }
        }
    }

    /// Expected block energy of each transmitter for unit-power symbols and
    /// basis noise covariance `cov`.
    pub fn tx_energy(&self, cov: &NoiseCovariance) -> Vec<f64> {
        self.tx_signal
            .iter()
            .zip(&self.tx_noise)
            .map(|(sig, noise)| {
                let s: f64 = sig.iter().map(|u| u.norm_squared()).sum();
                let mut n = 0.0;
                for (r, a) in noise.iter().enumerate() {
                    for (q, b) in noise.iter().enumerate() {
                        n += cov.get(r, q) * a.dot(b);
                    }
                }
                s + n
            })
            .collect()
    }
}

/// The one-shot channel from the symbols to the receiver statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalentChannel {
    pub eta: usize,
    /// `gains[(k, j)]` is the coefficient of `Xi_j` in `I_k`.
    #[serde(serialize_with = "ser_matrix")]
    pub gains: DMatrix<f64>,
    /// Row `r`, column `t` of entry `k`: coefficient of basis noise `r` at
    /// time `t` in `I_k`.
    #[serde(serialize_with = "ser_matrices")]
    pub noise_coeffs: Vec<DMatrix<f64>>,
    /// Covariance of the residual noises across receivers, counting only
    /// the noise samples in the surviving window.
    #[serde(serialize_with = "ser_matrix")]
    pub residual_cov: DMatrix<f64>,
    /// Direct gain squared over the residual noise variance. Coefficients
    /// that vanish in exact arithmetic are taken as zero here;
    /// [`EquivalentChannel::cancellation`] reports how far the computed
    /// ones are from zero.
    pub snr: Vec<f64>,
    /// `log2(1 + snr) / (2 eta)`.
    pub rates: Vec<Rate>,
    #[serde(skip)]
    gain_scale: DMatrix<f64>,
    #[serde(skip)]
    noise_scale: Vec<DMatrix<f64>>,
    #[serde(skip)]
    window: usize,
}

fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

fn ser_matrices<S: serde::Serializer>(ms: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
    let all: Vec<Vec<Vec<f64>>> = ms
        .iter()
        .map(|m| m.row_iter().map(|r| r.iter().copied().collect()).collect())
        .collect();
    all.serialize(s)
}

/// How far the exact coefficients are from perfect cancellation, each
/// relative to the sum of magnitudes of the terms that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CancellationReport {
    /// Largest relative coefficient of an unintended symbol.
    pub interference: f64,
    /// Largest relative coefficient of a noise sample outside the
    /// surviving window.
    pub canceled_noise: f64,
}

impl CancellationReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.interference <= tol && self.canceled_noise <= tol
    }
}

fn rel(x: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        0.0
    } else {
        x.abs() / scale
    }
}

impl EquivalentChannel {
    pub fn users(&self) -> usize {
        self.gains.nrows()
    }

    pub fn gain(&self, k: usize) -> f64 {
        self.gains[(k, k)]
    }

    pub fn residual_var(&self, k: usize) -> f64 {
        self.residual_cov[(k, k)]
    }

    pub fn cancellation(&self) -> CancellationReport {
        let k = self.users();
        let mut interference = 0.0f64;
        for i in 0..k {
            for j in (0..k).filter(|&j| j != i) {
                interference = interference.max(rel(self.gains[(i, j)], self.gain_scale[(i, j)]));
            }
        }
        let cut = self.eta.saturating_sub(self.window);
        let mut canceled_noise = 0.0f64;
        for (c, sc) in self.noise_coeffs.iter().zip(&self.noise_scale) {
            for r in 0..c.nrows() {
                for t in 0..cut {
                    canceled_noise = canceled_noise.max(rel(c[(r, t)], sc[(r, t)]));
                }
            }
        }
        CancellationReport {
            interference,
            canceled_noise,
        }
    }
}

/// Exact coefficients of every symbol and noise sample in each receiver
/// statistic, by direct matrix algebra.
///
/// ```
/// use fbcast::channel::BcSpec;
/// use fbcast::scheme::{build_bc2_scheme, choose_params_full_corr, equivalent_channel};
/// let spec = BcSpec::new(1.0, 1.0, -1.0, 4.0).unwrap();
/// let params = choose_params_full_corr(&spec).unwrap();
/// let s = build_bc2_scheme(&spec, &params, 3).unwrap();
/// let eq = equivalent_channel(&s, &spec.noise_cov());
/// assert!((eq.gain(0) - 0.4f64.sqrt() * 8.0).abs() < 1e-12);
/// assert!(eq.cancellation().passes(1e-10));
/// ```
pub fn equivalent_channel(scheme: &BlockScheme, cov: &NoiseCovariance) -> EquivalentChannel {
    let lr = LinearResponse::new(scheme);
    let users = scheme.users();
    let eta = scheme.eta();
    let abs_v: Vec<DVector<f64>> = (0..users).map(|k| scheme.v(k).abs()).collect();
    let gains = DMatrix::from_fn(users, users, |k, j| scheme.v(k).dot(&lr.rx_signal[k][j]));
    let gain_scale = DMatrix::from_fn(users, users, |k, j| abs_v[k].dot(&lr.rx_signal[k][j].abs()));
    let nb = cov.dim();
    let noise_coeffs: Vec<DMatrix<f64>> = (0..users)
        .map(|k| {
            let mut c = DMatrix::zeros(nb, eta);
            for r in 0..nb {
                c.row_mut(r)
                    .copy_from(&(lr.rx_noise[k][r].tr_mul(scheme.v(k))).transpose());
            }
            c
        })
        .collect();
    let noise_scale: Vec<DMatrix<f64>> = (0..users)
        .map(|k| {
            let mut c = DMatrix::zeros(nb, eta);
            for r in 0..nb {
                c.row_mut(r)
                    .copy_from(&(lr.rx_noise[k][r].abs().tr_mul(&abs_v[k])).transpose());
            }
            c
        })
        .collect();
    let cut = eta.saturating_sub(scheme.surviving_window());
    let surviving: Vec<DMatrix<f64>> = noise_coeffs
        .iter()
        .map(|c| {
            let mut s = c.clone();
            s.columns_mut(0, cut).fill(0.0);
            s
        })
        .collect();
    let residual_cov = DMatrix::from_fn(users, users, |i, j| {
        let (a, b) = (&surviving[i], &surviving[j]);
        let mut acc = 0.0;
        for r in 0..nb {
            for q in 0..nb {
                acc += cov.get(r, q) * a.row(r).dot(&b.row(q));
            }
        }
        acc
    });
    let snr: Vec<f64> = (0..users)
        .map(|k| gains[(k, k)].powi(2) / residual_cov[(k, k)])
        .collect();
    let rates = snr
        .iter()
        .map(|&x| {
            if x.is_finite() {
                Rate::Finite(half_log2_1p(x) / eta as f64)
            } else {
                Rate::Infinite
            }
        })
        .collect();
    EquivalentChannel {
        eta,
        gains,
        noise_coeffs,
        residual_cov,
        snr,
        rates,
        gain_scale,
        noise_scale,
        window: scheme.surviving_window(),
    }
}
