//! Monte-Carlo simulation of block transmission with feedback.
//!
//! Each block is run one channel use at a time: transmitters only see past
//! feedback, recover past noise from it, and feed it back through `B_k`.
//! Trial `i` under master seed `s` draws its symbols and noises from
//! [`trial_rng`]`(s, i)`, so summaries do not depend on the thread count.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{trial_rng, NoiseCovariance, Sampler};
use crate::error::{Error, Result};
use crate::rates::{half_log2_1p, Rate, RateReport};
use crate::scheme::{equivalent_channel, BlockScheme, Topology};

/// Largest admissible symbol magnitude.
pub const SYMBOL_CAP: f64 = 10.0;

/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.576;

/// Half-width, in standard errors, of the per-seed agreement test.
pub const PASS_SE: f64 = 3.0;

const CHUNK: usize = 2048;

/// One simulated block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub symbols: Vec<f64>,
    /// `I_k` for each receiver.
    pub outputs: Vec<f64>,
    /// Block energy of each transmitter.
    pub energy: Vec<f64>,
    /// Transmitted signals, one row per transmitter.
    #[serde(skip)]
    pub inputs: DMatrix<f64>,
    /// Basis noise realisation, one row per basis noise.
    #[serde(skip)]
    pub noise: DMatrix<f64>,
}

/// Dense copy of a scheme for the inner simulation loop.
struct Plan {
    eta: usize,
    users: usize,
    nb: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    b: Vec<f64>,
    mixing: Vec<f64>,
    gains: Option<[[f64; 2]; 2]>,
}

struct Work {
    z: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    fb: Vec<f64>,
}

impl Plan {
    fn new(s: &BlockScheme) -> Plan {
        let (eta, users) = (s.eta(), s.users());
        let m = &s.noise_model().mixing;
        let nb = m.ncols();
        let mut b = Vec::with_capacity(users * eta * eta);
        for k in 0..users {
            for t in 0..eta {
                for r in 0..eta {
                    b.push(s.b(k)[(t, r)]);
                }
            }
        }
        Plan {
            eta,
            users,
            nb,
            u: (0..users)
                .flat_map(|k| s.u(k).iter().copied().collect::<Vec<_>>())
                .collect(),
            v: (0..users)
                .flat_map(|k| s.v(k).iter().copied().collect::<Vec<_>>())
                .collect(),
            b,
            mixing: (0..users).flat_map(|k| (0..nb).map(move |r| m[(k, r)])).collect(),
            gains: match s.topology() {
                Topology::Broadcast => None,
                Topology::Interference { gains } => Some(gains),
            },
        }
    }

    fn transmitters(&self) -> usize {
        if self.gains.is_some() {
            2
        } else {
            1
        }
    }

    fn work(&self) -> Work {
        let n = self.users * self.eta;
        Work {
            z: vec![0.0; n],
            x: vec![0.0; self.transmitters() * self.eta],
            y: vec![0.0; n],
            fb: vec![0.0; n],
        }
    }

    /// Runs one block on basis noise `w` (`nb x eta`, row-major); writes
    /// outputs and energies.
    fn run(&self, xi: &[f64], w: &[f64], wk: &mut Work, outputs: &mut [f64], energy: &mut [f64]) {
        let (eta, users, nb) = (self.eta, self.users, self.nb);
        for k in 0..users {
            for t in 0..eta {
                wk.z[k * eta + t] = (0..nb).map(|r| self.mixing[k * nb + r] * w[r * eta + t]).sum();
            }
        }
        for t in 0..eta {
            match self.gains {
                None => {
                    let mut x: f64 = (0..users).map(|j| self.u[j * eta + t] * xi[j]).sum();
                    for k in 0..users {
                        let row = &self.b[(k * eta + t) * eta..(k * eta + t) * eta + t];
                        x += row
                            .iter()
                            .zip(&wk.fb[k * eta..k * eta + t])
                            .map(|(b, f)| b * f)
                            .sum::<f64>();
                    }
                    wk.x[t] = x;
                    for k in 0..users {
                        let y = x + wk.z[k * eta + t];
                        wk.y[k * eta + t] = y;
                        wk.fb[k * eta + t] = y - x;
                    }
                }
                Some(a) => {
                    for k in 0..2 {
                        let row = &self.b[(k * eta + t) * eta..(k * eta + t) * eta + t];
                        wk.x[k * eta + t] = self.u[k * eta + t] * xi[k]
                            + row
                                .iter()
                                .zip(&wk.fb[k * eta..k * eta + t])
                                .map(|(b, f)| b * f)
                                .sum::<f64>();
                    }
                    for k in 0..2 {
                        let y = a[k][0] * wk.x[t] + a[k][1] * wk.x[eta + t] + wk.z[k * eta + t];
                        wk.y[k * eta + t] = y;
                        wk.fb[k * eta + t] = y - a[k][k] * wk.x[k * eta + t];
                    }
                }
            }
        }
        for k in 0..users {
            outputs[k] = (0..eta).map(|t| self.v[k * eta + t] * wk.y[k * eta + t]).sum();
        }
        for (tx, e) in energy.iter_mut().enumerate() {
            *e = wk.x[tx * eta..(tx + 1) * eta].iter().map(|x| x * x).sum();
        }
    }
}

fn check_symbols(scheme: &BlockScheme, symbols: &[f64]) -> Result<()> {
    if symbols.len() != scheme.users() {
        return Err(Error::invalid(
            "symbols",
            format!("expected {} symbols, got {}", scheme.users(), symbols.len()),
        ));
    }
    if symbols.iter().any(|x| !(x.abs() <= SYMBOL_CAP)) {
        return Err(Error::invalid("symbols", format!("|Xi| must be <= {SYMBOL_CAP}")));
    }
    Ok(())
}

fn check_cov(scheme: &BlockScheme, cov: &NoiseCovariance) -> Result<()> {
    if cov.dim() != scheme.noise_model().basis_dim() {
        return Err(Error::invalid(
            "cov",
            format!(
                "dimension {} does not match the scheme's {} basis noises",
                cov.dim(),
                scheme.noise_model().basis_dim()
            ),
        ));
    }
    Ok(())
}

/// Runs one block on the given basis noise realisation (`nb x eta`).
pub fn simulate_with_noise(scheme: &BlockScheme, symbols: &[f64], noise: &DMatrix<f64>) -> Result<TrialResult> {
    check_symbols(scheme, symbols)?;
    let plan = Plan::new(scheme);
    if noise.nrows() != plan.nb || noise.ncols() != plan.eta {
        return Err(Error::invalid("noise", format!("must be {} x {}", plan.nb, plan.eta)));
    }
    let w: Vec<f64> = noise.transpose().as_slice().to_vec();
    let mut wk = plan.work();
    let mut outputs = vec![0.0; plan.users];
    let mut energy = vec![0.0; plan.transmitters()];
    plan.run(symbols, &w, &mut wk, &mut outputs, &mut energy);
    let inputs = DMatrix::from_row_slice(plan.transmitters(), plan.eta, &wk.x);
    Ok(TrialResult {
        symbols: symbols.to_vec(),
        outputs,
        energy,
        inputs,
        noise: noise.clone(),
    })
}

fn draw_noise<R: Rng + ?Sized>(sampler: &Sampler, rng: &mut R, nb: usize, eta: usize, w: &mut [f64]) {
    let mut col = [0.0f64; 16];
    let mut heap;
    let col: &mut [f64] = if nb <= 16 {
        &mut col[..nb]
    } else {
        heap = vec![0.0; nb];
        &mut heap
    };
    for t in 0..eta {
        sampler.draw_into(rng, col);
        for r in 0..nb {
            w[r * eta + t] = col[r];
        }
    }
}

/// Runs one block with a fresh noise realisation drawn under `seed`.
pub fn simulate_block(scheme: &BlockScheme, cov: &NoiseCovariance, symbols: &[f64], seed: u64) -> Result<TrialResult> {
    check_cov(scheme, cov)?;
    let (nb, eta) = (cov.dim(), scheme.eta());
    let mut w = vec![0.0; nb * eta];
    draw_noise(&cov.sampler(), &mut trial_rng(seed, 0), nb, eta, &mut w);
    simulate_with_noise(scheme, symbols, &DMatrix::from_row_slice(nb, eta, &w))
}

/// Sufficient statistics of a batch of trials.
#[derive(Clone)]
struct Moments {
    xtx: DMatrix<f64>,
    xty: DMatrix<f64>,
    yty: Vec<f64>,
    energy: Vec<f64>,
}

impl Moments {
    fn zeros(users: usize, tx: usize) -> Self {
        Moments {
            xtx: DMatrix::zeros(users, users),
            xty: DMatrix::zeros(users, users),
            yty: vec![0.0; users],
            energy: vec![0.0; tx],
        }
    }

    fn merge(mut self, o: &Moments) -> Self {
        self.xtx += &o.xtx;
        self.xty += &o.xty;
        for (a, b) in self.yty.iter_mut().zip(&o.yty) {
            *a += b;
        }
        for (a, b) in self.energy.iter_mut().zip(&o.energy) {
            *a += b;
        }
        self
    }
}

fn run_chunk(plan: &Plan, sampler: &Sampler, seed: u64, range: std::ops::Range<u64>) -> Moments {
    let (users, tx) = (plan.users, plan.transmitters());
    let mut m = Moments::zeros(users, tx);
    let mut wk = plan.work();
    let mut w = vec![0.0; plan.nb * plan.eta];
    let mut xi = vec![0.0; users];
    let mut out = vec![0.0; users];
    let mut en = vec![0.0; tx];
    let a = 3f64.sqrt();
    for i in range {
        let mut rng = trial_rng(seed, i);
        for x in xi.iter_mut() {
            *x = rng.random_range(-a..=a);
        }
        draw_noise(sampler, &mut rng, plan.nb, plan.eta, &mut w);
        plan.run(&xi, &w, &mut wk, &mut out, &mut en);
        for p in 0..users {
            for q in 0..users {
                m.xtx[(p, q)] += xi[p] * xi[q];
                m.xty[(p, q)] += xi[p] * out[q];
            }
            m.yty[p] += out[p] * out[p];
        }
        for t in 0..tx {
            m.energy[t] += en[t];
        }
    }
    m
}

/// Empirical equivalent channel from `trials` blocks with symbols uniform on
/// `[-sqrt 3, sqrt 3]`, compared against the analytic one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub trials: usize,
    pub eta: usize,
    /// Least-squares direct gains.
    pub gains: Vec<f64>,
    pub gain_se: Vec<f64>,
    /// Largest least-squares coefficient of an unintended symbol.
    pub max_cross_gain: f64,
    pub residual_var: Vec<f64>,
    pub residual_var_se: Vec<f64>,
    pub analytic_gains: Vec<f64>,
    pub analytic_residual_var: Vec<f64>,
    /// Mean block energy per transmitter.
    pub mean_energy: Vec<f64>,
    /// `eta P`.
    pub energy_budget: f64,
    pub gains_pass: bool,
    pub residual_pass: bool,
    pub power_pass: bool,
}

impl SimSummary {
    /// Half-widths of the 99% confidence intervals of the gains.
    pub fn gain_ci(&self) -> Vec<f64> {
        self.gain_se.iter().map(|s| Z99 * s).collect()
    }

    /// Half-widths of the 99% confidence intervals of the residual variances.
    pub fn residual_var_ci(&self) -> Vec<f64> {
        self.residual_var_se.iter().map(|s| Z99 * s).collect()
    }

    pub fn pass(&self) -> bool {
        self.gains_pass && self.residual_pass && self.power_pass
    }
}

/// Simulates `trials` independent blocks in parallel and summarises them.
///
/// ```
/// use fbcast::scheme::build_p2p_scheme;
/// use fbcast::sim::run_sim;
/// let s = build_p2p_scheme(4.0, 1.0, 2).unwrap();
/// let sum = run_sim(&s, s.noise_basis(), 20_000, 1).unwrap();
/// assert!(sum.power_pass);
/// assert!((sum.gains[0] - sum.analytic_gains[0]).abs() < 5.0 * sum.gain_se[0]);
/// ```
pub fn run_sim(scheme: &BlockScheme, cov: &NoiseCovariance, trials: usize, seed: u64) -> Result<SimSummary> {
    check_cov(scheme, cov)?;
    let users = scheme.users();
    if trials <= users {
        return Err(Error::invalid("trials", format!("need more than {users} trials")));
    }
    let plan = Plan::new(scheme);
    let sampler = cov.sampler();
    let n = trials as u64;
    let chunks: Vec<Moments> = (0..n.div_ceil(CHUNK as u64))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK as u64;
            run_chunk(&plan, &sampler, seed, lo..(lo + CHUNK as u64).min(n))
        })
        .collect();
    let m = chunks
        .iter()
        .fold(Moments::zeros(users, plan.transmitters()), |acc, c| acc.merge(c));

    let inv = m
        .xtx
        .clone()
        .try_inverse()
        .ok_or(Error::invalid("trials", "symbol Gram matrix is singular"))?;
    let coef = &inv * &m.xty;
    let dof = (trials - users) as f64;
    let eq = equivalent_channel(scheme, cov);
    let mut gains = Vec::with_capacity(users);
    let mut gain_se = Vec::with_capacity(users);
    let mut residual_var = Vec::with_capacity(users);
    let mut residual_var_se = Vec::with_capacity(users);
    let mut max_cross_gain = 0.0f64;
    for k in 0..users {
        let g = coef.column(k);
        let rss = (m.yty[k] - g.dot(&m.xty.column(k))).max(0.0);
        let s2 = rss / dof;
        gains.push(g[k]);
        gain_se.push((s2 * inv[(k, k)]).sqrt());
        residual_var.push(s2);
        residual_var_se.push(s2 * (2.0 / dof).sqrt());
        for j in (0..users).filter(|&j| j != k) {
            max_cross_gain = max_cross_gain.max(g[j].abs());
        }
    }
    let analytic_gains: Vec<f64> = (0..users).map(|k| eq.gain(k)).collect();
    let analytic_residual_var: Vec<f64> = (0..users).map(|k| eq.residual_var(k)).collect();
    let within = |est: &[f64], se: &[f64], truth: &[f64]| {
        est.iter()
            .zip(se)
            .zip(truth)
            .all(|((e, s), t)| (e - t).abs() <= PASS_SE * s + 1e-12 * t.abs())
    };
    let mean_energy: Vec<f64> = m.energy.iter().map(|e| e / trials as f64).collect();
    let energy_budget = scheme.eta() as f64 * scheme.power();
    Ok(SimSummary {
        trials,
        eta: scheme.eta(),
        gains_pass: within(&gains, &gain_se, &analytic_gains),
        residual_pass: within(&residual_var, &residual_var_se, &analytic_residual_var),
        power_pass: mean_energy.iter().all(|&e| e <= energy_budget * (1.0 + 1e-2)),
        gains,
        gain_se,
        max_cross_gain,
        residual_var,
        residual_var_se,
        analytic_gains,
        analytic_residual_var,
        mean_energy,
        energy_budget,
    })
}

/// Rates of the measured equivalent channel with 99% confidence bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalRate {
    pub report: RateReport,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl EmpiricalRate {
    pub fn contains(&self, k: usize, rate: f64) -> bool {
        self.lower[k] <= rate && rate <= self.upper[k]
    }
}

/// `log2(1 + g^2 / s^2) / (2 eta)` per user, with a delta-method interval.
pub fn empirical_rate(summary: &SimSummary) -> EmpiricalRate {
    let eta = summary.eta as f64;
    let mut rates = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for k in 0..summary.gains.len() {
        let (g, v) = (summary.gains[k], summary.residual_var[k]);
        if v == 0.0 {
            rates.push(Rate::Infinite);
            lower.push(f64::INFINITY);
            upper.push(f64::INFINITY);
            continue;
        }
        let snr = g * g / v;
        let r = half_log2_1p(snr) / eta;
        let sd_ln_snr = ((2.0 * summary.gain_se[k] / g).powi(2) + (summary.residual_var_se[k] / v).powi(2)).sqrt();
        let slope = snr / (1.0 + snr) / (2.0 * eta * std::f64::consts::LN_2);
        let h = Z99 * slope * sd_ln_snr;
        rates.push(Rate::Finite(r));
        lower.push((r - h).max(0.0));
        upper.push(r + h);
    }
    EmpiricalRate {
        report: RateReport::new("empirical equivalent channel", rates),
        lower,
        upper,
    }
}

/// Analytic noise-only output `I_k` for a given noise realisation.
pub fn analytic_noise_output(scheme: &BlockScheme, noise: &DMatrix<f64>, k: usize) -> f64 {
    let eq = equivalent_channel(scheme, scheme.noise_basis());
    eq.noise_coeffs[k].component_mul(noise).sum()
}
