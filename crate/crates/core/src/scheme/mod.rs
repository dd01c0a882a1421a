//! Successive-noise-cancellation block schemes.
//!
//! A block of `eta` channel uses with feedback is turned into one use of a
//! feedback-free channel from the information symbols `Xi_k` to the
//! receiver statistics `I_k = v_k' Y_k`. The transmitter resends scaled past
//! noise samples through strictly lower-triangular matrices `B_k` so that the
//! receivers' beamformers `v_k` cancel all but the last noise samples and all
//! unintended symbols.

mod build;
mod equivalent;
mod finite;
mod optimize;
mod params;

pub use build::{
    build_bc2_fullcorr_scheme, build_bc2_scheme, build_ic_scheme, build_kuser_scheme, build_p2p_scheme,
    ic_eta_threshold, ic_is_degenerate, kuser_directions, KUserDirections,
};
pub use equivalent::{equivalent_channel, CancellationReport, EquivalentChannel, LinearResponse};
pub use finite::{
    bc2_finite_rates, bc2_limit_rates, full_corr_finite_rates, full_corr_limit_rates, fullcorr_motivation_rates,
    ic_finite_rates, ic_limit_rates, ic_limit_rates_swapped, kuser_finite_rates, kuser_limit_rates, p2p_finite_rate,
    p2p_limit_rate, partial_corr_limit_sum, Bc2FiniteRates,
};
pub use optimize::{bc2_limit_sum_on_boundary, optimize_bc2_sum_rate, OptimizeResult};
pub use params::{
    boundary_q, choose_params_full_corr, choose_params_partial_corr, power_coefficients, PartialCorrChoice,
    SchemeParams, DELTA_TOL,
};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::channel::NoiseCovariance;

/// Which construction produced a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTag {
    P2p,
    Bc2,
    Bc2FullCorr,
    KUser,
    Ic,
}

/// How inputs and noises reach the receivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Topology {
    /// One transmitter: `X = sum_j u_j Xi_j + sum_k B_k Z_k`, `Y_k = X + Z_k`.
    Broadcast,
    /// Two transmitters with feedback from their own receiver:
    /// `X_k = u_k Xi_k + B_k (Y_k - a_kk X_k)`,
    /// `Y_k = a_k1 X_1 + a_k2 X_2 + Z_k`.
    Interference { gains: [[f64; 2]; 2] },
}

/// Receiver noises as linear combinations of basis noises:
/// `Z_k = sum_r mixing[(k, r)] W_r`, with `W` distributed as `N(0, basis)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub basis: NoiseCovariance,
    pub mixing: DMatrix<f64>,
}

impl NoiseModel {
    pub fn receivers(&self) -> usize {
        self.mixing.nrows()
    }

    pub fn basis_dim(&self) -> usize {
        self.mixing.ncols()
    }
}

/// One `eta`-block linear feedback scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockScheme {
    tag: ModelTag,
    eta: usize,
    power: f64,
    u: Vec<DVector<f64>>,
    v: Vec<DVector<f64>>,
    b: Vec<DMatrix<f64>>,
    noise: NoiseModel,
    topology: Topology,
    window: usize,
}

impl BlockScheme {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        tag: ModelTag,
        eta: usize,
        power: f64,
        u: Vec<DVector<f64>>,
        v: Vec<DVector<f64>>,
        b: Vec<DMatrix<f64>>,
        noise: NoiseModel,
        topology: Topology,
        window: usize,
    ) -> Self {
        let k = noise.receivers();
        assert_eq!(u.len(), v.len());
        assert_eq!(v.len(), k);
        assert_eq!(b.len(), k);
        assert!(u.iter().chain(&v).all(|x| x.len() == eta));
        assert!(b.iter().all(|m| m.nrows() == eta && m.ncols() == eta));
        let s = BlockScheme {
            tag,
            eta,
            power,
            u,
            v,
            b,
            noise,
            topology,
            window,
        };
        assert!(s.is_causal());
        s
    }

    pub fn tag(&self) -> ModelTag {
        self.tag
    }

    pub fn eta(&self) -> usize {
        self.eta
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// Number of users (information symbols and receivers).
    pub fn users(&self) -> usize {
        self.u.len()
    }

    pub fn u(&self, k: usize) -> &DVector<f64> {
        &self.u[k]
    }

    pub fn v(&self, k: usize) -> &DVector<f64> {
        &self.v[k]
    }

    /// Feedback matrix applied to receiver `k`'s noise (broadcast) or to
    /// transmitter `k`'s feedback signal (interference).
    pub fn b(&self, k: usize) -> &DMatrix<f64> {
        &self.b[k]
    }

    pub fn noise_model(&self) -> &NoiseModel {
        &self.noise
    }

    /// Basis noise covariance the scheme was designed for.
    pub fn noise_basis(&self) -> &NoiseCovariance {
        &self.noise.basis
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    /// Number of trailing noise samples allowed to survive in `I_k`.
    pub fn surviving_window(&self) -> usize {
        self.window
    }

    /// Every `B_k` is strictly lower triangular.
    pub fn is_causal(&self) -> bool {
        self.b
            .iter()
            .all(|m| (0..self.eta).all(|i| (i..self.eta).all(|j| m[(i, j)] == 0.0)))
    }

    /// Number of transmitters.
    pub fn transmitters(&self) -> usize {
        match self.topology {
            Topology::Broadcast => 1,
            Topology::Interference { .. } => 2,
        }
    }

    /// Expected block energy per transmitter for unit-power symbols.
    pub fn block_energy(&self) -> Vec<f64> {
        LinearResponse::new(self).tx_energy(self.noise_basis())
    }

    /// Block energy budget per transmitter minus the expected energy; the
    /// scheme is feasible when every entry is `>= -1e-9 eta P`.
    pub fn power_slack(&self) -> Vec<f64> {
        let budget = self.eta as f64 * self.power;
        self.block_energy().into_iter().map(|e| budget - e).collect()
    }
}

/// Strict subdiagonal shift `S` with ones on the first subdiagonal.
pub(crate) fn shift(eta: usize) -> DMatrix<f64> {
    DMatrix::from_fn(eta, eta, |i, j| if i == j + 1 { 1.0 } else { 0.0 })
}

/// `(r^(eta-1), r^(eta-2), ..., r, 1)`.
pub(crate) fn geometric(r: f64, eta: usize) -> DVector<f64> {
    DVector::from_fn(eta, |t, _| r.powi((eta - 1 - t) as i32))
}
