//! Subcommand bodies. Each validates its whole configuration before
//! computing anything and returns the rendered output.

use rayon::prelude::*;
use serde::Serialize;

use super::csv::Table;
use super::{parse_etas, parse_grid, parse_list, CliError, Model, Opts, Output, DEFAULT_TOL};
use crate::channel::{BcSpec, Correlation, FeedbackNoiseSpec, IcSpec, KUserSpec, NoiseCovariance, DEGENERACY_TOL};
use crate::rates::{
    cutset_single_cut, cutset_two_cuts, half_log2_1p, hi_snr_branch, hi_snr_sum_capacity_tol, ic_cutset_bounds,
    ic_genie_mac_bound, less_noisy_sum_capacity, less_noisy_variances, linspace, logspace, no_feedback_sum_capacity,
    power_offset, prelog_estimate, HiSnrBranch, Rate,
};
use crate::row;
use crate::schedule::{generalized_prelog, schedule_params, ScheduleSpec};
use crate::scheme::{
    bc2_finite_rates, bc2_limit_rates, build_bc2_scheme, build_ic_scheme, build_kuser_scheme, build_p2p_scheme,
    choose_params_full_corr, choose_params_partial_corr, equivalent_channel, full_corr_limit_rates, ic_eta_threshold,
    ic_finite_rates, ic_is_degenerate, ic_limit_rates, ic_limit_rates_swapped, kuser_finite_rates, kuser_limit_rates,
    optimize_bc2_sum_rate, p2p_finite_rate, p2p_limit_rate, BlockScheme, SchemeParams,
};
use crate::sim::{empirical_rate, run_sim, PASS_SE};

const DEFAULT_EPS: f64 = 0.1;
const DEFAULT_TRIALS: usize = 100_000;
const CANCEL_TOL: f64 = 1e-10;
const RATE_TOL: f64 = 1e-9;
const POWER_TOL: f64 = 1e-9;
const SWEEP_RHOS: [f64; 5] = [-0.85, -0.95, -0.99, -0.999, -0.9999];

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn model(o: &Opts) -> Model {
    o.model.unwrap_or(Model::Bc2)
}

fn powers(o: &Opts, default: Option<Vec<f64>>) -> Result<Vec<f64>, CliError> {
    let grid = match (&o.p, default) {
        (Some(s), _) => parse_grid("p", s)?,
        (None, Some(d)) => d,
        (None, None) => return Err(input("p: missing --p")),
    };
    if let Some(p) = grid.iter().find(|&&p| !(p > 0.0)) {
        return Err(input(format!("p: P values must be > 0, got {p}")));
    }
    Ok(grid)
}

fn rhos(o: &Opts, default: &[f64]) -> Result<Vec<f64>, CliError> {
    let grid = match &o.rho {
        Some(s) => parse_grid("rho", s)?,
        None => default.to_vec(),
    };
    if let Some(r) = grid.iter().find(|r| r.abs() > 1.0) {
        return Err(input(format!("rho: must lie in [-1, 1], got {r}")));
    }
    Ok(grid)
}

fn single(name: &str, grid: &[f64]) -> Result<f64, CliError> {
    match grid {
        [x] => Ok(*x),
        _ => Err(input(format!("{name}: this command takes a single value"))),
    }
}

fn variances(o: &Opts, d1: f64, d2: f64) -> (f64, f64) {
    (o.s1.unwrap_or(d1), o.s2.unwrap_or(d2))
}

fn tol(o: &Opts) -> Result<f64, CliError> {
    let t = o.tol.unwrap_or(DEFAULT_TOL);
    if !(t >= 0.0 && t.is_finite()) {
        return Err(input(format!("tol: must be finite and >= 0, got {t}")));
    }
    Ok(t)
}

fn eps(o: &Opts) -> Result<f64, CliError> {
    let e = o.eps.unwrap_or(DEFAULT_EPS);
    if !(e > 0.0 && e < 1.0) {
        return Err(input(format!("eps: must lie in (0, 1), got {e}")));
    }
    Ok(e)
}

fn etas(o: &Opts, default: Vec<usize>) -> Result<Vec<usize>, CliError> {
    match &o.eta {
        Some(s) => parse_etas(s),
        None => Ok(default),
    }
}

fn alphas(o: &Opts) -> Result<Vec<f64>, CliError> {
    match &o.alphas {
        Some(s) => parse_list("alphas", s),
        None => Err(input("alphas: missing --alphas for model bck")),
    }
}

fn gains(o: &Opts) -> Result<[[f64; 2]; 2], CliError> {
    let g = match &o.gains {
        Some(s) => parse_list("gains", s)?,
        None => return Err(input("gains: missing --gains a11,a12,a21,a22 for model ic")),
    };
    match g[..] {
        [a11, a12, a21, a22] => Ok([[a11, a12], [a21, a22]]),
        _ => Err(input(format!("gains: need 4 values, got {}", g.len()))),
    }
}

fn feedback_noise(o: &Opts) -> Result<FeedbackNoiseSpec, CliError> {
    Ok(FeedbackNoiseSpec::new(o.sw1.unwrap_or(1.0), o.sw2.unwrap_or(1.0))?)
}

fn ok_or_nan(r: crate::Result<f64>) -> f64 {
    r.unwrap_or(f64::NAN)
}

fn rate_or_nan(r: &crate::Result<Vec<Rate>>, k: usize) -> Rate {
    match r {
        Ok(v) => v[k],
        Err(_) => Rate::Finite(f64::NAN),
    }
}

fn kuser_default_etas(spec: &KUserSpec) -> Vec<usize> {
    let k = spec.n_alpha();
    (k..=k + 2).collect()
}

/// Parameters of the two-user scheme: explicit `--delta`/`--q`, else the
/// closed-form choice for the correlation class.
fn bc2_params(o: &Opts, spec: &BcSpec) -> Result<SchemeParams, CliError> {
    match (o.delta, o.q) {
        (Some(d), Some(q)) => Ok(SchemeParams::new(d, q)?),
        (None, None) => closed_params(spec, eps(o)?).map_err(CliError::from),
        _ => Err(input("delta, q: give both or neither")),
    }
}

fn closed_params(spec: &BcSpec, eps: f64) -> crate::Result<SchemeParams> {
    match spec.classify(DEGENERACY_TOL) {
        Correlation::Degraded => Err(crate::Error::PhysicallyDegraded { rho: spec.rho() }),
        Correlation::Full => choose_params_full_corr(spec),
        Correlation::Partial => choose_params_partial_corr(spec, eps)?.require_feasible(spec.power()),
    }
}

fn branch_name(b: HiSnrBranch) -> &'static str {
    match b {
        HiSnrBranch::Degraded => "degraded",
        HiSnrBranch::TwoLinks => "two_links",
        HiSnrBranch::Cooperative => "cooperative",
    }
}

/// `rates`: every applicable bound and achievable rate per grid point.
/// Rates that do not apply at a point are written as `nan`.
pub fn cmd_rates(o: &Opts) -> Result<Output, CliError> {
    let table = match model(o) {
        Model::P2p => rates_p2p(o)?,
        Model::Bc2 => rates_bc2(o)?,
        Model::Bck => rates_bck(o)?,
        Model::Ic => rates_ic(o)?,
    };
    Ok(Output::ok(table.render()))
}

fn rates_p2p(o: &Opts) -> Result<Table, CliError> {
    let ps = powers(o, None)?;
    let s = o.s1.unwrap_or(1.0);
    if !(s > 0.0) {
        return Err(input(format!("s1: variance must be > 0, got {s}")));
    }
    let es = etas(o, vec![1, 2, 3, 4])?;
    let mut t = Table::new(&["P", "sigma_sq", "eta", "finite_rate", "limit_rate", "capacity"]);
    for &p in &ps {
        for &e in &es {
            t.push(row![
                p,
                s,
                e,
                p2p_finite_rate(p, s, e),
                p2p_limit_rate(p, s),
                half_log2_1p(p / s)
            ]);
        }
    }
    Ok(t)
}

fn rates_bc2(o: &Opts) -> Result<Table, CliError> {
    let ps = powers(o, None)?;
    let rs = rhos(o, &[0.0])?;
    let (s1, s2) = variances(o, 1.0, 1.0);
    let tol = tol(o)?;
    let eps = eps(o)?;
    let es = etas(o, vec![2, 3, 4])?;
    let specs = ps
        .iter()
        .flat_map(|&p| rs.iter().map(move |&r| BcSpec::new(s1, s2, r, p)))
        .collect::<crate::Result<Vec<_>>>()?;
    let mut t = Table::new(&[
        "P",
        "rho",
        "sigma1_sq",
        "sigma2_sq",
        "degraded",
        "full_corr",
        "branch",
        "no_feedback",
        "hi_snr",
        "cutset_two_cuts",
        "cutset_single_cut",
        "achievable_sum",
        "achievable_delta",
        "achievable_q",
        "closed_r1",
        "closed_r2",
        "closed_sum",
        "eta",
        "finite_r1",
        "finite_r2",
    ]);
    let rows: Vec<Vec<Vec<String>>> = specs
        .par_iter()
        .map(|spec| {
            let branch = hi_snr_branch(spec, tol);
            let degraded = branch == HiSnrBranch::Degraded;
            let opt = optimize_bc2_sum_rate(spec);
            let closed = if degraded { None } else { closed_params(spec, eps).ok() };
            let closed_rates = match (closed, spec.is_fully_correlated()) {
                (_, true) if !degraded => full_corr_limit_rates(spec).ok(),
                (Some(c), _) => Some(bc2_limit_rates(&c)),
                _ => None,
            };
            let (c1, c2, cs) = match &closed_rates {
                Some(r) => (r.rates[0], r.rates[1], r.sum()),
                None => (Rate::Finite(f64::NAN), Rate::Finite(f64::NAN), Rate::Finite(f64::NAN)),
            };
            let finite_params = closed.or(opt.params);
            let (od, oq) = opt.params.map_or((f64::NAN, f64::NAN), |x| (x.delta(), x.q()));
            es.iter()
                .map(|&e| {
                    let fin = finite_params
                        .ok_or(crate::Error::Undefined("no feasible parameters"))
                        .and_then(|x| bc2_finite_rates(spec, &x, e))
                        .map(|f| f.exact.rates);
                    row![
                        spec.power(),
                        spec.rho(),
                        s1,
                        s2,
                        degraded,
                        (1.0 - spec.rho().abs()) <= tol,
                        branch_name(branch),
                        no_feedback_sum_capacity(spec),
                        hi_snr_sum_capacity_tol(spec, tol),
                        cutset_two_cuts(spec),
                        cutset_single_cut(spec),
                        opt.sum_rate,
                        od,
                        oq,
                        c1,
                        c2,
                        cs,
                        e,
                        rate_or_nan(&fin, 0),
                        rate_or_nan(&fin, 1),
                    ]
                })
                .collect()
        })
        .collect();
    rows.into_iter().flatten().for_each(|r| t.push(r));
    Ok(t)
}

fn rates_bck(o: &Opts) -> Result<Table, CliError> {
    let ps = powers(o, None)?;
    let al = alphas(o)?;
    let specs = ps
        .iter()
        .map(|&p| KUserSpec::new(al.clone(), p))
        .collect::<crate::Result<Vec<_>>>()?;
    let es = etas(o, kuser_default_etas(&specs[0]))?;
    let mut t = Table::new(&["P", "eta", "user", "alpha", "limit_rate", "finite_rate", "cutset_rate"]);
    for spec in &specs {
        let lim = kuser_limit_rates(spec);
        for &e in &es {
            let fin = kuser_finite_rates(spec, e).map(|r| r.rates);
            for (k, &a) in spec.alphas().iter().enumerate() {
                let cut = half_log2_1p(spec.power() / (a * a));
                t.push(row![spec.power(), e, k + 1, a, lim.rates[k], rate_or_nan(&fin, k), cut]);
            }
        }
    }
    Ok(t)
}

fn ic_specs(o: &Opts, ps: &[f64], rs: &[f64]) -> Result<Vec<IcSpec>, CliError> {
    let g = gains(o)?;
    let (s1, s2) = variances(o, 1.0, 1.0);
    Ok(ps
        .iter()
        .flat_map(|&p| rs.iter().map(move |&r| IcSpec::new(g, s1, s2, r, p)))
        .collect::<crate::Result<Vec<_>>>()?)
}

fn rates_ic(o: &Opts) -> Result<Table, CliError> {
    let ps = powers(o, None)?;
    let rs = rhos(o, &[-1.0])?;
    let specs = ic_specs(o, &ps, &rs)?;
    let es = etas(o, vec![2, 3, 4])?;
    let mut t = Table::new(&[
        "P",
        "rho",
        "degenerate",
        "eta_threshold",
        "limit_r1",
        "limit_r2",
        "swapped_r1",
        "swapped_r2",
        "cutset_r1",
        "cutset_r2",
        "genie_sum",
        "eta",
        "finite_r1",
        "finite_r2",
    ]);
    for ic in &specs {
        let lim = ic_limit_rates(ic).map(|r| r.rates);
        let sw = ic_limit_rates_swapped(ic).map(|r| r.rates);
        let (c1, c2) = ic_cutset_bounds(ic);
        let thr = ic_eta_threshold(ic);
        for &e in &es {
            let fin = if e >= thr {
                ic_finite_rates(ic, e).map(|r| r.rates)
            } else {
                Err(crate::Error::Undefined("eta below threshold"))
            };
            t.push(row![
                ic.power(),
                ic.rho(),
                ic_is_degenerate(ic),
                thr,
                rate_or_nan(&lim, 0),
                rate_or_nan(&lim, 1),
                rate_or_nan(&sw, 0),
                rate_or_nan(&sw, 1),
                c1,
                c2,
                ok_or_nan(ic_genie_mac_bound(ic)),
                e,
                rate_or_nan(&fin, 0),
                rate_or_nan(&fin, 1),
            ]);
        }
    }
    Ok(t)
}

/// `bounds`: capacity upper bounds per grid point.
pub fn cmd_bounds(o: &Opts) -> Result<Output, CliError> {
    let mut t;
    match model(o) {
        Model::P2p => {
            let ps = powers(o, None)?;
            let s = o.s1.unwrap_or(1.0);
            if !(s > 0.0) {
                return Err(input(format!("s1: variance must be > 0, got {s}")));
            }
            t = Table::new(&["P", "sigma_sq", "capacity"]);
            for p in ps {
                t.push(row![p, s, half_log2_1p(p / s)]);
            }
        }
        Model::Bc2 => {
            let ps = powers(o, None)?;
            let rs = rhos(o, &[0.0])?;
            let (s1, s2) = variances(o, 1.0, 1.0);
            let tol = tol(o)?;
            let fb = feedback_noise(o)?;
            let specs = ps
                .iter()
                .flat_map(|&p| rs.iter().map(move |&r| BcSpec::new(s1, s2, r, p)))
                .collect::<crate::Result<Vec<_>>>()?;
            t = Table::new(&[
                "P",
                "rho",
                "sigma1_sq",
                "sigma2_sq",
                "degraded",
                "full_corr",
                "no_feedback",
                "hi_snr",
                "power_offset",
                "cutset_two_cuts",
                "cutset_single_cut",
                "less_noisy_sigma1_sq",
                "less_noisy_sigma2_sq",
                "less_noisy_sum",
            ]);
            for spec in &specs {
                let (v1, v2) = less_noisy_variances(spec, &fb)?;
                t.push(row![
                    spec.power(),
                    spec.rho(),
                    s1,
                    s2,
                    hi_snr_branch(spec, tol) == HiSnrBranch::Degraded,
                    (1.0 - spec.rho().abs()) <= tol,
                    no_feedback_sum_capacity(spec),
                    hi_snr_sum_capacity_tol(spec, tol),
                    ok_or_nan(power_offset(s1, s2, spec.rho())),
                    cutset_two_cuts(spec),
                    cutset_single_cut(spec),
                    v1,
                    v2,
                    less_noisy_sum_capacity(spec, &fb)?,
                ]);
            }
        }
        Model::Bck => {
            let ps = powers(o, None)?;
            let al = alphas(o)?;
            let specs = ps
                .iter()
                .map(|&p| KUserSpec::new(al.clone(), p))
                .collect::<crate::Result<Vec<_>>>()?;
            t = Table::new(&["P", "no_feedback", "cutset_sum"]);
            for spec in &specs {
                let p = spec.power();
                let min_var = spec.alphas().iter().map(|a| a * a).fold(f64::INFINITY, f64::min);
                let cut: f64 = spec.alphas().iter().map(|a| half_log2_1p(p / (a * a))).sum();
                t.push(row![p, half_log2_1p(p / min_var), cut]);
            }
        }
        Model::Ic => {
            let ps = powers(o, None)?;
            let rs = rhos(o, &[-1.0])?;
            let specs = ic_specs(o, &ps, &rs)?;
            t = Table::new(&["P", "rho", "cutset_r1", "cutset_r2", "cutset_sum", "genie_sum"]);
            for ic in &specs {
                let (c1, c2) = ic_cutset_bounds(ic);
                t.push(row![
                    ic.power(),
                    ic.rho(),
                    c1,
                    c2,
                    c1 + c2,
                    ok_or_nan(ic_genie_mac_bound(ic))
                ]);
            }
        }
    }
    Ok(Output::ok(t.render()))
}

/// `fig3`: the power offset over a correlation grid.
pub fn cmd_fig3(o: &Opts) -> Result<Output, CliError> {
    let (s1, s2) = variances(o, 2.0, 0.25);
    let rs = rhos(o, &linspace(-0.9, 0.95, 1000))?;
    if let Some(r) = rs.iter().find(|r| r.abs() >= 1.0) {
        return Err(input(format!("rho: fig3 needs |rho| < 1, got {r}")));
    }
    if !(s1 > 0.0 && s2 > 0.0) {
        return Err(input("s1, s2: variances must be > 0"));
    }
    let mut t = Table::new(&["rho", "gamma"]);
    for r in rs {
        t.push(row![r, power_offset(s1, s2, r)?]);
    }
    Ok(Output::ok(t.render()))
}

/// `fig4`: optimized sum rate over `0.5 log2(1 + P / s1)`.
pub fn cmd_fig4(o: &Opts) -> Result<Output, CliError> {
    let ps = powers(o, Some(logspace(1.0, 1e4, 41)))?;
    let rs = rhos(o, &SWEEP_RHOS)?;
    let (s1, s2) = variances(o, 1.0, 1.0);
    let specs = ps
        .iter()
        .flat_map(|&p| rs.iter().map(move |&r| BcSpec::new(s1, s2, r, p)))
        .collect::<crate::Result<Vec<_>>>()?;
    let ratios: Vec<f64> = specs
        .par_iter()
        .map(|s| optimize_bc2_sum_rate(s).sum_rate / half_log2_1p(s.power() / s1))
        .collect();
    let mut t = Table::new(&["P", "rho", "ratio"]);
    for (s, r) in specs.iter().zip(ratios) {
        t.push(row![s.power(), s.rho(), r]);
    }
    Ok(Output::ok(t.render()))
}

/// A scheme together with its closed-form finite-block rates, if any.
struct Built {
    scheme: BlockScheme,
    closed: Option<Vec<Rate>>,
}

fn default_etas(o: &Opts) -> Result<Vec<usize>, CliError> {
    let min = match model(o) {
        Model::P2p => 1,
        Model::Bc2 => 3,
        Model::Bck => KUserSpec::new(alphas(o)?, 1.0)?.n_alpha(),
        Model::Ic => {
            let p = single("p", &powers(o, None)?)?;
            let r = single("rho", &rhos(o, &[-1.0])?)?;
            ic_eta_threshold(&ic_specs(o, &[p], &[r])?[0])
        }
    };
    etas(o, (min..=min + 3).collect())
}

fn build(o: &Opts, eta: usize) -> Result<Built, CliError> {
    let p = single("p", &powers(o, None)?)?;
    match model(o) {
        Model::P2p => {
            let s = o.s1.unwrap_or(1.0);
            let scheme = build_p2p_scheme(p, s, eta)?;
            Ok(Built {
                scheme,
                closed: Some(vec![Rate::Finite(p2p_finite_rate(p, s, eta))]),
            })
        }
        Model::Bc2 => {
            let r = single("rho", &rhos(o, &[0.0])?)?;
            let (s1, s2) = variances(o, 1.0, 1.0);
            let spec = BcSpec::new(s1, s2, r, p)?;
            let params = bc2_params(o, &spec)?;
            let scheme = build_bc2_scheme(&spec, &params, eta)?;
            let closed = if eta >= 2 {
                Some(bc2_finite_rates(&spec, &params, eta)?.exact.rates)
            } else {
                None
            };
            Ok(Built { scheme, closed })
        }
        Model::Bck => {
            let spec = KUserSpec::new(alphas(o)?, p)?;
            let scheme = build_kuser_scheme(&spec, eta)?;
            Ok(Built {
                scheme,
                closed: Some(kuser_finite_rates(&spec, eta)?.rates),
            })
        }
        Model::Ic => {
            let r = single("rho", &rhos(o, &[-1.0])?)?;
            let ic = ic_specs(o, &[p], &[r])?.remove(0);
            let scheme = build_ic_scheme(&ic, eta)?;
            Ok(Built {
                scheme,
                closed: Some(ic_finite_rates(&ic, eta)?.rates),
            })
        }
    }
}

fn rel_diff(a: Rate, b: Rate) -> f64 {
    match (a, b) {
        (Rate::Infinite, Rate::Infinite) => 0.0,
        (Rate::Finite(x), Rate::Finite(y)) => (x - y).abs() / y.abs().max(1.0),
        _ => f64::INFINITY,
    }
}

/// One named check of the verification report.
#[derive(Debug, Clone, Serialize)]
struct Check {
    eta: usize,
    name: &'static str,
    value: f64,
    tol: f64,
    pass: bool,
}

#[derive(Debug, Clone, Serialize)]
struct VerifyReport {
    model: Model,
    etas: Vec<usize>,
    trials: Option<usize>,
    seed: u64,
    pass: bool,
    first_failure: Option<String>,
    checks: Vec<Check>,
}

fn check(eta: usize, name: &'static str, value: f64, tol: f64) -> Check {
    Check {
        eta,
        name,
        value,
        tol,
        pass: value <= tol,
    }
}

/// `scheme-verify`: causality, cancellation, power, closed-form rates and,
/// with `--trials`, Monte-Carlo agreement for every block length.
pub fn cmd_verify(o: &Opts) -> Result<Output, CliError> {
    let es = default_etas(o)?;
    let seed = o.seed.unwrap_or(0);
    let built = es.iter().map(|&e| build(o, e)).collect::<Result<Vec<_>, _>>()?;
    if let Some(n) = o.trials {
        let users = built[0].scheme.users();
        if n <= users {
            return Err(input(format!("trials: need more than {users}")));
        }
    }
    let mut checks = Vec::new();
    for (&e, b) in es.iter().zip(&built) {
        let s = &b.scheme;
        let cov = s.noise_basis();
        let eq = equivalent_channel(s, cov);
        let c = eq.cancellation();
        checks.push(check(e, "causality", if s.is_causal() { 0.0 } else { 1.0 }, 0.0));
        checks.push(check(e, "interference", c.interference, CANCEL_TOL));
        checks.push(check(e, "canceled_noise", c.canceled_noise, CANCEL_TOL));
        let budget = e as f64 * s.power();
        let over = s
            .power_slack()
            .iter()
            .map(|x| -x / budget)
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(check(e, "power", over, POWER_TOL));
        if let Some(closed) = &b.closed {
            let d = closed
                .iter()
                .zip(&eq.rates)
                .map(|(&a, &r)| rel_diff(r, a))
                .fold(0.0, f64::max);
            checks.push(check(e, "closed_form_rates", d, RATE_TOL));
        }
        if let Some(n) = o.trials {
            let sum = run_sim(s, cov, n, seed)?;
            let mut z: f64 = 0.0;
            for k in 0..sum.gains.len() {
                z = z.max((sum.gains[k] - sum.analytic_gains[k]).abs() / sum.gain_se[k]);
                z = z.max((sum.residual_var[k] - sum.analytic_residual_var[k]).abs() / sum.residual_var_se[k]);
            }
            let mut ch = check(e, "monte_carlo", z, PASS_SE);
            ch.pass = sum.pass();
            checks.push(ch);
        }
    }
    let first_failure = checks
        .iter()
        .find(|c| !c.pass)
        .map(|c| format!("{} (eta = {})", c.name, c.eta));
    let report = VerifyReport {
        model: model(o),
        etas: es,
        trials: o.trials,
        seed,
        pass: first_failure.is_none(),
        first_failure: first_failure.clone(),
        checks,
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    Ok(Output {
        text,
        failure: first_failure,
    })
}

/// `simulate`: Monte-Carlo equivalent channel per block length and user.
pub fn cmd_simulate(o: &Opts) -> Result<Output, CliError> {
    let es = default_etas(o)?;
    let trials = o.trials.unwrap_or(DEFAULT_TRIALS);
    let seed = o.seed.unwrap_or(0);
    let built = es.iter().map(|&e| build(o, e)).collect::<Result<Vec<_>, _>>()?;
    if trials <= built[0].scheme.users() {
        return Err(input(format!("trials: need more than {}", built[0].scheme.users())));
    }
    let mut t = Table::new(&[
        "eta",
        "user",
        "gain",
        "gain_ci",
        "analytic_gain",
        "residual_var",
        "residual_var_ci",
        "analytic_residual_var",
        "rate",
        "rate_lower",
        "rate_upper",
        "analytic_rate",
        "pass",
    ]);
    let mut failure = None;
    for (&e, b) in es.iter().zip(&built) {
        let s = &b.scheme;
        let cov: &NoiseCovariance = s.noise_basis();
        let sum = run_sim(s, cov, trials, seed)?;
        let emp = empirical_rate(&sum);
        let eq = equivalent_channel(s, cov);
        let (gci, vci) = (sum.gain_ci(), sum.residual_var_ci());
        for k in 0..sum.gains.len() {
            t.push(row![
                e,
                k + 1,
                sum.gains[k],
                gci[k],
                sum.analytic_gains[k],
                sum.residual_var[k],
                vci[k],
                sum.analytic_residual_var[k],
                emp.report.rates[k],
                emp.lower[k],
                emp.upper[k],
                eq.rates[k],
                sum.pass(),
            ]);
        }
        if !sum.pass() && failure.is_none() {
            failure = Some(format!("monte_carlo (eta = {e})"));
        }
    }
    Ok(Output {
        text: t.render(),
        failure,
    })
}

fn slope(grid: &[f64], f: impl Fn(f64) -> crate::Result<f64>) -> f64 {
    let ys: Vec<f64> = grid.iter().map(|&p| f(p).unwrap_or(f64::NAN)).collect();
    if ys.iter().any(|y| y.is_nan()) {
        return f64::NAN;
    }
    if ys.iter().any(|y| y.is_infinite()) {
        return f64::INFINITY;
    }
    prelog_estimate(|p| f(p).unwrap_or(f64::NAN), grid).unwrap_or(f64::NAN)
}

fn sum_bits(r: &[Rate]) -> f64 {
    r.iter().map(|x| x.bits()).sum()
}

/// `prelog`: least-squares slopes of rates against `0.5 log2(1 + P)`.
pub fn cmd_prelog(o: &Opts) -> Result<Output, CliError> {
    let ps = powers(o, Some(logspace(1e4, 1e8, 5)))?;
    if ps.len() < 2 || ps.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(input("p: prelog needs at least two strictly increasing powers"));
    }
    let mut rows: Vec<(String, f64, f64)> = Vec::new();
    let mut push = |name: String, s: f64, expected: f64| rows.push((name, s, expected));
    match model(o) {
        Model::P2p => {
            let s = o.s1.unwrap_or(1.0);
            if !(s > 0.0) {
                return Err(input(format!("s1: variance must be > 0, got {s}")));
            }
            let es = etas(o, vec![])?;
            push("capacity".into(), slope(&ps, |p| Ok(half_log2_1p(p / s))), 1.0);
            push("limit_rate".into(), slope(&ps, |p| Ok(p2p_limit_rate(p, s))), 1.0);
            for e in es {
                push(
                    format!("finite_eta_{e}"),
                    slope(&ps, |p| Ok(p2p_finite_rate(p, s, e))),
                    1.0,
                );
            }
        }
        Model::Bc2 => {
            let r = single("rho", &rhos(o, &[0.0])?)?;
            let (s1, s2) = variances(o, 1.0, 1.0);
            let base = BcSpec::new(s1, s2, r, ps[0])?;
            let tol = tol(o)?;
            let eps = eps(o)?;
            let fb = feedback_noise(o)?;
            let es = etas(o, vec![])?;
            let sp = |p: f64| base.with_power(p);
            push(
                "no_feedback".into(),
                slope(&ps, |p| Ok(no_feedback_sum_capacity(&sp(p)?))),
                1.0,
            );
            push(
                "hi_snr".into(),
                slope(&ps, |p| Ok(hi_snr_sum_capacity_tol(&sp(p)?, tol))),
                f64::NAN,
            );
            push(
                "cutset_two_cuts".into(),
                slope(&ps, |p| Ok(cutset_two_cuts(&sp(p)?))),
                2.0,
            );
            push(
                "cutset_single_cut".into(),
                slope(&ps, |p| Ok(cutset_single_cut(&sp(p)?).bits())),
                f64::NAN,
            );
            push(
                "less_noisy".into(),
                slope(&ps, |p| less_noisy_sum_capacity(&sp(p)?, &fb)),
                1.0,
            );
            push(
                "optimized_sum".into(),
                slope(&ps, |p| Ok(optimize_bc2_sum_rate(&sp(p)?).sum_rate)),
                f64::NAN,
            );
            let closed_sum = |p: f64| -> crate::Result<f64> {
                let s = sp(p)?;
                if s.is_fully_correlated() {
                    Ok(full_corr_limit_rates(&s)?.sum().bits())
                } else {
                    Ok(bc2_limit_rates(&closed_params(&s, eps)?).sum().bits())
                }
            };
            push("closed_sum".into(), slope(&ps, closed_sum), f64::NAN);
            for e in es {
                let fin = |p: f64| -> crate::Result<f64> {
                    let s = sp(p)?;
                    Ok(sum_bits(
                        &bc2_finite_rates(&s, &closed_params(&s, eps)?, e)?.exact.rates,
                    ))
                };
                push(format!("finite_sum_eta_{e}"), slope(&ps, fin), f64::NAN);
            }
            if let Some(z) = &o.zeta {
                let zetas = parse_grid("zeta", z)?;
                let sign = o.sign.unwrap_or(-1.0);
                let factor = o.factor.unwrap_or(1.0);
                for zeta in zetas {
                    let sched = ScheduleSpec::new(sign, zeta, factor)?;
                    let f = |p: f64| -> crate::Result<f64> {
                        let c = schedule_params(s1, s2, &sched, p, eps, None)?;
                        Ok(bc2_limit_rates(&c.params).sum().bits())
                    };
                    push(
                        format!("schedule_zeta_{}", super::csv::fmt_g(zeta)),
                        slope(&ps, f),
                        generalized_prelog(s1, s2, &sched),
                    );
                }
            }
        }
        Model::Bck => {
            let spec = KUserSpec::new(alphas(o)?, ps[0])?;
            let es = etas(o, vec![])?;
            push(
                "limit_sum".into(),
                slope(&ps, |p| Ok(kuser_limit_rates(&spec.with_power(p)?).sum().bits())),
                spec.n_alpha() as f64,
            );
            for e in es {
                let f = |p: f64| Ok(sum_bits(&kuser_finite_rates(&spec.with_power(p)?, e)?.rates));
                push(format!("finite_sum_eta_{e}"), slope(&ps, f), f64::NAN);
            }
        }
        Model::Ic => {
            let r = single("rho", &rhos(o, &[-1.0])?)?;
            let ic = ic_specs(o, &ps[..1], &[r])?.remove(0);
            let es = etas(o, vec![])?;
            let at = |p: f64| ic.with_power(p);
            push(
                "limit_sum".into(),
                slope(&ps, |p| Ok(ic_limit_rates(&at(p)?)?.sum().bits())),
                2.0,
            );
            push(
                "swapped_sum".into(),
                slope(&ps, |p| Ok(ic_limit_rates_swapped(&at(p)?)?.sum().bits())),
                2.0,
            );
            push(
                "cutset_sum".into(),
                slope(&ps, |p| {
                    let (a, b) = ic_cutset_bounds(&at(p)?);
                    Ok(a + b)
                }),
                2.0,
            );
            push("genie_sum".into(), slope(&ps, |p| ic_genie_mac_bound(&at(p)?)), 1.0);
            for e in es {
                let f = |p: f64| -> crate::Result<f64> {
                    let x = at(p)?;
                    if e < ic_eta_threshold(&x) {
                        return Err(crate::Error::Undefined("eta below threshold"));
                    }
                    Ok(sum_bits(&ic_finite_rates(&x, e)?.rates))
                };
                push(format!("finite_sum_eta_{e}"), slope(&ps, f), f64::NAN);
            }
        }
    }
    let mut t = Table::new(&["quantity", "slope", "expected"]);
    for (name, s, expected) in rows {
        let exp = if expected.is_nan() {
            String::new()
        } else {
            super::csv::fmt_g(expected)
        };
        t.push(row![name, s, exp]);
    }
    Ok(Output::ok(t.render()))
}
