use fbcast::channel::{bc_noise_cov, sample_noise, BcSpec, FeedbackNoiseSpec, IcSpec, KUserSpec};
use fbcast::rates::{
    cutset_single_cut, cutset_two_cuts, eta_objective, eta_tradeoff, half_log2, half_log2_1p, hi_snr_branch,
    hi_snr_sum_capacity, less_noisy_variances, less_noisy_variances_full_corr, power_offset, power_offset_minimum,
    prelog_estimate, EtaOptimum, HiSnrBranch,
};
use fbcast::schedule::{generalized_prelog, ScheduleSpec};
use fbcast::scheme::{
    boundary_q, build_bc2_scheme, build_ic_scheme, build_kuser_scheme, build_p2p_scheme, equivalent_channel,
    ic_eta_threshold, ic_is_degenerate, p2p_finite_rate, SchemeParams,
};
use fbcast::sim::simulate_with_noise;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn variance() -> impl Strategy<Value = f64> {
    (-1.5f64..1.5).prop_map(f64::exp)
}

fn power() -> impl Strategy<Value = f64> {
    (0.0f64..9.0).prop_map(|e| 10f64.powf(e))
}

fn delta() -> impl Strategy<Value = f64> {
    ((-2.3f64..2.3), any::<bool>())
        .prop_map(|(l, neg)| if neg { -l.exp() } else { l.exp() })
        .prop_filter("delta away from -1", |d| (1.0 + d).abs() > 0.05)
}

fn bc_spec(rho: impl Strategy<Value = f64>) -> impl Strategy<Value = BcSpec> {
    (variance(), variance(), rho, power())
        .prop_map(|(a, b, r, p)| BcSpec::new(a, b, r, p).unwrap())
        .prop_filter("not degraded", |s| !s.is_physically_degraded())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fully_correlated_samples_are_proportional(s1 in variance(), s2 in variance(), neg in any::<bool>(), seed in any::<u64>()) {
        let rho = if neg { -1.0 } else { 1.0 };
        let spec = BcSpec::new(s1, s2, rho, 1.0).unwrap();
        for z in sample_noise(&bc_noise_cov(&spec), 50, seed).unwrap() {
            let (a, b) = (z[0] / spec.sigma1(), rho * z[1] / spec.sigma2());
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn sampling_is_deterministic(s1 in variance(), s2 in variance(), rho in -1.0f64..=1.0, seed in any::<u64>()) {
        let cov = bc_noise_cov(&BcSpec::new(s1, s2, rho, 1.0).unwrap());
        prop_assert_eq!(sample_noise(&cov, 20, seed).unwrap(), sample_noise(&cov, 20, seed).unwrap());
    }

    #[test]
    fn hi_snr_below_single_cut(spec in bc_spec(-0.999f64..0.999)) {
        prop_assert!(hi_snr_sum_capacity(&spec) <= cutset_single_cut(&spec).bits() + 1e-12);
    }

    #[test]
    fn hi_snr_gap_vanishes(spec in bc_spec(-0.999f64..0.999)) {
        let gamma = power_offset(spec.sigma1_sq(), spec.sigma2_sq(), spec.rho()).unwrap();
        let p = 1e5 / gamma;
        let s = spec.with_power(p).unwrap();
        if hi_snr_branch(&s, 1e-12) == HiSnrBranch::Cooperative {
            prop_assert!(half_log2_1p(p * gamma) - half_log2(p * gamma) < 1e-3);
        }
    }

    #[test]
    fn power_offset_monotone_around_minimum(s1 in variance(), s2 in variance()) {
        let (at, min) = power_offset_minimum(s1, s2);
        let g = |r: f64| power_offset(s1, s2, r).unwrap();
        prop_assert!((g(at) - min).abs() <= 1e-9 * min);
        let grid: Vec<f64> = (1..1000).map(|i| -1.0 + 2.0 * i as f64 / 1000.0).collect();
        for w in grid.windows(2) {
            if w[1] <= at {
                prop_assert!(g(w[1]) < g(w[0]));
            } else if w[0] >= at {
                prop_assert!(g(w[1]) > g(w[0]));
            }
        }
    }

    #[test]
    fn less_noisy_full_correlation_specialisation(spec in bc_spec(prop_oneof![Just(-1.0), Just(1.0)]), w1 in variance(), w2 in variance()) {
        let fb = FeedbackNoiseSpec::new(w1, w2).unwrap();
        let (a1, a2) = less_noisy_variances(&spec, &fb).unwrap();
        let (b1, b2) = less_noisy_variances_full_corr(&spec, &fb).unwrap();
        prop_assert!((a1 - b1).abs() <= 1e-12 * b1);
        prop_assert!((a2 - b2).abs() <= 1e-12 * b2);
    }

    #[test]
    fn eta_tradeoff_matches_enumeration(xi in 0.05f64..=8.0, zeta in 0.05f64..=8.0) {
        prop_assume!((1.0 + zeta - xi).abs() > 1e-3);
        let (at, sup) = eta_tradeoff(xi, zeta).unwrap();
        let vals: Vec<f64> = (1..=1000).map(|e| eta_objective(xi, zeta, e)).collect();
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(max <= sup + 1e-12);
        match at {
            EtaOptimum::One => prop_assert!((vals[0] - max).abs() < 1e-12),
            EtaOptimum::Infinity => prop_assert!(vals[999] > vals[0]),
        }
    }

    #[test]
    fn p2p_prefers_single_use(p in power(), s in variance()) {
        prop_assert_eq!(eta_tradeoff(p / s, p / s).unwrap().0, EtaOptimum::One);
        prop_assert!(p2p_finite_rate(p, s, 1) >= p2p_finite_rate(p, s, 2));
    }

    #[test]
    fn schedule_envelope_prelog(neg in any::<bool>(), zeta in 0.1f64..1.0, c in 0.5f64..2.0, s1 in variance(), s2 in variance()) {
        let sched = ScheduleSpec::new(if neg { -1.0 } else { 1.0 }, zeta, c).unwrap();
        let grid = [1e4, 1e5, 1e6, 1e7, 1e8];
        let spec = |p: f64| BcSpec::new(s1, s2, sched.rho(p).unwrap(), p).unwrap();
        let single = prelog_estimate(|p| cutset_single_cut(&spec(p)).bits(), &grid).unwrap();
        let two = prelog_estimate(|p| cutset_two_cuts(&spec(p)), &grid).unwrap();
        let bound = generalized_prelog(s1, s2, &sched);
        prop_assert!(single.min(two) <= bound + 0.05, "slopes {} {} bound {}", single, two, bound);
    }

    #[test]
    fn bc2_cancels_and_meets_power(spec in bc_spec(-1.0f64..=1.0), d in delta(), u in 0.1f64..1.0, eta in 3usize..9) {
        let q = boundary_q(&spec, d).unwrap() * u;
        let params = SchemeParams::new(d, q).unwrap();
        let s = build_bc2_scheme(&spec, &params, eta).unwrap();
        prop_assert!(s.is_causal());
        prop_assert!(equivalent_channel(&s, s.noise_basis()).cancellation().passes(1e-10));
        let budget = eta as f64 * spec.power();
        prop_assert!(s.power_slack().iter().all(|&x| x >= -1e-9 * budget));
    }

    #[test]
    fn kuser_gain_scales_with_power(a in prop::collection::vec(0.5f64..3.0, 2..5), signs in prop::collection::vec(any::<bool>(), 4), extra in 0usize..5, p in 10f64..1e3) {
        let k = a.len();
        let alphas: Vec<f64> = a.iter().zip(&signs).map(|(x, &n)| if n { -x } else { *x }).collect();
        prop_assume!((0..k).all(|i| (0..i).all(|j| (alphas[i] - alphas[j]).abs() > 0.1)));
        let eta = k + extra;
        let factor = |p: f64, eta: usize| {
            let spec = KUserSpec::new(alphas.clone(), p).unwrap();
            let s = build_kuser_scheme(&spec, eta).unwrap();
            let eq = equivalent_channel(&s, s.noise_basis());
            prop_assert!(eq.cancellation().passes(1e-10));
            Ok((0..k)
                .map(|i| eq.gain(i) / (p.sqrt() / alphas[i]).powi((eta - k) as i32))
                .collect::<Vec<_>>())
        };
        let base = factor(p, eta)?;
        for other in [factor(4.0 * p, eta)?, factor(p, eta + 1)?] {
            for (x, y) in base.iter().zip(&other) {
                prop_assert!((x.abs() - y.abs()).abs() <= 1e-9 * x.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn ic_cancels_and_meets_power(g in prop::collection::vec(0.3f64..2.0, 4), signs in prop::collection::vec(any::<bool>(), 4), neg in any::<bool>(), p in 10f64..1e4, extra in 0usize..6) {
        let v: Vec<f64> = g.iter().zip(&signs).map(|(x, &n)| if n { -x } else { *x }).collect();
        let ic = IcSpec::new([[v[0], v[1]], [v[2], v[3]]], 1.0, 1.0, if neg { -1.0 } else { 1.0 }, p).unwrap();
        prop_assume!(!ic_is_degenerate(&ic));
        let c = ic.rho();
        prop_assume!((v[2] / v[0] - c).abs() > 0.05 && (v[3] / v[1] - c).abs() > 0.05);
        let eta = ic_eta_threshold(&ic) + extra;
        let s = build_ic_scheme(&ic, eta).unwrap();
        prop_assert!(equivalent_channel(&s, s.noise_basis()).cancellation().passes(1e-10));
        let budget = eta as f64 * p;
        prop_assert!(s.power_slack().iter().all(|&x| x >= -1e-9 * budget));
    }

    #[test]
    fn future_noise_does_not_change_past_inputs(spec in bc_spec(-1.0f64..=1.0), d in delta(), eta in 3usize..8, t in 0usize..7, seed in any::<u64>()) {
        let t = t % eta;
        let q = boundary_q(&spec, d).unwrap() * 0.5;
        let s = build_bc2_scheme(&spec, &SchemeParams::new(d, q).unwrap(), eta).unwrap();
        let nb = s.noise_basis().dim();
        let noise: Vec<f64> = sample_noise(&fbcast::channel::NoiseCovariance::diagonal(&vec![1.0; nb * eta]).unwrap(), 1, seed)
            .unwrap()[0]
            .iter()
            .copied()
            .collect();
        let z = DMatrix::from_vec(nb, eta, noise);
        let mut z2 = z.clone();
        for r in 0..nb {
            for c in t..eta {
                z2[(r, c)] = -3.0 * z[(r, c)] + 1.0;
            }
        }
        let a = simulate_with_noise(&s, &[0.5, -0.25], &z).unwrap();
        let b = simulate_with_noise(&s, &[0.5, -0.25], &z2).unwrap();
        for c in 0..=t {
            for r in 0..a.inputs.nrows() {
                prop_assert_eq!(a.inputs[(r, c)], b.inputs[(r, c)]);
            }
        }
    }

    #[test]
    fn p2p_scheme_matches_closed_form(p in 0.1f64..1e6, s in variance(), eta in 1usize..9) {
        let sc = build_p2p_scheme(p, s, eta).unwrap();
        let eq = equivalent_channel(&sc, sc.noise_basis());
        let want = p2p_finite_rate(p, s, eta);
        prop_assert!((eq.rates[0].bits() - want).abs() <= 1e-9 * want.max(1.0));
    }
}
