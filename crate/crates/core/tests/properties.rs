use std::f64::consts::PI;

use exflow::counterexample::{log_k_alpha, pairing_ualpha, smooth_step};
use exflow::evolution::cesaro_average;
use exflow::functionals::{antipodal_defect, central_projector, stream_to_velocity, ModalStream, StreamField};
use exflow::geometry::{adaptive_integral, build_polar_grid, PolarGrid, Stretch};
use exflow::io::fmt_f64;
use exflow::kernel_analysis::{chi_pairing, kernel_forms, KernelProbe, ProbeFunction, FUBINI_TOLERANCE};
use exflow::runner::ExperimentConfig;
use exflow::steady_flows::{hamel_gradient, weighted_sup_critical, HamelFlow, SteadyFlowParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn probe_strategy() -> impl Strategy<Value = ProbeFunction> {
    prop_oneof![
        (0.0..5.0f64, 0.05..10.0f64).prop_map(|(a, w)| ProbeFunction::Indicator { a, b: a + w }),
        (0.55..3.0f64).prop_map(|p| ProbeFunction::PowerDecay { p }),
        (0.0..3.0f64, 0.05..4.0f64).prop_map(|(amplitude, rate)| ProbeFunction::Exponential { amplitude, rate }),
        prop::collection::vec((0.05..3.0f64, 0.0..2.0f64), 2..10).prop_map(|steps| {
            let mut t = 0.0;
            let mut times = Vec::new();
            let mut values = Vec::new();
            for (dt, v) in steps {
                times.push(t);
                values.push(v);
                t += dt;
            }
            ProbeFunction::Sampled { times, values }
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_forms_agree_and_chain_holds(f in probe_strategy(), log_t in -1.0..4.0f64) {
        let t = 10f64.powf(log_t);
        let p = KernelProbe::new(f, vec![t]).unwrap();
        let v = kernel_forms(&p, t).unwrap();
        let scale = v.single.abs().max(1e-300);
        prop_assert!((v.double - v.single).abs() <= FUBINI_TOLERANCE * scale);
        let chi = chi_pairing(&p, t).unwrap();
        let l2 = p.f.l2_norm().unwrap();
        prop_assert!(v.single <= 2.0 * chi * (1.0 + 1e-12) + 1e-300);
        prop_assert!(chi <= l2 * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn hamel_flows_are_divergence_free(
        phi in -20.0..20.0f64,
        mu in -20.0..20.0f64,
        amp in -3.0..3.0f64,
        r in 1.0..1e4f64,
        theta in 0.0..(2.0 * PI),
    ) {
        let p = SteadyFlowParams::new(phi, mu, amp);
        let g = hamel_gradient(&p, r, theta);
        let scale = g.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
        prop_assert!((g[0][0] + g[1][1]).abs() <= 1e-12 * scale);
    }

    #[test]
    fn k_alpha_integral_identity(alpha in 0.1..(PI / 2.0)) {
        let lk = log_k_alpha(alpha).unwrap();
        let c = 2.0 * alpha.cos() - 2.0;
        let lhs = adaptive_integral(|s| (c * s).exp(), 0.0, lk, 1e-15, 1e-14).unwrap().value;
        prop_assert!((lhs - 1.0 / (4.0 - 4.0 * alpha.cos())).abs() <= 1e-10);
    }

    #[test]
    fn pairing_is_linear_in_circulation(alpha in 0.05..1.5f64, mu in -20.0..20.0f64) {
        prop_assume!(mu.abs() > 1e-3);
        let base = pairing_ualpha(alpha, 2.0 * PI).unwrap();
        let scaled = pairing_ualpha(alpha, mu).unwrap();
        prop_assert!((scaled - mu / (2.0 * PI) * base).abs() <= 1e-12 * base.abs().max(1.0) * (1.0 + mu.abs()));
    }

    #[test]
    fn smooth_step_is_monotone_c2(x in -0.5..1.5f64) {
        let (s, ds, dds) = smooth_step(x);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!(ds >= 0.0);
        if x <= 0.0 || x >= 1.0 {
            prop_assert_eq!(ds, 0.0);
            prop_assert_eq!(dds, 0.0);
        }
        let (s2, _, _) = smooth_step(1.0 - x);
        prop_assert!((s + s2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cesaro_average_stays_within_range(values in prop::collection::vec(-5.0..5.0f64, 2..60), dt in 0.01..1.0f64) {
        let times: Vec<f64> = (0..values.len()).map(|k| k as f64 * dt).collect();
        let c = cesaro_average(&times, &values).unwrap();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for x in c {
            prop_assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
        }
    }

    #[test]
    fn float_format_round_trips(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn config_round_trips(phi in -10.0..10.0f64, seed in any::<u64>(), n in 1usize..1000, t in 0.0..50.0f64) {
        let cfg = ExperimentConfig { phi, seed, n_fields: n, horizon: t, ..Default::default() };
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn central_projection_is_exactly_odd(seed in any::<u64>(), outer in 1.5..6.0f64) {
        let grid = PolarGrid::annulus(1.0, outer, 6, 8, 24, Stretch::Geometric).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = StreamField::analytic(ModalStream::random(&mut rng, 1.0, outer, 4, 2, false));
        let v = stream_to_velocity(&f, &grid).unwrap();
        prop_assert_eq!(antipodal_defect(&central_projector(&v).unwrap()), 0.0);
    }

    #[test]
    fn critical_weighted_sup_of_harmonic_flow(phi in -20.0..20.0f64, mu in -20.0..20.0f64) {
        prop_assume!(phi.hypot(mu) > 1e-6);
        let grid = build_polar_grid(64.0, 64, 8, Stretch::Geometric).unwrap();
        let w = weighted_sup_critical(&HamelFlow(SteadyFlowParams::new(phi, mu, 0.0)), &grid).unwrap();
        let want = phi.hypot(mu) / (2.0 * PI);
        prop_assert!((w - want).abs() <= 1e-12 * want);
    }
}
