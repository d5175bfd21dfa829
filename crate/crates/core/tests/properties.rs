use std::sync::Arc;

use proptest::prelude::*;
use snls_core::diagnostics::{envelope_check, omega};
use snls_core::grid::Fourier;
use snls_core::harness::RunConfig;
use snls_core::integrator::{simulate_with_path, Scheme, SimParams, Stepper};
use snls_core::noise::{sample_martingale, DensityKind, DensitySpec, NoiseModel};
use snls_core::rescaling::{from_rescaled, to_rescaled};
use snls_core::{Complex, Field, Grid};

fn grid(d: usize, n: usize) -> Arc<Grid> {
    Arc::new(Grid::new(d, n, 4.0).unwrap())
}

fn field_from(g: &Arc<Grid>, raw: &[(f64, f64)]) -> Field {
    let values = raw.iter().cycle().take(g.len()).map(|&(a, b)| Complex::new(a, b)).collect();
    Field::from_values(Arc::clone(g), values).unwrap()
}

fn raw_values() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 1..300)
}

fn homogeneous(g: &Arc<Grid>, terms: &[((f64, f64), f64)]) -> NoiseModel<f64> {
    let terms = terms
        .iter()
        .map(|&((re, im), v)| (Complex::new(re, im), DensitySpec::constant(v).unwrap()))
        .collect();
    NoiseModel::homogeneous(Arc::clone(g), terms).unwrap()
}

fn smooth_bump(g: &Arc<Grid>, shift: f64) -> Field {
    Field::from_fn(Arc::clone(g), |x| {
        let r2: f64 = x.iter().map(|c| (c - shift) * (c - shift)).sum();
        Complex::new((-r2).exp(), 0.3 * (-r2).exp() * x[0])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fft_round_trip_is_identity(d in 1usize..=3, raw in raw_values()) {
        let g = grid(d, if d == 3 { 8 } else { 16 });
        let f = field_from(&g, &raw);
        let fourier = Fourier::new(Arc::clone(&g));
        let back = fourier.inverse(fourier.forward(&f)).unwrap();
        let err = back.sub(&f).unwrap().norm_l2();
        prop_assert!(err <= 1e-12 * f.norm_l2().max(1e-300));
    }

    #[test]
    fn parseval_holds(d in 1usize..=2, raw in raw_values()) {
        let g = grid(d, 16);
        let f = field_from(&g, &raw);
        let fourier = Fourier::new(Arc::clone(&g));
        let spectral = fourier.spectral_norm_l2(&fourier.forward(&f));
        prop_assert!((spectral / f.norm_l2() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn free_propagator_is_unitary(raw in raw_values(), dt in 0.0..5.0f64) {
        let g = grid(1, 64);
        let f = field_from(&g, &raw);
        let fourier = Fourier::new(Arc::clone(&g));
        let u = fourier.free_propagator_apply(&f, dt).unwrap();
        prop_assert!((u.norm_l2() / f.norm_l2() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn quadratic_variation_is_bounded(lo in 0.1..1.0f64, amp in 0.0..1.0f64, seed in any::<u64>()) {
        let g = grid(1, 8);
        let kind = DensityKind::Sinusoid { mean: lo + amp, amplitude: amp, frequency: 2.0, phase: 0.0 };
        let density = DensitySpec::new(kind, None, None).unwrap();
        let model = NoiseModel::homogeneous(Arc::clone(&g), vec![(Complex::new(1.0, 0.0), density)]).unwrap();
        let path = sample_martingale(&model, 0.01, 300, seed).unwrap();
        let q = path.qv_series(0);
        let t = path.horizon();
        prop_assert!(q.windows(2).all(|w| w[1] >= w[0]));
        let last = q[q.len() - 1];
        prop_assert!(last <= (lo + 2.0 * amp) * t * (1.0 + 1e-12));
        prop_assert!(last >= lo * t * (1.0 - 1e-12));
    }

    #[test]
    fn rescaling_round_trip_and_bridge(raw in raw_values(), mraw in raw_values()) {
        let g = grid(1, 32);
        let x = field_from(&g, &raw);
        let m = field_from(&g, &mraw);
        let y = to_rescaled(&x, &m).unwrap();
        let back = from_rescaled(&y, &m).unwrap();
        let max = x.max_modulus();
        for (a, b) in back.values().iter().zip(x.values()) {
            prop_assert!((a - b).norm() <= 1e-12 * max);
        }
        let weighted: f64 = y
            .values()
            .iter()
            .zip(m.values())
            .map(|(v, mm)| (2.0 * mm.re).exp() * v.norm_sqr())
            .sum::<f64>()
            * g.cell_volume();
        prop_assert!((back.mass() / weighted - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn undamped_steps_are_isometries(lambda in -1i32..=1, shift in -1.0..1.0f64, seed in any::<u64>()) {
        let g = grid(1, 64);
        let model = homogeneous(&g, &[((0.0, 0.0), 1.0)]);
        let params = SimParams::new(lambda, 3.0, 0.01, 0.1, Scheme::Direct);
        let path = sample_martingale(&model, 0.01, 10, seed).unwrap();
        let fourier = Arc::new(Fourier::new(Arc::clone(&g)));
        let mut stepper = Stepper::new(fourier, &model, &params).unwrap();
        let x = smooth_bump(&g, shift);
        let mut state = x.values().to_vec();
        for k in 0..10 {
            stepper.step(&mut state, &path, k).unwrap();
        }
        let out = Field::from_values(Arc::clone(&g), state).unwrap();
        prop_assert!((out.mass() / x.mass() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn omega_sees_only_real_parts(re in 0.1..2.0f64, im1 in -3.0..3.0f64, im2 in -3.0..3.0f64, v in 0.2..2.0f64) {
        let g = grid(1, 8);
        let a = omega(&homogeneous(&g, &[((re, im1), v)])).unwrap();
        let b = omega(&homogeneous(&g, &[((-re, im2), v)])).unwrap();
        prop_assert!((a - b).abs() <= 1e-14 * a);
        prop_assert!((a - 2.0 * v * re * re).abs() <= 1e-14 * a);
    }

    #[test]
    fn rescaled_mass_is_monotone_under_decay_hypothesis(
        re in 0.2..1.5f64,
        im in -1.0..1.0f64,
        lambda in -1i32..=1,
        seed in any::<u64>(),
    ) {
        let g = grid(1, 64);
        let model = homogeneous(&g, &[((re, im), 1.0)]);
        let params = SimParams::new(lambda, 3.0, 0.01, 1.0, Scheme::Rescaled);
        let path = sample_martingale(&model, 0.01, 100, seed).unwrap();
        let record = simulate_with_path(&model, &params, &smooth_bump(&g, 0.0), &path).unwrap();
        let env = envelope_check(&record, &model).unwrap();
        prop_assert!(env.clean(), "{env:?}");
    }

    #[test]
    fn config_round_trips(
        points in prop::sample::select(vec![16usize, 32, 64]),
        dt_exp in 2u32..5,
        seed in any::<u64>(),
        re in -2.0..2.0f64,
        im in -2.0..2.0f64,
        paths in 1usize..50,
    ) {
        let text = format!(
            r#"{{"schema_version":1,"kind":"ensemble","grid":{{"dimension":1,"points":{points},"half_length":8.0}},
            "initial":{{"type":"gaussian","width":0.7}},
            "noise":[{{"mu":[{re},{im}],"density":{{"kind":"constant","value":1.0}}}}],
            "sim":{{"lambda":1,"alpha":3.0,"dt":{dt},"t_final":1.0,"scheme":"direct"}},
            "seed":{seed},"ensemble":{{"paths":{paths}}}}}"#,
            dt = 10f64.powi(-(dt_exp as i32)),
        );
        let cfg = RunConfig::from_json(&text).unwrap();
        let again = RunConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(&cfg, &again);
    }
}
