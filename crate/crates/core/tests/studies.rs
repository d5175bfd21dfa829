use std::sync::Arc;

use serde_json::{json, Value};
use snls_core::diagnostics::{
    decay_report, energy_identity_residual, mass_identity_residual, EnergyQuadrature, FitWindow,
};
use snls_core::harness::{convergence_study, picard_study, run_ensemble, ConvergenceConfig, RunConfig, Setup};
use snls_core::integrator::{simulate, simulate_with_path, Scheme, SimParams};
use snls_core::noise::{lln_ratio, sample_martingale, sample_martingale_indexed, DensitySpec, NoiseModel};
use snls_core::{Complex, Field, Grid};

fn base(mu: [f64; 2], lambda: i32, scheme: &str, dt: f64, t_final: f64) -> Value {
    json!({
        "schema_version": 1,
        "grid": { "dimension": 1, "points": 128, "half_length": 16.0 },
        "initial": { "type": "gaussian", "width": 1.0, "l2_norm": 1.0 },
        "noise": [{ "mu": mu, "density": { "kind": "constant", "value": 1.0 } }],
        "sim": { "lambda": lambda, "alpha": 3.0, "dt": dt, "t_final": t_final, "scheme": scheme },
        "seed": 17
    })
}

fn setup(v: &Value) -> Setup {
    RunConfig::from_json(&v.to_string()).unwrap().build().unwrap()
}

fn ladder() -> ConvergenceConfig {
    ConvergenceConfig {
        dts: vec![4e-3, 2e-3, 1e-3],
        reference_dt: None,
        mode: snls_core::harness::ConvergenceMode::Reference,
    }
}

#[test]
fn linear_commuting_ladder_is_exact() {
    let s = setup(&base([1.0, 0.0], 0, "rescaled", 1e-3, 1.0));
    let table = convergence_study(&s, &ladder(), 3).unwrap();
    assert!(table.exact, "{:?}", table.errors);
    assert!(table.errors.iter().all(|&e| e < 1e-11));
}

#[test]
fn deterministic_strang_ladder_is_second_order() {
    let s = setup(&base([0.0, 0.0], 1, "direct", 1e-3, 1.0));
    let table = convergence_study(&s, &ladder(), 3).unwrap();
    let order = table.order.unwrap();
    assert!((1.7..=2.3).contains(&order), "order {order}");
}

#[test]
fn noisy_ladder_has_strong_order_near_one() {
    let s = setup(&base([1.0, 0.0], 1, "rescaled", 1e-3, 1.0));
    let table = convergence_study(&s, &ladder(), 3).unwrap();
    let order = table.order.unwrap();
    assert!((0.8..=1.5).contains(&order), "order {order}");
}

#[test]
fn deterministic_nls_conserves_mass_over_ten_thousand_steps() {
    let s = setup(&base([0.0, 0.0], 1, "direct", 1e-3, 10.0));
    let r = simulate(&s.model, &s.params, &s.initial, 0).unwrap();
    assert_eq!(r.steps(), 10_000);
    let m0 = r.mass_x[0];
    assert!(r.mass_x.iter().all(|m| (m / m0 - 1.0).abs() <= 1e-10));
    let res = mass_identity_residual(&r, &s.model).unwrap();
    assert!(res.max_abs <= 1e-10);
}

#[test]
fn silent_noise_makes_runs_seed_independent() {
    let s = setup(&base([0.0, 0.0], 1, "direct", 1e-3, 0.2));
    let a = simulate(&s.model, &s.params, &s.initial, 1).unwrap();
    let b = simulate(&s.model, &s.params, &s.initial, 2).unwrap();
    assert_eq!(a.final_x.values(), b.final_x.values());
}

#[test]
fn solutions_depend_continuously_on_initial_data() {
    let s = setup(&base([1.0, 0.0], 1, "direct", 1e-3, 1.0));
    let bump = Field::from_fn(Arc::clone(&s.grid), |x| Complex::new(0.0, (-(x[0] - 1.0).powi(2)).exp()));
    let scale = 1e-6 / bump.norm_l2();
    let values = s.initial.values().iter().zip(bump.values()).map(|(a, b)| a + b * scale).collect();
    let perturbed = Field::from_values(Arc::clone(&s.grid), values).unwrap();
    let params = s.params.clone().with_save_every(10).with_saved_fields();
    let path = sample_martingale(&s.model, params.dt, params.steps(), 5).unwrap();
    let a = simulate_with_path(&s.model, &params, &s.initial, &path).unwrap();
    let b = simulate_with_path(&s.model, &params, &perturbed, &path).unwrap();
    let sup = a
        .snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(p, q)| p.x.as_ref().unwrap().sub(q.x.as_ref().unwrap()).unwrap().norm_l2())
        .fold(0.0, f64::max);
    assert!(sup <= 1e-3, "sup distance {sup}");
}

#[test]
fn realized_quadratic_variation_concentrates() {
    let g = Arc::new(Grid::new(1, 8, 1.0).unwrap());
    let model = NoiseModel::homogeneous(g, vec![(Complex::new(1.0, 0.0), DensitySpec::constant(1.0).unwrap())]).unwrap();
    let seeds = 200;
    let inside = (0..seeds)
        .filter(|&i| {
            let p = sample_martingale_indexed(&model, 1e-4, 10_000, 44, i).unwrap();
            (0.95..=1.05).contains(&p.realized_qv(0))
        })
        .count();
    assert!(inside as f64 >= 0.99 * seeds as f64, "{inside}/{seeds}");
}

#[test]
fn components_are_independent() {
    let g = Arc::new(Grid::new(1, 8, 1.0).unwrap());
    let one = || DensitySpec::constant(1.0).unwrap();
    let model = NoiseModel::homogeneous(
        g,
        vec![(Complex::new(1.0, 0.0), one()), (Complex::new(0.5, 0.0), one())],
    )
    .unwrap();
    let p = sample_martingale(&model, 1e-2, 100_000, 8).unwrap();
    let (a, b) = (p.increments(0), p.increments(1));
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n;
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n;
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / n;
    let corr = cov / (va * vb).sqrt();
    assert!(corr.abs() <= 0.02, "corr {corr}");
}

#[test]
fn lln_ratio_shrinks_with_horizon() {
    let g = Arc::new(Grid::new(1, 8, 1.0).unwrap());
    let model = NoiseModel::homogeneous(g, vec![(Complex::new(1.0, 0.0), DensitySpec::constant(1.0).unwrap())]).unwrap();
    let seeds = 500u64;
    let (mut short, mut long) = (Vec::new(), Vec::new());
    let mut within = 0;
    for i in 0..seeds {
        let p = sample_martingale_indexed(&model, 0.1, 4000, 12, i).unwrap();
        let at_100 = lln_ratio(&model, &p, 1000).unwrap();
        if at_100.abs() <= 0.3 {
            within += 1;
        }
        short.push(at_100);
        long.push(lln_ratio(&model, &p, 4000).unwrap());
    }
    let std = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    let halving = std(&short) / std(&long);
    assert!((1.6..=2.4).contains(&halving), "std ratio {halving}");
    assert!(within as f64 >= 0.99 * seeds as f64);
}

#[test]
fn decay_decomposition_is_an_identity() {
    let s = setup(&base([1.0, 0.0], 0, "rescaled", 1e-3, 5.0));
    let r = simulate(&s.model, &s.params, &s.initial, 21).unwrap();
    let d = decay_report(&r, &s.model, None).unwrap();
    assert!((d.fitted_slope + 2.0).abs() <= 1e-6);
    assert!((d.lyapunov - (d.lyapunov_rescaled + 2.0 * d.lln_ratio)).abs() <= 1e-10);
}

#[test]
fn energy_residual_halves_with_the_step() {
    let cfg = base([1.0, 0.0], 1, "rescaled", 1e-3, 1.0);
    let s = setup(&cfg);
    let fine = sample_martingale(&s.model, 1e-3, 1000, 4).unwrap();
    let coarse = fine.coarsen(2).unwrap();
    let p_fine = s.params.clone();
    let mut p_coarse = s.params.clone();
    p_coarse.dt = 2e-3;
    let rf = simulate_with_path(&s.model, &p_fine, &s.initial, &fine).unwrap();
    let rc = simulate_with_path(&s.model, &p_coarse, &s.initial, &coarse).unwrap();
    let q = EnergyQuadrature::LeftEndpoint;
    let ratio = energy_identity_residual(&rc, &s.model, q).unwrap().max_abs
        / energy_identity_residual(&rf, &s.model, q).unwrap().max_abs;
    assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
    let exact = energy_identity_residual(&rf, &s.model, EnergyQuadrature::ExactExponential).unwrap();
    assert!(exact.max_abs <= 1e-12);
}

#[test]
fn picard_fixed_point_matches_integrator() {
    let mut cfg = base([1.0, 0.0], 1, "rescaled", 1e-4, 0.05);
    cfg["picard"] = json!({ "horizon": 0.05, "nodes": 64 });
    let rc = RunConfig::from_json(&cfg.to_string()).unwrap();
    let s = rc.build().unwrap();
    let study = picard_study(&s, rc.picard.as_ref().unwrap(), 2).unwrap();
    assert!(study.report.converged);
    assert!(study.report.residual <= 2.0 * 1e-8);
    assert!(study.integrator_distance <= 5e-3, "{}", study.integrator_distance);
}

#[test]
fn single_path_ensemble_matches_simulate() {
    let mut cfg = base([1.0, 0.5], 1, "rescaled", 2e-3, 2.0);
    cfg["ensemble"] = json!({ "paths": 1 });
    let rc = RunConfig::from_json(&cfg.to_string()).unwrap();
    let s = rc.build().unwrap();
    let rep = run_ensemble(&s, rc.ensemble.as_ref().unwrap(), 99, None).unwrap();
    let path = sample_martingale_indexed(&s.model, s.params.dt, s.params.steps(), 99, 0).unwrap();
    let r = simulate_with_path(&s.model, &s.params, &s.initial, &path).unwrap();
    let d = decay_report(&r, &s.model, None).unwrap();
    assert_eq!(rep.per_path[0].decay.unwrap().lyapunov, d.lyapunov);
    assert_eq!(rep.lyapunov.unwrap().median, d.lyapunov);
}

#[test]
fn burn_in_window_starts_at_a_tenth_of_the_horizon() {
    let w = FitWindow::with_burn_in(50.0);
    assert_eq!((w.start, w.end), (5.0, 50.0));
}

#[test]
fn direct_and_rescaled_runs_share_the_rescaled_mass() {
    let s = setup(&base([1.0, 0.0], 0, "direct", 1e-3, 1.0));
    let path = sample_martingale(&s.model, 1e-3, 1000, 6).unwrap();
    let direct = simulate_with_path(&s.model, &s.params, &s.initial, &path).unwrap();
    let params = SimParams { scheme: Scheme::Rescaled, ..s.params.clone() };
    let rescaled = simulate_with_path(&s.model, &params, &s.initial, &path).unwrap();
    let (a, b) = (direct.mass_y.last().unwrap(), rescaled.mass_y.last().unwrap());
    assert!((a / b - 1.0).abs() <= 1e-10);
}
