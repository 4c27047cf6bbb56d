mod common;

use std::f64::consts::{PI, SQRT_2};

use common::{c, ks2_p_value, ks_p_value, poisson};
use eventum::engine::{propagate_to, run_many, run_trajectory};
use eventum::models::detector::{gaussian_packet, DetectorHamiltonian, MAX_WIDTH_DX2};
use eventum::models::{
    build_clock_model, build_detector_model, detection_prob_closed_form, exact_propagate, ClockSpec, DetectorSpec,
    Grid,
};
use eventum::{ClassicalStateId, CVec, EngineConfig, Error, PureHybridState, RngStream};
use statrs::function::erf::erf;

const GRID: Grid = Grid { length: 20.0, points: 400 };

/// Mass of a normal density with mean `mu`, standard deviation `sigma`
/// inside `[lo, hi]`.
fn normal_mass(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    0.5 * (erf((hi - mu) / (sigma * SQRT_2)) - erf((lo - mu) / (sigma * SQRT_2)))
}

fn normal_pdf(mu: f64, sigma: f64, x: f64) -> f64 {
    (-(x - mu).powi(2) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt())
}

fn engine_cfg() -> EngineConfig {
    EngineConfig { base_step: GRID.dx(), ..Default::default() }
}

#[test]
fn closed_form_matches_erf_oracle() {
    let spec = DetectorSpec::stationary(1.0, 40.0, 0.0, GRID);
    let psi = gaussian_packet(&GRID, -3.0, 1.0);
    let sat = 1.0 - (-1.0f64).exp();
    assert_eq!(detection_prob_closed_form(&spec, &psi, 0.0).unwrap(), 0.0);
    let half = detection_prob_closed_form(&spec, &psi, 3.0).unwrap();
    assert!((half - sat * normal_mass(-3.0, 1.0, -3.0, 0.0)).abs() < 1e-3);
    assert!((half - 0.5 * sat).abs() < 2e-3);
    for t in [1.0, 2.5, 4.0, 5.5] {
        let p = detection_prob_closed_form(&spec, &psi, t).unwrap();
        assert!((p - sat * normal_mass(-3.0, 1.0, -t, 0.0)).abs() < 1e-3, "t = {t}");
    }
    // whole packet inside the detected interval
    let left = gaussian_packet(&GRID, -4.0, 0.5);
    let full = detection_prob_closed_form(&spec, &left, 8.0).unwrap();
    assert!((full - sat).abs() < 1e-9);
}

#[test]
fn detection_probability_is_monotone() {
    let psi = gaussian_packet(&GRID, -3.0, 1.0);
    let mut prev_kappa = -1.0;
    for kappa in [0.0, 0.25, 0.5, 1.0, 2.0, 4.0] {
        let spec = DetectorSpec::stationary(kappa, 40.0, 0.0, GRID);
        let mut prev_t = -1.0;
        for k in 0..=20 {
            let p = detection_prob_closed_form(&spec, &psi, 0.4 * k as f64).unwrap();
            assert!(p >= prev_t);
            prev_t = p;
        }
        let p = detection_prob_closed_form(&spec, &psi, 4.0).unwrap();
        assert!(p >= prev_kappa);
        prev_kappa = p;
    }
}

#[test]
fn exact_propagator_without_detector_is_a_shift() {
    let spec = DetectorSpec::stationary(0.0, 40.0, 0.0, GRID);
    let psi = gaussian_packet(&GRID, -3.0, 0.7);
    let out = exact_propagate(&spec, &psi, 40.0 * GRID.dx()).unwrap();
    for j in 0..GRID.points {
        assert_eq!(out[(j + 40) % GRID.points], psi[j]);
    }
    assert!((out.norm_squared() - 1.0).abs() < 1e-14);
}

#[test]
fn packet_right_of_detector_is_untouched() {
    let spec = DetectorSpec::stationary(1.0, 40.0, -4.0, GRID);
    let psi = gaussian_packet(&GRID, 2.0, 0.5);
    let out = exact_propagate(&spec, &psi, 3.0).unwrap();
    assert!((out.norm_squared() - 1.0).abs() < 1e-12);
}

#[test]
fn full_traversal_survival_matches_closed_form_complement() {
    // 70% of the mass crosses the detector completely by t = 5, the rest
    // never reaches it
    let crossing = gaussian_packet(&GRID, -3.0, 0.4);
    let staying = gaussian_packet(&GRID, -8.0, 0.4);
    let psi = crossing * c(0.7f64.sqrt()) + staying * c(0.3f64.sqrt());
    for kappa in [0.5, 1.0, 2.0] {
        let spec = DetectorSpec::stationary(kappa, 40.0, 0.0, GRID);
        for t in [5.0, 6.0] {
            let out = exact_propagate(&spec, &psi, t).unwrap();
            let survival = (-kappa).exp() * 0.7 + 0.3;
            assert!((out.norm_squared() - survival).abs() < 1e-3, "kappa {kappa} t {t}");
            let p = detection_prob_closed_form(&spec, &psi, t).unwrap();
            assert!((1.0 - out.norm_squared() - p).abs() < 1e-3);
        }
    }
}

#[test]
fn engine_transport_matches_exact_propagator() {
    let mut spec = DetectorSpec::stationary(1.3, 40.0, 0.4, GRID);
    let model = build_detector_model(&spec).unwrap();
    let psi = gaussian_packet(&GRID, -2.0, 0.8);
    for t in [0.5, 2.0, 3.35] {
        let engine = propagate_to(&model, ClassicalStateId(0), &psi, 0.0, t, &engine_cfg()).unwrap();
        let exact = exact_propagate(&spec, &psi, t).unwrap();
        assert!((engine - exact).norm() < 1e-12, "t = {t}");
    }
    assert!(matches!(exact_propagate(&spec, &psi, 0.123), Err(Error::NonCommensurateTime { .. })));
    spec.width = 2.0 * MAX_WIDTH_DX2 / GRID.dx().powi(2);
    assert!(matches!(build_detector_model(&spec), Err(Error::GridTooCoarse { .. })));
}

#[test]
fn born_rate_in_point_limit() {
    let (kappa, center, sigma, dt) = (1.0, -0.5, 1.0, 1e-3);
    let spec = DetectorSpec::stationary(kappa, 40.0, 0.0, GRID);
    assert!(spec.is_point_regime());
    let model = build_detector_model(&spec).unwrap();
    let psi = gaussian_packet(&GRID, center, sigma);
    let after = propagate_to(&model, ClassicalStateId(0), &psi, 0.0, dt, &engine_cfg()).unwrap();
    let p = 1.0 - after.norm_squared();
    let born = kappa * normal_pdf(center, sigma, 0.0) * dt;
    assert!(((p - born) / born).abs() < 0.05, "{p} vs {born}");
}

#[test]
fn finite_width_rate_error_is_second_order() {
    let (kappa, width, center, sigma) = (1.0, 2.0, -0.3, 0.8);
    let spec = DetectorSpec::stationary(kappa, width, 0.0, GRID);
    let model = build_detector_model(&spec).unwrap();
    let psi = gaussian_packet(&GRID, center, sigma);
    // ∫ g² |ψ₀|² dx for Gaussian g² and |ψ₀|²
    let s = 1.0 + 4.0 * width * sigma * sigma;
    let rate = kappa * (2.0 * width / PI).sqrt() * (-2.0 * width * center * center / s).exp() / s.sqrt();
    let err = |dt: f64| {
        let after = propagate_to(&model, ClassicalStateId(0), &psi, 0.0, dt, &engine_cfg()).unwrap();
        ((1.0 - after.norm_squared()) - rate * dt).abs()
    };
    let dts = [4.0 * GRID.dx(), 2.0 * GRID.dx(), GRID.dx()];
    let errs: Vec<f64> = dts.iter().map(|&dt| err(dt)).collect();
    for (e, dt) in errs.iter().zip(dts) {
        assert!(*e < dt * dt, "error {e} at dt {dt}");
    }
    let ratio = errs[0] / errs[1];
    assert!((3.0..5.0).contains(&ratio), "{errs:?}");
}

#[test]
fn zero_efficiency_never_detects() {
    let spec = DetectorSpec::stationary(0.0, 40.0, 0.0, GRID);
    let model = build_detector_model(&spec).unwrap();
    let lam = model.lambda_op(ClassicalStateId(0), 0.0).unwrap().to_dense();
    assert!(lam.iter().all(|z| z.norm() == 0.0));
    let init = PureHybridState::new(ClassicalStateId(0), gaussian_packet(&GRID, -3.0, 1.0)).unwrap();
    let trajs = run_many(200, None, |k| run_trajectory(&model, &init, 0.0, 8.0, &mut RngStream::new(1, k), &engine_cfg()))
        .unwrap();
    assert!(trajs.iter().all(|r| r.events.is_empty()));
}

#[test]
fn sampled_detections_follow_closed_form() {
    let kappa = 1.0;
    let spec = DetectorSpec::stationary(kappa, 40.0, 0.0, GRID);
    let model = build_detector_model(&spec).unwrap();
    let init = PureHybridState::new(ClassicalStateId(0), gaussian_packet(&GRID, -3.0, 1.0)).unwrap();
    let n = 4000;
    let trajs = run_many(n, None, |k| run_trajectory(&model, &init, 0.0, 6.0, &mut RngStream::new(3, k), &engine_cfg()))
        .unwrap();
    for r in &trajs {
        assert!(r.events.len() <= 1);
        if let Some(e) = r.events.first() {
            assert_eq!((e.from, e.to), (ClassicalStateId(0), ClassicalStateId(1)));
        }
    }
    for t in [2.0, 3.0, 4.0, 6.0] {
        let hits = trajs.iter().filter(|r| r.first_event_time().is_some_and(|s| s <= t)).count() as f64 / n as f64;
        let p = (1.0 - (-kappa).exp()) * normal_mass(-3.0, 1.0, -t, 0.0);
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits - p).abs() <= 4.0 * sigma, "t = {t}: {hits} vs {p}");
    }
}

#[test]
fn zero_hamiltonian_detector_has_no_transport() {
    let spec = DetectorSpec {
        hamiltonian: DetectorHamiltonian::Zero,
        ..DetectorSpec::stationary(1.0, 5.0, 0.0, Grid { length: 4.0, points: 40 })
    };
    let model = build_detector_model(&spec).unwrap();
    let psi = gaussian_packet(&spec.grid, 0.5, 0.4);
    let out = propagate_to(&model, ClassicalStateId(0), &psi, 0.0, 1.0, &EngineConfig::default()).unwrap();
    let g = spec.profile_on_grid(0.0);
    for j in 0..40 {
        assert!((out[j] - psi[j] * c((-0.5 * g[j] * g[j]).exp())).norm() < 1e-9);
    }
}

fn clock_ticks(spec: &ClockSpec, t_end: f64, n: u64, seed: u64) -> Vec<Vec<f64>> {
    let model = build_clock_model(spec).unwrap();
    let init = PureHybridState::new(ClassicalStateId(0), CVec::from_vec(vec![c(0.6), c(0.8)])).unwrap();
    let trajs =
        run_many(n, None, |k| run_trajectory(&model, &init, 0.0, t_end, &mut RngStream::new(seed, k), &EngineConfig::default()))
            .unwrap();
    trajs
        .iter()
        .map(|r| {
            for e in &r.events {
                assert!((e.post_jump_psi.norm_squared() - 1.0).abs() <= 1e-12);
                assert_eq!(e.to.0, e.from.0 + 1);
            }
            r.events.iter().map(|e| e.time).collect()
        })
        .collect()
}

#[test]
fn clock_gaps_are_exponential_and_independent() {
    let kappa = 2.0;
    let ticks = clock_ticks(&ClockSpec::random_unitaries(kappa, 80, 2, 6), 30.0, 4000, 9);
    let gap = |k: usize| -> Vec<f64> {
        ticks.iter().filter(|t| t.len() > k).map(|t| t[k] - if k == 0 { 0.0 } else { t[k - 1] }).collect()
    };
    let (first, second) = (gap(0), gap(1));
    assert!(ks_p_value(&first, |x| 1.0 - (-kappa * x).exp()) >= 0.01);
    assert!(ks_p_value(&second, |x| 1.0 - (-kappa * x).exp()) >= 0.01);
    assert!(ks2_p_value(&first, &second) >= 0.01);
    // a long first gap says nothing about the second
    let after_long: Vec<f64> = ticks.iter().filter(|t| t.len() > 1 && t[0] > 1.0 / kappa).map(|t| t[1] - t[0]).collect();
    assert!(ks2_p_value(&after_long, &second) >= 0.01);
}

#[test]
fn clock_tick_counts_are_poisson() {
    let (kappa, horizon) = (1.5, 4.0);
    let n = 4000;
    let ticks = clock_ticks(&ClockSpec::identity(kappa, 40, 2), horizon, n, 10);
    let counts: Vec<f64> = ticks.iter().map(|t| t.len() as f64).collect();
    let mu = kappa * horizon;
    let mean = counts.iter().sum::<f64>() / n as f64;
    let var = counts.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - mu).abs() <= 4.0 * (mu / n as f64).sqrt());
    assert!((var - mu).abs() <= 4.0 * ((mu + 2.0 * mu * mu) / n as f64).sqrt());
    for k in 0..10 {
        let freq = counts.iter().filter(|&&x| x as usize == k).count() as f64 / n as f64;
        let p = poisson(k, mu);
        assert!((freq - p).abs() <= 4.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-12, "count {k}");
    }
}
