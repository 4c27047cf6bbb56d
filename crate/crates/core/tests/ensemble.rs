mod common;

use common::{c, exact_family, poisson};
use eventum::engine::{run_many, run_trajectory, state_at};
use eventum::ensemble::{convergence_report, distance_bound, estimate_density, trace_distance, VerifyConfig};
use eventum::linalg::outer;
use eventum::models::clock::min_i_max;
use eventum::models::testbed::{test_pair, test_triad};
use eventum::models::{build_clock_model, ClockSpec};
use eventum::{ClassicalStateId, CMat, CVec, DensityFamily, EngineConfig, HybridModel, PureHybridState, RngStream};

fn sample(model: &HybridModel, init: &PureHybridState, t_end: f64, n: u64, seed: u64) -> Vec<eventum::TrajectoryRecord> {
    let cfg = EngineConfig::default();
    run_many(n, None, |k| run_trajectory(model, init, 0.0, t_end, &mut RngStream::new(seed, k), &cfg)).unwrap()
}

#[test]
fn clock_occupations_follow_poisson() {
    let (kappa, t) = (2.0, 2.0);
    let i_max = min_i_max(kappa, t);
    let model = build_clock_model(&ClockSpec::random_unitaries(kappa, i_max, 2, 4)).unwrap();
    let init = PureHybridState::new(ClassicalStateId(0), CVec::from_vec(vec![c(0.6), c(0.8)])).unwrap();
    let n = 10_000;
    let trajs = sample(&model, &init, t, n, 77);
    let est = estimate_density(&trajs, &model, t, &EngineConfig::default()).unwrap();

    assert_eq!(est.n_trajectories, n as usize);
    assert_eq!(est.per_block_counts.iter().sum::<usize>(), n as usize);
    let traces = est.family.traces();
    for (i, (&tr, &count)) in traces.iter().zip(&est.per_block_counts).enumerate() {
        assert!((tr - count as f64 / n as f64).abs() < 1e-12);
        let p = if i < i_max { poisson(i, kappa * t) } else { 1.0 - (0..i_max).map(|j| poisson(j, kappa * t)).sum::<f64>() };
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((tr - p).abs() <= 4.0 * sigma + 1e-12, "site {i}: {tr} vs {p}");
    }
    est.family.validate().unwrap();
}

#[test]
fn estimate_is_unbiased_entrywise() {
    let (model, init) = test_triad(12).unwrap();
    let t = 1.0;
    let n = 20_000u64;
    let trajs = sample(&model, &init, t, n, 5);
    let est = estimate_density(&trajs, &model, t, &EngineConfig::default()).unwrap();
    let exact = exact_family(&model, &DensityFamily::pure(&model, &init, 0.0), t);

    // per-trajectory contributions, averaged here without the library
    let states: Vec<PureHybridState> =
        trajs.iter().map(|r| state_at(&model, r, t, &EngineConfig::default()).unwrap()).collect();
    for beta in 0..model.m() {
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let parts: Vec<[f64; 2]> = states
                .iter()
                .map(|s| {
                    if s.alpha.0 == beta {
                        let z = s.psi[i] * s.psi[j].conj();
                        [z.re, z.im]
                    } else {
                        [0.0, 0.0]
                    }
                })
                .collect();
            for part in 0..2 {
                let xs: Vec<f64> = parts.iter().map(|p| p[part]).collect();
                let mean = xs.iter().sum::<f64>() / n as f64;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                let lib = est.family.blocks[beta][(i, j)];
                let lib = if part == 0 { lib.re } else { lib.im };
                assert!((lib - mean).abs() < 1e-12);
                let want = if part == 0 { exact.blocks[beta][(i, j)].re } else { exact.blocks[beta][(i, j)].im };
                let se = (var / n as f64).sqrt();
                assert!((mean - want).abs() <= 4.5 * se + 1e-12, "block {beta} ({i},{j}) part {part}: {mean} vs {want}");
            }
        }
    }
}

#[test]
fn estimate_blocks_are_rank_weighted_projectors() {
    let (model, init) = test_pair(2).unwrap();
    let trajs = sample(&model, &init, 1.0, 50, 1);
    let est = estimate_density(&trajs, &model, 0.7, &EngineConfig::default()).unwrap();
    let mut want = vec![CMat::zeros(2, 2), CMat::zeros(2, 2)];
    for r in &trajs {
        let s = state_at(&model, r, 0.7, &EngineConfig::default()).unwrap();
        want[s.alpha.0] += outer(&s.psi) * c(1.0 / 50.0);
    }
    for (a, b) in est.family.blocks.iter().zip(&want) {
        assert!(common::max_abs_diff(a, b) < 1e-14);
    }
    assert!(estimate_density(&[], &model, 0.7, &EngineConfig::default()).is_err());
}

#[test]
fn distance_to_master_solution_is_within_bound() {
    let (model, init) = test_triad(3).unwrap();
    let n = 10_000;
    let trajs = sample(&model, &init, 2.0, n, 21);
    let exact0 = DensityFamily::pure(&model, &init, 0.0);
    for t in [0.5, 1.0, 2.0] {
        let est = estimate_density(&trajs, &model, t, &EngineConfig::default()).unwrap();
        let d = trace_distance(&est.family, &exact_family(&model, &exact0, t)).unwrap();
        assert!(d <= distance_bound(n), "t = {t}: {d}");
    }
}

#[test]
fn convergence_report_shows_inverse_square_root_decay() {
    let (model, init) = test_pair(7).unwrap();
    let cfg = VerifyConfig { replicates: 8, ..Default::default() };
    let report = convergence_report(&model, &init, &[1.0, 0.5], &[250, 1000, 4000], 3, &cfg).unwrap();
    assert_eq!(report.checkpoints, vec![0.5, 1.0]);
    assert_eq!(report.trace_distances.len(), 3);
    assert_eq!(report.largest_batch_distances.len(), 2);
    assert!(!report.deterministic);
    let slope = report.fitted_slope.unwrap();
    assert!((-0.65..=-0.35).contains(&slope), "{report:?}");
    assert!(report.pass);

    let json = serde_json::to_value(&report).unwrap();
    for key in ["checkpoints", "N", "trace_distances", "fitted_slope", "pass"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
}
