//! Monte Carlo estimate of the density family and its comparison with the
//! integrated master equation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run_many, run_trajectory, state_at, EngineConfig, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::linalg::{outer, trace_norm};
use crate::master::{default_dt, DensityFamily, MasterIntegrator};
use crate::model::{HybridModel, PureHybridState};
use crate::rng::RngStream;
use crate::stats::log_log_slope;
use crate::C64;

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleEstimate {
    pub family: DensityFamily,
    pub n_trajectories: usize,
    pub t: f64,
    pub per_block_counts: Vec<usize>,
}

/// `ρ̂_β(t) = (1/N) Σ_k 1[α_k(t) = β] |ψ_k(t)⟩⟨ψ_k(t)|` with each `ψ_k(t)`
/// rebuilt by replay.
pub fn estimate_density(
    trajectories: &[TrajectoryRecord],
    model: &HybridModel,
    t: f64,
    cfg: &EngineConfig,
) -> Result<EnsembleEstimate> {
    if trajectories.is_empty() {
        return Err(Error::Invalid("no trajectories to average".into()));
    }
    let states: Vec<PureHybridState> =
        trajectories.par_iter().map(|r| state_at(model, r, t, cfg)).collect::<Result<_>>()?;
    let n = states.len();
    let mut family = DensityFamily::zeros(model.dims(), t);
    let mut counts = vec![0usize; model.m()];
    let w = C64::new(1.0 / n as f64, 0.0);
    for s in &states {
        counts[s.alpha.0] += 1;
        family.blocks[s.alpha.0] += outer(&s.psi) * w;
    }
    family.symmetrize();
    Ok(EnsembleEstimate { family, n_trajectories: n, t, per_block_counts: counts })
}

/// `½ Σ_β ‖ρ_β^a - ρ_β^b‖₁`.
pub fn trace_distance(a: &DensityFamily, b: &DensityFamily) -> Result<f64> {
    a.check_shape(b)?;
    Ok(0.5 * a.blocks.iter().zip(&b.blocks).map(|(x, y)| trace_norm(&(x - y))).sum::<f64>())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub engine: EngineConfig,
    /// Master-equation step; `None` picks [`default_dt`].
    pub dt: Option<f64>,
    /// Independent batches averaged per sample size.
    pub replicates: usize,
    pub jobs: Option<usize>,
    pub t_start: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { engine: EngineConfig::default(), dt: None, replicates: 8, jobs: None, t_start: 0.0 }
    }
}

/// Distances below this are integrator noise: the model is deterministic.
pub const DETERMINISTIC_FLOOR: f64 = 1e-6;
pub const SLOPE_RANGE: (f64, f64) = (-0.65, -0.35);

/// Statistical bound on the trace distance at sample size `n`.
pub fn distance_bound(n: u64) -> f64 {
    5.0 / (n as f64).sqrt() + 2e-3
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub checkpoints: Vec<f64>,
    #[serde(rename = "N")]
    pub n: Vec<u64>,
    /// `trace_distances[i][j]`: sample size `n[i]`, checkpoint `j`, mean
    /// over replicates.
    pub trace_distances: Vec<Vec<f64>>,
    /// Single-batch distances at the largest sample size.
    pub largest_batch_distances: Vec<f64>,
    pub fitted_slope: Option<f64>,
    pub deterministic: bool,
    pub within_bound: bool,
    pub pass: bool,
}

/// Runs `N` trajectories for every `N` in `n_list`, compares their density
/// estimates at each checkpoint with one master-equation solution, and fits
/// the decay of the trace distance against `N` on log–log axes.
pub fn convergence_report(
    model: &HybridModel,
    initial: &PureHybridState,
    checkpoints: &[f64],
    n_list: &[u64],
    master_seed: u64,
    cfg: &VerifyConfig,
) -> Result<ConvergenceReport> {
    if checkpoints.is_empty() || n_list.is_empty() {
        return Err(Error::Invalid("need at least one checkpoint and one sample size".into()));
    }
    let mut cps = checkpoints.to_vec();
    cps.sort_by(f64::total_cmp);
    let t_end = *cps.last().expect("non-empty");
    let family0 = DensityFamily::pure(model, initial, cfg.t_start);
    let dt = cfg.dt.unwrap_or_else(|| default_dt(model));
    let exact = MasterIntegrator::new(model, dt)?.integrate_at(&family0, &cps)?;
    let replicates = cfg.replicates.max(1);

    let mut trace_distances = Vec::with_capacity(n_list.len());
    let mut largest_batch_distances = Vec::new();
    let largest = *n_list.iter().max().expect("non-empty");
    for (ni, &n) in n_list.iter().enumerate() {
        let mut sums = vec![0.0; cps.len()];
        for rep in 0..replicates {
            let base = ((ni * replicates + rep) as u64) << 32;
            let trajectories = run_many(n, cfg.jobs, |k| {
                let mut rng = RngStream::new(master_seed, base | k);
                run_trajectory(model, initial, cfg.t_start, t_end, &mut rng, &cfg.engine)
            })?;
            for (j, (&t, ex)) in cps.iter().zip(&exact).enumerate() {
                let est = estimate_density(&trajectories, model, t, &cfg.engine)?;
                let d = trace_distance(&est.family, ex)?;
                sums[j] += d;
                if n == largest && rep == 0 {
                    largest_batch_distances.push(d);
                }
            }
        }
        trace_distances.push(sums.iter().map(|s| s / replicates as f64).collect::<Vec<f64>>());
    }

    let deterministic = trace_distances.iter().flatten().all(|&d| d <= DETERMINISTIC_FLOOR);
    let within_bound = largest_batch_distances.iter().all(|&d| d <= distance_bound(largest));
    let fitted_slope = (n_list.len() >= 2 && !deterministic).then(|| {
        let x: Vec<f64> = n_list.iter().map(|&n| n as f64).collect();
        let y: Vec<f64> = trace_distances.iter().map(|row| row.iter().sum::<f64>() / row.len() as f64).collect();
        log_log_slope(&x, &y)
    });
    let slope_ok = fitted_slope.is_some_and(|s| s >= SLOPE_RANGE.0 && s <= SLOPE_RANGE.1);
    let pass = within_bound && (deterministic || slope_ok);
    Ok(ConvergenceReport {
        checkpoints: cps,
        n: n_list.to_vec(),
        trace_distances,
        largest_batch_distances,
        fitted_slope,
        deterministic,
        within_bound,
        pass,
    })
}
