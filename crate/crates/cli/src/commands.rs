//! Command bodies. Each returns whether its checks passed; data goes to
//! files in the output directory, the human summary to stdout.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use eventum::engine::{run_many, run_trajectory};
use eventum::ensemble::{convergence_report, VerifyConfig};
use eventum::io::{load_model, write_events_jsonl, write_json, write_summary_csv, write_timeseries_csv};
use eventum::master::{default_dt, MasterIntegrator};
use eventum::models::builtin::BuiltinKind;
use eventum::models::clock::poisson_block_traces;
use eventum::models::detector::detection_prob_closed_form;
use eventum::models::{resolve_builtin, ClockBoundary, ModelBundle};
use eventum::stats::{binomial_sigma, ks_one_sample, mean, variance};
use eventum::{DensityFamily, EngineConfig, RngStream, TrajectoryRecord};

use crate::config::{CommandKind, DemoKind, ModelRef, RunConfig};
use crate::CliError;

/// Sigma multiple for the statistical checks.
const SIGMAS: f64 = 4.0;
const KS_SIGNIFICANCE: f64 = 0.01;

pub fn execute(cfg: &RunConfig) -> Result<bool, CliError> {
    match cfg.command {
        CommandKind::Simulate => simulate(cfg),
        CommandKind::Integrate => integrate(cfg),
        CommandKind::Verify => verify(cfg),
        CommandKind::Demo(DemoKind::Detector) => demo_detector(cfg),
        CommandKind::Demo(DemoKind::Clock) => demo_clock(cfg),
    }
}

fn load(cfg: &RunConfig) -> Result<ModelBundle, CliError> {
    Ok(match &cfg.model {
        ModelRef::Builtin(name) => resolve_builtin(name, &cfg.params)?,
        ModelRef::File(path) => load_model(path, &cfg.params)?,
    })
}

fn engine_config(cfg: &RunConfig, bundle: &ModelBundle) -> EngineConfig {
    let mut engine = EngineConfig { root_tol: cfg.root_tol, ..EngineConfig::default() };
    if let Some(h) = cfg.base_step.or(bundle.base_step) {
        engine.base_step = h;
    }
    engine
}

fn t_end(cfg: &RunConfig, bundle: &ModelBundle) -> Result<f64, CliError> {
    let t = cfg.t_end.unwrap_or(cfg.t_start + bundle.horizon);
    if !(t > cfg.t_start) {
        return Err(CliError::Usage(format!("t_end {t} must exceed t_start {}", cfg.t_start)));
    }
    Ok(t)
}

fn output_file(cfg: &RunConfig, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    fs::create_dir_all(&cfg.output_dir).map_err(eventum::Error::from)?;
    let path = cfg.output_dir.join(name);
    let file = File::create(&path).map_err(eventum::Error::from)?;
    Ok((path, BufWriter::new(file)))
}

fn sample(cfg: &RunConfig, bundle: &ModelBundle, n: u64, t_end: f64) -> Result<Vec<TrajectoryRecord>, CliError> {
    let engine = engine_config(cfg, bundle);
    Ok(run_many(n, cfg.jobs, |k| {
        let mut rng = RngStream::new(cfg.master_seed, k);
        run_trajectory(&bundle.model, &bundle.initial, cfg.t_start, t_end, &mut rng, &engine)
    })?)
}

fn simulate(cfg: &RunConfig) -> Result<bool, CliError> {
    let bundle = load(cfg)?;
    let t_end = t_end(cfg, &bundle)?;
    let n = cfg.n[0];
    let trajectories = sample(cfg, &bundle, n, t_end)?;

    let (events_path, mut events) = output_file(cfg, "events.jsonl")?;
    write_events_jsonl(&mut events, &trajectories, cfg.log_compact)?;
    events.flush().map_err(eventum::Error::from)?;
    let (summary_path, mut summary) = output_file(cfg, "summary.csv")?;
    write_summary_csv(&mut summary, &trajectories)?;
    summary.flush().map_err(eventum::Error::from)?;

    let total: usize = trajectories.iter().map(|t| t.events.len()).sum();
    let silent = trajectories.iter().filter(|t| t.events.is_empty()).count();
    println!("model {} | {n} trajectories on [{}, {t_end}] | seed {}", bundle.name, cfg.t_start, cfg.master_seed);
    println!("events: {total} total, {:.4} per trajectory, {silent} trajectories without events", total as f64 / n as f64);
    println!("wrote {} and {}", events_path.display(), summary_path.display());
    Ok(true)
}

fn record_times(cfg: &RunConfig, t_end: f64) -> Vec<f64> {
    if !cfg.checkpoints.is_empty() {
        let mut cps = cfg.checkpoints.clone();
        cps.sort_by(f64::total_cmp);
        return cps;
    }
    (1..=100).map(|k| cfg.t_start + (t_end - cfg.t_start) * k as f64 / 100.0).collect()
}

fn integrate(cfg: &RunConfig) -> Result<bool, CliError> {
    let bundle = load(cfg)?;
    let t_end = t_end(cfg, &bundle)?;
    let dt = cfg.dt.unwrap_or_else(|| default_dt(&bundle.model));
    let family0 = DensityFamily::pure(&bundle.model, &bundle.initial, cfg.t_start);
    let times = record_times(cfg, t_end);
    let mut series = vec![family0.clone()];
    series.extend(MasterIntegrator::new(&bundle.model, dt)?.integrate_at(&family0, &times)?);

    let (path, mut out) = output_file(cfg, "timeseries.csv")?;
    write_timeseries_csv(&mut out, &series, cfg.verbose)?;
    out.flush().map_err(eventum::Error::from)?;

    let last = series.last().expect("non-empty");
    println!("model {} | master equation on [{}, {}] with dt {dt}", bundle.name, cfg.t_start, last.t);
    println!("final total trace {:.12}, smallest eigenvalue {:.3e}", last.total_trace(), last.min_eigenvalue());
    println!("wrote {}", path.display());
    Ok(true)
}

fn verify(cfg: &RunConfig) -> Result<bool, CliError> {
    let bundle = load(cfg)?;
    let t_end = t_end(cfg, &bundle)?;
    let checkpoints = if cfg.checkpoints.is_empty() {
        [0.25, 0.5, 1.0].iter().map(|f| cfg.t_start + f * (t_end - cfg.t_start)).collect()
    } else {
        cfg.checkpoints.clone()
    };
    let vcfg = VerifyConfig {
        engine: engine_config(cfg, &bundle),
        dt: cfg.dt,
        replicates: cfg.replicates,
        jobs: cfg.jobs,
        t_start: cfg.t_start,
    };
    let report = convergence_report(&bundle.model, &bundle.initial, &checkpoints, &cfg.n, cfg.master_seed, &vcfg)?;
    fs::create_dir_all(&cfg.output_dir).map_err(eventum::Error::from)?;
    let path = cfg.output_dir.join("report.json");
    write_json(&path, &report)?;

    println!("model {} | trace distance to the master equation (mean of {} batches)", bundle.name, cfg.replicates);
    print!("{:>10}", "N");
    for t in &report.checkpoints {
        print!("  {:>10}", format!("t={t}"));
    }
    println!();
    for (n, row) in report.n.iter().zip(&report.trace_distances) {
        print!("{n:>10}");
        for d in row {
            print!("  {d:>10.3e}");
        }
        println!();
    }
    match report.fitted_slope {
        Some(s) => println!("fitted slope {s:.3}"),
        None => println!("fitted slope: n/a (deterministic model)"),
    }
    println!("within bound at the largest N: {}", report.within_bound);
    println!("{} | wrote {}", verdict(report.pass), path.display());
    Ok(report.pass)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn demo_detector(cfg: &RunConfig) -> Result<bool, CliError> {
    let bundle = load(cfg)?;
    let BuiltinKind::Detector(spec) = &bundle.kind else {
        unreachable!("detector1d resolves to a detector");
    };
    let checkpoints = if cfg.checkpoints.is_empty() { vec![2.0, 3.0, 4.0, 5.0, 6.0] } else { cfg.checkpoints.clone() };
    let t_end = checkpoints.iter().copied().fold(cfg.t_start, f64::max);
    let n = cfg.n[0];
    let trajectories = sample(cfg, &bundle, n, t_end)?;
    let first: Vec<Option<f64>> = trajectories.iter().map(TrajectoryRecord::first_event_time).collect();

    println!("detector: kappa {} at a = {}, width {}, N = {n}", spec.kappa, spec.path.at(0.0), spec.width);
    println!("{:>6}  {:>10}  {:>10}  {:>9}  {:>6}", "t", "empirical", "closed", "4 sigma", "");
    let mut all = true;
    for &t in &checkpoints {
        let hits = first.iter().filter(|f| f.is_some_and(|s| s <= t)).count();
        let p_hat = hits as f64 / n as f64;
        let p = detection_prob_closed_form(spec, &bundle.initial.psi, t - cfg.t_start)?;
        let tol = SIGMAS * binomial_sigma(p, n as usize).max(1.0 / n as f64);
        let ok = (p_hat - p).abs() <= tol;
        all &= ok;
        println!("{t:>6}  {p_hat:>10.5}  {p:>10.5}  {tol:>9.5}  {:>6}", verdict(ok));
    }
    println!("{}", verdict(all));
    Ok(all)
}

/// Inter-tick gaps pooled over the first few ticks of every trajectory.
const CLOCK_GAPS: usize = 5;

fn demo_clock(cfg: &RunConfig) -> Result<bool, CliError> {
    let mut params = cfg.params.clone();
    let kappa = params.kappa.unwrap_or(1.0);
    // long enough that the first ticks are never censored
    params.horizon.get_or_insert(30.0 / kappa);
    let bundle = resolve_builtin("clock", &params)?;
    let BuiltinKind::Clock(spec) = &bundle.kind else {
        unreachable!("clock resolves to a clock");
    };
    let horizon = bundle.horizon;
    let n = cfg.n[0];
    let run = RunConfig { t_end: Some(cfg.t_start + horizon), ..cfg.clone() };
    let trajectories = sample(&run, &bundle, n, cfg.t_start + horizon)?;

    let mut gaps = Vec::with_capacity(CLOCK_GAPS * n as usize);
    let mut censored = 0usize;
    let mut worst_norm = 0.0f64;
    for traj in &trajectories {
        if traj.events.len() < CLOCK_GAPS {
            censored += 1;
        }
        let mut prev = traj.t_start;
        for e in traj.events.iter().take(CLOCK_GAPS) {
            gaps.push(e.time - prev);
            prev = e.time;
        }
        for e in &traj.events {
            worst_norm = worst_norm.max((e.post_jump_psi.norm_squared() - 1.0).abs());
        }
    }
    let ks = ks_one_sample(&gaps, |x| 1.0 - (-kappa * x).exp());
    let counts: Vec<f64> = trajectories.iter().map(|t| t.events.len() as f64).collect();
    let mu = kappa * horizon;
    let (m, v) = (mean(&counts), variance(&counts));
    let mean_tol = SIGMAS * (mu / n as f64).sqrt();
    let var_tol = SIGMAS * ((mu + 2.0 * mu * mu) / n as f64).sqrt();

    let truncated = spec.boundary == ClockBoundary::Absorbing && spec.i_max < eventum::models::clock::min_i_max(kappa, horizon);
    let tail = poisson_block_traces(kappa, horizon, spec.i_max)[spec.i_max];
    let rows = [
        ("inter-tick KS p-value", format!("{:.4}", ks.p_value), ks.passes(KS_SIGNIFICANCE) && censored == 0),
        ("tick count mean", format!("{m:.4} vs {mu:.4} (tol {mean_tol:.4})"), (m - mu).abs() <= mean_tol),
        ("tick count variance", format!("{v:.4} vs {mu:.4} (tol {var_tol:.4})"), (v - mu).abs() <= var_tol),
        ("post-tick norm deviation", format!("{worst_norm:.2e}"), worst_norm <= 1e-12),
    ];
    println!("clock: kappa {kappa}, horizon {horizon}, i_max {} (tail mass {tail:.1e}), N = {n}", spec.i_max);
    if truncated {
        println!("warning: i_max is below the recommended truncation");
    }
    if censored > 0 {
        println!("{censored} trajectories ticked fewer than {CLOCK_GAPS} times; extend --horizon");
    }
    let mut all = true;
    for (name, value, ok) in rows {
        all &= ok;
        println!("{name:<26} {value:<36} {}", verdict(ok));
    }
    println!("{}", verdict(all));
    Ok(all)
}
