use rayon::prelude::*;

use super::flow::{advance, propagate_to};
use super::{EngineConfig, EventRecord, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::model::{ClassicalStateId, HybridModel, PureHybridState, PSD_CLAMP};
use crate::rng::RngStream;
use crate::CVec;

/// Outcome of one segment's threshold search.
#[derive(Clone, Debug, PartialEq)]
pub enum JumpSearch {
    Event { time: f64, psi: CVec, norm_sq: f64 },
    /// The threshold was not reached before the horizon.
    NoEventBefore { time: f64, psi: CVec, norm_sq: f64 },
}

/// Propagates from `t0` until `‖ψ‖²` first reaches `r`.
///
/// Steps of `cfg.base_step` are taken until the squared norm brackets `r`;
/// the root is then bisected inside that step, each trial re-propagating
/// from the step's left endpoint. The squared norm is non-increasing along
/// the flow, so the first bracket is the first crossing.
pub fn find_jump_time(
    model: &HybridModel,
    state: &PureHybridState,
    t0: f64,
    r: f64,
    t_max: f64,
    cfg: &EngineConfig,
) -> Result<JumpSearch> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Invalid(format!("threshold must lie in (0,1), got {r}")));
    }
    let alpha = state.alpha;
    let mut psi = state.psi.clone();
    let mut t = t0;
    let mut k = 0u64;
    while t < t_max {
        k += 1;
        let t_next = (t0 + k as f64 * cfg.base_step).min(t_max);
        let h = t_next - t;
        let next = advance(model, alpha, &psi, t, h, cfg)?;
        let n_next = norm_sq(&next);
        if n_next <= r {
            return bisect(model, alpha, &psi, t, h, r, next, n_next, cfg);
        }
        psi = next;
        t = t_next;
    }
    let norm_sq = norm_sq(&psi);
    Ok(JumpSearch::NoEventBefore { time: t, psi, norm_sq })
}

#[allow(clippy::too_many_arguments)]
fn bisect(
    model: &HybridModel,
    alpha: ClassicalStateId,
    left: &CVec,
    t: f64,
    h: f64,
    r: f64,
    mut psi_hi: CVec,
    mut n_hi: f64,
    cfg: &EngineConfig,
) -> Result<JumpSearch> {
    let (mut lo, mut hi) = (0.0, h);
    if (n_hi - r).abs() > cfg.root_tol {
        for _ in 0..cfg.max_bisections {
            let mid = 0.5 * (lo + hi);
            let v = advance(model, alpha, left, t, mid, cfg)?;
            let n = norm_sq(&v);
            if (n - r).abs() <= cfg.root_tol {
                return Ok(JumpSearch::Event { time: t + mid, psi: v, norm_sq: n });
            }
            if n > r {
                lo = mid;
            } else {
                hi = mid;
                psi_hi = v;
                n_hi = n;
            }
        }
    }
    Ok(JumpSearch::Event { time: t + hi, psi: psi_hi, norm_sq: n_hi })
}

/// Smallest index whose running sum of `probs` reaches `r1`.
///
/// If round-off leaves the total short of `r1`, the last index with
/// non-zero probability is returned.
pub fn select_channel(probs: &[f64], r1: f64) -> Result<ClassicalStateId> {
    if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::InvalidDistribution(format!("entry {p} is not a probability")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
    }
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if p > 0.0 && cum >= r1 {
            return Ok(ClassicalStateId(i));
        }
    }
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .map(ClassicalStateId)
        .ok_or_else(|| Error::InvalidDistribution("no channel has positive probability".into()))
}

/// `ψ → g_{to,α} ψ / ‖g_{to,α} ψ‖` together with the label change. A
/// jump norm at round-off level counts as zero.
pub fn apply_jump(
    model: &HybridModel,
    state: &PureHybridState,
    t1: f64,
    to: ClassicalStateId,
) -> Result<PureHybridState> {
    model.check_index(to)?;
    let g = model
        .coupling(to, state.alpha)
        .ok_or(Error::MissingCoupling { from: state.alpha.label(), to: to.label() })?;
    let phi = g.at(t1).apply(&state.psi);
    let n_sq = norm_sq(&phi);
    if !(n_sq > PSD_CLAMP * norm_sq(&state.psi)) {
        return Err(Error::ZeroPostJumpNorm { from: state.alpha.label(), to: to.label(), t: t1 });
    }
    Ok(PureHybridState { alpha: to, psi: phi.unscale(n_sq.sqrt()), normalized: true })
}

/// Samples one history on `[t_start, t_end]`.
pub fn run_trajectory(
    model: &HybridModel,
    initial: &PureHybridState,
    t_start: f64,
    t_end: f64,
    rng: &mut RngStream,
    cfg: &EngineConfig,
) -> Result<TrajectoryRecord> {
    check_span(model, initial, t_start, t_end)?;
    let mut state = initial.clone();
    let mut t = t_start;
    let mut events: Vec<EventRecord> = Vec::new();
    loop {
        let r = rng.uniform_open();
        match find_jump_time(model, &state, t, r, t_end, cfg)? {
            JumpSearch::NoEventBefore { psi, norm_sq, .. } => {
                let final_state = PureHybridState::new(state.alpha, psi)?;
                return Ok(TrajectoryRecord {
                    seed: rng.master_seed(),
                    stream: rng.stream_index(),
                    initial: initial.clone(),
                    t_start,
                    t_end,
                    events,
                    final_state,
                    survival_norm_sq: norm_sq,
                    terminated_without_event: true,
                });
            }
            JumpSearch::Event { time, psi, norm_sq } => {
                let time = if time > t { time } else { t.next_up() };
                let r1 = rng.uniform_open();
                let probs = model.jump_probs(state.alpha, &psi, time)?;
                let to = select_channel(&probs, r1)?;
                let pre = PureHybridState { alpha: state.alpha, psi, normalized: false };
                let next = apply_jump(model, &pre, time, to)?;
                events.push(EventRecord {
                    time,
                    from: state.alpha,
                    to,
                    pre_jump_norm_sq: norm_sq,
                    post_jump_psi: next.psi.clone(),
                });
                state = next;
                t = time;
                if t >= t_end {
                    return Ok(TrajectoryRecord {
                        seed: rng.master_seed(),
                        stream: rng.stream_index(),
                        initial: initial.clone(),
                        t_start,
                        t_end,
                        events,
                        final_state: state,
                        survival_norm_sq: 1.0,
                        terminated_without_event: false,
                    });
                }
            }
        }
    }
}

pub(super) fn check_span(model: &HybridModel, initial: &PureHybridState, t_start: f64, t_end: f64) -> Result<()> {
    model.check_index(initial.alpha)?;
    if initial.psi.len() != model.dim(initial.alpha) {
        return Err(Error::ShapeMismatch(format!(
            "initial vector has length {}, expected {}",
            initial.psi.len(),
            model.dim(initial.alpha)
        )));
    }
    if (initial.norm_sq() - 1.0).abs() > 1e-12 {
        return Err(Error::Invalid("initial state must be normalized".into()));
    }
    if !(t_end > t_start) {
        return Err(Error::Invalid(format!("empty time span [{t_start}, {t_end}]")));
    }
    Ok(())
}

/// Normalized state of a recorded trajectory at time `t`, rebuilt by
/// replaying the deterministic flow from the last event at or before `t`.
pub fn state_at(
    model: &HybridModel,
    record: &TrajectoryRecord,
    t: f64,
    cfg: &EngineConfig,
) -> Result<PureHybridState> {
    if t < record.t_start || t > record.t_end {
        return Err(Error::HorizonExceeded { t, t_start: record.t_start, t_end: record.t_end });
    }
    let (alpha, psi, t0) = match record.events.iter().take_while(|e| e.time <= t).last() {
        Some(e) => (e.to, &e.post_jump_psi, e.time),
        None => (record.initial.alpha, &record.initial.psi, record.t_start),
    };
    let psi = propagate_to(model, alpha, psi, t0, t, cfg)?;
    PureHybridState::new(alpha, psi)
}

/// Runs `n` independent jobs `job(0..n)` on `jobs` worker threads (all
/// cores when `None`). Results come back in index order whatever the
/// worker count.
pub fn run_many<T, F>(n: u64, jobs: Option<usize>, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let work = || (0..n).into_par_iter().map(&job).collect::<Result<Vec<T>>>();
    match jobs {
        None => work(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?
            .install(work),
    }
}
