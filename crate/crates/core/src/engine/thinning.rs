use super::flow::propagate_to;
use super::jump::{apply_jump, check_span, select_channel};
use super::{EngineConfig, EventRecord, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::model::{HybridModel, PureHybridState};
use crate::rng::RngStream;

/// Samples a history by thinning: the normalized state follows the same
/// damped flow (renormalized every step) and in each step of length `dt`
/// an event occurs with probability `λ_α(ψ)·dt`, the rate taken at the end
/// of the step. Events are stamped at the end of their step.
///
/// Statistically equivalent to [`super::run_trajectory`] as `dt → 0`.
pub fn run_trajectory_thinning(
    model: &HybridModel,
    initial: &PureHybridState,
    t_start: f64,
    t_end: f64,
    rng: &mut RngStream,
    dt: f64,
    cfg: &EngineConfig,
) -> Result<TrajectoryRecord> {
    check_span(model, initial, t_start, t_end)?;
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!("thinning step must be positive, got {dt}")));
    }
    let bound = model.rate_bound(t_start);
    if bound * dt > 0.1 {
        log::warn!("thinning step {dt} is coarse for rate bound {bound}: λ·dt = {}", bound * dt);
    }

    let mut state = initial.clone();
    let mut events: Vec<EventRecord> = Vec::new();
    let mut integral = 0.0_f64;
    let mut t = t_start;
    let mut k = 0u64;
    while t < t_end {
        k += 1;
        let t_next = (t_start + k as f64 * dt).min(t_end);
        let h = t_next - t;
        let moved = propagate_to(model, state.alpha, &state.psi, t, t_next, cfg)?;
        let psi = PureHybridState::new(state.alpha, moved)?;
        let rate = model.jump_rate(psi.alpha, &psi.psi, t_next)?;
        integral += rate * h;
        let u = rng.uniform_open();
        if u < rate * h {
            let r1 = rng.uniform_open();
            let probs = model.jump_probs(psi.alpha, &psi.psi, t_next)?;
            let to = select_channel(&probs, r1)?;
            let next = apply_jump(model, &psi, t_next, to)?;
            events.push(EventRecord {
                time: t_next,
                from: psi.alpha,
                to,
                pre_jump_norm_sq: (-integral).exp(),
                post_jump_psi: next.psi.clone(),
            });
            integral = 0.0;
            state = next;
        } else {
            state = psi;
        }
        t = t_next;
    }
    let terminated_without_event = events.last().map_or(true, |e| e.time < t_end);
    Ok(TrajectoryRecord {
        seed: rng.master_seed(),
        stream: rng.stream_index(),
        initial: initial.clone(),
        t_start,
        t_end,
        events,
        final_state: state,
        survival_norm_sq: (-integral).exp(),
        terminated_without_event,
    })
}

/// Largest deviation over `t_grid` between the two survival routes
/// `1 - exp(-∫λ_α(ψ̂) ds)` (trapezoid rule on the grid, `ψ̂` the
/// normalized flow) and `1 - ‖ψ(t)‖²`. No jumps are executed.
pub fn survival_identity_check(
    model: &HybridModel,
    initial: &PureHybridState,
    t_grid: &[f64],
    cfg: &EngineConfig,
) -> Result<f64> {
    let Some((&t0, rest)) = t_grid.split_first() else {
        return Ok(0.0);
    };
    let alpha = initial.alpha;
    let mut psi = initial.psi.clone();
    let n0 = norm_sq(&psi);
    let mut rate = model.jump_rate(alpha, &psi, t0)? / n0;
    let mut integral = 0.0_f64;
    let mut t = t0;
    let mut worst = ((-integral).exp() - n0).abs();
    for &tb in rest {
        if tb < t {
            return Err(Error::Invalid("time grid must be non-decreasing".into()));
        }
        psi = propagate_to(model, alpha, &psi, t, tb, cfg)?;
        let n = norm_sq(&psi);
        let next_rate = model.jump_rate(alpha, &psi, tb)? / n;
        integral += 0.5 * (tb - t) * (rate + next_rate);
        worst = worst.max((((-integral).exp()) - n / n0).abs());
        rate = next_rate;
        t = tb;
    }
    Ok(worst)
}
