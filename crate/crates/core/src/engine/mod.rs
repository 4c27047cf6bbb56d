//! Piecewise deterministic event engine.
//!
//! Between events the quantum vector follows the damped flow
//! `ψ' = (-iH_α - Λ_α/2) ψ`, whose squared norm is the survival probability
//! of the current segment. A segment draws `r` uniform on (0, 1) and ends
//! when `‖ψ‖²` falls to `r`; the target classical state is then chosen
//! from `p_β(ψ)` and the vector jumps to `g_{βα}ψ / ‖g_{βα}ψ‖`.
//!
//! [`run_trajectory_thinning`] samples the same process by per-step
//! Bernoulli decisions and exists as an independent check on
//! [`run_trajectory`].

mod flow;
mod jump;
mod thinning;

use serde::{Deserialize, Serialize};

pub use flow::{advance, propagate_step, propagate_to};
pub use jump::{
    apply_jump, find_jump_time, run_many, run_trajectory, select_channel, state_at, JumpSearch,
};
pub use thinning::{run_trajectory_thinning, survival_identity_check};

use crate::model::{ClassicalStateId, PureHybridState};
use crate::CVec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Outer step of the deterministic flow, in model time units.
    pub base_step: f64,
    /// Accepted `|‖ψ(t₁)‖² - r|` at an event.
    pub root_tol: f64,
    pub max_bisections: u32,
    /// Step halvings allowed before a rejected step aborts the trajectory.
    pub max_halvings: u32,
    /// Relative norm growth per step tolerated before a step is rejected.
    pub norm_growth_tol: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { base_step: 1e-2, root_tol: 1e-10, max_bisections: 60, max_halvings: 40, norm_growth_tol: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub from: ClassicalStateId,
    pub to: ClassicalStateId,
    /// `‖ψ(t₁)‖²` just before the jump; equals the drawn threshold up to
    /// `root_tol`. The thinning sampler stores the segment's survival
    /// probability `exp(-∫λ)` here instead.
    pub pre_jump_norm_sq: f64,
    /// Normalized state right after the jump.
    pub post_jump_psi: CVec,
}

/// One sampled history.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub stream: u64,
    pub initial: PureHybridState,
    pub t_start: f64,
    pub t_end: f64,
    pub events: Vec<EventRecord>,
    /// State at `t_end`, normalized.
    pub final_state: PureHybridState,
    /// `‖ψ(t_end)‖²` of the last segment before renormalization.
    pub survival_norm_sq: f64,
    pub terminated_without_event: bool,
}

impl TrajectoryRecord {
    pub fn first_event_time(&self) -> Option<f64> {
        self.events.first().map(|e| e.time)
    }

    /// Classical state occupied at time `t`.
    pub fn alpha_at(&self, t: f64) -> ClassicalStateId {
        self.events.iter().take_while(|e| e.time <= t).last().map_or(self.initial.alpha, |e| e.to)
    }
}
