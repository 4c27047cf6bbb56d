use std::borrow::Cow;

use super::EngineConfig;
use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::model::{ClassicalStateId, Hamiltonian, HybridModel};
use crate::operator::Op;
use crate::{C64, CVec};

/// One step of length `h` of `ψ' = (-iH_α - Λ_α/2) ψ`: classical RK4 for
/// matrix Hamiltonians with operators taken at the stage times, the lattice
/// transport flow for transport channels. Fails with `StepRejected` if the
/// norm grows beyond `cfg.norm_growth_tol`.
pub fn propagate_step(
    model: &HybridModel,
    alpha: ClassicalStateId,
    psi: &CVec,
    t: f64,
    h: f64,
    cfg: &EngineConfig,
) -> Result<CVec> {
    if !(h > 0.0) {
        return Err(Error::Invalid(format!("step must be positive, got {h}")));
    }
    let next = match model.hamiltonian(alpha) {
        Hamiltonian::Transport { dx, .. } => return transport(model, alpha, psi, t, h, *dx),
        Hamiltonian::Matrix(_) => rk4(model, alpha, psi, t, h)?,
    };
    let before = norm_sq(psi);
    let after = norm_sq(&next);
    let limit = before * (1.0 + cfg.norm_growth_tol).powi(2);
    if !(after <= limit) {
        return Err(Error::StepRejected { t, before, after });
    }
    Ok(next)
}

fn rk4(model: &HybridModel, alpha: ClassicalStateId, psi: &CVec, t: f64, h: f64) -> Result<CVec> {
    let gen = |s: f64| -> Result<Cow<'_, Op>> {
        Ok(model.generator(alpha, s)?.expect("matrix hamiltonian has a generator"))
    };
    let half = C64::new(0.5 * h, 0.0);
    let k_start = gen(t)?;
    let k1 = k_start.apply(psi);
    let (k2, k3) = {
        let k_mid = gen(t + 0.5 * h)?;
        let k2 = k_mid.apply(&(psi + &k1 * half));
        let k3 = k_mid.apply(&(psi + &k2 * half));
        (k2, k3)
    };
    let k4 = gen(t + h)?.apply(&(psi + &k3 * C64::new(h, 0.0)));
    Ok(psi + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0))
}

/// Lattice index of the cell containing `t`, snapping times within 1e-9
/// cells of a boundary onto it.
fn cell_of(t: f64, dx: f64) -> i64 {
    let s = t / dx;
    let r = s.round();
    if (s - r).abs() < 1e-9 {
        r as i64
    } else {
        s.floor() as i64
    }
}

/// Transport at unit speed with damping integrated along characteristics.
///
/// In cell `k` (times `[k dx, (k+1) dx)`) the amplitude held at grid point
/// `j` travels from `x_j` to `x_{j+1}`. Its damping rate is interpolated
/// linearly along that stretch of characteristic, from `Λ_j(k dx)` to
/// `Λ_{j+1}((k+1) dx)`, and the amplitude moves to `j+1` at the end of the
/// cell. A full cell therefore applies the trapezoid rule to the exponent,
/// and any split of a cell composes to the same result.
fn transport(model: &HybridModel, alpha: ClassicalStateId, psi: &CVec, t: f64, h: f64, dx: f64) -> Result<CVec> {
    let n = psi.len();
    let mut out = psi.clone();
    let end = t + h;
    let eps = 1e-9 * dx;
    let mut now = t;
    let mut rates: Option<(i64, Vec<(f64, f64)>)> = None;
    while end - now > eps {
        let k = cell_of(now, dx);
        let cell_end = (k + 1) as f64 * dx;
        if rates.as_ref().map_or(true, |(kk, _)| *kk != k && model.is_time_dependent()) {
            rates = Some((k, cell_rates(model, alpha, k, dx, n)?));
        }
        let r = &rates.as_ref().expect("set above").1;
        let cell_start = k as f64 * dx;
        if end < cell_end - eps {
            damp(&mut out, r, (now - cell_start) / dx, (end - cell_start) / dx, dx);
            break;
        }
        damp(&mut out, r, (now - cell_start) / dx, 1.0, dx);
        out.as_mut_slice().rotate_right(1);
        now = cell_end;
    }
    Ok(out)
}

/// Damps over the fraction `[u0, u1]` of a cell, the rate running
/// linearly from `a` at `u = 0` to `b` at `u = 1`.
fn damp(psi: &mut CVec, rates: &[(f64, f64)], u0: f64, u1: f64, dx: f64) {
    let u0 = u0.clamp(0.0, 1.0);
    if u1 <= u0 {
        return;
    }
    let mid = 0.5 * (u0 + u1);
    for (z, &(a, b)) in psi.iter_mut().zip(rates) {
        let x = 0.5 * (u1 - u0) * dx * (a + (b - a) * mid);
        // exp(-x) rounds to 1 below this
        if x > 1e-17 {
            *z *= (-x).exp();
        }
    }
}

fn cell_rates(model: &HybridModel, alpha: ClassicalStateId, k: i64, dx: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    let diag = |t: f64| -> Result<Vec<f64>> {
        match model.lambda_op(alpha, t)?.as_ref() {
            Op::Diagonal(d) => Ok(d.iter().map(|z| z.re).collect()),
            Op::Dense(_) => Err(Error::Unsupported(
                "transport channels need multiplication-operator couplings".into(),
            )),
        }
    };
    let start = diag(k as f64 * dx)?;
    let stop = if model.is_time_dependent() { diag((k + 1) as f64 * dx)? } else { start.clone() };
    Ok((0..n).map(|j| (start[j], stop[(j + 1) % n])).collect())
}

/// `propagate_step` with step halving on rejection, up to
/// `cfg.max_halvings` levels.
pub fn advance(
    model: &HybridModel,
    alpha: ClassicalStateId,
    psi: &CVec,
    t: f64,
    h: f64,
    cfg: &EngineConfig,
) -> Result<CVec> {
    advance_inner(model, alpha, psi, t, h, cfg, 0)
}

fn advance_inner(
    model: &HybridModel,
    alpha: ClassicalStateId,
    psi: &CVec,
    t: f64,
    h: f64,
    cfg: &EngineConfig,
    depth: u32,
) -> Result<CVec> {
    match propagate_step(model, alpha, psi, t, h, cfg) {
        Err(Error::StepRejected { .. }) if depth < cfg.max_halvings => {
            let half = 0.5 * h;
            let mid = advance_inner(model, alpha, psi, t, half, cfg, depth + 1)?;
            advance_inner(model, alpha, &mid, t + half, half, cfg, depth + 1)
        }
        Err(Error::StepRejected { t, .. }) => Err(Error::RetryCapExceeded { t, halvings: depth }),
        other => other,
    }
}

/// Unnormalized flow from `t0` to `t1` on the grid `t0 + k·base_step`,
/// with a shorter final step. Replays of a segment use this same grid, so
/// they reproduce the sampler's states bit for bit.
pub fn propagate_to(
    model: &HybridModel,
    alpha: ClassicalStateId,
    psi: &CVec,
    t0: f64,
    t1: f64,
    cfg: &EngineConfig,
) -> Result<CVec> {
    let mut psi = psi.clone();
    let mut t = t0;
    let mut k = 0u64;
    while t < t1 {
        k += 1;
        let next = (t0 + k as f64 * cfg.base_step).min(t1);
        psi = advance(model, alpha, &psi, t, next - t, cfg)?;
        t = next;
    }
    Ok(psi)
}
