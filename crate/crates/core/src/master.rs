//! Ensemble dynamics: the density family `(ρ_β)` and its linear master
//! equation
//!
//! ```text
//! ρ̇_β = -i[H_β, ρ_β] + Σ_{γ≠β} g_{βγ} ρ_γ g_{βγ}† - ½{Λ_β, ρ_β}
//! ```
//!
//! integrated with fixed-step RK4.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, max_abs_diff, min_eigenvalue, outer, purity, trace};
use crate::model::{ClassicalStateId, Hamiltonian, HybridModel, PureHybridState};
use crate::operator::Op;
use crate::{C64, CMat};

/// One block per classical state; the total trace is 1 for a probability
/// family (linear combinations are allowed in between).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityFamily {
    pub blocks: Vec<CMat>,
    pub t: f64,
}

impl DensityFamily {
    pub fn zeros(dims: &[usize], t: f64) -> Self {
        Self { blocks: dims.iter().map(|&d| CMat::zeros(d, d)).collect(), t }
    }

    /// All weight on `|ψ⟩⟨ψ|` in block `alpha`.
    pub fn pure(model: &HybridModel, state: &PureHybridState, t: f64) -> Self {
        let mut f = Self::zeros(model.dims(), t);
        f.blocks[state.alpha.0] = outer(&state.psi);
        f
    }

    pub fn traces(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| trace(b).re).collect()
    }

    pub fn total_trace(&self) -> f64 {
        self.traces().iter().sum()
    }

    pub fn purities(&self) -> Vec<f64> {
        self.blocks.iter().map(purity).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        self.blocks.iter().map(crate::linalg::hermiticity_deviation).fold(0.0, f64::max)
    }

    pub fn symmetrize(&mut self) {
        for b in &mut self.blocks {
            *b = hermitian_part(b);
        }
    }

    /// `a·self + b·other`
    pub fn combine(&self, a: f64, other: &DensityFamily, b: f64) -> Result<DensityFamily> {
        self.check_shape(other)?;
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(x, y)| x * C64::new(a, 0.0) + y * C64::new(b, 0.0)).collect();
        Ok(DensityFamily { blocks, t: self.t })
    }

    pub fn check_shape(&self, other: &DensityFamily) -> Result<()> {
        let same = self.blocks.len() == other.blocks.len()
            && self.blocks.iter().zip(&other.blocks).all(|(a, b)| a.shape() == b.shape());
        if same {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("density families have different block structure".into()))
        }
    }

    fn check_model(&self, model: &HybridModel) -> Result<()> {
        let ok = self.blocks.len() == model.m()
            && self.blocks.iter().zip(model.dims()).all(|(b, &d)| b.nrows() == d && b.ncols() == d);
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("density family does not match the model's dimensions".into()))
        }
    }

    /// Checks hermiticity (1e-10), positivity (-1e-9) and unit total trace
    /// (1e-8).
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_deviation();
        if herm > 1e-10 {
            return Err(Error::Invalid(format!("block not hermitian (deviation {herm:e})")));
        }
        let min = self.min_eigenvalue();
        if min < -1e-9 {
            return Err(Error::Invalid(format!("block not positive (eigenvalue {min:e})")));
        }
        let tr = self.total_trace();
        if (tr - 1.0).abs() > 1e-8 {
            return Err(Error::Invalid(format!("total trace {tr} differs from 1")));
        }
        Ok(())
    }
}

/// Dense per-block operators at one instant.
struct Snapshot {
    hamiltonians: Vec<CMat>,
    lambdas: Vec<CMat>,
    /// `(to, from, g)`
    couplings: Vec<(usize, usize, Op)>,
}

impl Snapshot {
    fn take(model: &HybridModel, t: f64) -> Result<Self> {
        let mut hamiltonians = Vec::with_capacity(model.m());
        let mut lambdas = Vec::with_capacity(model.m());
        for a in 0..model.m() {
            let id = ClassicalStateId(a);
            match model.hamiltonian(id) {
                Hamiltonian::Matrix(h) => hamiltonians.push(h.at(t).to_dense()),
                Hamiltonian::Transport { .. } => {
                    return Err(Error::Unsupported(
                        "the master equation needs matrix hamiltonians; transport channels have none".into(),
                    ))
                }
            }
            lambdas.push(model.lambda_op(id, t)?.to_dense());
        }
        let couplings = model.couplings().map(|((to, from), g)| (to.0, from.0, g.at(t).into_owned())).collect();
        Ok(Self { hamiltonians, lambdas, couplings })
    }

    fn rhs(&self, rho: &[CMat]) -> Vec<CMat> {
        let mi = C64::new(0.0, -1.0);
        let mut out: Vec<CMat> = rho
            .iter()
            .enumerate()
            .map(|(b, r)| {
                let h = &self.hamiltonians[b];
                let l = &self.lambdas[b];
                (h * r - r * h) * mi - (l * r + r * l) * C64::new(0.5, 0.0)
            })
            .collect();
        for (to, from, g) in &self.couplings {
            out[*to] += g.sandwich(&rho[*from]);
        }
        out
    }
}

/// Right-hand side of the master equation for every block.
pub fn master_rhs(model: &HybridModel, family: &DensityFamily, t: f64) -> Result<Vec<CMat>> {
    family.check_model(model)?;
    Ok(Snapshot::take(model, t)?.rhs(&family.blocks))
}

/// `1e-3 / max(1, max_α ‖Λ_α(0)‖)` with the max row-sum norm.
pub fn default_dt(model: &HybridModel) -> f64 {
    1e-3 / model.rate_bound(0.0).max(1.0)
}

/// Largest total-trace drift tolerated before integration aborts.
pub const TRACE_ABORT: f64 = 1e-6;

/// Fixed-step RK4 integrator; operators are snapshotted once for
/// time-independent models and at the stage times otherwise.
pub struct MasterIntegrator<'a> {
    model: &'a HybridModel,
    fixed: Option<Snapshot>,
    dt: f64,
}

impl<'a> MasterIntegrator<'a> {
    pub fn new(model: &'a HybridModel, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Invalid(format!("dt must be positive, got {dt}")));
        }
        let first = Snapshot::take(model, 0.0)?;
        let fixed = (!model.is_time_dependent()).then_some(first);
        Ok(Self { model, fixed, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn rhs(&self, rho: &[CMat], t: f64) -> Result<Vec<CMat>> {
        Ok(match &self.fixed {
            Some(s) => s.rhs(rho),
            None => Snapshot::take(self.model, t)?.rhs(rho),
        })
    }

    /// One RK4 step of length `h`, followed by hermitian symmetrization.
    pub fn step(&self, family: &DensityFamily, h: f64) -> Result<DensityFamily> {
        let t = family.t;
        let axpy = |base: &[CMat], k: &[CMat], s: f64| -> Vec<CMat> {
            base.iter().zip(k).map(|(b, k)| b + k * C64::new(s, 0.0)).collect()
        };
        let y = &family.blocks;
        let k1 = self.rhs(y, t)?;
        let k2 = self.rhs(&axpy(y, &k1, 0.5 * h), t + 0.5 * h)?;
        let k3 = self.rhs(&axpy(y, &k2, 0.5 * h), t + 0.5 * h)?;
        let k4 = self.rhs(&axpy(y, &k3, h), t + h)?;
        let blocks = (0..y.len())
            .map(|b| &y[b] + (&k1[b] + (&k2[b] + &k3[b]) * C64::new(2.0, 0.0) + &k4[b]) * C64::new(h / 6.0, 0.0))
            .collect();
        let mut next = DensityFamily { blocks, t: t + h };
        next.symmetrize();
        Ok(next)
    }

    /// Integrates from `family0.t` through each of `times` (ascending),
    /// landing on them exactly, and returns the family at each.
    pub fn integrate_at(&self, family0: &DensityFamily, times: &[f64]) -> Result<Vec<DensityFamily>> {
        family0.check_model(self.model)?;
        let reference = family0.total_trace();
        let mut out = Vec::with_capacity(times.len());
        let mut cur = family0.clone();
        let t0 = family0.t;
        let mut k = 0u64;
        for &target in times {
            if target < cur.t {
                return Err(Error::Invalid(format!("output time {target} precedes {}", cur.t)));
            }
            while cur.t < target {
                let grid_next = t0 + (k + 1) as f64 * self.dt;
                let t_next = grid_next.min(target);
                cur = self.step(&cur, t_next - cur.t)?;
                cur.t = t_next;
                if t_next >= grid_next {
                    k += 1;
                }
                let drift = (cur.total_trace() - reference).abs();
                if drift > TRACE_ABORT || !drift.is_finite() {
                    return Err(Error::ToleranceBreach { t: cur.t, drift, suggested_dt: 0.5 * self.dt });
                }
            }
            out.push(cur.clone());
        }
        Ok(out)
    }

    /// The family at `t_end`, recording every `record_every`-th step (and
    /// always the endpoints).
    pub fn integrate(&self, family0: &DensityFamily, t_end: f64, record_every: usize) -> Result<Vec<DensityFamily>> {
        let n = ((t_end - family0.t) / self.dt).ceil().max(0.0) as usize;
        let every = record_every.max(1);
        let mut times: Vec<f64> = (1..=n)
            .filter(|k| k % every == 0)
            .map(|k| (family0.t + k as f64 * self.dt).min(t_end))
            .collect();
        if times.last().map_or(true, |&t| t < t_end) {
            times.push(t_end);
        }
        times.dedup();
        let mut out = vec![family0.clone()];
        out.extend(self.integrate_at(family0, &times)?);
        Ok(out)
    }
}

/// `Σ_β ρ_β`; only defined when every block has the same dimension.
pub fn reduce_to_quantum(model: &HybridModel, family: &DensityFamily) -> Result<CMat> {
    equal_dims(model)?;
    family.check_model(model)?;
    Ok(family.blocks.iter().skip(1).fold(family.blocks[0].clone(), |acc, b| acc + b))
}

fn equal_dims(model: &HybridModel) -> Result<usize> {
    let d = model.dims()[0];
    if model.dims().iter().any(|&x| x != d) {
        return Err(Error::DimMismatch(model.dims().to_vec()));
    }
    Ok(d)
}

/// Deviations measured by [`check_collapsibility`].
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CollapseReport {
    /// `max_β ‖H_β - H_1‖_max`
    pub hamiltonian_dev: f64,
    /// `max_β ‖Λ_β - Λ_1‖_max`
    pub lambda_dev: f64,
    /// `‖Σ_i V_i† V_i - Λ_1‖_max`
    pub candidate_lambda_dev: f64,
    /// Largest deviation of `Σ_β g_{βγ} E g_{βγ}†` from `Σ_i V_i E V_i†`
    /// over sources `γ` and matrix units `E`.
    pub gain_dev: f64,
    pub collapsible: bool,
}

impl CollapseReport {
    pub fn max_deviation(&self) -> f64 {
        self.hamiltonian_dev.max(self.lambda_dev).max(self.candidate_lambda_dev).max(self.gain_dev)
    }
}

/// Tests whether the summed state `ρ = Σ_β ρ_β` obeys a closed equation
/// `ρ̇ = -i[H,ρ] + Σ_i V_i ρ V_i† - ½{Λ,ρ}` for the supplied `V_i`: all
/// channels must share `H` and `Λ`, and every source `γ` must feed the
/// same map `X ↦ Σ_i V_i X V_i†`.
pub fn check_collapsibility(model: &HybridModel, candidate: &[CMat], t: f64, tol: f64) -> Result<CollapseReport> {
    let d = equal_dims(model)?;
    if candidate.iter().any(|v| v.nrows() != d || v.ncols() != d) {
        return Err(Error::ShapeMismatch(format!("candidate operators must be {d}x{d}")));
    }
    let snap = Snapshot::take(model, t)?;
    let mut report = CollapseReport::default();
    for b in 1..model.m() {
        report.hamiltonian_dev = report.hamiltonian_dev.max(max_abs_diff(&snap.hamiltonians[b], &snap.hamiltonians[0]));
        report.lambda_dev = report.lambda_dev.max(max_abs_diff(&snap.lambdas[b], &snap.lambdas[0]));
    }
    let v_lambda = candidate.iter().fold(CMat::zeros(d, d), |acc, v| acc + v.adjoint() * v);
    report.candidate_lambda_dev = max_abs_diff(&v_lambda, &snap.lambdas[0]);

    for j in 0..d {
        for k in 0..d {
            let mut unit = CMat::zeros(d, d);
            unit[(j, k)] = C64::new(1.0, 0.0);
            let target = candidate.iter().fold(CMat::zeros(d, d), |acc, v| acc + v * &unit * v.adjoint());
            for source in 0..model.m() {
                let gained = snap
                    .couplings
                    .iter()
                    .filter(|(_, from, _)| *from == source)
                    .fold(CMat::zeros(d, d), |acc, (_, _, g)| acc + g.sandwich(&unit));
                report.gain_dev = report.gain_dev.max(max_abs_diff(&gained, &target));
            }
        }
    }
    report.collapsible = report.max_deviation() <= tol;
    Ok(report)
}
