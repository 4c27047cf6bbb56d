//! The coupled classical + quantum system and its derived rates.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermiticity_deviation, norm_sq, row_sum_norm};
use crate::operator::{Op, Operator};
use crate::{C64, CVec};

/// Quadratic forms this far below zero are round-off and read as zero.
pub const PSD_CLAMP: f64 = 1e-12;

/// Index of a classical state. Zero-based; [`fmt::Display`] and the file
/// formats use the one-based label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassicalStateId(pub usize);

impl ClassicalStateId {
    pub fn index(self) -> usize {
        self.0
    }

    pub fn label(self) -> usize {
        self.0 + 1
    }

    pub fn from_label(label: usize) -> Result<Self> {
        label
            .checked_sub(1)
            .map(ClassicalStateId)
            .ok_or_else(|| Error::Invalid("classical labels start at 1".into()))
    }
}

impl fmt::Display for ClassicalStateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Hamiltonian of one classical channel.
#[derive(Clone, Debug)]
pub enum Hamiltonian {
    Matrix(Operator),
    /// `-i d/dx` on a uniform periodic grid of `points` cells of width `dx`:
    /// rigid transport to the right at unit speed. Never represented as a
    /// matrix; propagated by the lattice flow in [`crate::engine`].
    Transport { dx: f64, points: usize },
}

impl Hamiltonian {
    pub fn zero(n: usize) -> Self {
        Hamiltonian::Matrix(Operator::Constant(Op::zeros(n)))
    }

    fn is_time_dependent(&self) -> bool {
        match self {
            Hamiltonian::Matrix(h) => h.is_time_dependent(),
            Hamiltonian::Transport { .. } => false,
        }
    }
}

/// One classical label together with a quantum vector in its space.
#[derive(Clone, Debug, PartialEq)]
pub struct PureHybridState {
    pub alpha: ClassicalStateId,
    pub psi: CVec,
    pub normalized: bool,
}

impl PureHybridState {
    /// Normalizes `psi`; fails on the zero vector.
    pub fn new(alpha: ClassicalStateId, psi: CVec) -> Result<Self> {
        let n = norm_sq(&psi).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Invalid("initial quantum state has zero or non-finite norm".into()));
        }
        Ok(Self { alpha, psi: psi.unscale(n), normalized: true })
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.psi)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BalanceReport {
    pub balanced: bool,
    /// `(alpha, beta, deviation)` with one-based labels, one entry per
    /// unordered pair that breaks `g_{alpha beta}† = g_{beta alpha}`.
    pub violations: Vec<(usize, usize, f64)>,
}

/// Validated, immutable coupled system. Safe to share between threads.
#[derive(Clone, Debug)]
pub struct HybridModel {
    dims: Vec<usize>,
    hamiltonians: Vec<Hamiltonian>,
    /// Keyed by `(to, from)`.
    couplings: BTreeMap<(usize, usize), Operator>,
    /// `channels[from]`: targets reachable from `from`, ascending.
    channels: Vec<Vec<usize>>,
    lambda_cache: Vec<Option<Op>>,
    generator_cache: Vec<Option<Op>>,
    time_dependent: bool,
    hermiticity_tol: f64,
}

pub struct ModelBuilder {
    dims: Vec<usize>,
    hamiltonians: BTreeMap<usize, Hamiltonian>,
    couplings: Vec<((usize, usize), Operator)>,
    hermiticity_tol: f64,
    sample_times: Vec<f64>,
}

impl ModelBuilder {
    pub fn new(dims: Vec<usize>) -> Self {
        Self {
            dims,
            hamiltonians: BTreeMap::new(),
            couplings: Vec::new(),
            hermiticity_tol: 1e-10,
            sample_times: Vec::new(),
        }
    }

    pub fn hamiltonian(mut self, alpha: usize, h: impl Into<Operator>) -> Self {
        self.hamiltonians.insert(alpha, Hamiltonian::Matrix(h.into()));
        self
    }

    pub fn transport(mut self, alpha: usize, dx: f64) -> Self {
        let points = self.dims.get(alpha).copied().unwrap_or(0);
        self.hamiltonians.insert(alpha, Hamiltonian::Transport { dx, points });
        self
    }

    /// Adds `g_{to,from}`, mapping the space of `from` into that of `to`.
    pub fn coupling(mut self, to: usize, from: usize, g: impl Into<Operator>) -> Self {
        self.couplings.push(((to, from), g.into()));
        self
    }

    pub fn hermiticity_tol(mut self, tol: f64) -> Self {
        self.hermiticity_tol = tol;
        self
    }

    /// Extra times at which time-dependent providers are validated.
    pub fn sample_times(mut self, times: impl IntoIterator<Item = f64>) -> Self {
        self.sample_times.extend(times);
        self
    }

    pub fn build(self) -> Result<HybridModel> {
        let m = self.dims.len();
        if m == 0 {
            return Err(Error::Invalid("a model needs at least one classical state".into()));
        }
        if let Some(i) = self.dims.iter().position(|&d| d == 0) {
            return Err(Error::Invalid(format!("Hilbert space of classical state {} has dimension 0", i + 1)));
        }
        if !(self.hermiticity_tol >= 0.0) {
            return Err(Error::Invalid("hermiticity tolerance must be non-negative".into()));
        }
        let check = |i: usize| if i < m { Ok(()) } else { Err(Error::IndexOutOfRange { index: i, m }) };

        let mut hamiltonians: Vec<Hamiltonian> = (0..m).map(|a| Hamiltonian::zero(self.dims[a])).collect();
        for (a, h) in self.hamiltonians {
            check(a)?;
            hamiltonians[a] = h;
        }

        let mut couplings = BTreeMap::new();
        for ((to, from), g) in self.couplings {
            check(to)?;
            check(from)?;
            if to == from {
                return Err(Error::DiagonalCoupling { label: to + 1 });
            }
            if couplings.insert((to, from), g).is_some() {
                return Err(Error::Invalid(format!("coupling {} -> {} given twice", from + 1, to + 1)));
            }
        }

        let time_dependent = hamiltonians.iter().any(Hamiltonian::is_time_dependent)
            || couplings.values().any(Operator::is_time_dependent);

        let mut times = vec![0.0];
        if time_dependent {
            times.extend(self.sample_times.iter().copied());
        }
        for &t in &times {
            for (a, h) in hamiltonians.iter().enumerate() {
                match h {
                    Hamiltonian::Matrix(h) => {
                        let v = h.at(t);
                        if v.rows() != self.dims[a] || v.cols() != self.dims[a] {
                            return Err(Error::ShapeMismatch(format!(
                                "hamiltonian {} is {}x{}, expected {}x{}",
                                a + 1,
                                v.rows(),
                                v.cols(),
                                self.dims[a],
                                self.dims[a]
                            )));
                        }
                        let dev = match v.as_ref() {
                            Op::Dense(d) => hermiticity_deviation(d),
                            Op::Diagonal(d) => d.iter().map(|z| z.im.abs()).fold(0.0, f64::max),
                        };
                        if dev > self.hermiticity_tol {
                            return Err(Error::NonHermitianHamiltonian { label: a + 1, t, deviation: dev });
                        }
                    }
                    Hamiltonian::Transport { dx, points } => {
                        if *points != self.dims[a] || !(*dx > 0.0) {
                            return Err(Error::ShapeMismatch(format!(
                                "transport generator of state {} has {} points, dimension is {}",
                                a + 1,
                                points,
                                self.dims[a]
                            )));
                        }
                    }
                }
            }
            for (&(to, from), g) in &couplings {
                let v = g.at(t);
                if v.rows() != self.dims[to] || v.cols() != self.dims[from] {
                    return Err(Error::ShapeMismatch(format!(
                        "coupling {} -> {} is {}x{}, expected {}x{}",
                        from + 1,
                        to + 1,
                        v.rows(),
                        v.cols(),
                        self.dims[to],
                        self.dims[from]
                    )));
                }
            }
        }

        let mut channels = vec![Vec::new(); m];
        for &(to, from) in couplings.keys() {
            channels[from].push(to);
        }
        for c in &mut channels {
            c.sort_unstable();
        }

        let mut model = HybridModel {
            dims: self.dims,
            hamiltonians,
            couplings,
            channels,
            lambda_cache: vec![None; m],
            generator_cache: vec![None; m],
            time_dependent,
            hermiticity_tol: self.hermiticity_tol,
        };
        if !time_dependent {
            for a in 0..m {
                let lambda = model.compute_lambda(a, 0.0);
                model.generator_cache[a] = model.compute_generator(a, &lambda, 0.0);
                model.lambda_cache[a] = Some(lambda);
            }
        }
        Ok(model)
    }
}

impl HybridModel {
    pub fn m(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, alpha: ClassicalStateId) -> usize {
        self.dims[alpha.0]
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn hermiticity_tol(&self) -> f64 {
        self.hermiticity_tol
    }

    pub fn check_index(&self, alpha: ClassicalStateId) -> Result<()> {
        if alpha.0 < self.m() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: alpha.0, m: self.m() })
        }
    }

    pub fn hamiltonian(&self, alpha: ClassicalStateId) -> &Hamiltonian {
        &self.hamiltonians[alpha.0]
    }

    pub fn coupling(&self, to: ClassicalStateId, from: ClassicalStateId) -> Option<&Operator> {
        self.couplings.get(&(to.0, from.0))
    }

    /// All couplings as `((to, from), g)`.
    pub fn couplings(&self) -> impl Iterator<Item = ((ClassicalStateId, ClassicalStateId), &Operator)> {
        self.couplings.iter().map(|(&(to, from), g)| ((ClassicalStateId(to), ClassicalStateId(from)), g))
    }

    /// Targets of the couplings leaving `alpha`, ascending.
    pub fn channels_from(&self, alpha: ClassicalStateId) -> &[usize] {
        &self.channels[alpha.0]
    }

    fn compute_lambda(&self, a: usize, t: f64) -> Op {
        self.channels[a]
            .iter()
            .map(|&to| self.couplings[&(to, a)].at(t).gram())
            .fold(Op::zeros(self.dims[a]), |acc, g| acc.add(&g))
    }

    fn compute_generator(&self, a: usize, lambda: &Op, t: f64) -> Option<Op> {
        match &self.hamiltonians[a] {
            Hamiltonian::Matrix(h) => {
                let damping = lambda.scale(C64::new(-0.5, 0.0));
                Some(h.at(t).scale(C64::new(0.0, -1.0)).add(&damping))
            }
            Hamiltonian::Transport { .. } => None,
        }
    }

    /// `Λ_α(t) = Σ_β g_{βα}† g_{βα}`.
    pub fn lambda_op(&self, alpha: ClassicalStateId, t: f64) -> Result<Cow<'_, Op>> {
        self.check_index(alpha)?;
        Ok(match &self.lambda_cache[alpha.0] {
            Some(l) => Cow::Borrowed(l),
            None => Cow::Owned(self.compute_lambda(alpha.0, t)),
        })
    }

    /// `-i H_α(t) - Λ_α(t)/2`, the generator of the damped flow; `None` for
    /// transport channels.
    pub fn generator(&self, alpha: ClassicalStateId, t: f64) -> Result<Option<Cow<'_, Op>>> {
        self.check_index(alpha)?;
        if let Some(k) = &self.generator_cache[alpha.0] {
            return Ok(Some(Cow::Borrowed(k)));
        }
        let lambda = self.lambda_op(alpha, t)?;
        Ok(self.compute_generator(alpha.0, &lambda, t).map(Cow::Owned))
    }

    fn check_psi(&self, alpha: ClassicalStateId, psi: &CVec) -> Result<()> {
        self.check_index(alpha)?;
        if psi.len() != self.dims[alpha.0] {
            return Err(Error::ShapeMismatch(format!(
                "state vector has length {}, classical state {} needs {}",
                psi.len(),
                alpha,
                self.dims[alpha.0]
            )));
        }
        Ok(())
    }

    /// `λ_α(ψ) = (ψ, Λ_α ψ)`; `ψ` need not be normalized.
    pub fn jump_rate(&self, alpha: ClassicalStateId, psi: &CVec, t: f64) -> Result<f64> {
        self.check_psi(alpha, psi)?;
        let rate = self.lambda_op(alpha, t)?.quadratic_form(psi).re;
        Ok(if rate < 0.0 && rate >= -PSD_CLAMP { 0.0 } else { rate })
    }

    /// `p_β = ‖g_{βα} ψ‖² / λ_α(ψ)` for every `β`; entries without a
    /// coupling (including `β = α`) are zero.
    pub fn jump_probs(&self, alpha: ClassicalStateId, psi: &CVec, t: f64) -> Result<Vec<f64>> {
        let rate = self.jump_rate(alpha, psi, t)?;
        if !(rate > 0.0) {
            return Err(Error::ZeroRate { label: alpha.label() });
        }
        let mut probs = vec![0.0; self.m()];
        for &to in &self.channels[alpha.0] {
            let g = self.couplings[&(to, alpha.0)].at(t);
            probs[to] = norm_sq(&g.apply(psi)) / rate;
        }
        Ok(probs)
    }

    /// Upper bound on every jump rate at time `t`: the largest row-sum norm
    /// of any `Λ_α(t)`.
    pub fn rate_bound(&self, t: f64) -> f64 {
        (0..self.m())
            .map(|a| match self.lambda_op(ClassicalStateId(a), t).expect("index in range").as_ref() {
                Op::Dense(l) => row_sum_norm(l),
                Op::Diagonal(d) => d.iter().map(|z| z.norm()).fold(0.0, f64::max),
            })
            .fold(0.0, f64::max)
    }

    /// Diagnostic for the symmetry `g_{αβ}(t)† = g_{βα}(t)`; a missing
    /// coupling counts as zero. Nothing in the engine requires it.
    pub fn check_detailed_balance(&self, t: f64, tol: f64) -> BalanceReport {
        let mut violations = Vec::new();
        for a in 0..self.m() {
            for b in (a + 1)..self.m() {
                let ab = self.couplings.get(&(a, b)).map(|g| g.at(t).to_dense());
                let ba = self.couplings.get(&(b, a)).map(|g| g.at(t).to_dense());
                let dev = match (ab, ba) {
                    (None, None) => 0.0,
                    (Some(x), None) | (None, Some(x)) => crate::linalg::max_abs(&x),
                    (Some(ab), Some(ba)) => crate::linalg::max_abs_diff(&ab.adjoint(), &ba),
                };
                if dev > tol {
                    violations.push((a + 1, b + 1, dev));
                }
            }
        }
        BalanceReport { balanced: violations.is_empty(), violations }
    }
}
