//! Particle detector on a periodic 1D grid.
//!
//! Classical state "on" couples to "off" through multiplication by the
//! detector profile `g_t(x) = g(x - a(t))`; nothing couples back. The
//! particle Hamiltonian is either zero or the unit-speed transport
//! generator `-i d/dx`, which is propagated along characteristics and never
//! differentiated on the grid.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassicalStateId, HybridModel, ModelBuilder};
use crate::operator::{Op, Operator};
use crate::{C64, CVec};

pub const ON: ClassicalStateId = ClassicalStateId(0);
pub const OFF: ClassicalStateId = ClassicalStateId(1);

/// Largest `width·dx²` for which the grid resolves the profile.
pub const MAX_WIDTH_DX2: f64 = 0.1;

/// Uniform periodic grid on `[-L/2, L/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub length: f64,
    pub points: usize,
}

impl Grid {
    pub fn dx(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.dx()
    }

    /// `x` mapped into `[-L/2, L/2)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let l = self.length;
        (x + 0.5 * l).rem_euclid(l) - 0.5 * l
    }
}

#[derive(Clone)]
pub enum DetectorPath {
    Stationary(f64),
    Uniform { start: f64, velocity: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl DetectorPath {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            DetectorPath::Stationary(a) => *a,
            DetectorPath::Uniform { start, velocity } => start + velocity * t,
            DetectorPath::Custom(f) => f(t),
        }
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self, DetectorPath::Stationary(_))
    }
}

impl fmt::Debug for DetectorPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorPath::Stationary(a) => write!(f, "Stationary({a})"),
            DetectorPath::Uniform { start, velocity } => write!(f, "Uniform({start} + {velocity} t)"),
            DetectorPath::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorHamiltonian {
    Zero,
    Transport,
}

#[derive(Clone, Debug)]
pub struct DetectorSpec {
    /// Efficiency; the profile squared integrates to `kappa`.
    pub kappa: f64,
    /// Gaussian exponent of the profile, `g ∝ exp(-width·x²)`.
    pub width: f64,
    pub n_dims: usize,
    pub path: DetectorPath,
    pub grid: Grid,
    pub hamiltonian: DetectorHamiltonian,
}

impl DetectorSpec {
    pub fn stationary(kappa: f64, width: f64, a: f64, grid: Grid) -> Self {
        Self { kappa, width, n_dims: 1, path: DetectorPath::Stationary(a), grid, hamiltonian: DetectorHamiltonian::Transport }
    }

    /// `g(x) = κ^{1/2} (2w/π)^{n/4} exp(-w x²)`, normalized so that
    /// `∫ g² dx = κ`.
    pub fn profile(&self, x: f64) -> f64 {
        let n = self.n_dims as f64;
        self.kappa.sqrt() * (2.0 * self.width / PI).powf(0.25 * n) * (-self.width * x * x).exp()
    }

    /// Standard deviation of the `g²` profile.
    pub fn profile_sigma(&self) -> f64 {
        0.5 / self.width.sqrt()
    }

    /// Point-detector regime: `g²` narrower than four grid cells.
    pub fn is_point_regime(&self) -> bool {
        self.profile_sigma() < 4.0 * self.grid.dx()
    }

    /// Profile on the grid at time `t` (minimal-image distance).
    pub fn profile_on_grid(&self, t: f64) -> Vec<f64> {
        let a = self.path.at(t);
        (0..self.grid.points).map(|j| self.profile(self.grid.wrap(self.grid.x(j) - a))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0) {
            return Err(Error::Invalid(format!("kappa must be non-negative, got {}", self.kappa)));
        }
        if !(self.width > 0.0) {
            return Err(Error::Invalid(format!("width must be positive, got {}", self.width)));
        }
        if self.n_dims != 1 {
            return Err(Error::Unsupported(format!("{}-dimensional detectors", self.n_dims)));
        }
        if self.grid.points < 2 || !(self.grid.length > 0.0) {
            return Err(Error::Invalid("grid needs positive length and at least two points".into()));
        }
        let value = self.width * self.grid.dx().powi(2);
        if value > MAX_WIDTH_DX2 * (1.0 + 1e-12) {
            return Err(Error::GridTooCoarse { value, limit: MAX_WIDTH_DX2 });
        }
        Ok(())
    }
}

pub fn build_detector_model(spec: &DetectorSpec) -> Result<HybridModel> {
    spec.validate()?;
    let n = spec.grid.points;
    let diag = move |s: &DetectorSpec, t: f64| {
        Op::Diagonal(CVec::from_iterator(n, s.profile_on_grid(t).into_iter().map(|g| C64::new(g, 0.0))))
    };
    let coupling = if spec.path.is_stationary() {
        Operator::Constant(diag(spec, 0.0))
    } else {
        let s = spec.clone();
        Operator::varying(move |t| diag(&s, t))
    };
    let builder = ModelBuilder::new(vec![n, n]).coupling(OFF.0, ON.0, coupling);
    let builder = match spec.hamiltonian {
        DetectorHamiltonian::Transport => builder.transport(ON.0, spec.grid.dx()).transport(OFF.0, spec.grid.dx()),
        DetectorHamiltonian::Zero => builder,
    };
    builder.build()
}

/// Characteristic solution of the damped transport equation,
/// `ψ(x,t) = exp(-½∫₀ᵗ Λ_s(x+s-t) ds) ψ(x-t, 0)`, for `t` a multiple of
/// the grid spacing. The exponent is integrated with the trapezoid rule,
/// one grid cell per time step.
pub fn exact_propagate(spec: &DetectorSpec, psi0: &CVec, t: f64) -> Result<CVec> {
    spec.validate()?;
    if psi0.len() != spec.grid.points {
        return Err(Error::ShapeMismatch(format!("wave function has {} points, grid has {}", psi0.len(), spec.grid.points)));
    }
    let dx = spec.grid.dx();
    let s = t / dx;
    if !(s >= -1e-9) || (s - s.round()).abs() > 1e-9 {
        return Err(Error::NonCommensurateTime { t, dx });
    }
    let steps = s.round() as usize;
    let n = spec.grid.points;
    let sq = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|g| g * g).collect() };
    let mut psi = psi0.clone();
    let mut before = sq(spec.profile_on_grid(0.0));
    for k in 0..steps {
        let after = sq(spec.profile_on_grid((k + 1) as f64 * dx));
        for j in 0..n {
            let exponent = -0.5 * dx * 0.5 * (before[j] + after[(j + 1) % n]);
            psi[j] *= exponent.exp();
        }
        psi.as_mut_slice().rotate_right(1);
        before = after;
    }
    Ok(psi)
}

/// Point-detector detection probability by time `t` for a stationary
/// detector: `(1 - e^{-κ}) ∫_{a-t}^{a} |ψ(x,0)|² dx`, the integral taken
/// over grid cells by overlap (the trapezoid rule when `a` and `t` sit on
/// the grid).
pub fn detection_prob_closed_form(spec: &DetectorSpec, psi0: &CVec, t: f64) -> Result<f64> {
    let DetectorPath::Stationary(a) = spec.path else {
        return Err(Error::Unsupported("closed form assumes a stationary detector".into()));
    };
    if psi0.len() != spec.grid.points {
        return Err(Error::ShapeMismatch("wave function does not match the grid".into()));
    }
    Ok((1.0 - (-spec.kappa).exp()) * mass_between(&spec.grid, psi0, a - t, a))
}

/// Probability mass of the discrete wave function in `[lo, hi]`, each
/// sample owning the cell of width `dx` centred on it.
pub fn mass_between(grid: &Grid, psi: &CVec, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let dx = grid.dx();
    (0..grid.points)
        .map(|j| {
            let x = grid.x(j);
            let overlap = ((x + 0.5 * dx).min(hi) - (x - 0.5 * dx).max(lo)).max(0.0);
            overlap / dx * psi[j].norm_sqr()
        })
        .sum()
}

/// Discrete Gaussian packet with `|ψ|²` of standard deviation `sigma`,
/// normalized so that `Σ_j |ψ_j|² = 1`.
pub fn gaussian_packet(grid: &Grid, center: f64, sigma: f64) -> CVec {
    let v = CVec::from_iterator(
        grid.points,
        (0..grid.points).map(|j| {
            let d = grid.x(j) - center;
            C64::new((-d * d / (4.0 * sigma * sigma)).exp(), 0.0)
        }),
    );
    let n = v.norm();
    v.unscale(n)
}

/// Fails if more than `tol` of the packet would be carried across the
/// right edge of the periodic grid before `horizon`.
pub fn check_no_wrap(spec: &DetectorSpec, psi0: &CVec, horizon: f64, tol: f64) -> Result<()> {
    let edge = 0.5 * spec.grid.length;
    let wrapped = mass_between(&spec.grid, psi0, edge - horizon, edge);
    if wrapped > tol {
        return Err(Error::Invalid(format!(
            "{wrapped:e} of the packet wraps around the grid before t = {horizon}; enlarge grid.L"
        )));
    }
    Ok(())
}
