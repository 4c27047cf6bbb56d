//! Fuzzy clock: pointer sites `0..=i_max`, ticks `i-1 → i` through
//! `g_{i,i-1} = √κ U_i` with isometries `U_i`, no Hamiltonian.
//!
//! The label set is truncated at `i_max`. With an absorbing boundary the
//! last site has no outgoing coupling; with a cyclic one it ticks back to
//! site 0 through `U_0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{identity, max_abs_diff};
use crate::model::{HybridModel, ModelBuilder};
use crate::rng::RngStream;
use crate::stats::poisson_pmf;
use crate::{C64, CMat};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockBoundary {
    #[default]
    Absorbing,
    Cyclic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClockSpec {
    pub kappa: f64,
    pub i_max: usize,
    /// Dimension of every site's space, `i_max + 1` entries.
    pub dims: Vec<usize>,
    /// `isometries[i-1]` is `U_i: H_{i-1} → H_i`. A cyclic clock carries one
    /// more entry, `U_0: H_{i_max} → H_0`.
    pub isometries: Vec<CMat>,
    pub boundary: ClockBoundary,
}

impl ClockSpec {
    /// Every `U_i = I` on a common `dim`-dimensional space.
    pub fn identity(kappa: f64, i_max: usize, dim: usize) -> Self {
        Self {
            kappa,
            i_max,
            dims: vec![dim; i_max + 1],
            isometries: vec![identity(dim); i_max],
            boundary: ClockBoundary::Absorbing,
        }
    }

    /// Haar-like random unitaries (QR of a complex Gaussian matrix).
    pub fn random_unitaries(kappa: f64, i_max: usize, dim: usize, seed: u64) -> Self {
        let mut rng = RngStream::new(seed, 0);
        let isometries = (0..i_max).map(|_| random_unitary(dim, &mut rng)).collect();
        Self { isometries, ..Self::identity(kappa, i_max, dim) }
    }

    /// Closes the dial with `U_0`.
    pub fn cyclic(mut self, u0: CMat) -> Self {
        self.isometries.truncate(self.i_max);
        self.isometries.push(u0);
        self.boundary = ClockBoundary::Cyclic;
        self
    }

    /// `(to, from, U)` for every tick.
    fn ticks(&self) -> Vec<(usize, usize, &CMat)> {
        let mut out: Vec<(usize, usize, &CMat)> = (1..=self.i_max).map(|i| (i, i - 1, &self.isometries[i - 1])).collect();
        if self.boundary == ClockBoundary::Cyclic {
            out.push((0, self.i_max, &self.isometries[self.i_max]));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::Invalid(format!("tick rate must be positive, got {}", self.kappa)));
        }
        if self.i_max < 1 {
            return Err(Error::Invalid("a clock needs i_max >= 1".into()));
        }
        if self.dims.len() != self.i_max + 1 {
            return Err(Error::ShapeMismatch(format!("{} site dimensions for {} sites", self.dims.len(), self.i_max + 1)));
        }
        let expected = self.i_max + usize::from(self.boundary == ClockBoundary::Cyclic);
        if self.isometries.len() != expected {
            return Err(Error::ShapeMismatch(format!("{} isometries given, {expected} needed", self.isometries.len())));
        }
        for (k, (to, from, u)) in self.ticks().into_iter().enumerate() {
            let index = if to == 0 { 0 } else { k + 1 };
            if u.nrows() != self.dims[to] || u.ncols() != self.dims[from] {
                return Err(Error::ShapeMismatch(format!(
                    "U_{index} is {}x{}, expected {}x{}",
                    u.nrows(),
                    u.ncols(),
                    self.dims[to],
                    self.dims[from]
                )));
            }
            let deviation = max_abs_diff(&(u.adjoint() * u), &identity(self.dims[from]));
            if deviation > 1e-12 {
                return Err(Error::NotIsometry { index, deviation });
            }
        }
        Ok(())
    }
}

pub fn build_clock_model(spec: &ClockSpec) -> Result<HybridModel> {
    spec.validate()?;
    let scale = C64::new(spec.kappa.sqrt(), 0.0);
    spec.ticks()
        .into_iter()
        .fold(ModelBuilder::new(spec.dims.clone()), |b, (to, from, u)| b.coupling(to, from, u * scale))
        .build()
}

/// Smallest truncation with the Poisson tail beyond six standard
/// deviations: `i_max > κT + 6√(κT)`.
pub fn min_i_max(kappa: f64, horizon: f64) -> usize {
    let mu = kappa * horizon;
    (mu + 6.0 * mu.sqrt()).floor() as usize + 1
}

/// Logs a warning when `i_max` is too small for the horizon.
pub fn check_truncation(spec: &ClockSpec, horizon: f64) -> bool {
    let need = min_i_max(spec.kappa, horizon);
    let ok = spec.boundary == ClockBoundary::Cyclic || spec.i_max >= need;
    if !ok {
        log::warn!("clock truncated at i_max = {} but horizon {horizon} needs at least {need}", spec.i_max);
    }
    ok
}

/// Occupation probabilities of the absorbing clock started at site 0:
/// `P(i ticks)` for `i < i_max`, the Poisson tail at `i_max`.
pub fn poisson_block_traces(kappa: f64, t: f64, i_max: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..i_max).map(|i| poisson_pmf(i as u64, kappa * t)).collect();
    let head: f64 = p.iter().sum();
    p.push((1.0 - head).max(0.0));
    p
}

fn random_unitary(dim: usize, rng: &mut RngStream) -> CMat {
    let z = CMat::from_fn(dim, dim, |_, _| C64::new(rng.normal(), rng.normal()));
    z.qr().q()
}
