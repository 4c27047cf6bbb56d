//! Named models with their default parameters, used by the command line
//! and by model files that carry a `"builtin"` key.

use serde::{Deserialize, Serialize};

use super::clock::{build_clock_model, check_truncation, min_i_max, ClockBoundary, ClockSpec};
use super::detector::{build_detector_model, check_no_wrap, gaussian_packet, DetectorHamiltonian, DetectorSpec, Grid, ON};
use super::testbed::{test_pair, test_triad};
use crate::error::{Error, Result};
use crate::linalg::identity;
use crate::model::{ClassicalStateId, HybridModel, PureHybridState};
use crate::{C64, CVec};

pub const BUILTIN_NAMES: [&str; 4] = ["detector1d", "clock", "testpair", "testtriad"];

/// Parameters shared by the built-in models. Each model reads the ones it
/// understands; unset fields take the model's default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(rename = "grid.N", skip_serializing_if = "Option::is_none")]
    pub grid_n: Option<usize>,
    #[serde(rename = "grid.L", skip_serializing_if = "Option::is_none")]
    pub grid_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(rename = "packet.center", skip_serializing_if = "Option::is_none")]
    pub packet_center: Option<f64>,
    #[serde(rename = "packet.sigma", skip_serializing_if = "Option::is_none")]
    pub packet_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<ClockBoundary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<DetectorHamiltonian>,
}

impl BuiltinParams {
    /// Fields set in `other` override those in `self`.
    pub fn merged(&self, other: &BuiltinParams) -> BuiltinParams {
        macro_rules! pick {
            ($($f:ident),*) => { BuiltinParams { $($f: other.$f.clone().or_else(|| self.$f.clone())),* } };
        }
        pick!(kappa, width, grid_n, grid_l, a, i_max, horizon, dim, seed, packet_center, packet_sigma, boundary, hamiltonian)
    }
}

#[derive(Clone, Debug)]
pub enum BuiltinKind {
    Detector(DetectorSpec),
    Clock(ClockSpec),
    TestPair,
    TestTriad,
    /// Matrices read from a model file.
    Custom,
}

#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub name: String,
    pub model: HybridModel,
    pub initial: PureHybridState,
    /// Natural propagation step, when the model has one.
    pub base_step: Option<f64>,
    pub horizon: f64,
    pub kind: BuiltinKind,
}

pub fn resolve_builtin(name: &str, params: &BuiltinParams) -> Result<ModelBundle> {
    match name {
        "detector1d" => detector(params),
        "clock" => clock(params),
        "testpair" | "testtriad" => {
            let seed = params.seed.unwrap_or(0);
            let (model, initial) = if name == "testpair" { test_pair(seed)? } else { test_triad(seed)? };
            let kind = if name == "testpair" { BuiltinKind::TestPair } else { BuiltinKind::TestTriad };
            Ok(ModelBundle { name: name.into(), model, initial, base_step: None, horizon: params.horizon.unwrap_or(2.0), kind })
        }
        other => Err(Error::Invalid(format!("unknown builtin model '{other}' (known: {})", BUILTIN_NAMES.join(", ")))),
    }
}

fn detector(p: &BuiltinParams) -> Result<ModelBundle> {
    let grid = Grid { length: p.grid_l.unwrap_or(20.0), points: p.grid_n.unwrap_or(400) };
    let mut spec = DetectorSpec::stationary(p.kappa.unwrap_or(1.0), p.width.unwrap_or(40.0), p.a.unwrap_or(0.0), grid);
    if let Some(h) = p.hamiltonian {
        spec.hamiltonian = h;
    }
    let model = build_detector_model(&spec)?;
    if !spec.is_point_regime() {
        log::info!("detector profile spans {:.2} grid cells; outside the point regime", spec.profile_sigma() / grid.dx());
    }
    let horizon = p.horizon.unwrap_or(8.0);
    let psi = gaussian_packet(&grid, p.packet_center.unwrap_or(-3.0), p.packet_sigma.unwrap_or(1.0));
    if spec.hamiltonian == DetectorHamiltonian::Transport {
        check_no_wrap(&spec, &psi, horizon, 1e-6)?;
    }
    let initial = PureHybridState::new(ON, psi)?;
    Ok(ModelBundle { name: "detector1d".into(), model, initial, base_step: Some(grid.dx()), horizon, kind: BuiltinKind::Detector(spec) })
}

fn clock(p: &BuiltinParams) -> Result<ModelBundle> {
    let kappa = p.kappa.unwrap_or(1.0);
    let horizon = p.horizon.unwrap_or(5.0);
    let dim = p.dim.unwrap_or(2);
    let i_max = p.i_max.unwrap_or_else(|| min_i_max(kappa, horizon));
    let mut spec = match p.seed {
        Some(seed) => ClockSpec::random_unitaries(kappa, i_max, dim, seed),
        None => ClockSpec::identity(kappa, i_max, dim),
    };
    if p.boundary == Some(ClockBoundary::Cyclic) {
        spec = spec.cyclic(identity(dim));
    }
    let model = build_clock_model(&spec)?;
    check_truncation(&spec, horizon);
    let mut psi = CVec::zeros(dim);
    psi[0] = C64::new(1.0, 0.0);
    let initial = PureHybridState::new(ClassicalStateId(0), psi)?;
    Ok(ModelBundle { name: "clock".into(), model, initial, base_step: None, horizon, kind: BuiltinKind::Clock(spec) })
}
