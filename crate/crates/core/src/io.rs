//! File formats: JSON model descriptions, JSONL event logs, CSV summaries
//! and time series.
//!
//! Matrix entries are written `[re, im]`; a bare number is read as a real
//! entry. Classical labels are one-based throughout.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::engine::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::master::DensityFamily;
use crate::model::{ClassicalStateId, ModelBuilder, PureHybridState};
use crate::models::builtin::{resolve_builtin, BuiltinKind, BuiltinParams, ModelBundle};
use crate::operator::{Op, Operator};
use crate::{C64, CMat, CVec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl From<Entry> for C64 {
    fn from(e: Entry) -> C64 {
        match e {
            Entry::Real(re) => C64::new(re, 0.0),
            Entry::Complex([re, im]) => C64::new(re, im),
        }
    }
}

pub type MatrixSpec = Vec<Vec<Entry>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HamiltonianSpec {
    Named(String),
    Matrix(MatrixSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub from: usize,
    pub to: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixSpec>,
    /// `"identity"` (square blocks only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

/// Time modulation of a coupling's rate, `g(t) = g·√f(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Modulation {
    /// `f(t) = 1 + amplitude·sin(omega·t + phase)`, `|amplitude| ≤ 1`.
    Sine {
        from: usize,
        to: usize,
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `f(t) = 1` on `[start, end)`, `low` elsewhere.
    Pulse {
        from: usize,
        to: usize,
        start: f64,
        end: f64,
        #[serde(default)]
        low: f64,
    },
}

impl Modulation {
    fn edge(&self) -> (usize, usize) {
        match *self {
            Modulation::Sine { from, to, .. } | Modulation::Pulse { from, to, .. } => (from, to),
        }
    }

    fn factor(&self) -> Result<std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>> {
        match *self {
            Modulation::Sine { amplitude, omega, phase, .. } => {
                if amplitude.abs() > 1.0 {
                    return Err(Error::Invalid(format!("sine amplitude {amplitude} would make the rate negative")));
                }
                Ok(std::sync::Arc::new(move |t: f64| 1.0 + amplitude * (omega * t + phase).sin()))
            }
            Modulation::Pulse { start, end, low, .. } => {
                if low < 0.0 || end < start {
                    return Err(Error::Invalid("pulse needs start <= end and low >= 0".into()));
                }
                Ok(std::sync::Arc::new(move |t: f64| if (start..end).contains(&t) { 1.0 } else { low }))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub alpha: usize,
    pub psi: Vec<Entry>,
}

/// Explicit matrix model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub m: usize,
    pub dims: Vec<usize>,
    /// One entry per classical state; missing entries are zero.
    #[serde(default)]
    pub hamiltonians: Vec<HamiltonianSpec>,
    #[serde(default)]
    pub couplings: Vec<CouplingSpec>,
    #[serde(default)]
    pub time_dependence: Vec<Modulation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinFile {
    pub builtin: String,
    #[serde(default)]
    pub params: BuiltinParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Builtin(BuiltinFile),
    Explicit(ModelFile),
}

pub fn matrix_from_spec(spec: &MatrixSpec) -> Result<CMat> {
    let rows = spec.len();
    let cols = spec.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || spec.iter().any(|r| r.len() != cols) {
        return Err(Error::ShapeMismatch("matrix rows must be non-empty and of equal length".into()));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| spec[i][j].into()))
}

pub fn matrix_to_spec(m: &CMat) -> MatrixSpec {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| Entry::Complex([m[(i, j)].re, m[(i, j)].im])).collect()).collect()
}

fn label(l: usize, m: usize) -> Result<usize> {
    let id = ClassicalStateId::from_label(l)?;
    if id.0 >= m {
        return Err(Error::IndexOutOfRange { index: l, m });
    }
    Ok(id.0)
}

impl ModelFile {
    pub fn into_bundle(self) -> Result<ModelBundle> {
        if self.dims.len() != self.m {
            return Err(Error::ShapeMismatch(format!("m = {} but {} dimensions given", self.m, self.dims.len())));
        }
        if self.hamiltonians.len() > self.m {
            return Err(Error::ShapeMismatch(format!("{} Hamiltonians for {} states", self.hamiltonians.len(), self.m)));
        }
        let mut builder = ModelBuilder::new(self.dims.clone());
        for (alpha, h) in self.hamiltonians.iter().enumerate() {
            match h {
                HamiltonianSpec::Named(name) if name == "zero" => {}
                HamiltonianSpec::Named(name) => return Err(Error::Invalid(format!("unknown Hamiltonian '{name}'"))),
                HamiltonianSpec::Matrix(spec) => builder = builder.hamiltonian(alpha, matrix_from_spec(spec)?),
            }
        }
        for (k, m) in self.time_dependence.iter().enumerate() {
            if self.time_dependence[..k].iter().any(|o| o.edge() == m.edge()) {
                return Err(Error::Invalid(format!("coupling {:?} modulated twice", m.edge())));
            }
            if !self.couplings.iter().any(|c| (c.from, c.to) == m.edge()) {
                return Err(Error::MissingCoupling { from: m.edge().0, to: m.edge().1 });
            }
        }
        for c in &self.couplings {
            let (from, to) = (label(c.from, self.m)?, label(c.to, self.m)?);
            let base = match (&c.matrix, c.builtin.as_deref()) {
                (Some(spec), None) => matrix_from_spec(spec)?,
                (None, Some("identity")) => {
                    if self.dims[from] != self.dims[to] {
                        return Err(Error::ShapeMismatch(format!("identity coupling {} -> {} between unequal spaces", c.from, c.to)));
                    }
                    CMat::identity(self.dims[to], self.dims[from])
                }
                (None, Some(other)) => return Err(Error::Invalid(format!("unknown builtin coupling '{other}'"))),
                _ => return Err(Error::Invalid(format!("coupling {} -> {} needs exactly one of matrix, builtin", c.from, c.to))),
            };
            let op = Op::Dense(base * C64::new(c.scale, 0.0));
            let operator = match self.time_dependence.iter().find(|m| m.edge() == (c.from, c.to)) {
                Some(m) => {
                    let f = m.factor()?;
                    Operator::rate_modulated(op, move |t| f(t))
                }
                None => Operator::Constant(op),
            };
            builder = builder.coupling(to, from, operator);
        }
        let model = builder.build()?;
        let initial = match &self.initial {
            Some(spec) => {
                let alpha = ClassicalStateId(label(spec.alpha, self.m)?);
                let psi = CVec::from_iterator(spec.psi.len(), spec.psi.iter().map(|&e| C64::from(e)));
                if psi.len() != model.dim(alpha) {
                    return Err(Error::ShapeMismatch(format!("initial vector has {} entries, state {} has dimension {}", psi.len(), spec.alpha, model.dim(alpha))));
                }
                PureHybridState::new(alpha, psi)?
            }
            None => {
                let mut psi = CVec::zeros(self.dims[0]);
                psi[0] = C64::new(1.0, 0.0);
                PureHybridState::new(ClassicalStateId(0), psi)?
            }
        };
        Ok(ModelBundle { name: "custom".into(), model, initial, base_step: None, horizon: self.horizon.unwrap_or(1.0), kind: BuiltinKind::Custom })
    }
}

/// Parses a model description; builtin parameters in the file are
/// overridden by `overrides`.
pub fn parse_model(text: &str, overrides: &BuiltinParams) -> Result<ModelBundle> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("builtin").is_some() {
        let file: BuiltinFile = serde_json::from_value(value)?;
        resolve_builtin(&file.builtin, &file.params.merged(overrides))
    } else {
        let file: ModelFile = serde_json::from_value(value)?;
        file.into_bundle()
    }
}

pub fn load_model(path: &Path, overrides: &BuiltinParams) -> Result<ModelBundle> {
    parse_model(&fs::read_to_string(path)?, overrides)
}

fn psi_json(psi: &CVec) -> serde_json::Value {
    psi.iter().map(|z| json!([z.re, z.im])).collect()
}

/// One JSON object per event, trajectories in index order.
pub fn write_events_jsonl<W: Write>(out: &mut W, trajectories: &[TrajectoryRecord], compact: bool) -> Result<()> {
    for (k, traj) in trajectories.iter().enumerate() {
        for e in &traj.events {
            let mut line = json!({
                "trajectory": k,
                "seed": traj.seed,
                "stream": traj.stream,
                "t": e.time,
                "from": e.from.label(),
                "to": e.to.label(),
                "norm_sq_at_jump": e.pre_jump_norm_sq,
            });
            if !compact {
                line["psi"] = psi_json(&e.post_jump_psi);
            }
            serde_json::to_writer(&mut *out, &line)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(out: &mut W, trajectories: &[TrajectoryRecord]) -> Result<()> {
    writeln!(out, "trajectory,n_events,final_alpha,survival_norm_sq")?;
    for (k, t) in trajectories.iter().enumerate() {
        writeln!(out, "{k},{},{},{}", t.events.len(), t.final_state.alpha.label(), t.survival_norm_sq)?;
    }
    Ok(())
}

/// Columns `t, tr_1..tr_m, purity_1..purity_m`; `verbose` appends the
/// total trace, smallest eigenvalue and Hermiticity deviation.
pub fn write_timeseries_csv<W: Write>(out: &mut W, families: &[DensityFamily], verbose: bool) -> Result<()> {
    let m = families.first().map_or(0, |f| f.blocks.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=m).map(|b| format!("tr_{b}")));
    header.extend((1..=m).map(|b| format!("purity_{b}")));
    if verbose {
        header.extend(["total_trace", "min_eigenvalue", "hermiticity_dev"].map(String::from));
    }
    writeln!(out, "{}", header.join(","))?;
    for f in families {
        let mut row = vec![f.t.to_string()];
        row.extend(f.traces().iter().map(f64::to_string));
        row.extend(f.purities().iter().map(f64::to_string));
        if verbose {
            row.push(f.total_trace().to_string());
            row.push(f.min_eigenvalue().to_string());
            row.push(f.hermiticity_deviation().to_string());
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
