//! Event-generating dynamics for a quantum system coupled to a classical one.
//!
//! A [`HybridModel`] couples `m` classical states to finite-dimensional
//! Hilbert spaces. Individual histories are sampled by the piecewise
//! deterministic engine in [`engine`]: damped non-unitary evolution between
//! events, event times fixed by a norm threshold, and jumps through the
//! coupling operators. Ensembles are described by a family of density
//! matrices, one per classical state, evolved by [`master`]. The
//! [`ensemble`] module estimates that family from sampled histories so the
//! two descriptions can be compared.
//!
//! Classical labels are zero-based in code and one-based in every file and
//! terminal format.

pub mod engine;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod linalg;
pub mod master;
pub mod model;
pub mod models;
pub mod operator;
pub mod rng;
pub mod stats;

pub use engine::{EngineConfig, EventRecord, TrajectoryRecord};
pub use ensemble::{EnsembleEstimate, trace_distance};
pub use error::{Error, Result};
pub use master::DensityFamily;
pub use model::{ClassicalStateId, HybridModel, ModelBuilder, PureHybridState};
pub use operator::{Op, Operator};
pub use rng::RngStream;

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64 as C64;

/// Dense complex matrix.
pub type CMat = DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = DVector<C64>;
