//! Operators and operator providers.
//!
//! An [`Op`] is the value of an operator at one instant. Grid models couple
//! through multiplication operators, so diagonal operators are stored as
//! their diagonal and never densified unless asked. An [`Operator`] is a
//! provider: a deterministic function of time yielding an [`Op`] of fixed
//! shape.

use std::borrow::Cow;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::{C64, CMat, CVec};

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Dense(CMat),
    /// Square diagonal operator given by its diagonal.
    Diagonal(CVec),
}

impl Op {
    pub fn zeros(n: usize) -> Self {
        Op::Diagonal(CVec::zeros(n))
    }

    pub fn rows(&self) -> usize {
        match self {
            Op::Dense(a) => a.nrows(),
            Op::Diagonal(d) => d.len(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Op::Dense(a) => a.ncols(),
            Op::Diagonal(d) => d.len(),
        }
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        match self {
            Op::Dense(a) => a * v,
            Op::Diagonal(d) => d.component_mul(v),
        }
    }

    pub fn to_dense(&self) -> CMat {
        match self {
            Op::Dense(a) => a.clone(),
            Op::Diagonal(d) => DMatrix::from_diagonal(d),
        }
    }

    pub fn adjoint(&self) -> Op {
        match self {
            Op::Dense(a) => Op::Dense(a.adjoint()),
            Op::Diagonal(d) => Op::Diagonal(d.map(|z| z.conj())),
        }
    }

    /// `A† A`
    pub fn gram(&self) -> Op {
        match self {
            Op::Dense(a) => Op::Dense(a.adjoint() * a),
            Op::Diagonal(d) => Op::Diagonal(d.map(|z| C64::new(z.norm_sqr(), 0.0))),
        }
    }

    pub fn scale(&self, s: C64) -> Op {
        match self {
            Op::Dense(a) => Op::Dense(a * s),
            Op::Diagonal(d) => Op::Diagonal(d * s),
        }
    }

    /// Sum of two operators of equal shape; stays diagonal when both are.
    pub fn add(&self, other: &Op) -> Op {
        match (self, other) {
            (Op::Diagonal(a), Op::Diagonal(b)) => Op::Diagonal(a + b),
            (Op::Dense(a), Op::Diagonal(d)) | (Op::Diagonal(d), Op::Dense(a)) => {
                let mut out = a.clone();
                for (i, z) in d.iter().enumerate() {
                    out[(i, i)] += z;
                }
                Op::Dense(out)
            }
            (Op::Dense(a), Op::Dense(b)) => Op::Dense(a + b),
        }
    }

    /// `(v, A v)`
    pub fn quadratic_form(&self, v: &CVec) -> C64 {
        match self {
            Op::Dense(a) => v.dotc(&(a * v)),
            Op::Diagonal(d) => d.iter().zip(v.iter()).map(|(a, z)| a * z.norm_sqr()).sum(),
        }
    }

    /// `A X A†` for a dense `X`.
    pub fn sandwich(&self, x: &CMat) -> CMat {
        match self {
            Op::Dense(a) => a * x * a.adjoint(),
            Op::Diagonal(d) => CMat::from_fn(x.nrows(), x.ncols(), |i, j| d[i] * x[(i, j)] * d[j].conj()),
        }
    }

    pub fn as_diagonal(&self) -> Option<&CVec> {
        match self {
            Op::Diagonal(d) => Some(d),
            Op::Dense(_) => None,
        }
    }
}

type TimeFn = Arc<dyn Fn(f64) -> Op + Send + Sync>;

/// Deterministic operator-valued function of time.
#[derive(Clone)]
pub enum Operator {
    Constant(Op),
    Varying { rows: usize, cols: usize, eval: TimeFn },
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operator::Constant(op) => f.debug_tuple("Constant").field(op).finish(),
            Operator::Varying { rows, cols, .. } => {
                write!(f, "Varying({rows}x{cols})")
            }
        }
    }
}

impl From<Op> for Operator {
    fn from(op: Op) -> Self {
        Operator::Constant(op)
    }
}

impl From<CMat> for Operator {
    fn from(a: CMat) -> Self {
        Operator::Constant(Op::Dense(a))
    }
}

impl Operator {
    /// Provider from a closure. The closure must return the same shape for
    /// every `t`; the shape is taken from its value at `t = 0`.
    pub fn varying<F>(eval: F) -> Self
    where
        F: Fn(f64) -> Op + Send + Sync + 'static,
    {
        let probe = eval(0.0);
        Operator::Varying { rows: probe.rows(), cols: probe.cols(), eval: Arc::new(eval) }
    }

    /// `op · sqrt(f(t))`: the jump rate carried by this coupling is
    /// multiplied by `f(t)`, which must be non-negative.
    pub fn rate_modulated<F>(op: Op, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let (rows, cols) = (op.rows(), op.cols());
        Operator::Varying {
            rows,
            cols,
            eval: Arc::new(move |t| op.scale(C64::new(f(t).max(0.0).sqrt(), 0.0))),
        }
    }

    pub fn at(&self, t: f64) -> Cow<'_, Op> {
        match self {
            Operator::Constant(op) => Cow::Borrowed(op),
            Operator::Varying { eval, .. } => Cow::Owned(eval(t)),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Operator::Constant(op) => (op.rows(), op.cols()),
            Operator::Varying { rows, cols, .. } => (*rows, *cols),
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, Operator::Varying { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn diagonal_and_dense_agree() {
        let d = CVec::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0)]);
        let diag = Op::Diagonal(d);
        let dense = Op::Dense(diag.to_dense());
        let v = CVec::from_vec(vec![c(0.3, -1.0), c(2.0, 0.5), c(-1.0, 1.0)]);
        assert!((diag.apply(&v) - dense.apply(&v)).norm() < 1e-14);
        assert!((diag.quadratic_form(&v) - dense.quadratic_form(&v)).norm() < 1e-13);
        assert!((diag.gram().to_dense() - dense.gram().to_dense()).norm() < 1e-13);
        let x = CMat::from_fn(3, 3, |i, j| c(i as f64 - j as f64, (i * j) as f64));
        assert!((diag.sandwich(&x) - dense.sandwich(&x)).norm() < 1e-13);
        let sum = diag.add(&dense);
        assert!((sum.to_dense() - dense.to_dense() * c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn rate_modulation_scales_gram() {
        let op = Op::Dense(CMat::identity(2, 2));
        let g = Operator::rate_modulated(op, |t| 1.0 + t);
        assert!(g.is_time_dependent());
        let gram = g.at(3.0).gram().to_dense();
        assert!((gram[(0, 0)] - c(4.0, 0.0)).norm() < 1e-14);
        assert_eq!(g.shape(), (2, 2));
    }
}
