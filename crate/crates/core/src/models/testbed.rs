//! Seeded random models for checks and benchmarks.

use crate::error::Result;
use crate::model::{ClassicalStateId, HybridModel, ModelBuilder, PureHybridState};
use crate::rng::RngStream;
use crate::{C64, CMat, CVec};

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> CMat {
    CMat::from_fn(rows, cols, |_, _| C64::new(rng.normal(), rng.normal()))
}

/// Random Hermitian matrix with entries of order `scale`.
pub fn random_hermitian(dim: usize, scale: f64, rng: &mut RngStream) -> CMat {
    let a = gaussian_matrix(dim, dim, rng);
    (&a + a.adjoint()) * C64::new(0.5 * scale, 0.0)
}

/// Every ordered pair of distinct states is coupled by a dense complex
/// Gaussian matrix scaled by `coupling_scale / √dim`; Hamiltonians are
/// random Hermitian with scale `h_scale`.
pub fn random_model(m: usize, dim: usize, seed: u64, h_scale: f64, coupling_scale: f64) -> Result<HybridModel> {
    let mut rng = RngStream::new(seed, u64::MAX);
    let g_scale = C64::new(coupling_scale / (dim as f64).sqrt(), 0.0);
    let mut builder = ModelBuilder::new(vec![dim; m]);
    for alpha in 0..m {
        builder = builder.hamiltonian(alpha, random_hermitian(dim, h_scale, &mut rng));
    }
    for from in 0..m {
        for to in (0..m).filter(|&to| to != from) {
            builder = builder.coupling(to, from, gaussian_matrix(dim, dim, &mut rng) * g_scale);
        }
    }
    builder.build()
}

/// Normalized random wave function on state `alpha`.
pub fn random_state(model: &HybridModel, alpha: usize, seed: u64) -> Result<PureHybridState> {
    let id = ClassicalStateId(alpha);
    model.check_index(id)?;
    let mut rng = RngStream::new(seed, u64::MAX - 1);
    let psi = CVec::from_fn(model.dim(id), |_, _| C64::new(rng.normal(), rng.normal()));
    PureHybridState::new(id, psi)
}

/// Two states, qubit on each, couplings both ways.
pub fn test_pair(seed: u64) -> Result<(HybridModel, PureHybridState)> {
    let model = random_model(2, 2, seed, 1.0, 1.0)?;
    let state = random_state(&model, 0, seed)?;
    Ok((model, state))
}

/// Three states, qubit on each, all six couplings present.
pub fn test_triad(seed: u64) -> Result<(HybridModel, PureHybridState)> {
    let model = random_model(3, 2, seed, 1.0, 1.0)?;
    let state = random_state(&model, 0, seed)?;
    Ok((model, state))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_models_repeat() {
        let (a, sa) = test_pair(5).unwrap();
        let (b, sb) = test_pair(5).unwrap();
        assert_eq!(sa.psi, sb.psi);
        let ga = a.coupling(ClassicalStateId(1), ClassicalStateId(0)).unwrap().at(0.0).to_dense();
        let gb = b.coupling(ClassicalStateId(1), ClassicalStateId(0)).unwrap().at(0.0).to_dense();
        assert_eq!(ga, gb);
        let (c, _) = test_pair(6).unwrap();
        let gc = c.coupling(ClassicalStateId(1), ClassicalStateId(0)).unwrap().at(0.0).to_dense();
        assert_ne!(ga, gc);
    }

    #[test]
    fn triad_has_all_channels() {
        let (model, _) = test_triad(1).unwrap();
        assert_eq!(model.couplings().count(), 6);
        assert_eq!(model.channels_from(ClassicalStateId(2)).len(), 2);
    }
}
