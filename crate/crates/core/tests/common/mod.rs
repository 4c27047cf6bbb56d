//! Reference computations shared by the integration tests. Nothing here
//! calls into the library's numerics except to read model matrices.

#![allow(dead_code)]

use eventum::model::ClassicalStateId;
use eventum::{CMat, CVec, DensityFamily, HybridModel, RngStream, C64};

pub fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn dense_coupling(model: &HybridModel, to: usize, from: usize, t: f64) -> Option<CMat> {
    model.coupling(ClassicalStateId(to), ClassicalStateId(from)).map(|g| g.at(t).to_dense())
}

pub fn dense_hamiltonian(model: &HybridModel, alpha: usize, t: f64) -> CMat {
    match model.hamiltonian(ClassicalStateId(alpha)) {
        eventum::model::Hamiltonian::Matrix(h) => h.at(t).to_dense(),
        eventum::model::Hamiltonian::Transport { .. } => panic!("transport channel has no matrix"),
    }
}

/// `Σ_β g_{βα}† g_{βα}` by looping over every possible target.
pub fn brute_lambda(model: &HybridModel, alpha: usize, t: f64) -> CMat {
    let d = model.dims()[alpha];
    let mut sum = CMat::zeros(d, d);
    for beta in 0..model.m() {
        if let Some(g) = dense_coupling(model, beta, alpha, t) {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..g.nrows() {
                        sum[(i, j)] += g[(k, i)].conj() * g[(k, j)];
                    }
                }
            }
        }
    }
    sum
}

pub fn brute_rate(model: &HybridModel, alpha: usize, psi: &CVec, t: f64) -> f64 {
    let lam = brute_lambda(model, alpha, t);
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..psi.len() {
        for j in 0..psi.len() {
            acc += psi[i].conj() * lam[(i, j)] * psi[j];
        }
    }
    acc.re
}

/// Matrix exponential by scaling and squaring with a degree-20 Taylor
/// polynomial.
pub fn expm(a: &CMat) -> CMat {
    let norm: f64 = a.iter().map(|z| z.norm()).sum();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / C64::new(2f64.powi(s), 0.0);
    let n = a.nrows();
    let mut term = CMat::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=20 {
        term = &term * &scaled / C64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

pub fn random_vector(dim: usize, rng: &mut RngStream) -> CVec {
    CVec::from_fn(dim, |_, _| C64::new(rng.normal(), rng.normal()))
}

pub fn random_unit(dim: usize, rng: &mut RngStream) -> CVec {
    let v = random_vector(dim, rng);
    let n = v.norm();
    v / c(n)
}

/// Random PSD blocks `A A†`, scaled to total trace 1.
pub fn random_family(dims: &[usize], rng: &mut RngStream) -> DensityFamily {
    let mut blocks: Vec<CMat> = dims
        .iter()
        .map(|&d| {
            let a = CMat::from_fn(d, d, |_, _| C64::new(rng.normal(), rng.normal()));
            &a * a.adjoint()
        })
        .collect();
    let total: f64 = blocks.iter().map(|b| b.trace().re).sum();
    for b in &mut blocks {
        *b /= c(total);
    }
    DensityFamily { blocks, t: 0.0 }
}

/// Right-hand side of the master equation written out term by term.
pub fn rhs_oracle(model: &HybridModel, family: &DensityFamily, t: f64) -> Vec<CMat> {
    let i = C64::new(0.0, 1.0);
    (0..model.m())
        .map(|beta| {
            let rho = &family.blocks[beta];
            let h = dense_hamiltonian(model, beta, t);
            let lam = brute_lambda(model, beta, t);
            let mut out = -(&h * rho - rho * &h) * i;
            out -= (&lam * rho + rho * &lam) * c(0.5);
            for gamma in 0..model.m() {
                if let Some(g) = dense_coupling(model, beta, gamma, t) {
                    out += &g * &family.blocks[gamma] * g.adjoint();
                }
            }
            out
        })
        .collect()
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Kolmogorov distribution tail `P(K > λ)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.05 {
        return 1.0;
    }
    let s: f64 = (1..=200).map(|k| (-1f64).powi(k - 1) * (-2.0 * (k * k) as f64 * lambda * lambda).exp()).sum();
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS p-value (asymptotic with the Stephens correction).
pub fn ks_p_value(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = samples.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d)
}

/// Two-sample KS p-value.
pub fn ks2_p_value(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < na && j < nb {
        let v = a[i].min(b[j]);
        while i < na && a[i] <= v {
            i += 1;
        }
        while j < nb && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let sn = ne.sqrt();
    kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d)
}

/// Matrix of the linear map `ρ ↦ rhs_oracle(ρ)` on the stacked block
/// entries, column-major within each block.
pub fn superoperator(model: &HybridModel, t: f64) -> CMat {
    let dims = model.dims().to_vec();
    let size: usize = dims.iter().map(|d| d * d).sum();
    let mut out = CMat::zeros(size, size);
    let mut col = 0;
    for (b, &d) in dims.iter().enumerate() {
        for j in 0..d {
            for i in 0..d {
                let mut fam = DensityFamily::zeros(&dims, t);
                fam.blocks[b][(i, j)] = c(1.0);
                let image = stack(&rhs_oracle(model, &fam, t));
                out.set_column(col, &image);
                col += 1;
            }
        }
    }
    out
}

pub fn stack(blocks: &[CMat]) -> CVec {
    CVec::from_iterator(blocks.iter().map(|b| b.len()).sum(), blocks.iter().flat_map(|b| b.iter().copied()))
}

pub fn unstack(v: &CVec, dims: &[usize], t: f64) -> DensityFamily {
    let mut offset = 0;
    let blocks = dims
        .iter()
        .map(|&d| {
            let m = CMat::from_column_slice(d, d, &v.as_slice()[offset..offset + d * d]);
            offset += d * d;
            m
        })
        .collect();
    DensityFamily { blocks, t }
}

/// Exact solution of a time-independent master equation.
pub fn exact_family(model: &HybridModel, family0: &DensityFamily, t: f64) -> DensityFamily {
    let l = superoperator(model, 0.0) * c(t - family0.t);
    unstack(&(expm(&l) * stack(&family0.blocks)), model.dims(), t)
}

pub fn family_diff(a: &DensityFamily, b: &DensityFamily) -> f64 {
    a.blocks.iter().zip(&b.blocks).map(|(x, y)| max_abs_diff(x, y)).fold(0.0, f64::max)
}

pub fn poisson(k: usize, mu: f64) -> f64 {
    (1..=k).fold((-mu).exp(), |p, i| p * mu / i as f64)
}
