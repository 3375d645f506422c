//! Independent brute-force verification paths for the estimator formulas.
//!
//! Nothing here reuses the accumulator or inversion code: Gaussian moments
//! come from explicit Isserlis pairing enumeration or raw Monte Carlo over
//! Gaussian matrices, Haar moments from direct sampling, and the numerator
//! polynomials from a symmetric-group cycle sum. Agreement between these
//! paths and the production formulas is what the test suite leans on.

use itertools::Itertools;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::haar::sample_haar_unitary;
use crate::measure::outcome_probabilities;
use crate::rng::SeededRng;
use crate::state::DensityMatrix;

/// Largest pairing order supported (products of 2K = 8 Gaussian factors).
pub const MAX_PAIRING_ORDER: usize = 4;
const MIN_MC_SAMPLES: u64 = 1_000;

fn check_indices(indices: &[(usize, usize)], dim: usize) -> Result<()> {
    for &(a, b) in indices {
        if a >= dim || b >= dim {
            return Err(Error::DimensionMismatch { expected: dim, got: a.max(b) + 1 });
        }
    }
    Ok(())
}

/// Exact Gaussian average ⟨Π_i V_{kᵢlᵢ} · Π_j V*_{mⱼnⱼ}⟩ for i.i.d. complex
/// Gaussian entries with ⟨V_{kl}V*_{mn}⟩ = δ_{km}δ_{ln}/N, evaluated by
/// enumerating all K! bijections between V and V* factors — the only
/// pairings with nonzero contribution.
pub fn isserlis_average(
    v: &[(usize, usize)],
    vstar: &[(usize, usize)],
    dim: usize,
) -> Result<f64> {
    if dim == 0 {
        return Err(Error::InvalidDimension);
    }
    let k = v.len();
    if k != vstar.len() {
        return Err(Error::DimensionMismatch { expected: k, got: vstar.len() });
    }
    if k == 0 || k > MAX_PAIRING_ORDER {
        return Err(Error::UnsupportedOrder(k, MAX_PAIRING_ORDER));
    }
    check_indices(v, dim)?;
    check_indices(vstar, dim)?;
    let mut matches = 0u64;
    for perm in (0..k).permutations(k) {
        if perm.iter().enumerate().all(|(i, &j)| v[i] == vstar[j]) {
            matches += 1;
        }
    }
    Ok(matches as f64 / (dim as f64).powi(k as i32))
}

/// Monte Carlo estimate (mean, standard error) of the same indexed product
/// over matrices of i.i.d. complex Gaussians with entry variance 1/N.
pub fn gaussian_moment_mc(
    v: &[(usize, usize)],
    vstar: &[(usize, usize)],
    dim: usize,
    n_samples: u64,
    rng: &mut SeededRng,
) -> Result<(f64, f64)> {
    if dim == 0 {
        return Err(Error::InvalidDimension);
    }
    if v.len() != vstar.len() {
        return Err(Error::DimensionMismatch { expected: v.len(), got: vstar.len() });
    }
    if v.is_empty() || v.len() > MAX_PAIRING_ORDER {
        return Err(Error::UnsupportedOrder(v.len(), MAX_PAIRING_ORDER));
    }
    if n_samples < MIN_MC_SAMPLES {
        return Err(Error::InsufficientData { needed: MIN_MC_SAMPLES, got: n_samples });
    }
    check_indices(v, dim)?;
    check_indices(vstar, dim)?;
    // Re/Im each N(0, 1/(2N)), so E|V_{kl}|² = 1/N.
    let component = Normal::new(0.0, (0.5 / dim as f64).sqrt()).expect("valid sigma");
    let mut sum = 0.0f64;
    let mut sumsq = 0.0f64;
    for _ in 0..n_samples {
        let g = DMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(component.sample(rng), component.sample(rng))
        });
        let mut prod = Complex64::ONE;
        for &(a, b) in v {
            prod *= g[(a, b)];
        }
        for &(a, b) in vstar {
            prod *= g[(a, b)].conj();
        }
        // The expectation is real; the imaginary part only adds noise.
        sum += prod.re;
        sumsq += prod.re * prod.re;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let se = ((sumsq / n - mean * mean).max(0.0) / (n - 1.0)).sqrt();
    Ok((mean, se))
}

/// The numerator polynomial of the Haar moment Pₙ — Σ over permutations
/// σ ∈ Sₙ of Π over cycles of Tr(ρ^cycle-length) — evaluated by direct
/// enumeration. Equals 1+p₂ (n=2), 1+3p₂+2p₃ (n=3),
/// 1+3p₂²+6p₂+8p₃+6p₄ (n=4).
pub fn pairing_contraction(rho: &DensityMatrix, order: usize) -> Result<f64> {
    if order == 0 || order > MAX_PAIRING_ORDER {
        return Err(Error::UnsupportedOrder(order, MAX_PAIRING_ORDER));
    }
    // p[len] = Tr ρ^len with p[1] = 1.
    let mut p = vec![1.0f64; order + 1];
    if order >= 2 {
        let powers = rho.trace_powers(order)?;
        for (i, v) in powers.iter().enumerate() {
            p[i + 2] = *v;
        }
    }
    let mut total = 0.0;
    for perm in (0..order).permutations(order) {
        let mut seen = vec![false; order];
        let mut term = 1.0;
        for start in 0..order {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut at = start;
            while !seen[at] {
                seen[at] = true;
                at = perm[at];
                len += 1;
            }
            term *= p[len];
        }
        total += term;
    }
    Ok(total)
}

/// Monte Carlo (mean, standard error) of ⟨Prob(k)ⁿ⟩ for outcome k = 0 over
/// Haar unitaries of dimension `dim` — the ground truth the forward moment
/// formulas must reproduce.
pub fn haar_moment_mc(
    rho: &DensityMatrix,
    dim: usize,
    order: usize,
    n_samples: u64,
    rng: &mut SeededRng,
) -> Result<(f64, f64)> {
    if order == 0 || order > MAX_PAIRING_ORDER {
        return Err(Error::UnsupportedOrder(order, MAX_PAIRING_ORDER));
    }
    if n_samples < MIN_MC_SAMPLES {
        return Err(Error::InsufficientData { needed: MIN_MC_SAMPLES, got: n_samples });
    }
    let mut sum = 0.0f64;
    let mut sumsq = 0.0f64;
    for _ in 0..n_samples {
        let u = sample_haar_unitary(dim, rng)?;
        let p = outcome_probabilities(rho, &u)?.values()[0];
        let v = p.powi(order as i32);
        sum += v;
        sumsq += v * v;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let se = ((sumsq / n - mean * mean).max(0.0) / (n - 1.0)).sqrt();
    Ok((mean, se))
}

/// Tr(ρ₁ρ₂⋯ρₙ): the value a joint cyclic-shift measurement yields on a
/// product of the listed states. On n identical copies this is Tr ρⁿ; on
/// non-identical copies it differs from the random-measurement target
/// Tr(ρ̄ⁿ). Returns the real part (exact for identical copies and for
/// n = 2, where the trace is real by Hermiticity).
pub fn shift_operator_value(states: &[DensityMatrix]) -> Result<f64> {
    let n = states.len();
    if !(2..=MAX_PAIRING_ORDER).contains(&n) {
        return Err(Error::OrderOutOfRange(n, 2, MAX_PAIRING_ORDER));
    }
    let dim = states[0].dim();
    for s in states {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: s.dim() });
        }
    }
    let mut prod = states[0].matrix().clone();
    for s in &states[1..] {
        prod *= s.matrix();
    }
    Ok(prod.trace().re)
}
