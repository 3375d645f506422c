//! Density matrices: construction, validation, embedding, and the exact
//! trace powers pₙ = Tr ρⁿ that the estimators target.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::haar::sample_haar_unitary;
use crate::rng::SeededRng;

/// Max-entry tolerance for Hermiticity and for |Tr ρ − 1|.
pub const STATE_TOL: f64 = 1e-12;
/// Eigenvalues may dip this far below zero before a state is rejected.
pub const PSD_TOL: f64 = -1e-10;

/// A validated M×M density matrix: Hermitian, unit trace, positive
/// semidefinite (all to the tolerances above). Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        let m = entries.nrows();
        if m == 0 {
            return Err(Error::InvalidDimension);
        }
        if entries.ncols() != m {
            return Err(Error::DimensionMismatch { expected: m, got: entries.ncols() });
        }
        let mut herm = 0.0f64;
        for i in 0..m {
            for j in i..m {
                herm = herm.max((entries[(i, j)] - entries[(j, i)].conj()).norm());
            }
        }
        if herm > STATE_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let trace = entries.trace();
        if (trace.re - 1.0).abs() > STATE_TOL || trace.im.abs() > STATE_TOL {
            return Err(Error::InvalidTrace(trace.re));
        }
        let min_eig = entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        if min_eig < PSD_TOL {
            return Err(Error::NotPositive(min_eig));
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    /// The projector |k⟩⟨k| onto a computational basis vector.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension);
        }
        if index >= dim {
            return Err(Error::DimensionMismatch { expected: dim, got: index });
        }
        let mut m = DMatrix::zeros(dim, dim);
        m[(index, index)] = Complex64::ONE;
        Self::new(m)
    }

    /// A random pure state |ψ⟩⟨ψ| with |ψ⟩ the first column of a Haar
    /// unitary, i.e. uniform on the unit sphere. Also exercises
    /// off-diagonal entries, unlike the diagonal ensembles.
    pub fn pure_random(dim: usize, rng: &mut SeededRng) -> Result<Self> {
        let u = sample_haar_unitary(dim, rng)?;
        let psi = u.matrix().column(0).clone_owned();
        let norm = psi.norm();
        let psi = psi / Complex64::new(norm, 0.0);
        let mut proj = &psi * psi.adjoint();
        let t = proj.trace().re;
        proj /= Complex64::new(t, 0.0);
        Self::new(proj)
    }

    /// A random diagonal mixed state diag(z₁ᴱ, …, z_Mᴱ)/Σⱼ zⱼᴱ with the zᵢ
    /// i.i.d. uniform on (0, 1). Larger exponents concentrate the weight on
    /// fewer eigenvalues, so the ensemble's typical purity grows with E.
    pub fn random_diagonal(dim: usize, exponent: f64, rng: &mut SeededRng) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension);
        }
        if !(exponent > 0.0) {
            return Err(Error::InvalidExponent(exponent));
        }
        let weights: Vec<f64> = (0..dim).map(|_| rng.random::<f64>().powf(exponent)).collect();
        let total: f64 = weights.iter().sum();
        let mut m = DMatrix::zeros(dim, dim);
        for (i, w) in weights.iter().enumerate() {
            m[(i, i)] = Complex64::new(w / total, 0.0);
        }
        Self::new(m)
    }

    /// ρ = I/M.
    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension);
        }
        let p = Complex64::new(1.0 / dim as f64, 0.0);
        Self::new(DMatrix::from_diagonal_element(dim, dim, p))
    }

    /// Pads with zero rows/columns up to dimension `n`, leaving this matrix
    /// as the top-left block. The nonzero spectrum — hence every trace
    /// power — is unchanged.
    pub fn embed(&self, n: usize) -> Result<Self> {
        let m = self.dim();
        if n < m {
            return Err(Error::EmbeddingTooSmall { dim: n, target: m });
        }
        if n == m {
            return Ok(self.clone());
        }
        let mut big = DMatrix::zeros(n, n);
        big.view_mut((0, 0), (m, m)).copy_from(&self.entries);
        Self::new(big)
    }

    /// Exact pₙ = Tr ρⁿ for n = 2..=max_n, by repeated multiplication.
    pub fn trace_powers(&self, max_n: usize) -> Result<Vec<f64>> {
        if !(2..=8).contains(&max_n) {
            return Err(Error::OrderOutOfRange(max_n, 2, 8));
        }
        let m = self.dim() as f64;
        let mut out = Vec::with_capacity(max_n - 1);
        let mut power = self.entries.clone();
        for n in 2..=max_n {
            power *= &self.entries;
            let p = power.trace().re;
            let floor = m.powi(1 - n as i32);
            assert!(
                p >= floor - 1e-9 && p <= 1.0 + 1e-9,
                "trace power p_{n} = {p} outside [{floor}, 1]"
            );
            out.push(p);
        }
        Ok(out)
    }

    /// Purity Tr ρ².
    pub fn purity(&self) -> f64 {
        self.trace_powers(2).expect("order 2 is always valid")[0]
    }

    /// Real spectrum, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut eig: Vec<f64> = self.entries.clone().symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
        eig
    }

    /// Entrywise average ρ̄ = Σⱼ ρⱼ / J.
    pub fn mean_state(states: &[DensityMatrix]) -> Result<Self> {
        let first = states.first().ok_or(Error::EmptyStateList)?;
        let dim = first.dim();
        let mut sum = DMatrix::<Complex64>::zeros(dim, dim);
        for s in states {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: s.dim() });
            }
            sum += &s.entries;
        }
        Self::new(sum / Complex64::new(states.len() as f64, 0.0))
    }

    /// Row-major (re, im) pairs, the on-disk layout.
    pub fn flat_entries(&self) -> Vec<(f64, f64)> {
        let dim = self.dim();
        let mut out = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let e = self.entries[(i, j)];
                out.push((e.re, e.im));
            }
        }
        out
    }

    pub fn from_flat_entries(dim: usize, entries: &[(f64, f64)]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension);
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: entries.len() });
        }
        let m = DMatrix::from_fn(dim, dim, |i, j| {
            let (re, im) = entries[i * dim + j];
            Complex64::new(re, im)
        });
        Self::new(m)
    }
}

/// On-disk state record: `{"dim": M, "entries": [[re, im], …]}` row-major.
#[derive(Serialize, Deserialize)]
struct StateFile {
    dim: usize,
    entries: Vec<(f64, f64)>,
}

/// Loads and validates an explicit state file.
pub fn load_state_file(path: &Path) -> Result<DensityMatrix> {
    let text = std::fs::read_to_string(path)?;
    let record: StateFile = serde_json::from_str(&text)?;
    DensityMatrix::from_flat_entries(record.dim, &record.entries)
}

pub fn save_state_file(path: &Path, rho: &DensityMatrix) -> Result<()> {
    let record = StateFile { dim: rho.dim(), entries: rho.flat_entries() };
    std::fs::write(path, serde_json::to_string_pretty(&record)?)?;
    Ok(())
}

/// How input states are generated for a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateEnsembleSpec {
    /// Haar-random pure state.
    PureRandom,
    /// Random diagonal mixed state with weights zᵢ^exponent.
    RandomDiagonal { exponent: f64 },
    MaximallyMixed,
    /// Load from a state file.
    Explicit { path: PathBuf },
    /// A source cycling through several fixed component states; the
    /// estimators then target the trace powers of the component mean.
    AlternatingSource { components: Vec<StateEnsembleSpec> },
}

impl StateEnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            StateEnsembleSpec::RandomDiagonal { exponent } if !(*exponent > 0.0) => {
                Err(Error::InvalidExponent(*exponent))
            }
            StateEnsembleSpec::AlternatingSource { components } => {
                if components.is_empty() {
                    return Err(Error::EmptyStateList);
                }
                for c in components {
                    if matches!(c, StateEnsembleSpec::AlternatingSource { .. }) {
                        return Err(Error::InvalidScenario(
                            "alternating source components must be simple states".into(),
                        ));
                    }
                    c.validate()?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Draws the concrete component list: one state for the simple kinds,
    /// the full component vector for an alternating source.
    pub fn realize(&self, dim: usize, rng: &mut SeededRng) -> Result<Vec<DensityMatrix>> {
        self.validate()?;
        match self {
            StateEnsembleSpec::PureRandom => Ok(vec![DensityMatrix::pure_random(dim, rng)?]),
            StateEnsembleSpec::RandomDiagonal { exponent } => {
                Ok(vec![DensityMatrix::random_diagonal(dim, *exponent, rng)?])
            }
            StateEnsembleSpec::MaximallyMixed => Ok(vec![DensityMatrix::maximally_mixed(dim)?]),
            StateEnsembleSpec::Explicit { path } => {
                let rho = load_state_file(path)?;
                if rho.dim() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: rho.dim() });
                }
                Ok(vec![rho])
            }
            StateEnsembleSpec::AlternatingSource { components } => components
                .iter()
                .map(|c| c.realize(dim, rng).map(|mut v| v.remove(0)))
                .collect(),
        }
    }
}
