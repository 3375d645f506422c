//! Haar-distributed random unitaries and the statistical certification of
//! the ensemble.
//!
//! Sampling follows the standard construction: draw a Ginibre matrix
//! (independent complex Gaussian entries), QR-factorize it, and multiply
//! each column of Q by the phase of the corresponding diagonal entry of R.
//! The phase step selects the unique factor with positive-real triangular
//! diagonal; without it the result differs from a Haar matrix by
//! factorization-convention column phases.
//!
//! The certification test implements the two checks available to an
//! experimenter: unitary invariance (the moments ⟨|U₁ₖ|²ⁿ⟩ must not depend
//! on the outcome column k) and agreement of those moments with their known
//! values for the Haar ensemble, n!/(N(N+1)⋯(N+n−1)).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Max-entry tolerance for U†U = I; roughly 100× the rounding accumulated
/// by a QR factorization at dimensions up to a few hundred.
pub const UNITARITY_TOL: f64 = 1e-10;

/// An N×N unitary matrix.
///
/// Construction validates unitarity to [`UNITARITY_TOL`] in the max-abs
/// entry norm.
#[derive(Clone, Debug)]
pub struct UnitaryMatrix {
    entries: DMatrix<Complex64>,
}

impl UnitaryMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 {
            return Err(Error::InvalidDimension);
        }
        if entries.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: entries.ncols() });
        }
        let defect = unitarity_defect(&entries);
        if defect > UNITARITY_TOL {
            return Err(Error::NotUnitary(defect));
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// Entry U\[row, col\].
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    /// Max-entry deviation of U†U from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.entries)
    }
}

fn unitarity_defect(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let gram = m.adjoint() * m;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let expected = if i == j { Complex64::ONE } else { Complex64::ZERO };
            worst = worst.max((gram[(i, j)] - expected).norm());
        }
    }
    worst
}

/// Draws a matrix of independent complex Gaussians; real and imaginary
/// parts are each standard normal.
pub fn sample_ginibre(dim: usize, rng: &mut SeededRng) -> Result<DMatrix<Complex64>> {
    if dim == 0 {
        return Err(Error::InvalidDimension);
    }
    // Column-major fill order, fixed so that sequences are reproducible.
    Ok(DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }))
}

/// QR-factorizes `g` and returns Q with each column multiplied by the phase
/// of the matching diagonal entry of R (when `phase_fix` is set), i.e. the
/// unique unitary factor for which R has positive real diagonal.
fn orthogonalize(g: DMatrix<Complex64>, phase_fix: bool) -> DMatrix<Complex64> {
    let dim = g.nrows();
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    if phase_fix {
        for j in 0..dim {
            let d = r[(j, j)];
            let norm = d.norm();
            // A zero diagonal has probability zero for a Ginibre input.
            let phase = if norm > 0.0 { d / norm } else { Complex64::ONE };
            for i in 0..dim {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

/// Samples an N×N unitary distributed with the Haar measure.
pub fn sample_haar_unitary(dim: usize, rng: &mut SeededRng) -> Result<UnitaryMatrix> {
    let g = sample_ginibre(dim, rng)?;
    UnitaryMatrix::new(orthogonalize(g, true))
}

/// Like [`sample_haar_unitary`] but skipping the phase step. Test hook:
/// the output differs from the fixed sampler only by per-column phases.
#[doc(hidden)]
pub fn sample_haar_unitary_unfixed(dim: usize, rng: &mut SeededRng) -> Result<UnitaryMatrix> {
    let g = sample_ginibre(dim, rng)?;
    UnitaryMatrix::new(orthogonalize(g, false))
}

/// Which unitary source to certify.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerKind {
    /// The correct Ginibre + QR + phase construction.
    Haar,
    /// Deliberately miscalibrated source for negative tests: the entries fed
    /// to the orthogonalization are uniform instead of Gaussian, so the
    /// ensemble is not unitarily invariant and certification must reject it.
    UniformEntries,
}

impl SamplerKind {
    pub fn sample(self, dim: usize, rng: &mut SeededRng) -> Result<UnitaryMatrix> {
        match self {
            SamplerKind::Haar => sample_haar_unitary(dim, rng),
            SamplerKind::UniformEntries => {
                if dim == 0 {
                    return Err(Error::InvalidDimension);
                }
                let g = DMatrix::from_fn(dim, dim, |_, _| {
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                });
                UnitaryMatrix::new(orthogonalize(g, true))
            }
        }
    }
}

/// One moment cell of the certification table.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MomentCell {
    pub mean: f64,
    pub std_err: f64,
}

/// Result of the ensemble certification.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub dim: usize,
    pub samples: u64,
    pub threshold: f64,
    /// `moments[n-1][k]`: sample mean and standard error of |U₁ₖ|²ⁿ.
    pub moments: Vec<Vec<MomentCell>>,
    /// Largest |z| between any two outcome columns, per order n.
    pub max_pairwise_z: Vec<f64>,
    /// Largest |z| of any column against the exact Haar value n!/Dₙ.
    pub max_theory_z: Vec<f64>,
    pub passed: bool,
}

impl InvarianceReport {
    /// The single worst discrepancy in the table.
    pub fn worst_z(&self) -> f64 {
        self.max_pairwise_z
            .iter()
            .chain(self.max_theory_z.iter())
            .fold(0.0f64, |a, &b| a.max(b))
    }
}

/// Exact Haar value of ⟨|U₁ₖ|²ⁿ⟩: n!/(N(N+1)⋯(N+n−1)).
pub fn haar_abs2n_moment(dim: usize, n: usize) -> f64 {
    let mut v = 1.0;
    for j in 0..n {
        v *= (j + 1) as f64 / (dim + j) as f64;
    }
    v
}

/// Certifies a unitary source by the two statistically testable properties
/// of the Haar ensemble: k-independence of the moments ⟨|U₁ₖ|²ⁿ⟩ for
/// n = 1..4, and agreement with their known values.
///
/// Fails (sets `passed = false`) if any standardized discrepancy exceeds
/// `threshold` (default [`DEFAULT_Z_THRESHOLD`] via [`haar_invariance_test`]).
pub fn invariance_test_with(
    kind: SamplerKind,
    dim: usize,
    n_samples: u64,
    threshold: f64,
    rng: &mut SeededRng,
) -> Result<InvarianceReport> {
    if dim == 0 {
        return Err(Error::InvalidDimension);
    }
    if n_samples < 100 {
        return Err(Error::InsufficientData { needed: 100, got: n_samples });
    }
    const ORDERS: usize = 4;
    let mut sums = vec![vec![0.0f64; dim]; ORDERS];
    let mut sumsq = vec![vec![0.0f64; dim]; ORDERS];
    for _ in 0..n_samples {
        let u = kind.sample(dim, rng)?;
        for k in 0..dim {
            let p = u.entry(0, k).norm_sqr();
            let mut pw = 1.0;
            for n in 0..ORDERS {
                pw *= p;
                sums[n][k] += pw;
                sumsq[n][k] += pw * pw;
            }
        }
    }
    let count = n_samples as f64;
    let mut moments = Vec::with_capacity(ORDERS);
    let mut max_pairwise_z = Vec::with_capacity(ORDERS);
    let mut max_theory_z = Vec::with_capacity(ORDERS);
    for n in 0..ORDERS {
        let mut row = Vec::with_capacity(dim);
        for k in 0..dim {
            let mean = sums[n][k] / count;
            let var = (sumsq[n][k] / count - mean * mean).max(0.0) / (count - 1.0);
            row.push(MomentCell { mean, std_err: var.sqrt() });
        }
        let theory = haar_abs2n_moment(dim, n + 1);
        let mut zp = 0.0f64;
        let mut zt = 0.0f64;
        for k in 0..dim {
            zt = zt.max(z_score(row[k].mean - theory, row[k].std_err));
            for l in (k + 1)..dim {
                let se = (row[k].std_err.powi(2) + row[l].std_err.powi(2)).sqrt();
                zp = zp.max(z_score(row[k].mean - row[l].mean, se));
            }
        }
        moments.push(row);
        max_pairwise_z.push(zp);
        max_theory_z.push(zt);
    }
    let worst = moments
        .iter()
        .zip(max_pairwise_z.iter().zip(max_theory_z.iter()))
        .fold(0.0f64, |a, (_, (&p, &t))| a.max(p).max(t));
    Ok(InvarianceReport {
        dim,
        samples: n_samples,
        threshold,
        moments,
        max_pairwise_z,
        max_theory_z,
        passed: worst <= threshold,
    })
}

/// Default z-score threshold for certification failure.
pub const DEFAULT_Z_THRESHOLD: f64 = 4.0;

/// Certification of the crate's own Haar sampler at the default threshold.
pub fn haar_invariance_test(
    dim: usize,
    n_samples: u64,
    rng: &mut SeededRng,
) -> Result<InvarianceReport> {
    invariance_test_with(SamplerKind::Haar, dim, n_samples, DEFAULT_Z_THRESHOLD, rng)
}

fn z_score(diff: f64, se: f64) -> f64 {
    if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (diff / se).abs()
    }
}
