//! A single random measurement: rotate the (embedded) state by a random
//! unitary and read out the fixed M-outcome basis subset, either exactly or
//! with a finite number of shots.
//!
//! The outcome subset is always the first M computational basis vectors of
//! the N-dimensional rotated space. Haar invariance makes this choice
//! immaterial, which is exactly what the sampler certification checks.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::haar::UnitaryMatrix;
use crate::rng::SeededRng;
use crate::state::DensityMatrix;

/// Physical setting of the measurement; determines how (M, N) may relate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// A single photon over M input modes mixed into N ≥ M output modes.
    PhotonModes,
    /// Q system qubits plus A ancilla qubits in |0⟩: M = 2^Q, N = 2^(Q+A);
    /// outcomes keep only the ancilla-|0⟩ block.
    QubitsWithAncilla,
    /// Q qubits, no ancillas: N = M = 2^Q.
    BareQubits,
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScenarioKind::PhotonModes => "photon-modes",
            ScenarioKind::QubitsWithAncilla => "qubits-with-ancilla",
            ScenarioKind::BareQubits => "bare-qubits",
        })
    }
}

/// A validated measurement configuration: system dimension M, rotated
/// dimension N ≥ M, and a shot budget (0 = exact probabilities).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioRecord", into = "ScenarioRecord")]
pub struct MeasurementScenario {
    kind: ScenarioKind,
    m: usize,
    n: usize,
    shots: u64,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
struct ScenarioRecord {
    kind: ScenarioKind,
    m: usize,
    n: usize,
    shots: u64,
}

impl TryFrom<ScenarioRecord> for MeasurementScenario {
    type Error = Error;
    fn try_from(r: ScenarioRecord) -> Result<Self> {
        MeasurementScenario::new(r.kind, r.m, r.n, r.shots)
    }
}

impl From<MeasurementScenario> for ScenarioRecord {
    fn from(s: MeasurementScenario) -> Self {
        ScenarioRecord { kind: s.kind, m: s.m, n: s.n, shots: s.shots }
    }
}

fn log2_exact(v: usize) -> Option<u32> {
    (v.is_power_of_two() && v > 1).then(|| v.trailing_zeros())
}

impl MeasurementScenario {
    pub fn new(kind: ScenarioKind, m: usize, n: usize, shots: u64) -> Result<Self> {
        if m == 0 || n < m {
            return Err(Error::InvalidScenario(format!(
                "need N ≥ M ≥ 1, got M = {m}, N = {n}"
            )));
        }
        match kind {
            ScenarioKind::PhotonModes => {}
            ScenarioKind::BareQubits => {
                if n != m || log2_exact(m).is_none() {
                    return Err(Error::InvalidScenario(format!(
                        "bare qubits need N = M = 2^Q with Q ≥ 1, got M = {m}, N = {n}"
                    )));
                }
            }
            ScenarioKind::QubitsWithAncilla => {
                let (Some(q), Some(qa)) = (log2_exact(m), log2_exact(n)) else {
                    return Err(Error::InvalidScenario(format!(
                        "ancilla scenario needs powers of two, got M = {m}, N = {n}"
                    )));
                };
                if qa <= q {
                    return Err(Error::InvalidScenario(format!(
                        "ancilla scenario needs N > M, got M = {m}, N = {n}"
                    )));
                }
            }
        }
        Ok(Self { kind, m, n, shots })
    }

    /// Scenario (photon modes): M input modes, N ≥ M total modes.
    pub fn photon_modes(m: usize, n: usize) -> Result<Self> {
        Self::new(ScenarioKind::PhotonModes, m, n, 0)
    }

    /// Q qubits with A ≥ 1 ancilla qubits.
    pub fn qubits_with_ancilla(qubits: u32, ancillas: u32) -> Result<Self> {
        if qubits == 0 || ancillas == 0 {
            return Err(Error::InvalidScenario(format!(
                "need Q ≥ 1 and A ≥ 1, got Q = {qubits}, A = {ancillas}"
            )));
        }
        let m = 1usize
            .checked_shl(qubits)
            .ok_or_else(|| Error::InvalidScenario("qubit count overflows".into()))?;
        let n = 1usize
            .checked_shl(qubits + ancillas)
            .ok_or_else(|| Error::InvalidScenario("qubit count overflows".into()))?;
        Self::new(ScenarioKind::QubitsWithAncilla, m, n, 0)
    }

    /// Q qubits, no embedding.
    pub fn bare_qubits(qubits: u32) -> Result<Self> {
        if qubits == 0 {
            return Err(Error::InvalidScenario("need Q ≥ 1".into()));
        }
        let m = 1usize
            .checked_shl(qubits)
            .ok_or_else(|| Error::InvalidScenario("qubit count overflows".into()))?;
        Self::new(ScenarioKind::BareQubits, m, m, 0)
    }

    pub fn with_shots(mut self, shots: u64) -> Self {
        self.shots = shots;
        self
    }

    pub fn kind(&self) -> ScenarioKind {
        self.kind
    }

    /// System (and outcome-subset) dimension M.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Rotated dimension N.
    pub fn n(&self) -> usize {
        self.n
    }

    /// 0 means exact probabilities.
    pub fn shots(&self) -> u64 {
        self.shots
    }
}

/// Per-outcome probabilities (or, from finite counts, frequencies) over the
/// fixed M-outcome subset. When M < N the values sum to less than one; the
/// missing weight sits in outcomes outside the subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeProbabilities {
    values: Vec<f64>,
    shots_used: u64,
}

impl OutcomeProbabilities {
    /// Validates: each value in [0, 1], sum ≤ 1 + 1e-10.
    pub fn from_values(values: Vec<f64>, shots_used: u64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDimension);
        }
        let mut sum = 0.0;
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidProbability { index, value });
            }
            sum += value;
        }
        if sum > 1.0 + 1e-10 {
            return Err(Error::InvalidProbability { index: values.len(), value: sum });
        }
        Ok(Self { values, shots_used })
    }

    /// Naive frequency view of finite counts, c/S per outcome (the biased
    /// plug-in; kept for contrast with the factorial-moment path).
    pub fn from_counts(counts: &[u64], shots: u64) -> Result<Self> {
        if shots == 0 {
            return Err(Error::InsufficientShots { needed: 1, got: 0 });
        }
        let values = counts.iter().map(|&c| c as f64 / shots as f64).collect();
        Self::from_values(values, shots)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    /// 0 when the values are analytic probabilities.
    pub fn shots_used(&self) -> u64 {
        self.shots_used
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Probability of landing outside the M-outcome subset.
    pub fn residual(&self) -> f64 {
        (1.0 - self.sum()).max(0.0)
    }
}

/// Exact Prob(k) = Σ_{m,n} ρ_{mn} U_{mk} U*_{nk} for the M outcomes of the
/// fixed subset: rows of `u` index the embedded support, columns the
/// measured directions, so any per-column phase of `u` (the QR-convention
/// ambiguity) cancels. Only the top-left M×M block of `u` enters.
pub fn outcome_probabilities(rho: &DensityMatrix, u: &UnitaryMatrix) -> Result<OutcomeProbabilities> {
    let m = rho.dim();
    let n = u.dim();
    if n < m {
        return Err(Error::EmbeddingTooSmall { dim: n, target: m });
    }
    let block = u.matrix().view((0, 0), (m, m));
    let rotated = block.adjoint() * rho.matrix() * block;
    let mut values = Vec::with_capacity(m);
    for k in 0..m {
        let v = rotated[(k, k)];
        if v.im.abs() > 1e-12 || v.re < -1e-12 {
            return Err(Error::InvalidProbability { index: k, value: v.re });
        }
        values.push(v.re.max(0.0));
    }
    OutcomeProbabilities::from_values(values, 0)
}

/// Multinomial draw: counts over the M outcomes plus a final residual
/// bucket; always sums to `shots`. Sampled outcome-by-outcome from
/// conditional binomials, so the result is deterministic given the rng.
pub fn sample_counts(
    probs: &OutcomeProbabilities,
    shots: u64,
    rng: &mut SeededRng,
) -> Result<Vec<u64>> {
    if shots == 0 {
        return Err(Error::InsufficientShots { needed: 1, got: 0 });
    }
    let m = probs.m();
    let mut counts = vec![0u64; m + 1];
    let mut remaining_shots = shots;
    let mut remaining_prob = 1.0f64;
    for k in 0..m {
        if remaining_shots == 0 {
            break;
        }
        let p = if remaining_prob > 0.0 {
            (probs.values[k] / remaining_prob).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let draw = Binomial::new(remaining_shots, p)
            .expect("probability in range by construction")
            .sample(rng);
        counts[k] = draw;
        remaining_shots -= draw;
        remaining_prob -= probs.values[k];
    }
    counts[m] = remaining_shots;
    Ok(counts)
}
