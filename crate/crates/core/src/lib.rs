//! Estimation of the density-matrix trace powers Tr ρⁿ (n = 2, 3, 4) from
//! randomized measurements on single copies of a quantum state.
//!
//! A random measurement applies a Haar-random unitary to the (embedded) state
//! and reads out a projective measurement in a fixed basis. Ensemble moments
//! of the outcome probabilities, ⟨Prob(k)ⁿ⟩, are polynomial in the trace
//! powers pₙ = Tr ρⁿ and can be inverted to estimate them — no state
//! reconstruction, no joint measurements on multiple copies.
//!
//! The crate provides:
//!
//! * [`haar`] — Haar-distributed unitary sampling (Ginibre + QR with the
//!   phase correction) and the statistical certification of the ensemble;
//! * [`state`] — density matrices, test ensembles, embeddings, and exact
//!   trace powers as ground truth;
//! * [`measure`] — simulated random measurements, exact or with finite shots;
//! * [`moments`] — mergeable accumulators for the per-outcome moments Pₙ(k);
//! * [`estimator`] — moment inversion with exact finite-N correction factors,
//!   in known-dimension ("bar") and estimated-dimension ("tilde") variants,
//!   plus the predicted statistical errors;
//! * [`oracle`] — independent brute-force verification paths (Isserlis
//!   pairing sums, Monte Carlo moments, shift-operator values);
//! * [`experiment`] — trial orchestration, figure-style reproductions, and
//!   result serialization.

pub mod error;
pub mod estimator;
pub mod experiment;
pub mod haar;
pub mod measure;
pub mod moments;
pub mod oracle;
pub mod rng;
pub mod state;
pub mod stats;

pub use error::{Error, Result};
pub use estimator::{CorrectionFactors, EstimateReport, Variant};
pub use experiment::{ExperimentConfig, RunSummary, TrialResult};
pub use haar::UnitaryMatrix;
pub use measure::{MeasurementScenario, OutcomeProbabilities, ScenarioKind};
pub use moments::{MomentAccumulator, MomentEstimates, MomentTable};
pub use rng::SeededRng;
pub use state::{DensityMatrix, StateEnsembleSpec};

/// Highest trace power with inversion formulas.
pub const MAX_INVERTIBLE_ORDER: usize = 4;
