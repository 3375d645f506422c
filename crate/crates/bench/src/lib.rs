//! Shared fixtures for the criterion benches.

use tracemoments::estimator::Variant;
use tracemoments::experiment::{ExperimentConfig, OutputFormat};
use tracemoments::rng::{SeededRng, StreamKind};
use tracemoments::state::StateEnsembleSpec;
use tracemoments::{DensityMatrix, MeasurementScenario, Result};

/// A reproducible mixed state of the given dimension.
pub fn bench_state(dim: usize) -> Result<DensityMatrix> {
    let mut rng = SeededRng::for_task(0, StreamKind::State, dim as u64, 0);
    DensityMatrix::random_diagonal(dim, 2.0, &mut rng)
}

/// A two-qubit exact-probability run with both inversion variants.
pub fn bench_config(n_rand: u64) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        scenario: MeasurementScenario::bare_qubits(2)?,
        state_spec: StateEnsembleSpec::RandomDiagonal { exponent: 2.0 },
        n_rand,
        trials: 1,
        pool_over_k: true,
        variants: vec![Variant::BarExact, Variant::TildeExact],
        seed: 0,
        fresh_state_per_trial: false,
        output: None,
        format: OutputFormat::Csv,
    })
}
