//! Run orchestration: trial loops over random unitaries, estimator
//! application, aggregation over trials, figure-style reproductions, and
//! result persistence.
//!
//! Every random draw comes from a stream addressed by (seed, purpose, trial,
//! index), so runs are deterministic regardless of thread scheduling, and
//! trial-level parallelism reproduces the sequential results exactly.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::{invert, EstimateReport, Variant};
use crate::haar::sample_haar_unitary;
use crate::measure::{outcome_probabilities, sample_counts, MeasurementScenario};
use crate::moments::MomentAccumulator;
use crate::oracle::shift_operator_value;
use crate::rng::{SeededRng, StreamKind};
use crate::state::{DensityMatrix, StateEnsembleSpec};
use crate::stats;

/// On-disk format for run results.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidConfig(format!(
                "unknown output format {other:?}; expected csv or json"
            ))),
        }
    }
}

fn default_trials() -> u64 {
    1
}

fn default_pool() -> bool {
    true
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::BarExact]
}

/// Full description of a run. The shot budget lives inside the scenario;
/// everything else that affects the numbers is here, so (config, seed)
/// determines the results bit for bit.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: MeasurementScenario,
    pub state_spec: StateEnsembleSpec,
    /// Unitaries averaged per trial.
    pub n_rand: u64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    /// Pool the M outcomes before inverting; otherwise invert outcome 0 only.
    #[serde(default = "default_pool")]
    pub pool_over_k: bool,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub seed: u64,
    /// Redraw the input state every trial (scatter experiments) instead of
    /// fixing one draw for the whole run.
    #[serde(default)]
    pub fresh_state_per_trial: bool,
    /// Where to persist results; callers decide when to write.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.state_spec.validate()?;
        if self.n_rand < 2 {
            return Err(Error::InvalidConfig(format!(
                "n-rand must be at least 2 to form sample variances, got {}",
                self.n_rand
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::InvalidConfig("at least one estimator variant is required".into()));
        }
        let shots = self.scenario.shots();
        if shots != 0 && shots < 4 {
            return Err(Error::InvalidConfig(format!(
                "finite-shot mode needs at least 4 shots for fourth factorial moments, got {shots}"
            )));
        }
        if self.trials > (1 << 28) || self.n_rand > (1 << 28) {
            return Err(Error::InvalidConfig(
                "trials and n-rand are limited to 2^28 by the rng stream layout".into(),
            ));
        }
        Ok(())
    }

    /// Short digest of the scientific content (everything except where the
    /// results go), so records from separate runs can be pooled safely.
    pub fn config_hash(&self) -> String {
        #[derive(Serialize)]
        struct Scientific<'a> {
            scenario: &'a MeasurementScenario,
            state_spec: &'a StateEnsembleSpec,
            n_rand: u64,
            trials: u64,
            pool_over_k: bool,
            variants: &'a [Variant],
            seed: u64,
            fresh_state_per_trial: bool,
        }
        let bytes = serde_json::to_vec(&Scientific {
            scenario: &self.scenario,
            state_spec: &self.state_spec,
            n_rand: self.n_rand,
            trials: self.trials,
            pool_over_k: self.pool_over_k,
            variants: &self.variants,
            seed: self.seed,
            fresh_state_per_trial: self.fresh_state_per_trial,
        })
        .expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Estimates from one trial; `reports` is aligned with the configured
/// variant list.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: u64,
    /// Exact (p₂, p₃, p₄) of this trial's target state.
    pub true_p: [f64; 3],
    pub reports: Vec<EstimateReport>,
}

/// Mean and spread of the per-trial estimates for one variant, plus the
/// estimate from pooling every trial's raw moments into a single inversion.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VariantAggregate {
    pub variant: Variant,
    pub mean_p: [f64; 3],
    pub std_p: [f64; 3],
    pub pooled: EstimateReport,
}

/// Results of a full run. Serialization omits the wall-clock time, so equal
/// (config, seed) produce byte-identical serialized summaries.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub config: ExperimentConfig,
    /// Ground truth when all trials share one target state; None when states
    /// are redrawn per trial (then see the per-trial values).
    pub true_p: Option<[f64; 3]>,
    pub trials: Vec<TrialResult>,
    pub aggregates: Vec<VariantAggregate>,
    #[serde(skip)]
    pub elapsed_secs: f64,
}

impl RunSummary {
    pub fn aggregate(&self, variant: Variant) -> Option<&VariantAggregate> {
        self.aggregates.iter().find(|a| a.variant == variant)
    }

    fn variant_index(&self, variant: Variant) -> Option<usize> {
        self.config.variants.iter().position(|&v| v == variant)
    }

    /// Per-trial estimates p̂ₙ of one variant (n = 2, 3, 4 via `slot` 0..3).
    pub fn trial_estimates(&self, variant: Variant, slot: usize) -> Vec<f64> {
        match self.variant_index(variant) {
            Some(vi) => self.trials.iter().map(|t| t.reports[vi].p_hat[slot]).collect(),
            None => Vec::new(),
        }
    }
}

/// The state the estimators converge on: the single drawn state, or the
/// component mean for a cycling source.
fn target_state(states: &[DensityMatrix]) -> Result<DensityMatrix> {
    if states.len() == 1 {
        Ok(states[0].clone())
    } else {
        DensityMatrix::mean_state(states)
    }
}

fn run_trial(
    config: &ExperimentConfig,
    trial: u64,
    fixed: Option<&[DensityMatrix]>,
) -> Result<(TrialResult, MomentAccumulator)> {
    let m = config.scenario.m();
    let n_dim = config.scenario.n();
    let shots = config.scenario.shots();
    let drawn;
    let states: &[DensityMatrix] = match fixed {
        Some(s) => s,
        None => {
            let mut rng = SeededRng::for_task(config.seed, StreamKind::State, trial, 0);
            drawn = config.state_spec.realize(m, &mut rng)?;
            &drawn
        }
    };
    // A source with several components emits each copy in one of them; with
    // the component chosen independently per copy, the emitted ensemble is
    // exactly the mean state, so both the exact and the finite-shot path
    // measure ρ̄. (Deterministic round-robin emission would instead bias the
    // factorial moments by O((pⱼ − pⱼ')²/shots), since those assume
    // exchangeable copies.)
    let target = target_state(states)?;
    let tp = target.trace_powers(4)?;

    let mut acc = MomentAccumulator::new(m);
    for index in 0..config.n_rand {
        let mut urng = SeededRng::for_task(config.seed, StreamKind::Unitary, trial, index);
        let u = sample_haar_unitary(n_dim, &mut urng)?;
        let probs = outcome_probabilities(&target, &u)?;
        if shots == 0 {
            acc.absorb_exact(&probs)?;
        } else {
            let mut srng = SeededRng::for_task(config.seed, StreamKind::Shots, trial, index);
            acc.absorb_counts(&sample_counts(&probs, shots, &mut srng)?, shots)?;
        }
    }

    let table = acc.moment_table()?;
    let moments = if config.pool_over_k { &table.pooled } else { &table.per_k[0] };
    let mut reports = Vec::with_capacity(config.variants.len());
    for &variant in &config.variants {
        reports.push(invert(moments, variant, variant.knows_dim().then_some(n_dim))?);
    }
    Ok((TrialResult { trial, true_p: [tp[0], tp[1], tp[2]], reports }, acc))
}

/// Runs the configured trials in parallel and aggregates: per-variant mean
/// and standard deviation over trials, plus a pooled-all-data inversion from
/// the merged accumulators. Deterministic given (config, seed).
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let start = Instant::now();
    let fixed_states = if config.fresh_state_per_trial {
        None
    } else {
        let mut rng = SeededRng::for_task(config.seed, StreamKind::State, 0, 0);
        Some(config.state_spec.realize(config.scenario.m(), &mut rng)?)
    };

    let per_trial: Result<Vec<_>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(config, trial, fixed_states.as_deref()))
        .collect();
    let per_trial = per_trial?;

    let mut trials = Vec::with_capacity(per_trial.len());
    let mut merged = MomentAccumulator::new(config.scenario.m());
    for (t, acc) in per_trial {
        merged.merge(&acc)?;
        trials.push(t);
    }

    let table = merged.moment_table()?;
    let pooled_moments = if config.pool_over_k { &table.pooled } else { &table.per_k[0] };
    let n_dim = config.scenario.n();
    let mut aggregates = Vec::with_capacity(config.variants.len());
    for (vi, &variant) in config.variants.iter().enumerate() {
        let pooled = invert(pooled_moments, variant, variant.knows_dim().then_some(n_dim))?;
        let mut mean_p = [0.0; 3];
        let mut std_p = [0.0; 3];
        for slot in 0..3 {
            let xs: Vec<f64> = trials.iter().map(|t| t.reports[vi].p_hat[slot]).collect();
            mean_p[slot] = stats::mean(&xs);
            std_p[slot] = stats::sample_std(&xs);
        }
        aggregates.push(VariantAggregate { variant, mean_p, std_p, pooled });
    }

    let true_p = match &fixed_states {
        Some(states) => {
            let tp = target_state(states)?.trace_powers(4)?;
            Some([tp[0], tp[1], tp[2]])
        }
        None => None,
    };

    Ok(RunSummary {
        config_hash: config.config_hash(),
        config: config.clone(),
        true_p,
        trials,
        aggregates,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Estimation against a source that cycles through fixed component states,
/// contrasted with what a joint shift-operator measurement on consecutive
/// copies would yield.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonidenticalReport {
    /// Trace powers of the component mean ρ̄ — what the estimators target.
    pub target_p: [f64; 3],
    /// Tr(ρ₁ρ₂···ρₙ) for n = 2, 3, 4, averaged over the cyclic starting
    /// offset: the n-copy shift-operator value on the cycling stream.
    pub shift_value: [f64; 3],
    pub summary: RunSummary,
}

/// Runs the estimation as usual (the source is absorbed into its mean) and
/// reports the targets of both methods side by side.
pub fn run_nonidentical_source(config: &ExperimentConfig) -> Result<NonidenticalReport> {
    if config.fresh_state_per_trial {
        return Err(Error::InvalidConfig(
            "source-contrast runs need a fixed component list, not fresh states per trial".into(),
        ));
    }
    let summary = run_experiment(config)?;
    // Same stream as the fixed-state path of run_experiment.
    let mut rng = SeededRng::for_task(config.seed, StreamKind::State, 0, 0);
    let states = config.state_spec.realize(config.scenario.m(), &mut rng)?;
    let tp = target_state(&states)?.trace_powers(4)?;
    let j = states.len();
    let mut shift_value = [0.0; 3];
    for n in 2..=4usize {
        let mut acc = 0.0;
        for start in 0..j {
            let window: Vec<DensityMatrix> =
                (0..n).map(|i| states[(start + i) % j].clone()).collect();
            acc += shift_operator_value(&window)?;
        }
        shift_value[n - 2] = acc / j as f64;
    }
    Ok(NonidenticalReport { target_p: [tp[0], tp[1], tp[2]], shift_value, summary })
}

// ---------------------------------------------------------------------------
// Persistence.

/// Run results as CSV: a commented summary block, a header, then one row per
/// (trial, variant).
pub fn run_csv(summary: &RunSummary) -> String {
    use std::fmt::Write as _;
    let cfg = &summary.config;
    let mut s = String::new();
    let _ = writeln!(s, "# trace-power estimation run");
    let _ = writeln!(s, "# config-hash: {}", summary.config_hash);
    let _ = writeln!(
        s,
        "# scenario: {} M={} N={} shots={}",
        cfg.scenario.kind(),
        cfg.scenario.m(),
        cfg.scenario.n(),
        cfg.scenario.shots()
    );
    let _ = writeln!(
        s,
        "# seed: {} n-rand: {} trials: {} pooled-outcomes: {} fresh-state-per-trial: {}",
        cfg.seed, cfg.n_rand, cfg.trials, cfg.pool_over_k, cfg.fresh_state_per_trial
    );
    let _ = writeln!(
        s,
        "# state: {}",
        serde_json::to_string(&cfg.state_spec).expect("state spec serializes")
    );
    if let Some(tp) = summary.true_p {
        let _ = writeln!(s, "# true: p2={} p3={} p4={}", tp[0], tp[1], tp[2]);
    }
    for a in &summary.aggregates {
        let _ = writeln!(
            s,
            "# {}: mean p2={} p3={} p4={} | std p2={} p3={} p4={}",
            a.variant, a.mean_p[0], a.mean_p[1], a.mean_p[2], a.std_p[0], a.std_p[1], a.std_p[2]
        );
        let _ = writeln!(
            s,
            "# {} pooled: p2={}±{} p3={}±{} p4={}±{} N-used={}",
            a.variant,
            a.pooled.p_hat[0],
            a.pooled.empirical_err[0],
            a.pooled.p_hat[1],
            a.pooled.empirical_err[1],
            a.pooled.p_hat[2],
            a.pooled.empirical_err[2],
            a.pooled.n_used
        );
    }
    let _ = writeln!(s, "trial,variant,p2_hat,p3_hat,p4_hat,N_used");
    for t in &summary.trials {
        for r in &t.reports {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                t.trial, r.variant, r.p_hat[0], r.p_hat[1], r.p_hat[2], r.n_used
            );
        }
    }
    s
}

/// Run results as pretty-printed JSON, mirroring the CSV contents.
pub fn run_json(summary: &RunSummary) -> Result<String> {
    Ok(serde_json::to_string_pretty(summary)? + "\n")
}

/// Writes the summary to `path` in the given format, creating parent
/// directories as needed.
pub fn save_run(summary: &RunSummary, path: &Path, format: OutputFormat) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let text = match format {
        OutputFormat::Csv => run_csv(summary),
        OutputFormat::Json => run_json(summary)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Figure-style reproductions.

/// The five reference experiments shipped with the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    /// Spread of single-outcome known-N estimates over 100 trials.
    Fig1,
    /// Same raw data through the estimated-N variant: tighter p̃₂.
    Fig2,
    /// Estimated-vs-actual scatter for 200 random two-qubit states.
    Fig3,
    /// The same scatter for five-qubit states.
    Fig4,
    /// Spread of p̃ₙ versus qubit count at fixed n_rand.
    Fig5,
}

impl Figure {
    pub const ALL: [Figure; 5] =
        [Figure::Fig1, Figure::Fig2, Figure::Fig3, Figure::Fig4, Figure::Fig5];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Figure::Fig1),
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            "fig5" => Ok(Figure::Fig5),
            other => Err(Error::InvalidConfig(format!(
                "unknown figure {other:?}; expected fig1..fig5"
            ))),
        }
    }
}

/// fig1/fig2 protocol: one fixed pure two-qubit state, 100 trials of
/// n_rand = 100 unitaries each, inverting outcome 0 only, with both the
/// known-N and estimated-N variants on the same raw data.
pub fn trial_spread_config(seed: u64) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        scenario: MeasurementScenario::bare_qubits(2)?,
        state_spec: StateEnsembleSpec::PureRandom,
        n_rand: 100,
        trials: 100,
        pool_over_k: false,
        variants: vec![Variant::BarExact, Variant::TildeExact],
        seed,
        fresh_state_per_trial: false,
        output: None,
        format: OutputFormat::Csv,
    })
}

/// fig3/fig4 protocol: 200 fresh random-diagonal states, 30 unitaries each,
/// pooled over all outcomes. fig3 uses (2 qubits, exponent 2); fig4
/// (5 qubits, exponent 8).
pub fn scatter_config(qubits: u32, exponent: f64, seed: u64) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        scenario: MeasurementScenario::bare_qubits(qubits)?,
        state_spec: StateEnsembleSpec::RandomDiagonal { exponent },
        n_rand: 30,
        trials: 200,
        pool_over_k: true,
        variants: vec![Variant::TildeExact, Variant::BarExact],
        seed,
        fresh_state_per_trial: true,
        output: None,
        format: OutputFormat::Csv,
    })
}

/// One point of the fig5 sweep: a fixed pure state on `qubits` qubits,
/// 200 trials of 30 unitaries, pooled outcomes, estimated-N variant.
pub fn qubit_spread_point_config(qubits: u32, seed: u64) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        scenario: MeasurementScenario::bare_qubits(qubits)?,
        state_spec: StateEnsembleSpec::PureRandom,
        n_rand: 30,
        trials: 200,
        pool_over_k: true,
        variants: vec![Variant::TildeExact],
        seed,
        fresh_state_per_trial: false,
        output: None,
        format: OutputFormat::Csv,
    })
}

/// Decouples the rng streams of the sweep points, which would otherwise
/// share (trial, index) coordinates across qubit counts.
pub fn qubit_spread_seed(seed: u64, qubits: u32) -> u64 {
    seed.wrapping_add(qubits as u64)
}

/// Standard deviation of the estimated-N estimates versus qubit count.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QubitSpreadSeries {
    pub qubits: Vec<u32>,
    /// `std_tilde[i][n-2]` is the spread of p̃ₙ at `qubits[i]`.
    pub std_tilde: Vec<[f64; 3]>,
}

/// Everything a reproduction produced: the runs behind it and the files
/// written (plot data, scatter SVG where applicable, JSON mirror).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FigureReproduction {
    pub figure: Figure,
    pub files: Vec<PathBuf>,
    pub runs: Vec<RunSummary>,
    /// Only for the qubit sweep.
    pub series: Option<QubitSpreadSeries>,
}

/// Reruns one reference experiment and writes its plot data under `out_dir`.
/// Deterministic: equal (figure, seed, out_dir) give byte-identical files.
pub fn reproduce_figure(figure: Figure, seed: u64, out_dir: &Path) -> Result<FigureReproduction> {
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut runs = Vec::new();
    let mut series = None;
    match figure {
        Figure::Fig1 | Figure::Fig2 => {
            let summary = run_experiment(&trial_spread_config(seed)?)?;
            let variant =
                if figure == Figure::Fig1 { Variant::BarExact } else { Variant::TildeExact };
            let path = out_dir.join(format!("{figure}-trials.csv"));
            write_text(&path, &trial_series_csv(&summary, variant)?)?;
            files.push(path);
            runs.push(summary);
        }
        Figure::Fig3 | Figure::Fig4 => {
            let (qubits, exponent) = if figure == Figure::Fig3 { (2, 2.0) } else { (5, 8.0) };
            let summary = run_experiment(&scatter_config(qubits, exponent, seed)?)?;
            let csv = out_dir.join(format!("{figure}-scatter.csv"));
            write_text(&csv, &scatter_csv(&summary, Variant::TildeExact)?)?;
            files.push(csv);
            let svg = out_dir.join(format!("{figure}-scatter.svg"));
            let title = format!("estimated vs actual trace powers, {qubits} qubits");
            write_text(&svg, &scatter_svg(&summary, Variant::TildeExact, &title)?)?;
            files.push(svg);
            runs.push(summary);
        }
        Figure::Fig5 => {
            let mut qubits = Vec::new();
            let mut std_tilde = Vec::new();
            for q in 1..=8u32 {
                let cfg = qubit_spread_point_config(q, qubit_spread_seed(seed, q))?;
                let summary = run_experiment(&cfg)?;
                let agg = summary
                    .aggregate(Variant::TildeExact)
                    .expect("sweep configs always include the estimated-N variant");
                qubits.push(q);
                std_tilde.push(agg.std_p);
                runs.push(summary);
            }
            let sweep = QubitSpreadSeries { qubits, std_tilde };
            let path = out_dir.join("fig5-spread.csv");
            write_text(&path, &spread_csv(&sweep))?;
            files.push(path);
            series = Some(sweep);
        }
    }
    // The mirror lists files by name only, so reproductions are
    // byte-identical wherever the output directory lives.
    let mirror = FigureReproduction {
        figure,
        files: files
            .iter()
            .map(|p| PathBuf::from(p.file_name().expect("output files have names")))
            .collect(),
        runs,
        series,
    };
    let json_path = out_dir.join(format!("{figure}-run.json"));
    write_text(&json_path, &(serde_json::to_string_pretty(&mirror)? + "\n"))?;
    files.push(json_path);
    Ok(FigureReproduction { files, ..mirror })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn require_variant(summary: &RunSummary, variant: Variant) -> Result<usize> {
    summary.config.variants.iter().position(|&v| v == variant).ok_or_else(|| {
        Error::InvalidConfig(format!("run does not include the {variant} variant"))
    })
}

/// Per-trial estimate distribution (fig1/fig2 style): one row per trial.
fn trial_series_csv(summary: &RunSummary, variant: Variant) -> Result<String> {
    use std::fmt::Write as _;
    let vi = require_variant(summary, variant)?;
    let agg = summary.aggregate(variant).expect("aggregate exists for configured variant");
    let mut s = String::new();
    let _ = writeln!(s, "# per-trial estimates, variant {variant}");
    let _ = writeln!(s, "# config-hash: {}", summary.config_hash);
    if let Some(tp) = summary.true_p {
        let _ = writeln!(s, "# true: p2={} p3={} p4={}", tp[0], tp[1], tp[2]);
    }
    let _ = writeln!(s, "# std: p2={} p3={} p4={}", agg.std_p[0], agg.std_p[1], agg.std_p[2]);
    let _ = writeln!(
        s,
        "# pooled: p2={}±{} p3={}±{} p4={}±{}",
        agg.pooled.p_hat[0],
        agg.pooled.empirical_err[0],
        agg.pooled.p_hat[1],
        agg.pooled.empirical_err[1],
        agg.pooled.p_hat[2],
        agg.pooled.empirical_err[2]
    );
    let _ = writeln!(s, "trial,p2_hat,p3_hat,p4_hat");
    for t in &summary.trials {
        let r = &t.reports[vi];
        let _ = writeln!(s, "{},{},{},{}", t.trial, r.p_hat[0], r.p_hat[1], r.p_hat[2]);
    }
    Ok(s)
}

/// Long-format scatter data (fig3/fig4 style): order, actual, estimated,
/// per-point error.
fn scatter_csv(summary: &RunSummary, variant: Variant) -> Result<String> {
    use std::fmt::Write as _;
    let vi = require_variant(summary, variant)?;
    let mut s = String::new();
    let _ = writeln!(s, "# estimated vs actual trace powers, variant {variant}");
    let _ = writeln!(s, "# config-hash: {}", summary.config_hash);
    let _ = writeln!(s, "order,actual,estimated,std_err");
    for t in &summary.trials {
        let r = &t.reports[vi];
        for (slot, order) in (2..=4).enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                order, t.true_p[slot], r.p_hat[slot], r.empirical_err[slot]
            );
        }
    }
    Ok(s)
}

/// Sweep series (fig5 style).
fn spread_csv(series: &QubitSpreadSeries) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(s, "# spread of estimated-N trace-power estimates over 200 trials");
    let _ = writeln!(s, "qubits,std_p2,std_p3,std_p4");
    for (q, std) in series.qubits.iter().zip(&series.std_tilde) {
        let _ = writeln!(s, "{},{},{},{}", q, std[0], std[1], std[2]);
    }
    s
}

/// Minimal self-contained scatter plot: one point per (trial, order), the
/// diagonal as the zero-error reference.
fn scatter_svg(summary: &RunSummary, variant: Variant, title: &str) -> Result<String> {
    use std::fmt::Write as _;
    let vi = require_variant(summary, variant)?;
    const LABELS: [&str; 3] = ["p2", "p3", "p4"];
    const COLORS: [&str; 3] = ["#1f6fb4", "#c23b22", "#2e8540"];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for t in &summary.trials {
        for slot in 0..3 {
            lo = lo.min(t.true_p[slot]).min(t.reports[vi].p_hat[slot]);
            hi = hi.max(t.true_p[slot]).max(t.reports[vi].p_hat[slot]);
        }
    }
    if !(hi > lo) {
        (lo, hi) = (0.0, 1.0);
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);

    const SIZE: f64 = 560.0;
    const MARGIN: f64 = 62.0;
    let span = SIZE - 2.0 * MARGIN;
    let x = |v: f64| MARGIN + (v - lo) / (hi - lo) * span;
    let y = |v: f64| SIZE - MARGIN - (v - lo) / (hi - lo) * span;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">"
    );
    let _ = writeln!(s, "<rect width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\"/>");
    // Gridlines and tick labels.
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let (px, py) = (x(v), y(v));
        let _ = writeln!(
            s,
            "<line x1=\"{px:.2}\" y1=\"{m}\" x2=\"{px:.2}\" y2=\"{b:.2}\" stroke=\"#ddd\"/>",
            m = MARGIN,
            b = SIZE - MARGIN
        );
        let _ = writeln!(
            s,
            "<line x1=\"{m}\" y1=\"{py:.2}\" x2=\"{r:.2}\" y2=\"{py:.2}\" stroke=\"#ddd\"/>",
            m = MARGIN,
            r = SIZE - MARGIN
        );
        let _ = writeln!(
            s,
            "<text x=\"{px:.2}\" y=\"{ty:.2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{v:.2}</text>",
            ty = SIZE - MARGIN + 18.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{tx:.2}\" y=\"{py:.2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\" dominant-baseline=\"middle\">{v:.2}</text>",
            tx = MARGIN - 8.0
        );
    }
    let _ = writeln!(
        s,
        "<rect x=\"{m}\" y=\"{m}\" width=\"{span:.2}\" height=\"{span:.2}\" fill=\"none\" stroke=\"#333\"/>",
        m = MARGIN
    );
    // Diagonal: estimated = actual.
    let _ = writeln!(
        s,
        "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y1:.2}\" stroke=\"#555\" stroke-dasharray=\"6,4\"/>",
        x0 = x(lo),
        y0 = y(lo),
        x1 = x(hi),
        y1 = y(hi)
    );
    for slot in 0..3 {
        for t in &summary.trials {
            let _ = writeln!(
                s,
                "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"3.2\" fill=\"{c}\" fill-opacity=\"0.55\"/>",
                cx = x(t.true_p[slot]),
                cy = y(t.reports[vi].p_hat[slot]),
                c = COLORS[slot]
            );
        }
    }
    for slot in 0..3 {
        let ly = MARGIN + 16.0 + 18.0 * slot as f64;
        let _ = writeln!(
            s,
            "<rect x=\"{lx}\" y=\"{ry:.2}\" width=\"12\" height=\"12\" fill=\"{c}\" fill-opacity=\"0.55\"/>",
            lx = MARGIN + 10.0,
            ry = ly - 10.0,
            c = COLORS[slot]
        );
        let _ = writeln!(
            s,
            "<text x=\"{tx}\" y=\"{ly:.2}\" font-family=\"sans-serif\" font-size=\"13\">{l}</text>",
            tx = MARGIN + 28.0,
            l = LABELS[slot]
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{cx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{title}</text>",
        cx = SIZE / 2.0,
        ty = MARGIN - 20.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{cx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">actual</text>",
        cx = SIZE / 2.0,
        ty = SIZE - 16.0
    );
    let _ = writeln!(
        s,
        "<text x=\"18\" y=\"{cy}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {cy})\">estimated</text>",
        cy = SIZE / 2.0
    );
    let _ = writeln!(s, "</svg>");
    Ok(s)
}
