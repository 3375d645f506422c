//! Command-line runner: custom estimation runs, reference-figure
//! reproductions, and the statistical self-tests.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 a statistical
//! self-test rejected.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use tracemoments::error::{Error, Result};
use tracemoments::estimator::Variant;
use tracemoments::experiment::{
    reproduce_figure, run_csv, run_experiment, run_json, save_run, ExperimentConfig, Figure,
    OutputFormat, RunSummary,
};
use tracemoments::haar::{
    invariance_test_with, SamplerKind, DEFAULT_Z_THRESHOLD,
};
use tracemoments::moments::MomentEstimates;
use tracemoments::oracle::{
    gaussian_moment_mc, haar_moment_mc, isserlis_average, pairing_contraction,
    shift_operator_value,
};
use tracemoments::rng::{SeededRng, StreamKind};
use tracemoments::state::{DensityMatrix, StateEnsembleSpec};
use tracemoments::{stats, CorrectionFactors, MeasurementScenario};

#[derive(Parser)]
#[command(
    name = "tracemoments",
    version,
    about = "Estimate the trace powers Tr ρⁿ (n = 2, 3, 4) from randomized single-copy measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a custom estimation experiment
    Estimate(EstimateArgs),
    /// Re-run a reference experiment (fig1..fig5) and write its plot data
    Reproduce(ReproduceArgs),
    /// Certify the unitary sampler against the Haar predictions
    HaarTest(HaarTestArgs),
    /// Run the independent verification battery for the formulas
    OracleSuite(OracleArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// TOML file with the run configuration; other flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// System size in qubits: M = 2^Q (and N = 2^Q without --ancillas)
    #[arg(long, conflicts_with = "dim")]
    qubits: Option<u32>,
    /// System dimension M for the photon-mode scenario
    #[arg(long)]
    dim: Option<usize>,
    /// Rotated dimension N ≥ M for the photon-mode scenario
    #[arg(long, requires = "dim")]
    embed: Option<usize>,
    /// Ancilla qubits: N = 2^(Q+A)
    #[arg(long, requires = "qubits")]
    ancillas: Option<u32>,
    /// Random unitaries per trial
    #[arg(long)]
    n_rand: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Shots per unitary; 0 = exact probabilities
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Estimator variant (repeatable): bar-exact, tilde-exact,
    /// bar-gaussian, tilde-gaussian
    #[arg(long = "variant")]
    variants: Vec<String>,
    /// Pool all M outcomes before inversion (the default)
    #[arg(long, conflicts_with = "single_k")]
    pool_k: bool,
    /// Invert outcome 0 only
    #[arg(long)]
    single_k: bool,
    /// Input state: pure-random, maximally-mixed, random-diagonal, or a
    /// path to a state file
    #[arg(long)]
    state: Option<String>,
    /// Weight exponent for random-diagonal states
    #[arg(long)]
    exponent: Option<f64>,
    /// Redraw the input state every trial
    #[arg(long)]
    fresh_state: bool,
    /// Write results here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv (default) or json
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// One of fig1..fig5
    fig: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the data files
    #[arg(long, default_value = "figures")]
    out: PathBuf,
}

#[derive(Args)]
struct HaarTestArgs {
    /// Unitary dimension N to certify
    #[arg(long, default_value_t = 4)]
    embed: usize,
    /// Unitaries to sample
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Source to certify: haar, or miscalibrated (a deliberately broken
    /// sampler for exercising the rejection path)
    #[arg(long, default_value = "haar")]
    sampler: String,
}

#[derive(Args)]
struct OracleArgs {
    /// Monte Carlo samples per check
    #[arg(long, default_value_t = 20_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Estimate(args) => estimate(args),
        Command::Reproduce(args) => reproduce(args),
        Command::HaarTest(args) => haar_test(args),
        Command::OracleSuite(args) => oracle_suite(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn parse_state_spec(value: &str, exponent: Option<f64>) -> Result<StateEnsembleSpec> {
    match value {
        "pure-random" => Ok(StateEnsembleSpec::PureRandom),
        "maximally-mixed" => Ok(StateEnsembleSpec::MaximallyMixed),
        "random-diagonal" => {
            Ok(StateEnsembleSpec::RandomDiagonal { exponent: exponent.unwrap_or(2.0) })
        }
        path if path.ends_with(".json") => {
            Ok(StateEnsembleSpec::Explicit { path: PathBuf::from(path) })
        }
        other => Err(Error::InvalidConfig(format!(
            "unknown state {other:?}; expected pure-random, maximally-mixed, random-diagonal, or a .json state file"
        ))),
    }
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

fn default_config() -> Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        scenario: MeasurementScenario::bare_qubits(2)?,
        state_spec: StateEnsembleSpec::PureRandom,
        n_rand: 100,
        trials: 1,
        pool_over_k: true,
        variants: vec![Variant::BarExact],
        seed: 0,
        fresh_state_per_trial: false,
        output: None,
        format: OutputFormat::Csv,
    })
}

fn build_config(args: &EstimateArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => default_config()?,
    };
    // Geometry flags replace the scenario wholesale; shots can be retuned
    // on any scenario.
    if args.qubits.is_some() || args.dim.is_some() {
        cfg.scenario = match (args.qubits, args.dim) {
            (Some(q), None) => match args.ancillas {
                Some(a) => MeasurementScenario::qubits_with_ancilla(q, a)?,
                None => MeasurementScenario::bare_qubits(q)?,
            },
            (None, Some(m)) => MeasurementScenario::photon_modes(m, args.embed.unwrap_or(m))?,
            _ => unreachable!("clap enforces the conflict"),
        };
    } else if args.embed.is_some() || args.ancillas.is_some() {
        return Err(Error::InvalidConfig(
            "--embed needs --dim, --ancillas needs --qubits".into(),
        ));
    }
    if let Some(shots) = args.shots {
        cfg.scenario = cfg.scenario.with_shots(shots);
    }
    if let Some(state) = &args.state {
        cfg.state_spec = parse_state_spec(state, args.exponent)?;
    } else if let Some(exponent) = args.exponent {
        if let StateEnsembleSpec::RandomDiagonal { .. } = cfg.state_spec {
            cfg.state_spec = StateEnsembleSpec::RandomDiagonal { exponent };
        } else {
            return Err(Error::InvalidConfig(
                "--exponent applies to random-diagonal states only".into(),
            ));
        }
    }
    if let Some(n_rand) = args.n_rand {
        cfg.n_rand = n_rand;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if !args.variants.is_empty() {
        cfg.variants =
            args.variants.iter().map(|v| Variant::from_str(v)).collect::<Result<Vec<_>>>()?;
    }
    if args.single_k {
        cfg.pool_over_k = false;
    } else if args.pool_k {
        cfg.pool_over_k = true;
    }
    if args.fresh_state {
        cfg.fresh_state_per_trial = true;
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    if let Some(format) = &args.format {
        cfg.format = OutputFormat::from_str(format)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(summary: &RunSummary) {
    if let Some(tp) = summary.true_p {
        println!("true:         p2={:.6} p3={:.6} p4={:.6}", tp[0], tp[1], tp[2]);
    }
    for a in &summary.aggregates {
        println!(
            "{:<14} mean p2={:.6} p3={:.6} p4={:.6} | std p2={:.6} p3={:.6} p4={:.6}",
            a.variant, a.mean_p[0], a.mean_p[1], a.mean_p[2], a.std_p[0], a.std_p[1], a.std_p[2]
        );
        println!(
            "{:<14} pooled p2={:.6}±{:.6} p3={:.6}±{:.6} p4={:.6}±{:.6} (N used {:.3})",
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
    println!("({} trials × {} unitaries in {:.2}s)", summary.config.trials, summary.config.n_rand, summary.elapsed_secs);
}

fn estimate(args: EstimateArgs) -> Result<i32> {
    let cfg = build_config(&args)?;
    let summary = run_experiment(&cfg)?;
    match &cfg.output {
        Some(path) => {
            save_run(&summary, path, cfg.format)?;
            let mut written = vec![path.clone()];
            if cfg.format == OutputFormat::Csv {
                let mirror = path.with_extension("json");
                save_run(&summary, &mirror, OutputFormat::Json)?;
                written.push(mirror);
            }
            print_summary(&summary);
            for p in written {
                println!("wrote {}", p.display());
            }
        }
        None => match cfg.format {
            OutputFormat::Csv => print!("{}", run_csv(&summary)),
            OutputFormat::Json => print!("{}", run_json(&summary)?),
        },
    }
    Ok(0)
}

fn reproduce(args: ReproduceArgs) -> Result<i32> {
    let figure = Figure::from_str(&args.fig)?;
    let repro = reproduce_figure(figure, args.seed, &args.out)?;
    for file in &repro.files {
        println!("wrote {}", file.display());
    }
    Ok(0)
}

fn haar_test(args: HaarTestArgs) -> Result<i32> {
    let kind = match args.sampler.as_str() {
        "haar" => SamplerKind::Haar,
        "miscalibrated" => SamplerKind::UniformEntries,
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown sampler {other:?}; expected haar or miscalibrated"
            )))
        }
    };
    let mut rng = SeededRng::for_task(args.seed, StreamKind::Check, 1, 0);
    let report =
        invariance_test_with(kind, args.embed, args.samples, DEFAULT_Z_THRESHOLD, &mut rng)?;
    println!(
        "moment certification: N={} over {} unitaries, threshold z < {}",
        report.dim, report.samples, report.threshold
    );
    for n in 1..=4 {
        println!(
            "  |U1k|^{:<2} pairwise z = {:>6.2}   vs-theory z = {:>6.2}",
            2 * n,
            report.max_pairwise_z[n - 1],
            report.max_theory_z[n - 1]
        );
    }

    // Distribution check on the first entry: F(p) = 1 − (1−p)^(N−1).
    let ks_n = args.samples.min(20_000) as usize;
    let mut rng = SeededRng::for_task(args.seed, StreamKind::Check, 2, 0);
    let samples: Vec<f64> = (0..ks_n)
        .map(|_| kind.sample(args.embed, &mut rng).map(|u| u.entry(0, 0).norm_sqr()))
        .collect::<Result<_>>()?;
    let d = stats::ks_statistic(&samples, |p| {
        1.0 - (1.0 - p).max(0.0).powi(args.embed as i32 - 1)
    });
    let crit = stats::ks_critical_1pct(ks_n);
    let ks_ok = d < crit;
    println!("|U11|² distribution: KS D = {d:.5}, 1% critical {crit:.5} over {ks_n} samples");

    if report.passed && ks_ok {
        println!("sampler accepted");
        Ok(0)
    } else {
        println!("sampler REJECTED (worst moment z = {:.2}, KS {})", report.worst_z(), if ks_ok { "ok" } else { "failed" });
        Ok(2)
    }
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn report(&mut self, name: &str, ok: bool, detail: String) {
        println!("{}  {name}: {detail}", if ok { "ok  " } else { "FAIL" });
        if !ok {
            self.failures += 1;
        }
    }
}

fn oracle_suite(args: OracleArgs) -> Result<i32> {
    let mut suite = Suite { failures: 0 };
    let samples = args.samples.max(1_000);

    // Isserlis pairing sums against raw Gaussian Monte Carlo.
    let patterns: [(&[(usize, usize)], &[(usize, usize)]); 3] = [
        (&[(0, 0), (0, 0)], &[(0, 0), (0, 0)]),
        (&[(0, 0), (1, 1)], &[(0, 0), (1, 1)]),
        (&[(0, 0), (0, 1), (1, 0)], &[(0, 0), (0, 1), (1, 0)]),
    ];
    let mut worst = 0.0f64;
    for (i, (v, vstar)) in patterns.iter().enumerate() {
        let exact = isserlis_average(v, vstar, 2)?;
        let mut rng = SeededRng::for_task(args.seed, StreamKind::Check, 10 + i as u64, 0);
        let (mc, se) = gaussian_moment_mc(v, vstar, 2, samples, &mut rng)?;
        worst = worst.max(stats::z_score(mc - exact, se));
    }
    suite.report(
        "isserlis vs gaussian mc",
        worst <= 4.0,
        format!("{} patterns, worst z = {worst:.2}", patterns.len()),
    );

    // Haar outcome moments against the pairing-sum numerators / Dₙ.  The
    // maximally mixed state has constant outcome probabilities, which
    // collapses the Monte Carlo standard error; such cells are held to
    // machine accuracy instead of a z test.
    let mut worst = 0.0f64;
    let mut cells = 0;
    let mut all_ok = true;
    for (di, &dim) in [2usize, 4, 8].iter().enumerate() {
        let mut srng = SeededRng::for_task(args.seed, StreamKind::State, di as u64, 0);
        let states = [
            DensityMatrix::pure_random(dim, &mut srng)?,
            DensityMatrix::maximally_mixed(dim)?,
            DensityMatrix::random_diagonal(dim, 2.0, &mut srng)?,
        ];
        let factors = CorrectionFactors::for_dim(dim)?;
        for (si, rho) in states.iter().enumerate() {
            for order in 2..=4usize {
                let exact = pairing_contraction(rho, order)? / factors.d(order);
                let mut rng = SeededRng::for_task(
                    args.seed,
                    StreamKind::Check,
                    100 + (di * 16 + si * 4 + order) as u64,
                    0,
                );
                let (mc, se) = haar_moment_mc(rho, dim, order, samples, &mut rng)?;
                let diff = mc - exact;
                if diff.abs() > 1e-12 {
                    let z = stats::z_score(diff, se);
                    worst = worst.max(z);
                    all_ok &= z <= 4.0;
                }
                cells += 1;
            }
        }
    }
    suite.report(
        "haar moments vs exact formulas",
        all_ok,
        format!("{cells} cells, worst z = {worst:.2}"),
    );

    // Forward moments → inversion round trip.
    let mut worst = 0.0f64;
    for &dim in &[4usize, 32] {
        let mut rng = SeededRng::for_task(args.seed, StreamKind::State, 50 + dim as u64, 0);
        for _ in 0..20 {
            let rho = DensityMatrix::random_diagonal(dim, 2.0, &mut rng)?;
            let tp = rho.trace_powers(4)?;
            let p = [tp[0], tp[1], tp[2]];
            let forward =
                tracemoments::estimator::forward_moments(p, dim as f64, true)?;
            let report = tracemoments::estimator::invert_bar(
                &MomentEstimates::from_values(forward.to_vec(), 1000),
                dim,
            )?;
            for slot in 0..3 {
                worst = worst.max((report.p_hat[slot] - p[slot]).abs());
            }
        }
    }
    suite.report(
        "inversion round trip",
        worst <= 1e-10,
        format!("worst |p̂ − p| = {worst:.2e}"),
    );

    // Shift operator on identical copies reduces to trace powers.
    let mut rng = SeededRng::for_task(args.seed, StreamKind::State, 90, 0);
    let rho = DensityMatrix::random_diagonal(4, 2.0, &mut rng)?;
    let tp = rho.trace_powers(4)?;
    let mut worst = 0.0f64;
    for n in 2..=4usize {
        let copies = vec![rho.clone(); n];
        worst = worst.max((shift_operator_value(&copies)? - tp[n - 2]).abs());
    }
    suite.report(
        "shift operator vs trace powers",
        worst <= 1e-12,
        format!("worst deviation = {worst:.2e}"),
    );

    if suite.failures == 0 {
        println!("oracle suite passed");
        Ok(0)
    } else {
        println!("oracle suite FAILED ({} checks)", suite.failures);
        Ok(2)
    }
}
