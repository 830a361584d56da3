//! Command-line front end: simulate synthetic models, train the spectral
//! learner, query densities and predictions, run the benchmark grid and
//! verify the perturbation bounds.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical failure
//! (rank deficiency, unresolved approximation, degenerate state), 4 I/O.

mod bench;
mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::ConfigFile;
use nphmm::hmm::{synthetic_suite, HmmModel, SuiteKind};
use nphmm::kde::KernelKind;
use nphmm::spectral::{
    self, BandwidthConfig, Bandwidths, LearnConfig, ObservableRep, PredictMethod, TripleSet,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug)]
pub struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn new(message: impl Into<String>, code: u8) -> Self {
        CliError {
            message: message.into(),
            code,
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(message, 2)
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self::new(message, 3)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(message, 4)
    }
}

impl From<nphmm::Error> for CliError {
    fn from(e: nphmm::Error) -> Self {
        use nphmm::Error::*;
        let code = match &e {
            NonResolved { .. } | RankDeficient { .. } | DegenerateState { .. }
            | ZeroProbabilityHistory { .. } | DegenerateData | ZeroMatrix { .. }
            | ConstructionFailed { .. } => 3,
            Serialization(_) => 2,
            _ => 2,
        };
        CliError::new(e.to_string(), code)
    }
}

#[derive(Parser)]
#[command(
    name = "nphmm",
    about = "Spectral learning and inference for HMMs with smooth nonparametric emissions",
    version
)]
struct Cli {
    /// Flat key=value configuration file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    M4,
    M8,
}

impl From<SuiteArg> for SuiteKind {
    fn from(s: SuiteArg) -> SuiteKind {
        match s {
            SuiteArg::M4 => SuiteKind::M4,
            SuiteArg::M8 => SuiteKind::M8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Mean,
    Mode,
}

#[derive(Subcommand)]
enum Command {
    /// Sample observation sequences from a suite or serialized model.
    Simulate(SimulateArgs),
    /// Learn an observable representation from a sequence file.
    Train(TrainArgs),
    /// Print the joint density of a sequence and its stepwise conditionals.
    Density(DensityArgs),
    /// Predict the next observation for each history line in a file.
    Predict(PredictArgs),
    /// Sweep training-set sizes and seeds on a synthetic suite, writing a
    /// CSV of accuracy and timing columns.
    Benchmark(BenchmarkArgs),
    /// Run the randomized perturbation-bound suites and print reports.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Synthetic model family.
    #[arg(long, value_enum, conflicts_with = "model")]
    suite: Option<SuiteArg>,
    /// Serialized model file to sample from instead of a suite.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Seed for the suite's transition matrix (the data seed is --seed).
    #[arg(long)]
    model_seed: Option<u64>,
    #[arg(long)]
    seq_len: Option<usize>,
    #[arg(long)]
    n_seqs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Also serialize the generating model to this path.
    #[arg(long)]
    dump_model: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Sequence file; rows longer than 3 are cut into sliding-window triples.
    #[arg(long)]
    data: PathBuf,
    /// Number of hidden states.
    #[arg(long)]
    states: Option<usize>,
    /// Fixed bandwidths; all three must be given to skip cross-validation.
    #[arg(long)]
    h1: Option<f64>,
    #[arg(long)]
    h21: Option<f64>,
    #[arg(long)]
    h321: Option<f64>,
    /// Cross-validation folds used when bandwidths are not fixed.
    #[arg(long)]
    folds: Option<usize>,
    /// Cross-approximation tolerance for the pair density.
    #[arg(long)]
    tol: Option<f64>,
    /// Kernel: "gaussian" or "legendre:BETA".
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long)]
    model: PathBuf,
    /// Observations of the sequence, each in [0, 1].
    #[arg(required = true)]
    sequence: Vec<f64>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// File with one history per line.
    #[arg(long)]
    history: PathBuf,
    /// Point predictor: mean (default) or mode of the conditional.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long, value_enum)]
    suite: Option<SuiteArg>,
    /// Comma-separated training sizes (numbers of triples).
    #[arg(long)]
    n_grid: Option<String>,
    /// Number of seeds per training size.
    #[arg(long)]
    seeds: Option<u64>,
    /// Seed for the suite model itself.
    #[arg(long)]
    model_seed: Option<u64>,
    /// Test sequences evaluated per cell.
    #[arg(long)]
    n_test: Option<usize>,
    /// Fixed bandwidths (all three) instead of per-cell cross-validation.
    #[arg(long)]
    h1: Option<f64>,
    #[arg(long)]
    h21: Option<f64>,
    #[arg(long)]
    h321: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Randomized instances per bound.
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(cli);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args, &config),
        Command::Train(args) => cmd_train(args, &config),
        Command::Density(args) => cmd_density(args),
        Command::Predict(args) => cmd_predict(args, &config),
        Command::Benchmark(args) => bench::cmd_benchmark(args, &config),
        Command::Verify(args) => cmd_verify(args, &config),
    }
}

fn load_model(path: &Path) -> Result<HmmModel, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    HmmModel::from_json(&text).map_err(CliError::from)
}

fn load_rep(path: &Path) -> Result<ObservableRep, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    ObservableRep::from_json(&text).map_err(CliError::from)
}

fn cmd_simulate(args: SimulateArgs, config: &ConfigFile) -> Result<(), CliError> {
    let seq_len = config
        .merge(args.seq_len, "seq_len")?
        .ok_or_else(|| CliError::validation("--seq-len is required"))?;
    let n_seqs = config
        .merge(args.n_seqs, "n_seqs")?
        .ok_or_else(|| CliError::validation("--n-seqs is required"))?;
    let seed = config.merge(args.seed, "seed")?.unwrap_or(0);
    if seq_len == 0 {
        return Err(CliError::validation("--seq-len must be positive"));
    }
    if n_seqs == 0 {
        return Err(CliError::validation("--n-seqs must be positive"));
    }
    let model = match (&args.model, args.suite) {
        (Some(path), _) => load_model(path)?,
        (None, Some(suite)) => {
            let model_seed = config.merge(args.model_seed, "model_seed")?.unwrap_or(7);
            synthetic_suite(suite.into(), model_seed)?
        }
        (None, None) => {
            return Err(CliError::validation("either --suite or --model is required"))
        }
    };
    let sequences = model.sample(seq_len, n_seqs, seed)?;
    config::write_sequences(&args.out, &sequences)?;
    if let Some(dump) = &args.dump_model {
        std::fs::write(dump, model.to_json()?)
            .map_err(|e| CliError::io(format!("{}: {e}", dump.display())))?;
    }
    println!(
        "wrote {} sequences of length {} to {}",
        n_seqs,
        seq_len,
        args.out.display()
    );
    Ok(())
}

fn parse_kernel(text: &str) -> Result<KernelKind, CliError> {
    if text.eq_ignore_ascii_case("gaussian") {
        return Ok(KernelKind::Gaussian);
    }
    if let Some(beta) = text.strip_prefix("legendre:") {
        let beta: u32 = beta
            .parse()
            .map_err(|_| CliError::validation(format!("bad kernel order '{beta}'")))?;
        return Ok(KernelKind::LegendreOrder(beta));
    }
    Err(CliError::validation(format!(
        "unknown kernel '{text}' (expected 'gaussian' or 'legendre:BETA')"
    )))
}

fn cmd_train(args: TrainArgs, config: &ConfigFile) -> Result<(), CliError> {
    let states = config
        .merge(args.states, "states")?
        .ok_or_else(|| CliError::validation("--states is required"))?;
    if states == 0 {
        return Err(CliError::validation("--states must be positive"));
    }
    let kernel = match config.merge(args.kernel, "kernel")? {
        Some(text) => parse_kernel(&text)?,
        None => KernelKind::Gaussian,
    };
    let h1 = config.merge(args.h1, "h1")?;
    let h21 = config.merge(args.h21, "h21")?;
    let h321 = config.merge(args.h321, "h321")?;
    let bandwidths = match (h1, h21, h321) {
        (Some(h1), Some(h21), Some(h321)) => BandwidthConfig::Fixed(Bandwidths { h1, h21, h321 }),
        (None, None, None) => BandwidthConfig::CrossValidated {
            folds: config.merge(args.folds, "folds")?.unwrap_or(5),
        },
        _ => {
            return Err(CliError::validation(
                "fixed bandwidths need all of --h1, --h21, --h321",
            ))
        }
    };
    let cfg = LearnConfig {
        kernel,
        bandwidths,
        tol: config.merge(args.tol, "tol")?.unwrap_or(1e-10),
    };

    let sequences = config::parse_sequences(&args.data)?;
    let triples = TripleSet::from_sequences(&sequences)?;
    if triples.len() < states {
        return Err(CliError::validation(format!(
            "{} triples cannot identify {} states",
            triples.len(),
            states
        )));
    }
    let out = spectral::learn(&triples, states, &cfg)?;
    let shown: Vec<String> = out
        .singular_values
        .iter()
        .take(states)
        .map(|s| format!("{s:.6e}"))
        .collect();
    println!("triples: {}", triples.len());
    println!("pair-density singular values: {}", shown.join(" "));
    println!(
        "bandwidths: h1={} h21={} h321={}",
        out.bandwidths.h1, out.bandwidths.h21, out.bandwidths.h321
    );
    let text = out.rep.to_json()?;
    std::fs::write(&args.out, text)
        .map_err(|e| CliError::io(format!("{}: {e}", args.out.display())))?;
    println!("model written to {}", args.out.display());
    Ok(())
}

fn cmd_density(args: DensityArgs) -> Result<(), CliError> {
    for &x in &args.sequence {
        if !(0.0..=1.0).contains(&x) {
            return Err(CliError::validation(format!(
                "observation {x} outside [0, 1]"
            )));
        }
    }
    let rep = load_rep(&args.model)?;
    let joint = spectral::joint_density(&rep, &args.sequence)?;
    println!("joint {joint:.12e}");
    let mut state = spectral::init_state(&rep);
    for (i, &x) in args.sequence.iter().enumerate() {
        if i + 1 < args.sequence.len() {
            state = spectral::update_state(&rep, &state, x)?;
            let next = args.sequence[i + 1];
            let cond = spectral::conditional_density(&rep, &state, next)?;
            let given = if i == 0 {
                "x1".to_string()
            } else {
                format!("x1..x{}", i + 1)
            };
            println!("conditional x{} | {given}: {cond:.12e}", i + 2);
        }
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs, config: &ConfigFile) -> Result<(), CliError> {
    let method = match config.merge(
        args.method.map(|m| match m {
            MethodArg::Mean => "mean".to_string(),
            MethodArg::Mode => "mode".to_string(),
        }),
        "method",
    )? {
        None => PredictMethod::Mean,
        Some(s) if s.eq_ignore_ascii_case("mean") => PredictMethod::Mean,
        Some(s) if s.eq_ignore_ascii_case("mode") => PredictMethod::Mode,
        Some(s) => return Err(CliError::validation(format!("unknown method '{s}'"))),
    };
    let rep = load_rep(&args.model)?;
    let histories = config::parse_sequences(&args.history)?;
    for history in &histories {
        let prediction = spectral::predict_next(&rep, history, method)?;
        println!("{prediction}");
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs, config: &ConfigFile) -> Result<(), CliError> {
    let instances = config.merge(args.instances, "instances")?.unwrap_or(100);
    let seed = config.merge(args.seed, "seed")?.unwrap_or(1);
    let reports = [
        nphmm::perturbation::weyl_suite(seed, instances)?,
        nphmm::perturbation::wedin_suite(seed.wrapping_add(1), instances)?,
        nphmm::perturbation::pinv_suite(seed.wrapping_add(2), instances)?,
    ];
    let mut all_ok = true;
    for r in &reports {
        println!(
            "{}: instances={} failures={} worst_slack={:.3e} dense_grid_disagreement={:.3e} [{}]",
            r.name,
            r.instances,
            r.failures,
            r.worst_slack,
            r.oracle_disagreement,
            if r.passed() { "PASS" } else { "FAIL" }
        );
        all_ok &= r.passed();
    }
    if !all_ok {
        return Err(CliError::numerical("perturbation bound violated"));
    }
    Ok(())
}
