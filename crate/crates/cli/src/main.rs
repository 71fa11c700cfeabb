//! Command line front end: generate sample sets, verify the semigroup
//! law and norm bound, run the full classification, and check Markov
//! covariance kernels.
//!
//! Exit codes: 0 on success, 2 when a verification fails, 1 on usage or
//! parse errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use semidec::cauchy::ModuleElement;
use semidec::decomp::{classify, Tolerances};
use semidec::gaussmarkov::{
    from_kernel_spec, markov_check, self_similarity_check, to_semigroup, triple_grid,
    KernelSpec,
};
use semidec::gen::{random_exact_model, random_model};
use semidec::linalg::Mode;
use semidec::semigroup::{
    default_grid, integer_grid, verify_bound, verify_semigroup, BoundFunction,
    BoundReport, SampleSet, VerifyReport,
};

const SCHEMA: &str = "1";

#[derive(Parser)]
#[command(name = "semidec", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Input file path.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Output file path; stdout when omitted.
    #[arg(long = "out")]
    output: Option<PathBuf>,
    /// Tolerance for verification checks.
    #[arg(long, default_value_t = 1e-9)]
    tol_verify: f64,
    /// Tolerance for recovered quantities.
    #[arg(long, default_value_t = 1e-8)]
    tol_recover: f64,
    /// Arithmetic mode: real or exact.
    #[arg(long, value_enum, default_value_t = ModeArg::Real)]
    mode: ModeArg,
    /// Seed for model generation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Norm bound expression in x, e.g. "exp(2*x)"; overrides the one
    /// stored with the samples.
    #[arg(long)]
    bound: Option<String>,
}

#[derive(clap::ValueEnum, Clone, Copy, PartialEq)]
enum ModeArg {
    Real,
    Exact,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random model and write its sample set.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
        /// Total dimension of the generated model.
        #[arg(long, default_value_t = 5)]
        dim: usize,
    },
    /// Verify the semigroup law and the norm bound on a sample set.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the full classification pipeline on a sample set.
    Classify {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Check a covariance kernel for the Markov property and reduce it.
    Markov {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Resolved configuration of one run.
#[derive(Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub tol_verify: f64,
    pub tol_recover: f64,
    pub mode: Mode,
    pub seed: u64,
    pub bound: Option<String>,
}

impl RunConfig {
    fn new(command: &str, c: &CommonArgs) -> Self {
        RunConfig {
            command: command.into(),
            input: c.input.clone(),
            output: c.output.clone(),
            tol_verify: c.tol_verify,
            tol_recover: c.tol_recover,
            mode: match c.mode {
                ModeArg::Real => Mode::Real,
                ModeArg::Exact => Mode::Exact,
            },
            seed: c.seed,
            bound: c.bound.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SampleFile {
    schema: String,
    #[serde(flatten)]
    set: SampleSet,
}

#[derive(Deserialize)]
struct KernelFile {
    schema: String,
    #[serde(flatten)]
    spec: KernelSpec,
}

#[derive(Serialize)]
struct VerifyOutput {
    schema: String,
    command: String,
    passed: bool,
    law: VerifyReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound: Option<BoundReport>,
}

#[derive(Serialize)]
struct MarkovOutput {
    schema: String,
    command: String,
    passed: bool,
    symmetry: VerifyReport,
    markov: VerifyReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    self_similarity: Option<VerifyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reduction: Option<VerifyReport>,
}

enum CliError {
    Usage(String),
    Failed,
}

type CliResult = Result<(), CliError>;

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn emit<T: Serialize>(out: &Option<PathBuf>, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(usage)?;
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text).map_err(usage)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn read_input(path: &Option<PathBuf>) -> Result<String, CliError> {
    let p = path
        .as_ref()
        .ok_or_else(|| CliError::Usage("missing --in".into()))?;
    std::fs::read_to_string(p).map_err(usage)
}

fn resolve_bound(cfg: &RunConfig, set: &SampleSet) -> Result<Option<BoundFunction>, CliError> {
    match &cfg.bound {
        Some(text) => Ok(Some(BoundFunction::parse(text).map_err(usage)?)),
        None => Ok(set.bound.clone()),
    }
}

fn run_generate(cfg: &RunConfig, dim: usize) -> CliResult {
    let set = match cfg.mode {
        Mode::Real => {
            let g = random_model(cfg.seed, dim).map_err(usage)?;
            let mut s = g
                .model
                .sample(&default_grid(&g.model.basis, 6))
                .map_err(usage)?;
            s.bound = Some(g.bound);
            s
        }
        Mode::Exact => {
            let g = random_exact_model(cfg.seed, dim).map_err(usage)?;
            let mut s = g
                .model
                .sample(&integer_grid(&g.model.basis, 3))
                .map_err(usage)?;
            s.bound = Some(g.bound);
            s
        }
    };
    emit(&cfg.output, &SampleFile { schema: SCHEMA.into(), set })
}

fn load_samples(cfg: &RunConfig) -> Result<SampleSet, CliError> {
    let text = read_input(&cfg.input)?;
    let file: SampleFile = serde_json::from_str(&text).map_err(usage)?;
    if file.schema != SCHEMA {
        return Err(CliError::Usage(format!("unsupported schema {:?}", file.schema)));
    }
    Ok(file.set)
}

fn run_verify(cfg: &RunConfig) -> CliResult {
    let set = load_samples(cfg)?;
    let law = verify_semigroup(&set, cfg.tol_verify).map_err(usage)?;
    let bound = match resolve_bound(cfg, &set)? {
        Some(f) => Some(verify_bound(&set, &f).map_err(usage)?),
        None => None,
    };
    let passed = law.passed && bound.as_ref().map_or(true, |b| b.passed);
    emit(
        &cfg.output,
        &VerifyOutput {
            schema: SCHEMA.into(),
            command: cfg.command.clone(),
            passed,
            law,
            bound,
        },
    )?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Failed)
    }
}

fn run_classify(cfg: &RunConfig) -> CliResult {
    let set = load_samples(cfg)?;
    let bound = resolve_bound(cfg, &set)?
        .ok_or_else(|| CliError::Usage("classify needs a bound (--bound or stored)".into()))?;
    let tol = Tolerances { verify: cfg.tol_verify, recover: cfg.tol_recover };
    let c = classify(&set, &bound, &tol).map_err(usage)?;
    let passed = c.report.passed();
    emit(&cfg.output, &c.report)?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Failed)
    }
}

fn run_markov(cfg: &RunConfig) -> CliResult {
    let text = read_input(&cfg.input)?;
    let file: KernelFile = serde_json::from_str(&text).map_err(usage)?;
    if file.schema != SCHEMA {
        return Err(CliError::Usage(format!("unsupported schema {:?}", file.schema)));
    }
    let model = from_kernel_spec(&file.spec).map_err(usage)?;

    let pairs: Vec<(f64, f64)> =
        (1..=10).flat_map(|i| (1..=10).map(move |j| (i as f64 / 5.0, j as f64 / 5.0))).collect();
    let symmetry = model.symmetry_check(&pairs, 1e-12).map_err(usage)?;

    let mut triples = triple_grid(5, 2.0);
    triples.truncate(100);
    let markov = markov_check(&model, &triples, cfg.tol_verify.max(1e-12)).map_err(usage)?;

    let self_similarity = match model.hurst {
        Some(h) => Some(
            self_similarity_check(
                &model,
                h,
                &[(0.2, 0.9), (1.0, 3.0), (0.5, 0.5)],
                &[0.5, 2.0, 7.0],
                cfg.tol_verify.max(1e-12),
            )
            .map_err(usage)?,
        ),
        None => None,
    };

    // reduction verdict must agree with the direct Markov check
    let basis = semidec::cauchy::ModuleBasis::standard();
    let points: Vec<ModuleElement> = default_grid(&basis, 4);
    let reduction = match to_semigroup(&model, &basis, &points) {
        Ok(s) => Some(verify_semigroup(&s, cfg.tol_verify.max(1e-9)).map_err(usage)?),
        Err(_) => None,
    };

    let passed = symmetry.passed
        && markov.passed
        && self_similarity.as_ref().map_or(true, |r| r.passed)
        && reduction.as_ref().map_or(true, |r| r.passed);
    emit(
        &cfg.output,
        &MarkovOutput {
            schema: SCHEMA.into(),
            command: cfg.command.clone(),
            passed,
            symmetry,
            markov,
            self_similarity,
            reduction,
        },
    )?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Failed)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help and version requests are not usage errors
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    let result = match &cli.command {
        Command::Generate { common, dim } => run_generate(&RunConfig::new("generate", common), *dim),
        Command::Verify { common } => run_verify(&RunConfig::new("verify", common)),
        Command::Classify { common } => run_classify(&RunConfig::new("classify", common)),
        Command::Markov { common } => run_markov(&RunConfig::new("markov", common)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Failed) => ExitCode::from(2),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
