//! `ppsv verify|oracle|gen|validate`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input (validation
//! violations, malformed JSON, out-of-range parameters), 3 oracle not
//! applicable to the scenario.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::ed::EdParams;
use crate::engine::DEFAULT_BATCH_SIZE;
use crate::generate::{generate, DeviationFamily, GenParams};
use crate::oracle::{oracle_report, OracleError};
use crate::report::write_csv;
use crate::scenario::{validate, Scenario, Violation};
use crate::verifier::{verify, VerificationReport, VerifyError, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_ORACLE_INAPPLICABLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ppsv", version, about = "Verify aggregated power demand distributions against power slots")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo (ε, δ) approximation of every (state, power slot) cell.
    Verify(RunConfig),
    /// Exact table for scenarios with discrete deviation models only.
    Oracle(OracleArgs),
    /// Write a seeded synthetic scenario.
    Gen(GenArgs),
    /// Check a scenario file and list every violation.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Scenario file (JSON).
    pub scenario: PathBuf,
    /// Relative tolerance ε in (0, 1).
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Confidence parameter δ in (0, 1).
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, env = "PPSV_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (defaults to the available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
    /// Speculative batches per task beyond the last consumed one
    /// (defaults to twice the worker count).
    #[arg(long)]
    pub lookahead: Option<usize>,
    /// Output path without extension; `.json` / `.csv` are appended.
    /// Without it the JSON report goes to stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Split δ evenly across all cells of the table.
    #[arg(long)]
    pub family_wise: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    pub scenario: PathBuf,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub users: usize,
    #[arg(long, default_value_t = 24)]
    pub time_slots: usize,
    #[arg(long, default_value_t = 2)]
    pub states: usize,
    #[arg(long, default_value_t = 4)]
    pub power_slots: usize,
    #[arg(long, value_enum, default_value_t = DeviationFamily::Discrete)]
    pub family: DeviationFamily,
    /// Deviation size relative to each user's mean predicted power.
    #[arg(long, default_value_t = 0.1)]
    pub magnitude: f64,
    #[arg(long, default_value_t = 0.5)]
    pub epp_min_kw: f64,
    #[arg(long, default_value_t = 5.0)]
    pub epp_max_kw: f64,
    /// Scenario file to write; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    pub scenario: PathBuf,
}

/// A failed command: exit code plus the diagnostic for stderr.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_IO,
            message: format!("{}: {err}", path.display()),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    fn violations(path: &Path, violations: &[Violation]) -> Self {
        let mut message = format!("{}: {} violation(s)", path.display(), violations.len());
        for v in violations {
            message.push_str(&format!("\n  {v}"));
        }
        Failure::invalid(message)
    }
}

fn read_scenario(path: &Path) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    Scenario::from_json(&text).map_err(|e| {
        Failure::invalid(format!(
            "{}: malformed scenario at line {} column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn with_extension(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn emit_report(
    report: &VerificationReport,
    output: Option<&Path>,
    format: OutputFormat,
    stdout: &mut dyn Write,
) -> Result<Vec<PathBuf>, Failure> {
    let json = report.to_json_pretty() + "\n";
    let Some(base) = output else {
        match format {
            OutputFormat::Csv => write_csv(report.entries(), stdout).map_err(|e| Failure::io(Path::new("<stdout>"), e))?,
            _ => stdout
                .write_all(json.as_bytes())
                .map_err(|e| Failure::io(Path::new("<stdout>"), e))?,
        }
        return Ok(vec![]);
    };
    let mut written = Vec::new();
    if matches!(format, OutputFormat::Json | OutputFormat::Both) {
        let path = with_extension(base, "json");
        fs::write(&path, &json).map_err(|e| Failure::io(&path, e))?;
        written.push(path);
    }
    if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
        let path = with_extension(base, "csv");
        let file = fs::File::create(&path).map_err(|e| Failure::io(&path, e))?;
        write_csv(report.entries(), file).map_err(|e| Failure::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

fn cmd_verify(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), Failure> {
    let scenario = read_scenario(&cfg.scenario)?;
    let params = EdParams::new(cfg.epsilon, cfg.delta).map_err(|e| Failure::invalid(e.to_string()))?;
    let workers = cfg
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let options = VerifyOptions {
        workers,
        batch_size: cfg.batch_size,
        lookahead: cfg.lookahead,
        family_wise: cfg.family_wise,
    };
    let report = verify(&scenario, &params, cfg.seed, &options).map_err(|e| match e {
        VerifyError::Invalid(v) => Failure::violations(&cfg.scenario, &v),
        VerifyError::Params(e) => Failure::invalid(e.to_string()),
        VerifyError::Engine(e) => Failure::invalid(e.to_string()),
    })?;
    emit_report(&report, cfg.output.as_deref(), cfg.format, stdout)?;
    Ok(())
}

fn cmd_oracle(args: &OracleArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let scenario = read_scenario(&args.scenario)?;
    let report = oracle_report(&scenario).map_err(|e| match e {
        OracleError::Invalid(v) => Failure::violations(&args.scenario, &v),
        other @ (OracleError::NotDiscrete { .. } | OracleError::SupportTooLarge { .. }) => Failure {
            code: EXIT_ORACLE_INAPPLICABLE,
            message: other.to_string(),
        },
        other => Failure::invalid(other.to_string()),
    })?;
    emit_report(&report, args.output.as_deref(), args.format, stdout)?;
    Ok(())
}

fn cmd_gen(args: &GenArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let params = GenParams {
        seed: args.seed,
        users: args.users,
        time_slots: args.time_slots,
        states: args.states,
        power_slots: args.power_slots,
        family: args.family,
        magnitude: args.magnitude,
        epp_min_kw: args.epp_min_kw,
        epp_max_kw: args.epp_max_kw,
    };
    let scenario = generate(&params).map_err(|e| Failure::invalid(e.to_string()))?;
    let text = scenario.to_json_pretty() + "\n";
    match &args.output {
        Some(path) => fs::write(path, text).map_err(|e| Failure::io(path, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::io(Path::new("<stdout>"), e)),
    }
}

fn cmd_validate(args: &ValidateArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let scenario = read_scenario(&args.scenario)?;
    let violations = validate(&scenario);
    if !violations.is_empty() {
        return Err(Failure::violations(&args.scenario, &violations));
    }
    writeln!(stdout, "{}: ok", args.scenario.display()).map_err(|e| Failure::io(Path::new("<stdout>"), e))
}

/// Runs a parsed command, writing results to `stdout` and diagnostics to
/// `stderr`; returns the process exit code.
pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Verify(cfg) => cmd_verify(cfg, stdout),
        Command::Oracle(args) => cmd_oracle(args, stdout),
        Command::Gen(args) => cmd_gen(args, stdout),
        Command::Validate(args) => cmd_validate(args, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

pub fn main_exit_code() -> i32 {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(&cli, &mut stdout.lock(), &mut stderr.lock())
}
