//! Command-line interface for the contextuality measures.
//!
//! One request per invocation.  Exit codes: 0 success (for `check`:
//! contextual), 1 `check` on a noncontextual system or a failed `verify`
//! suite, 2 usage or parse errors, 3 system too large for the configured
//! cap, 4 `ncnt2` requested for a contextual system.  The cap defaults to
//! 24 binary variables and can be overridden with the `CBD_MAX_VARS`
//! environment variable.

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cbd::cyclic::{CyclicError, CyclicSpec};
use cbd::io::{self, ParseError};
use cbd::measures::{self, MeasureError, MeasureReport, Options};
use cbd::oracle::{self, OracleError};
use cbd::scalar::Scalar;
use cbd::system::{System, SystemError, SystemFormat};
use cbd::BigRational;

#[derive(Parser)]
#[command(
    name = "cbd",
    version,
    about = "Contextuality measures for systems of dichotomous random variables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Rational,
    Float,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MeasureArg {
    Cnt1,
    Cnt2,
    Cnt3,
    Cntf,
    Ncnt2,
}

#[derive(Subcommand)]
enum Command {
    /// Compute contextuality measures; one "name value flag" line each.
    Measure {
        /// Path to a system file, or a builtin name: prbox, ca,
        /// deterministic, coins.
        #[arg(long)]
        system: String,
        /// Measures to compute.
        #[arg(
            long,
            value_delimiter = ',',
            default_values = ["cnt1", "cnt2", "cnt3", "cntf"]
        )]
        measures: Vec<MeasureArg>,
        #[arg(long, value_enum, default_value_t = Mode::Rational)]
        mode: Mode,
    },
    /// Print contextual (exit 0) or noncontextual (exit 1).
    Check {
        /// Path to a system file, or a builtin name.
        #[arg(long)]
        system: String,
        #[arg(long, value_enum, default_value_t = Mode::Rational)]
        mode: Mode,
    },
    /// Emit the system file of a cyclic system given its expectations.
    Cyclic {
        /// Rank: number of contents = number of contexts.
        #[arg(long)]
        n: usize,
        /// n product expectations, one per context; fractions allowed.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        correlations: Vec<String>,
        /// 2n single-variable expectations, two per context in order;
        /// defaults to all zeros.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        marginals: Option<Vec<String>>,
    },
    /// Emit a reproducible random system on a format.
    Random {
        /// Builtin format (cyclic-N, single-N, overlap4) or path to a
        /// system file whose format is reused.
        #[arg(long)]
        format: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the self-check suite; exits nonzero on any failure.
    Verify {
        /// Suite name; only "small" is defined.
        #[arg(long, default_value = "small")]
        suite: String,
    },
}

struct CliError {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> CliError {
    CliError { code: 2, message: message.into() }
}

impl From<ParseError> for CliError {
    fn from(err: ParseError) -> Self {
        let code = match &err {
            ParseError::System(SystemError::SystemTooLarge(_)) => 3,
            _ => 2,
        };
        CliError { code, message: err.to_string() }
    }
}

impl From<MeasureError> for CliError {
    fn from(err: MeasureError) -> Self {
        let code = match &err {
            MeasureError::SystemIsContextual => 4,
            MeasureError::System(SystemError::SystemTooLarge(_)) => 3,
            _ => 2,
        };
        CliError { code, message: err.to_string() }
    }
}

impl From<OracleError> for CliError {
    fn from(err: OracleError) -> Self {
        let code = match &err {
            OracleError::SystemTooLarge(_) => 3,
            _ => 2,
        };
        CliError { code, message: err.to_string() }
    }
}

impl From<CyclicError> for CliError {
    fn from(err: CyclicError) -> Self {
        CliError { code: 2, message: err.to_string() }
    }
}

/// Prints a line to stdout, ignoring a closed pipe (e.g. `cbd ... | head`).
fn emit_line(args: std::fmt::Arguments) {
    let _ = writeln!(std::io::stdout(), "{args}");
}

macro_rules! out {
    ($($arg:tt)*) => { emit_line(format_args!($($arg)*)) };
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Measure { system, measures, mode } => {
            let options = options_from_env()?;
            match mode {
                Mode::Rational => {
                    run_measures::<BigRational>(&system, &measures, options)
                }
                Mode::Float => run_measures::<f64>(&system, &measures, options),
            }
        }
        Command::Check { system, mode } => {
            let options = options_from_env()?;
            match mode {
                Mode::Rational => run_check::<BigRational>(&system, options),
                Mode::Float => run_check::<f64>(&system, options),
            }
        }
        Command::Cyclic { n, correlations, marginals } => {
            run_cyclic(n, &correlations, marginals.as_deref())
        }
        Command::Random { format, seed } => run_random(&format, seed),
        Command::Verify { suite } => run_verify(&suite),
    }
}

/// Variable cap for the coupling space, overridable via `CBD_MAX_VARS`.
fn options_from_env() -> Result<Options, CliError> {
    match std::env::var("CBD_MAX_VARS") {
        Err(std::env::VarError::NotPresent) => Ok(Options::default()),
        Err(e) => Err(usage(format!("CBD_MAX_VARS: {e}"))),
        Ok(text) => match text.parse::<usize>() {
            Ok(max_vars) if max_vars > 0 => Ok(Options { max_vars }),
            _ => Err(usage(format!(
                "CBD_MAX_VARS must be a positive integer, got {text:?}"
            ))),
        },
    }
}

/// Loads a system from a file path or a builtin name.
fn load_system<S: Scalar>(spec: &str) -> Result<System<S>, CliError> {
    if Path::new(spec).is_file() {
        return Ok(io::parse_system_file(Path::new(spec))?);
    }
    builtin_system(spec).ok_or_else(|| {
        usage(format!(
            "--system {spec:?} is neither a readable file nor a builtin \
             name (prbox, ca, deterministic, coins)"
        ))
    })
}

fn builtin_system<S: Scalar>(name: &str) -> Option<System<S>> {
    let cyclic = |correlations: &[i64], marginal: i64| {
        let n = correlations.len();
        let spec = CyclicSpec::new(
            correlations.iter().map(|&v| S::from_int(v)).collect(),
            (0..n)
                .map(|_| (S::from_int(marginal), S::from_int(marginal)))
                .collect(),
        )
        .expect("builtin spec is well-formed");
        cbd::cyclic::make_cyclic(&spec).expect("builtin spec is realizable")
    };
    match name {
        "prbox" => Some(cyclic(&[1, 1, 1, -1], 0)),
        "ca" => Some(cyclic(&[1, -1], 0)),
        "deterministic" => Some(cyclic(&[1, 1], 1)),
        "coins" => {
            let format = SystemFormat::new(&["q1", "q2"], &[("c1", &["q1", "q2"])])
                .expect("well-formed by construction");
            let quarter = S::ratio(1, 4);
            Some(
                System::new(format, vec![vec![quarter; 4]])
                    .expect("uniform pmf is valid"),
            )
        }
        _ => None,
    }
}

fn render_value<S: Scalar>(value: &S) -> String {
    if S::EXACT {
        value.to_exact().expect("exact values are finite").to_string()
    } else {
        value.to_f64().to_string()
    }
}

fn flag(contextual: bool) -> &'static str {
    if contextual {
        "contextual"
    } else {
        "noncontextual"
    }
}

fn run_measures<S: Scalar>(
    system: &str,
    measures: &[MeasureArg],
    options: Options,
) -> Result<ExitCode, CliError> {
    let system = load_system::<S>(system)?;
    for &kind in measures {
        let report = compute(kind, &system, options)?;
        out!(
            "{} {} {}",
            report.measure.name(),
            render_value(&report.value),
            flag(report.contextual)
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn compute<S: Scalar>(
    kind: MeasureArg,
    system: &System<S>,
    options: Options,
) -> Result<MeasureReport<S>, MeasureError> {
    match kind {
        MeasureArg::Cnt1 => measures::cnt1(system, options),
        MeasureArg::Cnt2 => measures::cnt2(system, options),
        MeasureArg::Cnt3 => measures::cnt3(system, options),
        MeasureArg::Cntf => measures::cntf(system, options),
        MeasureArg::Ncnt2 => measures::ncnt2(system, options),
    }
}

fn run_check<S: Scalar>(system: &str, options: Options) -> Result<ExitCode, CliError> {
    let system = load_system::<S>(system)?;
    if measures::is_contextual(&system, options)? {
        out!("contextual");
        Ok(ExitCode::SUCCESS)
    } else {
        out!("noncontextual");
        Ok(ExitCode::from(1))
    }
}

fn run_cyclic(
    n: usize,
    correlations: &[String],
    marginals: Option<&[String]>,
) -> Result<ExitCode, CliError> {
    let correlations = parse_literals(correlations, "--correlations")?;
    let flat = match marginals {
        Some(texts) => parse_literals(texts, "--marginals")?,
        None => vec![BigRational::from_integer(0.into()); 2 * n],
    };
    if correlations.len() != n {
        return Err(usage(format!(
            "--correlations needs {n} entries, got {}",
            correlations.len()
        )));
    }
    if flat.len() != 2 * n {
        return Err(usage(format!(
            "--marginals needs {} entries (two per context), got {}",
            2 * n,
            flat.len()
        )));
    }
    let marginals = flat.chunks_exact(2).map(|p| (p[0].clone(), p[1].clone())).collect();
    let spec = CyclicSpec::new(correlations, marginals)?;
    let system = cbd::cyclic::make_cyclic(&spec)?;
    out!("{}", io::emit_system_string(&system));
    Ok(ExitCode::SUCCESS)
}

fn parse_literals(texts: &[String], what: &str) -> Result<Vec<BigRational>, CliError> {
    texts
        .iter()
        .map(|t| {
            io::parse_number_literal(t)
                .ok_or_else(|| usage(format!("{what}: cannot parse {t:?} as a number")))
        })
        .collect()
}

fn run_random(format: &str, seed: u64) -> Result<ExitCode, CliError> {
    let format = load_format(format)?;
    let system = oracle::random_system(&format, seed);
    out!("{}", io::emit_system_string(&system));
    Ok(ExitCode::SUCCESS)
}

fn load_format(spec: &str) -> Result<SystemFormat, CliError> {
    if let Some(rest) = spec.strip_prefix("cyclic-") {
        let n = rest
            .parse::<usize>()
            .map_err(|_| usage(format!("bad cyclic rank in --format {spec:?}")))?;
        return Ok(cbd::cyclic::cyclic_format(n)?);
    }
    if let Some(rest) = spec.strip_prefix("single-") {
        let n = rest
            .parse::<usize>()
            .map_err(|_| usage(format!("bad content count in --format {spec:?}")))?;
        return Ok(oracle::single_format(n).map_err(ParseError::from)?);
    }
    if spec == "overlap4" {
        return Ok(oracle::overlap4_format());
    }
    if Path::new(spec).is_file() {
        let system: System<BigRational> = io::parse_system_file(Path::new(spec))?;
        return Ok(system.format().clone());
    }
    Err(usage(format!(
        "--format {spec:?} is neither a builtin (cyclic-N, single-N, overlap4) \
         nor a readable file"
    )))
}

fn run_verify(suite: &str) -> Result<ExitCode, CliError> {
    if suite != "small" {
        return Err(usage(format!("unknown suite {suite:?}; only \"small\" exists")));
    }
    let options = options_from_env()?;
    let mut sample: Vec<(String, System<BigRational>)> = ["prbox", "ca", "deterministic", "coins"]
        .iter()
        .map(|name| (name.to_string(), builtin_system(name).expect("builtin")))
        .collect();
    for seed in 0..4 {
        let format = cbd::cyclic::cyclic_format(2).expect("rank 2 is valid");
        sample.push((format!("cyclic-2/{seed}"), oracle::random_system(&format, seed)));
    }
    for seed in 0..2 {
        let format = cbd::cyclic::cyclic_format(3).expect("rank 3 is valid");
        sample.push((format!("cyclic-3/{seed}"), oracle::random_system(&format, seed)));
    }
    let format = oracle::single_format(3).expect("single context is valid");
    sample.push(("single-3/0".to_string(), oracle::random_system(&format, 0)));

    let mut all_pass = true;
    for (name, system) in &sample {
        let elimination = oracle::column_elimination_noncontextuality(system)?;
        let lp = measures::is_contextual(system, options)?;
        let agree = elimination == !lp;
        all_pass &= agree;
        out!(
            "elimination-agreement {name} {} {}",
            flag(lp),
            if agree { "pass" } else { "FAIL" }
        );
    }
    for (name, system) in &sample {
        let report = oracle::crosscheck_modes(system)?;
        all_pass &= report.passed;
        out!(
            "{} {name} systems={} max_discrepancy={:.3e} {}",
            report.check,
            report.systems,
            report.max_discrepancy,
            if report.passed { "pass" } else { "FAIL" }
        );
    }
    Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
