//! Command-line front end: evaluate base risk, worst-case risk, or run the
//! certification oracle on a column of returns.
//!
//! Exit codes: 0 success (including a SLACK verdict, which warns on
//! stderr), 1 a VIOLATED verdict, 2 usage or validation errors, 3 I/O
//! errors. All numeric output is fixed to 12 significant digits so equal
//! inputs produce byte-equal reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use robust_risk::empirical::{EmpiricalDistribution, PNorm};
use robust_risk::error::RiskError;
use robust_risk::measures::{RiskMeasureSpec, SpectralFunction};
use robust_risk::oracle::{oracle_mean_variance, oracle_wasserstein, OracleConfig, OracleVerdict};
use robust_risk::robust::{wc_mean_variance, wc_wasserstein, WorstCaseResult};

#[derive(Parser)]
#[command(
    name = "robust-risk",
    about = "Risk measures on return samples and their worst-case values under model uncertainty",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the base risk measure on a sample.
    Risk(RiskArgs),
    /// Evaluate the worst-case risk over an uncertainty set.
    WorstCase(WorstCaseArgs),
    /// Certify the worst-case closed form with an adversarial search.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RiskArgs {
    #[command(flatten)]
    measure: MeasureArgs,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args)]
struct WorstCaseArgs {
    #[command(flatten)]
    measure: MeasureArgs,
    #[command(flatten)]
    uncertainty: UncertaintyArgs,
    #[command(flatten)]
    io: IoArgs,
    /// Write the worst-case distribution to this file, one value per line.
    #[arg(long)]
    argmax_out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    measure: MeasureArgs,
    #[command(flatten)]
    uncertainty: UncertaintyArgs,
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    oracle: OracleArgs,
}

#[derive(Args)]
struct IoArgs {
    /// Return sample: one value per line, '#' comments, comma or
    /// whitespace separated.
    #[arg(long)]
    input: PathBuf,
    /// Output format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    output: OutputFormat,
}

#[derive(Args)]
struct MeasureArgs {
    /// Risk measure family.
    #[arg(long, value_enum)]
    measure: MeasureKind,
    /// Tail / asymmetry level for var, es, expectile.
    #[arg(long)]
    alpha: Option<f64>,
    /// Semi-deviation loading for msd.
    #[arg(long)]
    beta: Option<f64>,
    /// Risk aversion for entropic.
    #[arg(long)]
    gamma: Option<f64>,
    /// Loss budget for shortfall-quadratic.
    #[arg(long)]
    l0: Option<f64>,
    /// Step-density file for spectral: rows `u_start,u_end,phi`.
    #[arg(long)]
    spectrum: Option<PathBuf>,
}

#[derive(Args)]
struct UncertaintyArgs {
    /// Uncertainty set.
    #[arg(long = "set", value_enum)]
    set: SetKind,
    /// Ball order p in [1, inf]; accepts a number or "inf".
    #[arg(long, value_parser = parse_order)]
    p: Option<f64>,
    /// Ball radius.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    #[arg(long, default_value_t = 0.95)]
    step_decay: f64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasureKind {
    Var,
    Es,
    Spectral,
    Expectile,
    Msd,
    Entropic,
    ShortfallQuadratic,
}

#[derive(Clone, Copy, ValueEnum)]
enum SetKind {
    MeanVariance,
    Wasserstein,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
    Plain,
}

fn parse_order(raw: &str) -> Result<f64, String> {
    match raw.to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        other => other
            .parse::<f64>()
            .map_err(|e| format!("invalid order '{raw}': {e}")),
    }
}

/// Failures carrying their process exit code.
enum CliError {
    /// Validation / usage problems: exit 2.
    Validation(String),
    /// Filesystem problems: exit 3.
    Io(String),
}

impl From<RiskError> for CliError {
    fn from(e: RiskError) -> Self {
        match e {
            RiskError::Input(msg) => CliError::Io(msg),
            other => CliError::Validation(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let outcome = match cli.command {
        Command::Risk(args) => cmd_risk(args),
        Command::WorstCase(args) => cmd_worst_case(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match outcome {
        Ok(code) => code,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

/// ROBUST_RISK_THREADS caps the oracle's restart parallelism.
fn configure_threads() {
    if let Ok(raw) = std::env::var("ROBUST_RISK_THREADS") {
        if let Ok(threads) = raw.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn cmd_risk(args: RiskArgs) -> Result<ExitCode, CliError> {
    let sample = read_sample(&args.io.input)?;
    let spec = build_spec(&args.measure)?;
    let value = spec.evaluate(&sample)?;

    let mut report = base_report("risk", &spec, &sample);
    report.insert("value".into(), number(value));
    emit(&report, args.io.output);
    Ok(ExitCode::SUCCESS)
}

fn cmd_worst_case(args: WorstCaseArgs) -> Result<ExitCode, CliError> {
    let sample = read_sample(&args.io.input)?;
    let spec = build_spec(&args.measure)?;
    let result = run_worst_case(&spec, &sample, &args.uncertainty)?;

    if let Some(path) = &args.argmax_out {
        write_argmax(path, &result.argmax)?;
    }
    let mut report = base_report("worst-case", &spec, &sample);
    report.insert("uncertainty".into(), uncertainty_json(&args.uncertainty));
    extend_with_worst_case(&mut report, &result);
    emit(&report, args.io.output);
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, CliError> {
    let sample = read_sample(&args.io.input)?;
    let spec = build_spec(&args.measure)?;
    let mut result = run_worst_case(&spec, &sample, &args.uncertainty)?;
    let cfg = OracleConfig {
        seed: args.oracle.seed,
        restarts: args.oracle.restarts,
        iterations: args.oracle.iterations,
        step_decay: args.oracle.step_decay,
        tolerance: args.oracle.tolerance,
    };
    let report = match args.uncertainty.set {
        SetKind::MeanVariance => oracle_mean_variance(&spec, &sample, &cfg)?,
        SetKind::Wasserstein => {
            let (norm, eps) = ball_parameters(&args.uncertainty)?;
            oracle_wasserstein(&spec, &sample, norm, eps, &cfg)?
        }
    };
    result.certification = Some(report.certification());

    let mut output = base_report("verify", &spec, &sample);
    output.insert("uncertainty".into(), uncertainty_json(&args.uncertainty));
    extend_with_worst_case(&mut output, &result);
    output.insert(
        "oracle".into(),
        json!({
            "seed": cfg.seed,
            "restarts": cfg.restarts,
            "iterations": cfg.iterations,
            "step_decay": number(cfg.step_decay),
            "tolerance": number(cfg.tolerance),
        }),
    );
    output.insert("best_value".into(), number(report.best_value));
    output.insert("closed_form_value".into(), number(report.closed_form_value));
    output.insert("gap".into(), number(report.gap));
    let verdict = match report.verdict {
        OracleVerdict::Confirmed => "CONFIRMED",
        OracleVerdict::Violated => "VIOLATED",
        OracleVerdict::Slack => "SLACK",
    };
    output.insert("verdict".into(), Value::String(verdict.into()));
    emit(&output, args.io.output);

    match report.verdict {
        OracleVerdict::Confirmed => Ok(ExitCode::SUCCESS),
        OracleVerdict::Slack => {
            eprintln!(
                "warning: search fell short of the closed form by {:e}; the maximizer may not \
                 be representable on {} atoms",
                report.gap,
                sample.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        OracleVerdict::Violated => Ok(ExitCode::from(1)),
    }
}

fn run_worst_case(
    spec: &RiskMeasureSpec,
    sample: &EmpiricalDistribution,
    uncertainty: &UncertaintyArgs,
) -> Result<WorstCaseResult, CliError> {
    match uncertainty.set {
        SetKind::MeanVariance => {
            if uncertainty.p.is_some() || uncertainty.eps.is_some() {
                return Err(CliError::Validation(
                    "--p/--eps only apply to --set wasserstein".into(),
                ));
            }
            Ok(wc_mean_variance(spec, sample)?)
        }
        SetKind::Wasserstein => {
            let (norm, eps) = ball_parameters(uncertainty)?;
            Ok(wc_wasserstein(spec, sample, norm, eps)?)
        }
    }
}

fn ball_parameters(uncertainty: &UncertaintyArgs) -> Result<(PNorm, f64), CliError> {
    let p = uncertainty
        .p
        .ok_or_else(|| CliError::Validation("--set wasserstein requires --p".into()))?;
    let eps = uncertainty
        .eps
        .ok_or_else(|| CliError::Validation("--set wasserstein requires --eps".into()))?;
    if eps.is_nan() || eps < 0.0 {
        return Err(CliError::Validation(format!("eps must be >= 0, got {eps}")));
    }
    Ok((PNorm::new(p)?, eps))
}

fn build_spec(args: &MeasureArgs) -> Result<RiskMeasureSpec, CliError> {
    let need = |opt: Option<f64>, flag: &str| {
        opt.ok_or_else(|| CliError::Validation(format!("this measure requires {flag}")))
    };
    let spec = match args.measure {
        MeasureKind::Var => RiskMeasureSpec::Var {
            alpha: need(args.alpha, "--alpha")?,
        },
        MeasureKind::Es => RiskMeasureSpec::Es {
            alpha: need(args.alpha, "--alpha")?,
        },
        MeasureKind::Expectile => RiskMeasureSpec::Expectile {
            alpha: need(args.alpha, "--alpha")?,
        },
        MeasureKind::Msd => RiskMeasureSpec::Msd {
            beta: need(args.beta, "--beta")?,
        },
        MeasureKind::Entropic => RiskMeasureSpec::Entropic {
            gamma: need(args.gamma, "--gamma")?,
        },
        MeasureKind::ShortfallQuadratic => RiskMeasureSpec::ShortfallQuadratic {
            l0: need(args.l0, "--l0")?,
        },
        MeasureKind::Spectral => {
            let path = args
                .spectrum
                .as_ref()
                .ok_or_else(|| CliError::Validation("spectral requires --spectrum".into()))?;
            RiskMeasureSpec::Spectral {
                spectrum: read_spectrum(path)?,
            }
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// Reads returns: '#' comment lines are skipped, remaining tokens are split
/// on commas and whitespace and parsed as floats.
fn read_sample(path: &Path) -> Result<EmpiricalDistribution, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for token in line.split(|c: char| c == ',' || c.is_whitespace()) {
            if token.is_empty() {
                continue;
            }
            let value: f64 = token.parse().map_err(|_| {
                CliError::Validation(format!(
                    "line {}: cannot parse '{token}' as a number",
                    line_no + 1
                ))
            })?;
            values.push(value);
        }
    }
    Ok(EmpiricalDistribution::from_samples(&values)?)
}

/// Reads a step density: rows `u_start,u_end,phi`, '#' comments allowed.
fn read_spectrum(path: &Path) -> Result<SpectralFunction, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut segments = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(CliError::Validation(format!(
                "spectrum line {}: expected 'u_start,u_end,phi'",
                line_no + 1
            )));
        }
        let parse = |raw: &str| -> Result<f64, CliError> {
            raw.parse().map_err(|_| {
                CliError::Validation(format!(
                    "spectrum line {}: cannot parse '{raw}'",
                    line_no + 1
                ))
            })
        };
        segments.push((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
    }
    Ok(SpectralFunction::from_segments(&segments)?)
}

fn write_argmax(path: &Path, argmax: &EmpiricalDistribution) -> Result<(), CliError> {
    let mut body = String::new();
    for v in argmax.values() {
        body.push_str(&format_value(*v));
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

// ---- reporting ---------------------------------------------------------

/// Rounds to 12 significant digits so output is reproducible across runs.
fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let magnitude = v.abs().log10().floor();
    let power = 11.0 - magnitude;
    if !(-280.0..=280.0).contains(&power) {
        return v;
    }
    let scale = 10f64.powf(power);
    (v * scale).round() / scale
}

fn format_value(v: f64) -> String {
    format!("{}", round_sig(v))
}

fn number(v: f64) -> Value {
    serde_json::Number::from_f64(round_sig(v)).map_or(Value::Null, Value::Number)
}

fn base_report(command: &str, spec: &RiskMeasureSpec, sample: &EmpiricalDistribution) -> Map<String, Value> {
    let mut map = Map::new();
    map.insert("command".into(), Value::String(command.into()));
    map.insert("measure".into(), Value::String(spec.name().into()));
    map.insert("parameters".into(), spec_parameters(spec));
    map.insert("n".into(), json!(sample.len()));
    map.insert("mean".into(), number(sample.mean()));
    map.insert("std".into(), number(sample.std_dev()));
    map
}

fn spec_parameters(spec: &RiskMeasureSpec) -> Value {
    match spec {
        RiskMeasureSpec::Var { alpha }
        | RiskMeasureSpec::Es { alpha }
        | RiskMeasureSpec::Expectile { alpha } => json!({ "alpha": number(*alpha) }),
        RiskMeasureSpec::Msd { beta } => json!({ "beta": number(*beta) }),
        RiskMeasureSpec::Entropic { gamma } => json!({ "gamma": number(*gamma) }),
        RiskMeasureSpec::ShortfallQuadratic { l0 } => json!({ "l0": number(*l0) }),
        RiskMeasureSpec::Spectral { spectrum } => {
            let segments: Vec<Value> = spectrum
                .segments()
                .iter()
                .map(|s| json!([number(s.lo), number(s.hi), number(s.value)]))
                .collect();
            json!({ "spectrum": segments })
        }
    }
}

fn uncertainty_json(args: &UncertaintyArgs) -> Value {
    match args.set {
        SetKind::MeanVariance => json!({ "set": "mean-variance" }),
        SetKind::Wasserstein => {
            let p = args.p.unwrap_or(f64::NAN);
            let p_value = if p.is_infinite() {
                Value::String("inf".into())
            } else {
                number(p)
            };
            json!({ "set": "wasserstein", "p": p_value, "eps": number(args.eps.unwrap_or(f64::NAN)) })
        }
    }
}

fn extend_with_worst_case(report: &mut Map<String, Value>, result: &WorstCaseResult) {
    report.insert("value".into(), number(result.value));
    report.insert("base_value".into(), number(result.base_value));
    report.insert("premium".into(), number(result.premium));
    report.insert("norm_term".into(), number(result.norm_term));
    report.insert("attainment_gap".into(), number(result.attainment_gap));
    report.insert(
        "argmax".into(),
        json!({
            "n": result.argmax.len(),
            "min": number(result.argmax.min()),
            "max": number(result.argmax.max()),
            "mean": number(result.argmax.mean()),
            "value_at_argmax": number(result.argmax_value),
        }),
    );
}

fn emit(report: &Map<String, Value>, format: OutputFormat) {
    match format {
        OutputFormat::Json => {
            println!("{}", serde_json::to_string(&Value::Object(report.clone())).expect("valid json"));
        }
        OutputFormat::Csv => {
            let flat = flatten(report);
            let header: Vec<&str> = flat.iter().map(|(k, _)| k.as_str()).collect();
            let row: Vec<&str> = flat.iter().map(|(_, v)| v.as_str()).collect();
            println!("{}", header.join(","));
            println!("{}", row.join(","));
        }
        OutputFormat::Plain => {
            for (key, value) in flatten(report) {
                println!("{key} = {value}");
            }
        }
    }
}

fn flatten(report: &Map<String, Value>) -> Vec<(String, String)> {
    let mut rows = Vec::new();
    for (key, value) in report {
        flatten_value(key, value, &mut rows);
    }
    rows
}

fn flatten_value(prefix: &str, value: &Value, rows: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) => {
            for (key, inner) in map {
                flatten_value(&format!("{prefix}.{key}"), inner, rows);
            }
        }
        Value::Array(items) => {
            rows.push((prefix.to_string(), serde_json::to_string(value).expect("valid json")));
            let _ = items;
        }
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}
