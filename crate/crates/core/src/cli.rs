//! Batch front end: read a function spec, run one command, write CSV or JSON.
//!
//! Exit status is 0 when every check passes, 1 when a check fails and 2 on
//! an error, which is reported as a JSON record on stderr.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::beurling::{default_schedule, scan_growth};
use crate::error::{Error, Result};
use crate::funcmodel::{autocorr_eval, reflection_residual, GaussPoly, Parity};
use crate::mellin::{
    default_real_grid, mellin_gausspoly_closed, mellin_numeric, theta, theta_hat_relation, theta_product_poly,
    verify_product_identity,
};
use crate::recover::{recover, SampledFn, RESIDUAL_THRESHOLD};
use crate::specfun::ComplexPoint;

/// Environment variable capping the worker threads of a run.
pub const THREADS_ENV: &str = "UNCERTAINTY_KIT_THREADS";

pub const DEFAULT_TOL: f64 = 1e-8;

/// Samples drawn from a function spec for `recover`.
pub const RECOVER_SAMPLES: usize = 257;

#[derive(Debug, Parser)]
#[command(name = "uncertainty-kit", version, about = "Uncertainty-integral scans, identity checks, Mellin tables and recovery for polynomial-times-gaussian functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandLine,
}

#[derive(Debug, Subcommand)]
pub enum CommandLine {
    /// Tabulate I(λ) along a schedule and fit the blow-up exponent.
    Scan(CommonArgs),
    /// Run the identity suite on a function spec.
    Verify(CommonArgs),
    /// Tabulate M^k and Θ^k on the imaginary axis.
    Mellin(CommonArgs),
    /// Recover width and polynomial from a function spec or a samples file.
    Recover(CommonArgs),
}

#[derive(Debug, clap::Args)]
pub struct CommonArgs {
    /// Function spec (or, for `recover`, a samples document).
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Comma-separated λ values.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<f64>>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Scan,
    Verify,
    Mellin,
    Recover,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Scan => "scan",
            Command::Verify => "verify",
            Command::Mellin => "mellin",
            Command::Recover => "recover",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub input_path: PathBuf,
    pub tol: f64,
    pub lambda_schedule: Vec<f64>,
    pub out_path: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn new(command: Command, input_path: impl Into<PathBuf>) -> Self {
        Self {
            command,
            input_path: input_path.into(),
            tol: DEFAULT_TOL,
            lambda_schedule: default_schedule(),
            out_path: None,
            format: Format::Csv,
        }
    }

    pub fn from_cli(cli: Cli) -> Result<Self> {
        let (command, args) = match cli.command {
            CommandLine::Scan(a) => (Command::Scan, a),
            CommandLine::Verify(a) => (Command::Verify, a),
            CommandLine::Mellin(a) => (Command::Mellin, a),
            CommandLine::Recover(a) => (Command::Recover, a),
        };
        let config = Self {
            command,
            input_path: args.input,
            tol: args.tol,
            lambda_schedule: args.schedule.unwrap_or_else(default_schedule),
            out_path: args.out,
            format: args.format,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Validation(format!("tol must be positive, got {}", self.tol)));
        }
        let s = &self.lambda_schedule;
        if s.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("schedule must be strictly increasing".into()));
        }
        if s.iter().any(|l| !(*l >= 0.0 && *l < 1.0)) {
            return Err(Error::Validation("schedule values must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermSpec {
    coeffs: Vec<f64>,
    width: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionSpec {
    terms: Vec<TermSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplesSpec {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parse `{"terms": [{"coeffs": [c0, c1, ...], "width": a}, ...]}`.
pub fn parse_function_spec(document: &str) -> Result<GaussPoly> {
    let spec: FunctionSpec = serde_json::from_str(document).map_err(parse_error)?;
    let terms: Vec<(Vec<f64>, f64)> = spec.terms.into_iter().map(|t| (t.coeffs, t.width)).collect();
    GaussPoly::from_real_terms(&terms)
}

/// Parse `{"xs": [...], "ys": [...]}`.
pub fn parse_samples(document: &str) -> Result<SampledFn> {
    let spec: SamplesSpec = serde_json::from_str(document).map_err(parse_error)?;
    SampledFn::new(spec.xs, spec.ys)
}

fn function_json(f: &GaussPoly) -> Value {
    let terms: Vec<Value> = f
        .terms()
        .iter()
        .map(|t| json!({"coeffs": t.coeffs().iter().map(|c| c.re).collect::<Vec<_>>(), "width": t.width()}))
        .collect();
    json!({ "terms": terms })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: Option<String>,
}

impl Check {
    fn measured(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            status: if value <= threshold { CheckStatus::Pass } else { CheckStatus::Fail },
            value: Some(value),
            threshold: Some(threshold),
            detail: None,
        }
    }

    fn skipped(name: &str, why: String) -> Self {
        Self {
            name: name.into(),
            status: CheckStatus::Skipped,
            value: None,
            threshold: None,
            detail: Some(why),
        }
    }
}

/// Rows for CSV output.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub trailer: Vec<(String, String)>,
}

/// Everything one run produces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: Command,
    pub input: Value,
    pub results: Value,
    pub checks: Vec<Check>,
    pub exit_reason: String,
    #[serde(skip)]
    pub table: Table,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.checks.iter().any(|c| c.status == CheckStatus::Fail) {
            1
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.table.header.join(","));
        out.push('\n');
        for row in &self.table.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        for (k, v) in &self.table.trailer {
            let _ = writeln!(out, "# {k}={v}");
        }
        for c in &self.checks {
            let status = match c.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Fail => "fail",
                CheckStatus::Skipped => "skipped",
            };
            let _ = writeln!(
                out,
                "# check {}={} value={} threshold={}",
                c.name,
                status,
                c.value.map_or("none".into(), float),
                c.threshold.map_or("none".into(), float)
            );
        }
        let _ = writeln!(out, "# exit_reason={}", self.exit_reason);
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// 17 significant digits.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn exit_reason(checks: &[Check]) -> String {
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| c.status == CheckStatus::Fail)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        "all checks passed".into()
    } else {
        format!("failed checks: {}", failed.join(", "))
    }
}

fn read_input(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))
}

fn scan_report(f: &GaussPoly, config: &RunConfig) -> Result<(Value, Vec<Check>, Table)> {
    let scan = scan_growth(f, &config.lambda_schedule, config.tol)?;
    let mut table = Table {
        header: vec!["lambda", "I", "err_estimate"],
        ..Table::default()
    };
    for ((l, v), e) in scan.lambdas.iter().zip(&scan.values).zip(&scan.err_estimates) {
        table.rows.push(vec![float(*l), float(*v), float(*e)]);
    }
    let opt = |v: Option<f64>| v.map_or("none".into(), float);
    table.trailer.push(("exponent".into(), opt(scan.exponent)));
    table.trailer.push(("residual".into(), opt(scan.residual)));
    table.trailer.push(("diverged_at".into(), opt(scan.diverged_at)));
    let check = match scan.diverged_at {
        None => Check {
            name: "converged".into(),
            status: CheckStatus::Pass,
            value: None,
            threshold: None,
            detail: None,
        },
        Some(l) => Check {
            name: "converged".into(),
            status: CheckStatus::Fail,
            value: Some(l),
            threshold: None,
            detail: Some(format!("integral diverges beyond lambda = {}", float(l))),
        },
    };
    Ok((serde_json::to_value(&scan).expect("serializes"), vec![check], table))
}

/// `n` log-spaced points from 0.1 to 10.
fn reflection_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| 10f64.powf(-1.0 + 2.0 * i as f64 / (n - 1) as f64)).collect()
}

fn strip_grid() -> Vec<ComplexPoint> {
    let mut out = Vec::new();
    for &x in &[-0.25, 0.0, 0.25] {
        for &t in &[0.0, 1.0, 3.0, 7.0] {
            out.push(ComplexPoint::new(x, t).expect("finite"));
        }
    }
    out
}

fn verify_report(f: &GaussPoly) -> Result<(Value, Vec<Check>, Table)> {
    let mut checks = Vec::new();

    let scale = autocorr_eval(f, 1.0)?.abs().max(1.0);
    let mut worst = 0.0_f64;
    for l in reflection_grid(30) {
        worst = worst.max(reflection_residual(f, l)? / scale);
    }
    checks.push(Check::measured("reflection", worst, 1e-10));

    let single = f.single_width().is_ok();
    match (single, f.parity()) {
        (true, Some(k)) => {
            let grid: Vec<f64> = (0..=20).map(|i| 0.5 * i as f64).collect();
            checks.push(Check::measured("product_identity", verify_product_identity(f, k, &grid)?, 1e-9));
            let fit = theta_product_poly(f, k, &default_real_grid(61))?;
            checks.push(Check::measured("theta_product_residual", fit.residual, 1e-8));
            let expected = f.degree() - k.mellin_index() as usize;
            let mut c = Check::measured("theta_product_degree", fit.degree().abs_diff(expected) as f64, 0.0);
            c.detail = Some(format!("fitted degree {} expected {expected}", fit.degree()));
            checks.push(c);
        }
        _ => {
            let why = "needs a single width and pure parity".to_string();
            checks.push(Check::skipped("product_identity", why.clone()));
            checks.push(Check::skipped("theta_product_residual", why.clone()));
            checks.push(Check::skipped("theta_product_degree", why));
        }
    }

    let fh = f.fourier();
    let mut worst = 0.0_f64;
    for k in [Parity::Even, Parity::Odd] {
        for z in strip_grid() {
            let scale = theta(&fh, k, z)?.norm().max(1.0);
            worst = worst.max(theta_hat_relation(f, k, z)? / scale);
        }
    }
    checks.push(Check::measured("theta_hat_relation", worst, 1e-9));

    let table = Table {
        header: vec!["check", "status", "value", "threshold"],
        rows: checks
            .iter()
            .map(|c| {
                vec![
                    c.name.clone(),
                    serde_json::to_value(c.status).expect("serializes").as_str().unwrap_or("").to_string(),
                    c.value.map_or("none".into(), float),
                    c.threshold.map_or("none".into(), float),
                ]
            })
            .collect(),
        trailer: Vec::new(),
    };
    Ok((json!({ "checks_run": checks.len() }), checks, table))
}

fn mellin_report(f: &GaussPoly) -> Result<(Value, Vec<Check>, Table)> {
    let mut table = Table {
        header: vec!["k", "z_re", "z_im", "mellin_re", "mellin_im", "theta_re", "theta_im"],
        ..Table::default()
    };
    let mut rows = Vec::new();
    for k in [Parity::Even, Parity::Odd] {
        for i in 0..=20 {
            let z = ComplexPoint::imag(0.5 * i as f64)?;
            let m = mellin_gausspoly_closed(f, k, z)?;
            let th = theta(f, k, z)?;
            table.rows.push(vec![
                k.mellin_index().to_string(),
                float(z.re()),
                float(z.im()),
                float(m.re),
                float(m.im),
                float(th.re),
                float(th.im),
            ]);
            rows.push(json!({
                "k": k.mellin_index(),
                "z": [z.re(), z.im()],
                "mellin": [m.re, m.im],
                "theta": [th.re, th.im],
            }));
        }
    }
    let mut worst = 0.0_f64;
    for k in [Parity::Even, Parity::Odd] {
        for &t in &[0.0, 1.0, 3.0, 7.0] {
            let z = ComplexPoint::imag(t)?;
            let c = mellin_gausspoly_closed(f, k, z)?;
            let n = mellin_numeric(f, k, z)?;
            let dev = (c - n).norm();
            worst = worst.max(if c.norm() > 0.0 { dev / c.norm() } else { dev });
        }
    }
    let checks = vec![Check::measured("numeric_matches_closed", worst, 1e-7)];
    Ok((json!({ "rows": rows }), checks, table))
}

fn recover_report(s: &SampledFn, truth: Option<&GaussPoly>) -> Result<(Value, Vec<Check>, Table)> {
    let r = recover(s)?;
    let top = s.ys().iter().fold(0.0_f64, |m, y| m.max(y.abs()));
    let mut checks = vec![Check::measured("fit_residual", r.residual / top, RESIDUAL_THRESHOLD)];
    if let Some(w) = truth.and_then(|f| f.single_width().ok()) {
        checks.push(Check::measured("width_matches_input", (r.width - w).abs() / w, 1e-2));
    }
    let mut table = Table {
        header: vec!["quantity", "index", "value"],
        ..Table::default()
    };
    table.rows.push(vec!["width".into(), String::new(), float(r.width)]);
    for (j, c) in r.coeffs.iter().enumerate() {
        table.rows.push(vec!["coeff".into(), j.to_string(), float(*c)]);
    }
    table.trailer.push(("residual".into(), float(r.residual)));
    Ok((serde_json::to_value(&r).expect("serializes"), checks, table))
}

fn samples_from(f: &GaussPoly) -> Result<SampledFn> {
    let a = f
        .min_width()
        .ok_or_else(|| Error::Validation("cannot sample the zero function".into()))?;
    SampledFn::from_fn(|x| f.eval(x), 8.0 / a.sqrt(), RECOVER_SAMPLES)
}

fn execute_inner(config: &RunConfig, input: &mut Value) -> Result<(Value, Vec<Check>, Table)> {
    config.validate()?;
    let document = read_input(&config.input_path)?;
    if config.command == Command::Recover {
        let v: Value = serde_json::from_str(&document).map_err(parse_error)?;
        if v.get("xs").is_some() {
            let s = parse_samples(&document)?;
            input["samples"] = json!(s.xs().len());
            return recover_report(&s, None);
        }
    }
    let f = parse_function_spec(&document)?;
    input["function"] = function_json(&f);
    match config.command {
        Command::Scan => scan_report(&f, config),
        Command::Verify => verify_report(&f),
        Command::Mellin => mellin_report(&f),
        Command::Recover => recover_report(&samples_from(&f)?, Some(&f)),
    }
}

/// Run one command, returning the report or the error together with the
/// input record gathered before it.
pub fn execute(config: &RunConfig) -> std::result::Result<Report, (Value, Error)> {
    let mut input = json!({ "path": config.input_path.display().to_string() });
    let outcome = match thread_cap() {
        Err(e) => Err(e),
        Ok(None) => execute_inner(config, &mut input),
        Ok(Some(n)) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute_inner(config, &mut input)),
            Err(e) => Err(Error::Validation(e.to_string())),
        },
    };
    match outcome {
        Ok((results, checks, table)) => Ok(Report {
            command: config.command,
            input,
            results,
            exit_reason: exit_reason(&checks),
            checks,
            table,
        }),
        Err(e) => Err((input, e)),
    }
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Validation(format!(
                "{THREADS_ENV} must be a positive integer, got {s:?}"
            ))),
        },
    }
}

/// JSON error record following the report layout.
pub fn error_record(command: Command, input: Value, error: &Error) -> String {
    let v = json!({
        "command": command.name(),
        "input": input,
        "results": null,
        "checks": [],
        "exit_reason": format!("error ({}): {error}", error.kind()),
    });
    let mut s = serde_json::to_string_pretty(&v).expect("serializes");
    s.push('\n');
    s
}

/// Execute and write the output; returns the process exit status.
pub fn run(config: &RunConfig) -> i32 {
    match execute(config) {
        Ok(report) => {
            let text = report.render(config.format);
            let written = match &config.out_path {
                Some(p) => std::fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            match written {
                Ok(()) => report.exit_code(),
                Err(msg) => {
                    let input = json!({ "path": config.input_path.display().to_string() });
                    eprint!("{}", error_record(config.command, input, &Error::Validation(msg)));
                    2
                }
            }
        }
        Err((input, e)) => {
            eprint!("{}", error_record(config.command, input, &e));
            2
        }
    }
}

/// Entry point for the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let command = match &cli.command {
        CommandLine::Scan(_) => Command::Scan,
        CommandLine::Verify(_) => Command::Verify,
        CommandLine::Mellin(_) => Command::Mellin,
        CommandLine::Recover(_) => Command::Recover,
    };
    let path = match &cli.command {
        CommandLine::Scan(a) | CommandLine::Verify(a) | CommandLine::Mellin(a) | CommandLine::Recover(a) => {
            a.input.display().to_string()
        }
    };
    match RunConfig::from_cli(cli) {
        Ok(config) => run(&config),
        Err(e) => {
            eprint!("{}", error_record(command, json!({ "path": path }), &e));
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_examples() {
        let g = parse_function_spec(r#"{"terms":[{"coeffs":[1],"width":1}]}"#).unwrap();
        assert_eq!(g, GaussPoly::gaussian(1.0).unwrap());
        let x = parse_function_spec(r#"{"terms":[{"coeffs":[0,1],"width":2}]}"#).unwrap();
        assert_eq!(x, GaussPoly::monomial(1, 2.0).unwrap());
        assert!(matches!(
            parse_function_spec(r#"{"terms":[{"coeffs":[1],"width":-1}]}"#),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse_function_spec(r#"{"terms":[{"coeffs":[1],"width":1},{"coeffs":[2],"width":1}]}"#),
            Err(Error::Validation(_))
        ));
        match parse_function_spec("{\n  \"terms\": [\n    {\"coeffs\": [1], \"width\": }\n  ]\n}") {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert!(column > 20);
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
        assert!(matches!(parse_function_spec(r#"{"terms":[{"coeffs":[1],"wdth":1}]}"#), Err(Error::Parse { .. })));
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.172_555_5e-300, -2.5e10] {
            assert_eq!(float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn config_validation() {
        let mut c = RunConfig::new(Command::Scan, "x.json");
        assert!(c.validate().is_ok());
        c.tol = 0.0;
        assert!(c.validate().is_err());
        c.tol = 1e-8;
        c.lambda_schedule = vec![0.5, 0.4];
        assert!(c.validate().is_err());
        c.lambda_schedule = vec![0.5, 1.0];
        assert!(c.validate().is_err());
    }
}
