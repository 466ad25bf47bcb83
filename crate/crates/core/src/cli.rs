//! Batch front-end: `photon-distill <evaluate|sweep|search|verify> --config <path> --output <path>`.
//!
//! Each command reads one JSON payload, validates it completely, computes,
//! and writes a single artifact atomically. Floats are printed with 17
//! significant digits and object keys are sorted, so identical inputs give
//! byte-identical files. Every artifact embeds the SHA-256 of the config.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::bounds::{check, check_exhaustive, perfect_output_impossible, BoundReport};
use crate::conditional::{evaluate, improvement_verdict, ConditionalDistribution, ImprovementVerdict};
use crate::ensemble::{DetectionPattern, InputEnsemble};
use crate::search::{
    optimize, predicted_ratio_factor, predicted_two_photon_penalty, sweep_epsilon_scheme, SearchProblem, SearchResult,
    SweepRow,
};
use crate::unitary::{
    dft, epsilon_scheme, haar_random, EpsilonSchemeSpec, GivensParameterization, MatrixJson, Unitary,
};
use crate::Error;

/// Environment fallback for `--threads`.
pub const THREADS_ENV: &str = "PHOTON_DISTILL_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "photon-distill",
    version,
    about = "Heralded single-photon statistics of linear-optical networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON payload for the command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Artifact to write.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Overrides the payload's seed (search, verify, Haar scenarios).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 picks automatically.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Conditional distribution, verdict and bound report for one scenario.
    Evaluate,
    /// ε-scheme table over a list of ε.
    Sweep,
    /// Multi-start search over interferometers.
    Search,
    /// Random scenarios checked against the bound and no-go results.
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

/// A fully resolved invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    /// Raw payload bytes (hashed for provenance, then parsed).
    pub payload: Vec<u8>,
    pub output_path: PathBuf,
    pub format: Format,
    pub seed: Option<u64>,
    pub threads: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numeric(_) => 2,
            CliError::Validation(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NumericIntegrity(_) => CliError::Numeric(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

/// Interferometer descriptor inside a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UnitarySpec {
    Explicit(MatrixJson),
    EpsilonScheme { n_modes: usize, epsilon: f64 },
    Dft { dim: usize },
    Haar { dim: usize, seed: u64 },
    Givens(GivensParameterization),
}

impl UnitarySpec {
    pub fn build(&self, seed_override: Option<u64>) -> crate::Result<Unitary> {
        match self {
            UnitarySpec::Explicit(m) => Unitary::try_from(m.clone()),
            UnitarySpec::EpsilonScheme { n_modes, epsilon } => epsilon_scheme(EpsilonSchemeSpec {
                n_modes: *n_modes,
                epsilon: *epsilon,
            }),
            UnitarySpec::Dft { dim } => dft(*dim),
            UnitarySpec::Haar { dim, seed } => haar_random(*dim, seed_override.unwrap_or(*seed)),
            UnitarySpec::Givens(p) => p.realize(),
        }
    }
}

/// Payload of `evaluate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub probs: InputEnsemble,
    pub unitary: UnitarySpec,
    pub pattern: DetectionPattern,
}

/// Payload of `sweep`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n_modes: usize,
    pub p: f64,
    pub detected: usize,
    pub epsilons: Vec<f64>,
}

fn default_max_probability() -> f64 {
    0.95
}

/// Payload of `verify`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub trials: usize,
    pub n_modes: usize,
    #[serde(default)]
    pub seed: u64,
    /// Source efficiencies are drawn uniformly from `[0, max_probability]`.
    #[serde(default = "default_max_probability")]
    pub max_probability: f64,
}

#[derive(Clone, Debug, Serialize)]
struct EvaluateOutput {
    distribution: ConditionalDistribution,
    /// `None` when `p_max = 1` makes R-based verdicts inapplicable.
    verdict: Option<ImprovementVerdict>,
    bound: Option<BoundReport>,
}

#[derive(Clone, Debug, Serialize)]
struct SweepOutput {
    n_modes: usize,
    p: f64,
    detected: usize,
    predicted_ratio_factor: f64,
    predicted_two_photon_penalty: Option<f64>,
    rows: Vec<SweepRow>,
}

#[derive(Clone, Debug, Serialize)]
struct VerifyRecord {
    trial: usize,
    probs: InputEnsemble,
    report: BoundReport,
}

#[derive(Clone, Debug, Serialize)]
struct VerifySummary {
    scenarios: usize,
    violations: usize,
    perfect_output_impossible: bool,
}

#[derive(Clone, Debug, Serialize)]
struct VerifyOutput {
    reports: Vec<VerifyRecord>,
    summary: VerifySummary,
}

/// What a successful run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub output_path: PathBuf,
    /// Human-readable one-line summary.
    pub summary: String,
    /// Theorem violations (verify only). Non-zero maps to exit code 2.
    pub violations: usize,
}

pub fn config_digest(payload: &[u8]) -> String {
    hex::encode(Sha256::digest(payload))
}

fn parse<T: for<'de> Deserialize<'de>>(payload: &[u8]) -> Result<T, CliError> {
    serde_json::from_slice(payload).map_err(|e| CliError::Validation(format!("config: {e}")))
}

/// Runs one command, writing its artifact to `config.output_path`.
pub fn run(config: &RunConfig) -> Result<RunOutcome, CliError> {
    let threads = config.threads;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(config))
}

fn run_inner(config: &RunConfig) -> Result<RunOutcome, CliError> {
    let digest = config_digest(&config.payload);
    let (body, csv, summary, violations) = match config.command {
        Command::Evaluate => {
            let scenario: Scenario = parse(&config.payload)?;
            let out = run_evaluate(&scenario, config.seed)?;
            let summary = format!(
                "herald_prob {:.6e}, c1 {:.6e}",
                out.distribution.herald_prob,
                out.distribution.coefficient(1)
            );
            let csv = evaluate_csv(&out);
            (to_value(&out)?, csv, summary, 0)
        }
        Command::Sweep => {
            let sweep: SweepConfig = parse(&config.payload)?;
            let out = run_sweep(&sweep)?;
            let summary = format!("{} sweep rows", out.rows.len());
            let csv = sweep_csv(&out);
            (to_value(&out)?, csv, summary, 0)
        }
        Command::Search => {
            let mut problem: SearchProblem = parse(&config.payload)?;
            if let Some(seed) = config.seed {
                problem.seed = seed;
            }
            let result = optimize(&problem)?;
            let summary = format!(
                "best {:.10e} on pattern {:?} after {} evaluations",
                result.best_value,
                result.best_pattern.counts(),
                result.evaluations_used
            );
            let csv = trace_csv(&result);
            (to_value(&result)?, csv, summary, 0)
        }
        Command::Verify => {
            let mut verify: VerifyConfig = parse(&config.payload)?;
            if let Some(seed) = config.seed {
                verify.seed = seed;
            }
            let out = run_verify(&verify)?;
            let summary = format!(
                "scenarios: {}, violations: {}",
                out.summary.scenarios, out.summary.violations
            );
            let violations = out.summary.violations;
            let csv = verify_csv(&out);
            (to_value(&out)?, csv, summary, violations)
        }
    };

    let text = match config.format {
        Format::Json => {
            let mut envelope = serde_json::Map::new();
            envelope.insert("command".into(), serde_json::to_value(config.command).expect("enum"));
            envelope.insert("config_digest".into(), Value::String(digest));
            envelope.insert("seed".into(), config.seed.map_or(Value::Null, Value::from));
            envelope.insert("result".into(), body);
            let mut s = String::new();
            write_json(&Value::Object(envelope), 0, &mut s);
            s.push('\n');
            s
        }
        Format::Csv => format!("# config_digest: {digest}\n{csv}"),
    };
    write_atomic(&config.output_path, text.as_bytes())?;
    Ok(RunOutcome {
        output_path: config.output_path.clone(),
        summary,
        violations,
    })
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Numeric(format!("serialization: {e}")))
}

fn run_evaluate(scenario: &Scenario, seed: Option<u64>) -> Result<EvaluateOutput, CliError> {
    let unitary = scenario.unitary.build(seed)?;
    let distribution = evaluate(&unitary, &scenario.probs, &scenario.pattern)?;
    let (verdict, bound) = if scenario.probs.odds_ratio().is_some() {
        let bound = check(&unitary, &scenario.probs, &scenario.pattern)?;
        if !bound.satisfied {
            return Err(CliError::Numeric(format!(
                "theorem violation {:?} for pattern {:?}",
                bound.violations,
                scenario.pattern.counts()
            )));
        }
        (Some(improvement_verdict(&distribution, &scenario.probs)?), Some(bound))
    } else {
        (None, None)
    };
    Ok(EvaluateOutput {
        distribution,
        verdict,
        bound,
    })
}

fn run_sweep(sweep: &SweepConfig) -> Result<SweepOutput, CliError> {
    let rows = sweep_epsilon_scheme(sweep.n_modes, sweep.p, sweep.detected, &sweep.epsilons)?;
    let penalty_defined = sweep.detected + 1 < sweep.n_modes;
    Ok(SweepOutput {
        n_modes: sweep.n_modes,
        p: sweep.p,
        detected: sweep.detected,
        predicted_ratio_factor: predicted_ratio_factor(sweep.n_modes, sweep.detected),
        predicted_two_photon_penalty: penalty_defined
            .then(|| predicted_two_photon_penalty(sweep.n_modes, sweep.detected)),
        rows,
    })
}

fn run_verify(verify: &VerifyConfig) -> Result<VerifyOutput, CliError> {
    if verify.n_modes < 2 || verify.trials == 0 {
        return Err(CliError::Validation("verify needs n_modes ≥ 2 and trials ≥ 1".into()));
    }
    if !(0.0..1.0).contains(&verify.max_probability) {
        return Err(CliError::Validation("max_probability must lie in [0, 1)".into()));
    }
    let n = verify.n_modes;
    let mut rng = ChaCha20Rng::seed_from_u64(verify.seed);
    let all_patterns = DetectionPattern::enumerate(n, n);
    let trials: Vec<(u64, Vec<f64>, Option<usize>)> = (0..verify.trials)
        .map(|_| {
            let seed = rng.next_u64();
            let probs = (0..n).map(|_| rng.random_range(0.0..=verify.max_probability)).collect();
            let pick = (n > 4).then(|| rng.random_range(0..all_patterns.len()));
            (seed, probs, pick)
        })
        .collect();

    let per_trial = trials
        .into_par_iter()
        .enumerate()
        .map(|(trial, (seed, probs, pick))| -> Result<Vec<VerifyRecord>, CliError> {
            let unitary = haar_random(n, seed)?;
            let probs = InputEnsemble::new(probs)?;
            let reports = match pick {
                None => check_exhaustive(&unitary, &probs)?,
                Some(i) => vec![check(&unitary, &probs, &all_patterns[i])?],
            };
            Ok(reports
                .into_iter()
                .map(|report| VerifyRecord {
                    trial,
                    probs: probs.clone(),
                    report,
                })
                .collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let reports: Vec<VerifyRecord> = per_trial.into_iter().flatten().collect();
    let violations = reports.iter().filter(|r| !r.report.satisfied).count();
    let summary = VerifySummary {
        scenarios: reports.len(),
        violations,
        perfect_output_impossible: perfect_output_impossible(reports.iter().map(|r| &r.report)),
    };
    Ok(VerifyOutput { reports, summary })
}

/// Shortest exact-width float form: 17 significant digits.
fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn evaluate_csv(out: &EvaluateOutput) -> String {
    let mut s = String::from("n1,coefficient\n");
    for (n1, c) in out.distribution.coefficients.iter().enumerate() {
        let _ = writeln!(s, "{n1},{}", fmt_float(*c));
    }
    s
}

fn sweep_csv(out: &SweepOutput) -> String {
    let mut s = String::from("epsilon,ratio_10,ratio_21,herald_prob,ratio_factor,two_photon_penalty\n");
    for r in &out.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_float(r.epsilon),
            fmt_opt(r.ratio_10),
            fmt_opt(r.ratio_21),
            fmt_float(r.herald_prob),
            fmt_opt(r.ratio_factor),
            fmt_opt(r.two_photon_penalty)
        );
    }
    s
}

fn trace_csv(result: &SearchResult) -> String {
    let mut s = String::from("evaluation_index,incumbent\n");
    for t in &result.trace {
        let _ = writeln!(s, "{},{}", t.evaluation, fmt_float(t.incumbent));
    }
    s
}

fn verify_csv(out: &VerifyOutput) -> String {
    let mut s = String::from("trial,pattern,detected,active_modes,bound_value,observed_ratio,slack,satisfied\n");
    for rec in &out.reports {
        let r = &rec.report;
        let pattern = r
            .pattern
            .counts()
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            rec.trial,
            pattern,
            r.detected,
            r.active_modes,
            fmt_float(r.bound_value),
            fmt_opt(r.observed_ratio),
            fmt_opt(r.slack),
            r.satisfied
        );
    }
    s
}

/// Pretty JSON with sorted keys and fixed-width floats.
fn write_json(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&v.to_string()),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) => out.push_str(&u.to_string()),
            (None, Some(i), _) => out.push_str(&i.to_string()),
            (None, None, Some(f)) => out.push_str(&fmt_float(f)),
            _ => out.push_str(&n.to_string()),
        },
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_json(item, indent + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, key) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_json(&map[*key], indent + 1, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

fn resolve_threads(flag: Option<usize>) -> Result<usize, CliError> {
    match flag {
        Some(n) => Ok(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Validation(format!("{THREADS_ENV}={v} is not a thread count"))),
            Err(_) => Ok(0),
        },
    }
}

impl Cli {
    pub fn into_run_config(self) -> Result<RunConfig, CliError> {
        let config = self
            .config
            .ok_or_else(|| CliError::Validation("--config is required".into()))?;
        let output_path = self
            .output
            .ok_or_else(|| CliError::Validation("--output is required".into()))?;
        let payload = std::fs::read(&config)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", config.display())))?;
        Ok(RunConfig {
            command: self.command,
            payload,
            output_path,
            format: self.format,
            seed: self.seed,
            threads: resolve_threads(self.threads)?,
        })
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = cli.into_run_config().and_then(|cfg| run(&cfg));
    match outcome {
        Ok(outcome) if outcome.violations > 0 => {
            eprintln!("{}", outcome.summary);
            2
        }
        Ok(outcome) => {
            println!("{}", outcome.summary);
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_writer_sorts_keys_and_fixes_precision() {
        let v: Value = serde_json::from_str(r#"{"b": 0.1, "a": [1, -2, 3.5], "c": {}, "d": null}"#).unwrap();
        let mut s = String::new();
        write_json(&v, 0, &mut s);
        let expected = "{\n  \"a\": [\n    1,\n    -2,\n    3.5000000000000000e0\n  ],\n  \"b\": 1.0000000000000001e-1,\n  \"c\": {},\n  \"d\": null\n}";
        assert_eq!(s, expected);
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"].as_f64(), Some(0.1));
    }

    #[test]
    fn scenario_descriptor_kinds_parse() {
        let text = r#"{"probs": [0.3, 0.0], "unitary": {"kind": "explicit", "dim": 2,
            "re": [[1, 0], [0, 1]], "im": [[0, 0], [0, 0]]}, "pattern": [0]}"#;
        let s: Scenario = serde_json::from_str(text).unwrap();
        assert_eq!(s.unitary.build(None).unwrap(), Unitary::identity(2).unwrap());
        for kind in [
            r#"{"kind": "epsilon_scheme", "n_modes": 4, "epsilon": 0.001}"#,
            r#"{"kind": "dft", "dim": 3}"#,
            r#"{"kind": "haar", "dim": 3, "seed": 5}"#,
            r#"{"kind": "givens", "dim": 2, "angles": [0.3], "phases": [0.1, 0.0, 0.0]}"#,
        ] {
            let spec: UnitarySpec = serde_json::from_str(kind).unwrap();
            assert!(spec.build(None).is_ok(), "{kind}");
        }
        assert!(serde_json::from_str::<UnitarySpec>(r#"{"kind": "lossy", "dim": 2}"#).is_err());
    }

    #[test]
    fn error_exit_codes() {
        assert_eq!(CliError::from(Error::NumericIntegrity("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(Error::PMaxOne).exit_code(), 1);
        assert_eq!(CliError::Validation("bad".into()).exit_code(), 1);
    }
}
