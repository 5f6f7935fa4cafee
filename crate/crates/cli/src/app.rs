//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ftn_core::dilation::{cp_extension, hom_extension_check, CpExtension, HomExtensionReport, RANGE_INPUT_TOL};
use ftn_core::norms::{
    dec_norm_with, factorization_value, haagerup_rep_lower, haagerup_upper, min_norm_estimate, unitary_sup_with,
    EstimateConfig, FactorizationCertificate, FactorizationCheck, HaagerupLower, NormEstimate, SupConfig,
};
use ftn_core::verify::{random_tuple, run_all_timed, Report, SuiteName, VerifyConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cache::Cache;
use crate::io::{parse_input, serialize_input, InputDocument, InputError, Payload, SCHEMA};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SUITE_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

const DEFAULT_TOL: f64 = 1e-9;
const DEFAULT_SAMPLES: usize = 10_000;
const DEFAULT_MULT_MAX: usize = 3;

#[derive(Debug, Parser)]
#[command(name = "ftn", version, about = "Operator-space tensor norms of matrix tuples")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for every stochastic component.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Solver gap tolerance; for `verify`, the lemma4 suite tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Unitary dimensions to search (comma separated).
    #[arg(long, global = true, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Bypass the result cache.
    #[arg(long, global = true)]
    pub no_cache: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Factorization norm with a certificate.
    Decnorm {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Upper and lower bounds on the min-norm.
    Minnorm {
        #[arg(long = "in")]
        input: PathBuf,
        /// Write the convergence trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Haagerup norm bounds of a tensor element.
    Hnorm {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_MULT_MAX)]
        mult_max: usize,
    },
    /// Completely positive extension and multiplicativity check.
    Cpext {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run the property suites.
    Verify {
        /// `all` or a comma-separated list of suite names.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Override the instance count of every selected suite.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Time both engines on random tuples.
    Bench {
        /// Tuples per dimension.
        #[arg(long, default_value_t = 3)]
        count: usize,
        /// Items per tuple.
        #[arg(long, default_value_t = 3)]
        items: usize,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(#[from] InputError),
    #[error("{0}")]
    Core(#[from] ftn_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Usage(_) => EXIT_INPUT,
            CliError::Core(e) if e.is_input_error() => EXIT_INPUT,
            _ => EXIT_SOLVER,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            CliError::Input(e) => e.code.as_str(),
            CliError::Core(e) if e.is_input_error() => "E_VALUE",
            CliError::Core(_) => "E_SOLVER",
            CliError::Usage(_) => "E_USAGE",
            CliError::Io(_) | CliError::Output(_) => "E_IO",
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Settings after merging flags over document config and defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Effective {
    seed: u64,
    tol: f64,
    max_iter: usize,
    dims: Option<Vec<usize>>,
    restarts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mult_max: Option<usize>,
}

fn effective(g: &GlobalArgs, doc: Option<&InputDocument>) -> CliResult<Effective> {
    let cfg = doc.map(|d| d.config.clone()).unwrap_or_default();
    let dims = g.dims.clone().or(cfg.dims);
    if let Some(d) = &dims {
        if d.is_empty() || d.contains(&0) {
            return Err(CliError::Usage("--dims needs a nonempty list of positive dimensions".into()));
        }
    }
    let e = Effective {
        seed: g.seed.or(cfg.seed).unwrap_or(0),
        tol: g.tol.or(cfg.tol).unwrap_or(DEFAULT_TOL),
        max_iter: g.max_iter.or(cfg.max_iter).unwrap_or(ftn_core::sdp::DEFAULT_MAX_ITER),
        dims,
        restarts: g.restarts.or(cfg.restarts).unwrap_or(ftn_core::norms::DEFAULT_RESTARTS),
        samples: None,
        mult_max: None,
    };
    if !(e.tol > 0.0) || !e.tol.is_finite() {
        return Err(CliError::Usage("--tol must be a positive number".into()));
    }
    if e.restarts == 0 || e.max_iter == 0 {
        return Err(CliError::Usage("--restarts and --max-iter must be positive".into()));
    }
    Ok(e)
}

fn read_doc(path: &Path) -> CliResult<InputDocument> {
    let text = fs::read_to_string(path)?;
    Ok(parse_input(&text)?)
}

fn wrong_payload(doc: &InputDocument, want: &str) -> CliError {
    CliError::Input(InputError {
        code: crate::io::ErrorCode::Schema,
        location: "/".into(),
        message: format!("this command needs a `{want}` payload, found `{}`", doc.payload.kind()),
    })
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| CliError::Output(e.to_string()))
}

/// Runs `compute` unless the cache already holds the result for this key.
fn cached<T: Serialize + DeserializeOwned>(
    cache: &Cache,
    command: &str,
    doc: &InputDocument,
    eff: &Effective,
    compute: impl FnOnce() -> CliResult<T>,
) -> CliResult<(T, String)> {
    let key = Cache::key(command, &serialize_input(doc), &serde_json::to_string(eff).expect("config serializes"));
    if let Some(text) = cache.get(&key) {
        if let Ok(v) = serde_json::from_str::<T>(&text) {
            return Ok((v, text));
        }
    }
    let v = compute()?;
    let text = to_json(&v)?;
    if let Err(e) = cache.put(&key, &text) {
        eprintln!("warning: could not write cache entry: {e}");
    }
    Ok((v, text))
}

fn emit(g: &GlobalArgs, text: &str) -> CliResult<()> {
    match &g.out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let out = (|| -> csv::Result<Vec<u8>> {
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    })();
    let bytes = out.map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}

/// Header of the convergence trace.
pub const TRACE_HEADER: [&str; 4] = ["dimension", "restart", "best_value", "upper_bound"];

/// One row per schedule dimension, in schedule order. `restart` is the
/// number of restarts completed at that dimension.
pub fn trace_csv(estimate: &NormEstimate) -> CliResult<String> {
    csv_text(
        &TRACE_HEADER,
        estimate.trace.iter().map(|t| {
            vec![t.dimension.to_string(), t.restarts.to_string(), t.best_value.to_string(), estimate.upper.to_string()]
        }),
    )
}

pub fn emit_trace(estimate: &NormEstimate, path: &Path) -> CliResult<()> {
    fs::write(path, trace_csv(estimate)?)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct DecnormOutput {
    schema: String,
    command: String,
    value: f64,
    certificate: FactorizationCertificate,
    check: FactorizationCheck,
}

#[derive(Debug, Serialize, Deserialize)]
struct MinnormOutput {
    schema: String,
    command: String,
    relative_gap: f64,
    estimate: NormEstimate,
}

#[derive(Debug, Serialize, Deserialize)]
struct HnormOutput {
    schema: String,
    command: String,
    upper: f64,
    lower: f64,
    relative_gap: f64,
    certificate: FactorizationCertificate,
    representation: HaagerupLower,
}

#[derive(Debug, Serialize, Deserialize)]
struct CpextOutput {
    schema: String,
    command: String,
    extension: CpExtension,
    #[serde(skip_serializing_if = "Option::is_none")]
    hom_check: Option<HomExtensionReport>,
}

fn decnorm(g: &GlobalArgs, cache: &Cache, input: &Path) -> CliResult<i32> {
    let doc = read_doc(input)?;
    let eff = effective(g, Some(&doc))?;
    let Payload::Tuple(t) = &doc.payload else { return Err(wrong_payload(&doc, "tuple")) };
    let (out, text) = cached(cache, "decnorm", &doc, &eff, || {
        let (value, certificate) = dec_norm_with(t, eff.tol, eff.max_iter)?;
        let check = factorization_value(t, &certificate)?;
        Ok(DecnormOutput { schema: SCHEMA.into(), command: "decnorm".into(), value, certificate, check })
    })?;
    let text = match g.format {
        Format::Json => text,
        Format::Csv => csv_text(&["value", "certificate_value", "residual"], [vec![
            out.value.to_string(),
            out.check.value.to_string(),
            out.check.residual.to_string(),
        ]])?,
    };
    emit(g, &text)?;
    if let Some(path) = &g.out {
        println!("value {}", out.value);
        println!("certificate {}", path.display());
    }
    Ok(EXIT_OK)
}

fn minnorm(g: &GlobalArgs, cache: &Cache, input: &Path, trace: Option<&Path>) -> CliResult<i32> {
    let doc = read_doc(input)?;
    let eff = effective(g, Some(&doc))?;
    let Payload::Tuple(t) = &doc.payload else { return Err(wrong_payload(&doc, "tuple")) };
    let (out, text) = cached(cache, "minnorm", &doc, &eff, || {
        let cfg = EstimateConfig {
            gap_tol: eff.tol,
            sdp_max_iter: eff.max_iter,
            sup: SupConfig { schedule: eff.dims.clone().unwrap_or_default(), restarts: eff.restarts, seed: eff.seed, ..SupConfig::default() },
        };
        let estimate = min_norm_estimate(t, &cfg)?;
        Ok(MinnormOutput { schema: SCHEMA.into(), command: "minnorm".into(), relative_gap: estimate.relative_gap(), estimate })
    })?;
    if let Some(path) = trace {
        emit_trace(&out.estimate, path)?;
    }
    let text = match g.format {
        Format::Json => text,
        Format::Csv => trace_csv(&out.estimate)?,
    };
    emit(g, &text)?;
    Ok(EXIT_OK)
}

fn hnorm(g: &GlobalArgs, cache: &Cache, input: &Path, samples: usize, mult_max: usize) -> CliResult<i32> {
    let doc = read_doc(input)?;
    let mut eff = effective(g, Some(&doc))?;
    eff.samples = Some(samples);
    eff.mult_max = Some(mult_max);
    let Payload::Element(x) = &doc.payload else { return Err(wrong_payload(&doc, "element")) };
    let (out, text) = cached(cache, "hnorm", &doc, &eff, || {
        let (upper, certificate) = haagerup_upper(x, eff.max_iter)?;
        let representation = haagerup_rep_lower(x, samples, mult_max, eff.seed)?;
        let lower = representation.value;
        let relative_gap = if upper > 0.0 { (upper - lower) / upper } else { 0.0 };
        Ok(HnormOutput { schema: SCHEMA.into(), command: "hnorm".into(), upper, lower, relative_gap, certificate, representation })
    })?;
    let text = match g.format {
        Format::Json => text,
        Format::Csv => csv_text(&["upper", "lower", "relative_gap"], [vec![
            out.upper.to_string(),
            out.lower.to_string(),
            out.relative_gap.to_string(),
        ]])?,
    };
    emit(g, &text)?;
    Ok(EXIT_OK)
}

fn cpext(g: &GlobalArgs, cache: &Cache, input: &Path) -> CliResult<i32> {
    let doc = read_doc(input)?;
    let eff = effective(g, Some(&doc))?;
    let Payload::Extension { span, map } = &doc.payload else { return Err(wrong_payload(&doc, "extension")) };
    let (out, text) = cached(cache, "cpext", &doc, &eff, || {
        let extension = cp_extension(span, map)?;
        let unitary_images = map.images().iter().all(|t| t.unitarity_residual() <= RANGE_INPUT_TOL);
        let hom_check = if unitary_images { Some(hom_extension_check(span, map)?) } else { None };
        Ok(CpextOutput { schema: SCHEMA.into(), command: "cpext".into(), extension, hom_check })
    })?;
    let text = match g.format {
        Format::Json => text,
        Format::Csv => {
            let (feasible, verdict) = match (&out.extension, &out.hom_check) {
                (CpExtension::Feasible { .. }, Some(h)) => ("true", format!("{:?}", h.verdict)),
                (CpExtension::Feasible { .. }, None) => ("true", String::new()),
                (CpExtension::Infeasible(_), _) => ("false", "NoCpExtension".into()),
            };
            csv_text(&["feasible", "verdict"], [vec![feasible.into(), verdict]])?
        }
    };
    emit(g, &text)?;
    Ok(EXIT_OK)
}

fn parse_suites(spec: &str) -> CliResult<Vec<SuiteName>> {
    if spec == "all" {
        return Ok(SuiteName::ALL.to_vec());
    }
    spec.split(',')
        .map(|s| {
            SuiteName::parse(s.trim()).ok_or_else(|| {
                let known: Vec<&str> = SuiteName::ALL.iter().map(|n| n.as_str()).collect();
                CliError::Usage(format!("unknown suite `{s}`; known suites: all, {}", known.join(", ")))
            })
        })
        .collect()
}

fn unix_timestamp() -> String {
    let d = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    format!("{}.{:03}", d.as_secs(), d.subsec_millis())
}

/// Verify configuration from flags. `--tol` sets the lemma4 tolerance and
/// `--dims` the lemma4 tuple dimensions.
pub fn verify_config(g: &GlobalArgs, suite: &str, count: Option<usize>) -> CliResult<VerifyConfig> {
    let mut cfg = VerifyConfig { suites: parse_suites(suite)?, seed: g.seed.unwrap_or(0), ..VerifyConfig::default() };
    if let Some(t) = g.tol {
        cfg.lemma4_tol = t;
    }
    if let Some(d) = &g.dims {
        if d.is_empty() || d.contains(&0) {
            return Err(CliError::Usage("--dims needs a nonempty list of positive dimensions".into()));
        }
        cfg.lemma4_dims = d.clone();
    }
    if let Some(r) = g.restarts {
        cfg.restarts = r;
    }
    if let Some(c) = count {
        cfg.lemma4_count = c;
        cfg.gauge_count = c;
        cfg.commutant_count = c;
        cfg.free_product_count = c;
    }
    Ok(cfg)
}

fn verify(g: &GlobalArgs, suite: &str, count: Option<usize>) -> CliResult<i32> {
    let cfg = verify_config(g, suite, count)?;
    let start = Instant::now();
    let mut report: Report = run_all_timed(&cfg, &|| start.elapsed().as_secs_f64());
    if let Some(t) = report.timing.as_mut() {
        t.timestamp = Some(unix_timestamp());
    }
    let text = match g.format {
        Format::Json => to_json(&report)?,
        Format::Csv => csv_text(
            &["suite", "instances", "max_violation", "tolerance", "pass"],
            report.suites.iter().map(|s| {
                vec![s.name.clone(), s.instances.to_string(), s.max_violation.to_string(), s.tolerance.to_string(), s.pass.to_string()]
            }),
        )?,
    };
    emit(g, &text)?;
    Ok(if report.aggregate_pass { EXIT_OK } else { EXIT_SUITE_FAIL })
}

#[derive(Debug, Serialize)]
struct BenchRow {
    k: usize,
    n: usize,
    index: usize,
    upper: f64,
    lower: f64,
    relative_gap: f64,
    dec_seconds: f64,
    sup_seconds: f64,
}

fn bench(g: &GlobalArgs, count: usize, items: usize) -> CliResult<i32> {
    let eff = effective(g, None)?;
    if count == 0 || items == 0 {
        return Err(CliError::Usage("--count and --items must be positive".into()));
    }
    let dims = eff.dims.clone().unwrap_or_else(|| vec![1, 2, 3, 4]);
    let mut rows = Vec::new();
    for &k in &dims {
        for i in 0..count {
            let seed = ftn_core::seed::derive(eff.seed, &[k as u64, i as u64]);
            let t = random_tuple(items, k, None, seed)?;
            let t0 = Instant::now();
            let (upper, _) = dec_norm_with(&t, eff.tol, eff.max_iter)?;
            let dec_seconds = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let cfg = SupConfig { restarts: eff.restarts, seed, ..SupConfig::default() };
            let lower = unitary_sup_with(&t, &cfg)?.value;
            let sup_seconds = t1.elapsed().as_secs_f64();
            let relative_gap = if upper > 0.0 { (upper - lower) / upper } else { 0.0 };
            rows.push(BenchRow { k, n: items, index: i, upper, lower, relative_gap, dec_seconds, sup_seconds });
        }
    }
    let text = match g.format {
        Format::Json => to_json(&rows)?,
        Format::Csv => csv_text(
            &["k", "n", "index", "upper", "lower", "relative_gap", "dec_seconds", "sup_seconds"],
            rows.iter().map(|r| {
                vec![
                    r.k.to_string(),
                    r.n.to_string(),
                    r.index.to_string(),
                    r.upper.to_string(),
                    r.lower.to_string(),
                    r.relative_gap.to_string(),
                    r.dec_seconds.to_string(),
                    r.sup_seconds.to_string(),
                ]
            }),
        )?,
    };
    emit(g, &text)?;
    Ok(EXIT_OK)
}

fn dispatch(cli: &Cli) -> CliResult<i32> {
    let g = &cli.global;
    let cache = if g.no_cache { Cache::disabled() } else { Cache::from_env() };
    match &cli.command {
        Command::Decnorm { input } => decnorm(g, &cache, input),
        Command::Minnorm { input, trace } => minnorm(g, &cache, input, trace.as_deref()),
        Command::Hnorm { input, samples, mult_max } => hnorm(g, &cache, input, *samples, *mult_max),
        Command::Cpext { input } => cpext(g, &cache, input),
        Command::Verify { suite, count } => verify(g, suite, *count),
        Command::Bench { count, items } => bench(g, *count, *items),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            e.exit_code()
        }
    }
}
