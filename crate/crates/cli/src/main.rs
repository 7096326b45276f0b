//! `triquad` — single-pair queries, range sweeps and quadratic-field reports.
//!
//! Exit codes: 0 success, 1 invalid input or I/O failure, 2 unsupported
//! configuration, 3 inconclusive α bit, 4 inconsistency (Kuroda mismatch or a
//! violated identity).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::Value;

use triquad::class2::{h2, h2_fast, CaseShape};
use triquad::pell::{fundamental_unit, UnitCache};
use triquad::record::{analyze, scan, Analysis, ResultRecord, ScanFilter};
use triquad::triquad::{EngineConfig, TheoremId};
use triquad::Error;

const EXIT_INVALID: u8 = 1;
const EXIT_UNSUPPORTED: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;
const EXIT_INCONSISTENT: u8 = 4;

#[derive(Parser)]
#[command(name = "triquad", version, about = "Unit groups and 2-class numbers of Q(√2, √p, √q)")]
struct Cli {
    /// TOML file setting denom_bound, max_precision_bits, exact_fallback and cache.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Unit cache file (line-delimited JSON); overrides TRIQUAD_CACHE and the config file.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Largest root denominator tried by the square test (default 16pq).
    #[arg(long, global = true)]
    denom_bound: Option<u64>,
    /// Precision ceiling of the square test, in bits.
    #[arg(long = "max-precision", global = true)]
    max_precision: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline for one pair (p, q).
    Classify {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        q: u64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Write the record here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every supported pair of distinct odd primes p ≤ p-max, q ≤ q-max.
    Scan {
        #[arg(long, default_value_t = 100)]
        p_max: u64,
        #[arg(long, default_value_t = 100)]
        q_max: u64,
        /// `type22`, a full theorem label such as `Thm3.3/N=+1`, or a family such as `Thm3.12`.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Write records here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// 2-class number of Q(√d).
    H2 {
        #[arg(long, allow_negative_numbers = true)]
        d: i64,
    },
    /// Fundamental unit of Q(√d).
    Unit {
        #[arg(long)]
        d: u64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// One JSON object per line.
    Json,
    /// `key: value` lines.
    Text,
    /// Header row plus one row per record.
    Csv,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    denom_bound: Option<u64>,
    max_precision_bits: Option<u32>,
    exact_fallback: Option<bool>,
    cache: Option<PathBuf>,
}

/// A failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Inconclusive(_) => EXIT_INCONCLUSIVE,
            Error::NonIntegralKuroda(_) | Error::Inconsistent(_) | Error::NoAdmissibleCase(_) => EXIT_INCONSISTENT,
            _ => EXIT_INVALID,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(what: &str, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_INVALID,
        message: format!("{what}: {e}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_failure(&path.display().to_string(), e))?;
            toml::from_str::<ConfigFile>(&text).map_err(|e| io_failure(&path.display().to_string(), e))?
        }
        None => ConfigFile::default(),
    };
    let mut cfg = EngineConfig::default();
    cfg.square.denom_bound = cli.denom_bound.or(file.denom_bound);
    if let Some(bits) = cli.max_precision.or(file.max_precision_bits) {
        cfg.square.max_precision_bits = bits;
    }
    if let Some(fallback) = file.exact_fallback {
        cfg.exact_fallback = fallback;
    }
    let cache_path = cli
        .cache
        .clone()
        .or_else(|| std::env::var_os("TRIQUAD_CACHE").map(PathBuf::from))
        .or(file.cache);
    let cache = cache_path.map(UnitCache::open).transpose()?;

    let outcome = match &cli.command {
        Command::Classify { p, q, format, out } => cmd_classify(*p, *q, *format, out.as_deref(), &cfg),
        Command::Scan {
            p_max,
            q_max,
            filter,
            format,
            out,
        } => cmd_scan(*p_max, *q_max, filter.as_deref(), *format, out.as_deref(), &cfg),
        Command::H2 { d } => cmd_h2(*d),
        Command::Unit { d } => cmd_unit(*d),
    };
    if let Some(cache) = cache {
        if let Err(e) = cache.persist() {
            eprintln!("warning: could not update unit cache {}: {e}", cache.path().display());
        }
    }
    outcome
}

// ---------------------------------------------------------------------------
// classify / scan

/// Exit code for one analysed pair, with the reason printed to stderr.
fn verdict(a: &Analysis) -> u8 {
    let c = &a.classification;
    if let TheoremId::Unsupported { nearest } = &c.theorem {
        eprintln!("unsupported: ({},{}) is covered by no theorem; nearest: {nearest}", c.p, c.q);
        return EXIT_UNSUPPORTED;
    }
    let r = a.report.as_ref().unwrap();
    if !a.is_consistent() {
        eprintln!("inconsistent: ({},{}) {}: {}", c.p, c.q, c.theorem, r.notes.join("; "));
        return EXIT_INCONSISTENT;
    }
    if !a.is_resolved() {
        eprintln!("inconclusive: ({},{}) has unresolved α bits", c.p, c.q);
        return EXIT_INCONCLUSIVE;
    }
    0
}

fn cmd_classify(p: u64, q: u64, format: Format, out: Option<&Path>, cfg: &EngineConfig) -> Result<u8, Failure> {
    let start = Instant::now();
    let a = analyze(p, q, cfg)?;
    let mut rec = ResultRecord::from_analysis(&a, cfg);
    rec.wall_time_ms = Some(start.elapsed().as_millis().to_string());
    let mut sink = open_sink(out)?;
    let written = match format {
        Format::Json => writeln!(sink, "{}", serde_json::to_string(&rec).unwrap()),
        Format::Text => write_text(&mut sink, &rec),
        Format::Csv => write_csv(&mut sink, std::slice::from_ref(&rec)),
    };
    written
        .and_then(|_| sink.flush())
        .map_err(|e| io_failure("writing record", e))?;
    Ok(verdict(&a))
}

fn cmd_scan(
    p_max: u64,
    q_max: u64,
    filter: Option<&str>,
    format: Format,
    out: Option<&Path>,
    cfg: &EngineConfig,
) -> Result<u8, Failure> {
    let filter = filter.map(ScanFilter::parse);
    let analyses = scan(p_max, q_max, filter.as_ref(), cfg)?;
    let records: Vec<ResultRecord> = analyses.iter().map(|a| ResultRecord::from_analysis(a, cfg)).collect();

    let mut sink = open_sink(out)?;
    let target = out.map_or_else(|| "standard output".to_string(), |p| p.display().to_string());
    let mut written = 0;
    let result = match format {
        Format::Csv => write_csv(&mut sink, &records).map(|_| written = records.len()),
        Format::Json | Format::Text => records.iter().try_for_each(|rec| {
            match format {
                Format::Json => writeln!(sink, "{}", serde_json::to_string(rec).unwrap()),
                _ => write_text(&mut sink, rec).and_then(|_| writeln!(sink)),
            }?;
            written += 1;
            Ok(())
        }),
    };
    if let Err(e) = result.and_then(|_| sink.flush()) {
        return Err(io_failure(
            &format!("PARTIAL OUTPUT: {written} of {} records written to {target}", records.len()),
            e,
        ));
    }

    let mut per_theorem: BTreeMap<String, usize> = BTreeMap::new();
    let mut per_structure: BTreeMap<String, usize> = BTreeMap::new();
    for rec in &records {
        *per_theorem.entry(rec.theorem.clone()).or_default() += 1;
        *per_structure.entry(rec.structure.clone().unwrap_or_default()).or_default() += 1;
    }
    let inconsistent: Vec<&Analysis> = analyses.iter().filter(|a| !a.is_consistent()).collect();
    let unresolved = analyses.iter().filter(|a| !a.is_resolved()).count();
    eprintln!(
        "scan p ≤ {p_max}, q ≤ {q_max}{}: {} supported pairs",
        filter.map_or(String::new(), |f| format!(" (filter {f:?})")),
        records.len()
    );
    for (t, n) in &per_theorem {
        eprintln!("  theorem   {t:<16} {n}");
    }
    for (s, n) in &per_structure {
        eprintln!("  structure {s:<16} {n}");
    }
    eprintln!("  unresolved α: {unresolved}; inconsistent: {}", inconsistent.len());
    for a in &inconsistent {
        let c = &a.classification;
        eprintln!("  inconsistent ({},{}) {}", c.p, c.q, c.theorem);
    }
    Ok(if !inconsistent.is_empty() {
        EXIT_INCONSISTENT
    } else if unresolved > 0 {
        EXIT_INCONCLUSIVE
    } else {
        0
    })
}

fn open_sink(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| io_failure(&path.display().to_string(), e))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Flattens a JSON value into one cell: lists joined by `; `, maps as `k=v`.
fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(cell).collect::<Vec<_>>().join("; "),
        Value::Object(map) => map
            .iter()
            .map(|(k, v)| format!("{k}={}", cell(v)))
            .collect::<Vec<_>>()
            .join("; "),
        other => other.to_string(),
    }
}

fn fields(rec: &ResultRecord) -> serde_json::Map<String, Value> {
    match serde_json::to_value(rec).unwrap() {
        Value::Object(map) => map,
        _ => unreachable!("records serialize as objects"),
    }
}

fn write_text(w: &mut dyn Write, rec: &ResultRecord) -> io::Result<()> {
    for (k, v) in fields(rec) {
        writeln!(w, "{k}: {}", cell(&v))?;
    }
    Ok(())
}

fn write_csv(w: &mut dyn Write, records: &[ResultRecord]) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let header: Vec<String> = match records.first() {
        Some(rec) => fields(rec).keys().cloned().collect(),
        None => fields(&empty_record()).keys().cloned().collect(),
    };
    out.write_record(&header)?;
    for rec in records {
        let map = fields(rec);
        out.write_record(header.iter().map(|k| map.get(k).map(cell).unwrap_or_default()))?;
    }
    out.flush()
}

/// Supplies the column names for an empty scan.
fn empty_record() -> ResultRecord {
    let a = analyze(17, 3, &EngineConfig::default()).expect("(17,3) is supported");
    ResultRecord::from_analysis(&a, &EngineConfig::default())
}

// ---------------------------------------------------------------------------
// h2 / unit

fn cmd_h2(d: i64) -> Result<u8, Failure> {
    let value = h2(d)?;
    println!("{value}");
    match CaseShape::for_radicand(d).and_then(|shape| h2_fast(d, shape).map(|v| (shape, v))) {
        Some((shape, fast)) if fast == value => {
            eprintln!("Lemma 2.6 ({shape:?}) gives {fast}: agrees with the forms oracle");
        }
        Some((shape, fast)) => {
            eprintln!("inconsistent: Lemma 2.6 ({shape:?}) gives {fast}, the forms oracle {value}");
            return Ok(EXIT_INCONSISTENT);
        }
        None => eprintln!("Lemma 2.6 does not fix h₂({d}); forms oracle only"),
    }
    Ok(0)
}

fn cmd_unit(d: u64) -> Result<u8, Failure> {
    let u = fundamental_unit(d)?;
    println!("{u}");
    println!("digits: {}, continued-fraction period: {}", u.digits(), u.cf_period);
    Ok(0)
}
