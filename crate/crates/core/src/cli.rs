//! The `ou` command line. Exit codes: 0 pass, 1 violation or failure, 2 usage
//! error (bad arguments or unreadable input files).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::Serialize;
use serde_json::json;

use crate::bounds::{self, DownloadFunction};
use crate::field::{self, FpMatrix, PrimeField};
use crate::harness::files::{self, ShardFile, SpecFile};
use crate::harness::trace::run_trace;
use crate::harness::{CodeKind, CodeSpec, HarnessError};
use crate::shard::Diagnosis;
use crate::{mbr, mds};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ou", version, about = "Erasure codes with oblivious single-symbol updates")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a code and write its spec file.
    Codegen(CodegenArgs),
    /// Encode a message file into one shard file per node.
    Encode(EncodeArgs),
    /// Recover the message from exactly k shard files.
    Decode(DecodeArgs),
    /// Update a stale shard from helper shards.
    Update(UpdateArgs),
    /// Run a trace against a simulated cluster and print the report.
    Simulate(SimulateArgs),
    /// Check the conditions a spec must satisfy.
    VerifySpec(VerifySpecArgs),
    /// Produce a lower-bound witness.
    Witness(WitnessArgs),
}

#[derive(Debug, Args)]
struct CodegenArgs {
    #[arg(long, value_enum)]
    kind: CodeKind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Field size. Required for mbr; defaults to the smallest valid prime for mds.
    #[arg(long)]
    q: Option<u64>,
    /// Message matrices (mbr).
    #[arg(long, default_value_t = 1)]
    theta: usize,
    /// Message length B (mds).
    #[arg(long)]
    b: Option<usize>,
    #[arg(long, env = "OU_SEED", default_value_t = 0)]
    seed: u64,
    /// Random draws per field before giving up (mbr).
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
    /// On an exhausted budget, retry over larger primes (mbr).
    #[arg(long)]
    search_q: bool,
    /// Fields tried by --search-q, each the next prime above twice the last.
    #[arg(long, default_value_t = 16)]
    max_primes: usize,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[arg(long)]
    spec: PathBuf,
    /// JSON array of B symbols.
    #[arg(long)]
    msg: PathBuf,
    /// Receives node-<id>.json for every node.
    #[arg(long)]
    outdir: PathBuf,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    shards: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct UpdateArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    stale: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    helpers: Vec<PathBuf>,
    /// Where to write the updated shard.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    spec: PathBuf,
    /// JSON-lines trace.
    #[arg(long)]
    trace: PathBuf,
    /// Seeds the initial message.
    #[arg(long, env = "OU_SEED", default_value_t = 0)]
    seed: u64,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifySpecArgs {
    #[arg(long)]
    spec: PathBuf,
}

/// Which lower bound to witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Theorem {
    /// Two symbols from one fully informed helper.
    #[value(name = "1")]
    One,
    /// Two symbols from each of k MDS helpers.
    #[value(name = "4")]
    Four,
    /// k-1 MDS helpers never suffice.
    #[value(name = "k-1")]
    KMinusOne,
}

#[derive(Debug, Args)]
struct WitnessArgs {
    #[arg(long, value_enum)]
    theorem: Theorem,
    /// MDS spec file (`4` and `k-1`).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Field size for `1`.
    #[arg(long, default_value_t = 3)]
    q: u64,
    /// Rows of the random stale generator for `1`.
    #[arg(long, default_value_t = 2)]
    a: usize,
    /// Columns of the random stale generator for `1`.
    #[arg(long, default_value_t = 3)]
    b: usize,
    /// Stale node (`4` and `k-1`); defaults to node n.
    #[arg(long)]
    stale: Option<usize>,
    /// Helper ids (k for `4`, k-1 for `k-1`); default lowest ids.
    #[arg(long, num_args = 1..)]
    helpers: Option<Vec<usize>>,
    /// Distinct outputs of the random download function; default q^2 - 1.
    #[arg(long)]
    range: Option<usize>,
    #[arg(long, env = "OU_SEED", default_value_t = 0)]
    seed: u64,
}

enum CliError {
    Usage(String),
    Failure(String),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Mbr(_) | HarnessError::Mds(_) | HarnessError::Field(_) | HarnessError::HelperCount { .. } => {
                CliError::Failure(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn failure(e: impl ToString) -> CliError {
    CliError::Failure(e.to_string())
}

fn usage(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

type CliResult = Result<i32, CliError>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let sink: &mut dyn Write = if code == 0 { out } else { err };
            let _ = write!(sink, "{text}");
            return if code == 0 { EXIT_PASS } else { EXIT_USAGE };
        }
    };
    let result = match cli.command {
        Command::Codegen(a) => codegen(a, out),
        Command::Encode(a) => encode(a, out),
        Command::Decode(a) => decode(a, out),
        Command::Update(a) => update(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::VerifySpec(a) => verify_spec(a, out),
        Command::Witness(a) => witness(a, out),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Failure(msg)) => {
            let _ = writeln!(err, "failure: {msg}");
            EXIT_FAILURE
        }
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    out.write_all(files::to_json(value).as_bytes()).map_err(usage)
}

fn codegen(a: CodegenArgs, out: &mut dyn Write) -> CliResult {
    let spec = match a.kind {
        CodeKind::Mbr => {
            let q = a.q.ok_or_else(|| usage("--q is required for --kind mbr"))?;
            let found = if a.search_q {
                mbr::generate_searching_q(a.n, a.k, a.theta, q, a.seed, a.budget, a.max_primes)
            } else {
                mbr::generate(a.n, a.k, a.theta, q, a.seed, a.budget)
            };
            match found {
                Ok(s) => CodeSpec::Mbr(s),
                Err(e @ mbr::MbrError::BudgetExhausted { .. }) => return Err(failure(e)),
                Err(e) => return Err(usage(e)),
            }
        }
        CodeKind::Mds => {
            let b = a.b.ok_or_else(|| usage("--b is required for --kind mds"))?;
            CodeSpec::Mds(mds::generate(a.n, a.k, b, a.q).map_err(usage)?)
        }
    };
    let file = SpecFile::from_spec(&spec, a.seed);
    match a.out {
        Some(path) => files::write_json(&path, &file)?,
        None => emit(out, &file)?,
    }
    Ok(EXIT_PASS)
}

fn encode(a: EncodeArgs, out: &mut dyn Write) -> CliResult {
    let spec = files::load_spec(&a.spec)?;
    let msg = files::load_message(&a.msg, &spec)?;
    fs::create_dir_all(&a.outdir).map_err(|e| usage(format!("{}: {e}", a.outdir.display())))?;
    for shard in spec.encode(&msg)? {
        let path = a.outdir.join(format!("node-{}.json", shard.node_id));
        files::write_json(&path, &ShardFile::from_shard(&shard))?;
        writeln!(out, "{}", path.display()).map_err(usage)?;
    }
    Ok(EXIT_PASS)
}

fn load_shards(spec: &CodeSpec, paths: &[PathBuf]) -> Result<Vec<crate::shard::NodeShard>, CliError> {
    paths
        .iter()
        .map(|p| files::load_shard(p, spec).map_err(CliError::from))
        .collect()
}

fn decode(a: DecodeArgs, out: &mut dyn Write) -> CliResult {
    let spec = files::load_spec(&a.spec)?;
    let shards = load_shards(&spec, &a.shards)?;
    let msg = spec.decode(&shards)?;
    emit(out, &field::values(&msg))?;
    Ok(EXIT_PASS)
}

fn update(a: UpdateArgs, out: &mut dyn Write) -> CliResult {
    let spec = files::load_spec(&a.spec)?;
    let stale = files::load_shard(&a.stale, &spec)?;
    let helpers = load_shards(&spec, &a.helpers)?;
    let refs: Vec<_> = helpers.iter().collect();
    let t = spec.update(&stale, &refs)?;
    let diagnosis = match t.diagnosis {
        Diagnosis::NoChange => json!({"kind": "no_change"}),
        Diagnosis::Located { location, delta } => {
            json!({"kind": "located", "index": location + 1, "delta": delta.value()})
        }
    };
    let q = spec.field().modulus();
    let stats = crate::harness::CommStats::new(t.symbols_downloaded(), 1, q, spec.message_len());
    emit(
        out,
        &json!({
            "stale": t.stale_id,
            "helpers": t.helper_ids,
            "downloaded": field::values(&t.downloaded),
            "diagnosis": diagnosis,
            "stats": stats,
            "shard": ShardFile::from_shard(&t.shard),
        }),
    )?;
    if let Some(path) = a.out {
        files::write_json(&path, &ShardFile::from_shard(&t.shard))?;
    }
    Ok(EXIT_PASS)
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> CliResult {
    let report = run_trace(&a.spec, &a.trace, a.seed)?;
    let text = report.to_json();
    if let Some(path) = &a.out {
        fs::write(path, &text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }
    out.write_all(text.as_bytes()).map_err(usage)?;
    Ok(if report.pass { EXIT_PASS } else { EXIT_FAILURE })
}

fn verify_spec(a: VerifySpecArgs, out: &mut dyn Write) -> CliResult {
    let spec = files::load_spec(&a.spec)?;
    let (violations, checks): (Vec<String>, Vec<&str>) = match &spec {
        CodeSpec::Mbr(s) => {
            let report = mbr::verify_conditions(s);
            let v = report
                .minor
                .iter()
                .map(|m| format!("psi: {m}"))
                .chain(report.ratio.iter().map(|r| format!("ratio: {r}")))
                .collect();
            (v, vec!["psi square submatrices nonsingular", "helper ratios pairwise distinct"])
        }
        CodeSpec::Mds(s) => {
            let v = s
                .generator()
                .all_square_submatrices_nonsingular(usize::MAX)
                .err()
                .map(|m| format!("generator: {m}"))
                .into_iter()
                .collect();
            (v, vec!["generator square submatrices nonsingular"])
        }
    };
    let pass = violations.is_empty();
    emit(
        out,
        &json!({
            "kind": spec.kind(),
            "fingerprint": spec.fingerprint(),
            "checks": checks,
            "violations": violations,
            "pass": pass,
        }),
    )?;
    Ok(if pass { EXIT_PASS } else { EXIT_FAILURE })
}

fn mds_from(path: Option<&Path>) -> Result<mds::MdsCodeSpec, CliError> {
    let path = path.ok_or_else(|| usage("--spec is required for this theorem"))?;
    match files::load_spec(path)? {
        CodeSpec::Mds(s) => Ok(s),
        CodeSpec::Mbr(_) => Err(usage("this theorem needs an mds spec")),
    }
}

/// Default helpers: the lowest `count` ids other than `stale`.
fn default_helpers(n: usize, stale: usize, count: usize) -> Vec<usize> {
    (1..=n).filter(|&u| u != stale).take(count).collect()
}

fn witness(a: WitnessArgs, out: &mut dyn Write) -> CliResult {
    let mut rng = SplitMix64::seed_from_u64(a.seed);
    match a.theorem {
        Theorem::One => {
            let f = PrimeField::new(a.q).map_err(usage)?;
            let g = (0..10_000)
                .map(|_| FpMatrix::random(f, a.a, a.b, &mut rng))
                .find(|g| g.rank() == a.a)
                .ok_or_else(|| usage("no full-row-rank generator found; need a <= b"))?;
            let probes = bounds::thm1_probe_set(&g).map_err(usage)?;
            let range = a.range.unwrap_or(probes.len() - 1);
            let table = DownloadFunction::random(&probes, range, &mut rng).map_err(usage)?;
            let w = bounds::thm1_witness(&g, &table).map_err(failure)?;
            emit(
                out,
                &json!({
                    "theorem": "1",
                    "q": a.q,
                    "stale_generator": g.to_rows().iter().map(|r| field::values(r)).collect::<Vec<_>>(),
                    "range_size": table.range_size(),
                    "m_a": field::values(w.m_a()),
                    "m_b": field::values(w.m_b()),
                    "m_c": field::values(w.m_c()),
                    "label": table.label(w.m_a()),
                }),
            )?;
        }
        Theorem::KMinusOne => {
            let spec = mds_from(a.spec.as_deref())?;
            let f = spec.field();
            let stale = a.stale.unwrap_or(spec.n());
            let helpers = a.helpers.unwrap_or_else(|| default_helpers(spec.n(), stale, spec.k() - 1));
            let stale_msg = f.random_vector(&mut rng, spec.message_len());
            let mut updated = stale_msg.clone();
            let index = rng.gen_range(0..spec.message_len());
            updated[index] += f.element(rng.gen_range(1..u64::from(f.modulus())));
            let phantom = bounds::mds_phantom_message(&spec, stale, &helpers, &stale_msg, &updated).map_err(usage)?;
            emit(
                out,
                &json!({
                    "theorem": "k-1",
                    "stale": stale,
                    "helpers": helpers,
                    "stale_msg": field::values(&stale_msg),
                    "updated_msg": field::values(&updated),
                    "changed_index": index + 1,
                    "phantom": field::values(&phantom),
                    "phantom_differs_from_update": phantom != updated,
                }),
            )?;
            if phantom == updated {
                return Ok(EXIT_FAILURE);
            }
        }
        Theorem::Four => {
            let spec = mds_from(a.spec.as_deref())?;
            let stale = a.stale.unwrap_or(spec.n());
            let helpers = a.helpers.unwrap_or_else(|| default_helpers(spec.n(), stale, spec.k()));
            let genies = &helpers[..helpers.len().saturating_sub(1)];
            let probes: Vec<_> = bounds::thm4_probe_set(&spec, stale, genies)
                .map_err(usage)?
                .into_iter()
                .map(|p| p.transformed)
                .collect();
            let q = f64::from(spec.field().modulus());
            let range = a.range.unwrap_or((q * q) as usize - 1);
            let table = DownloadFunction::random(&probes, range, &mut rng).map_err(usage)?;
            let w = bounds::thm4_witness(&spec, stale, &helpers, &table).map_err(failure)?;
            let scenario = |s: &bounds::UpdateScenario| {
                json!({"stale_msg": field::values(&s.stale_msg), "updated_msg": field::values(&s.updated_msg)})
            };
            emit(
                out,
                &json!({
                    "theorem": "4",
                    "stale": w.stale(),
                    "helpers": w.helpers(),
                    "range_size": table.range_size(),
                    "first": scenario(w.first()),
                    "second": scenario(w.second()),
                }),
            )?;
        }
    }
    Ok(EXIT_PASS)
}
