use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use seqpt::error::Error;
use seqpt::estimator::{estimate_chi_diag, estimate_chi_offdiag, EstimatorConfig, Mode, Protocol, SampleSize};
use seqpt::oracle::{exact_chi, ORACLE_CAP};
use seqpt::pauli::PauliLabel;
use seqpt::report::{estimation_report, ProtocolKind, Report, ReportEntry, RunManifest};
use seqpt::spec::ChannelSpec;
use seqpt::triplet::{estimate_diag_from_triplets, read_log, run_triplet_experiments, sieve_large_diagonals, write_log, LogHeader};
use seqpt::verify::{run_verify, VerifyLevel};
use seqpt::Channel64;

#[derive(Parser)]
#[command(name = "seqpt", version, about = "Selective process tomography over mutually unbiased bases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
#[group(required = true, multiple = false)]
struct Budget {
    /// Number of experiments per campaign.
    #[arg(long = "M", visible_alias = "experiments")]
    experiments: Option<usize>,
    /// Target precision of the averaged observable; derives the experiment count.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args, Clone)]
struct Run {
    #[arg(long)]
    channel: PathBuf,
    #[command(flatten)]
    budget: Budget,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// sampled, exact or enumerate.
    #[arg(long, default_value = "sampled")]
    mode: String,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate one diagonal coefficient with the survival protocol.
    EstimateDiag {
        #[command(flatten)]
        run: Run,
        #[arg(long)]
        m: String,
    },
    /// Estimate one off-diagonal coefficient with the ancilla protocol.
    EstimateOffdiag {
        #[command(flatten)]
        run: Run,
        #[arg(long)]
        m: String,
        #[arg(long = "n-label")]
        n_label: String,
    },
    /// Run triplet experiments and write the log.
    Triplets {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long = "M", visible_alias = "experiments")]
        experiments: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Diagonal estimates for a list of labels from a triplet log.
    DiagFromLog {
        #[arg(long)]
        log: PathBuf,
        /// Comma-separated labels, or the flag repeated.
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<String>,
        /// Optional spec: checked against the log header and used for oracle values.
        #[arg(long)]
        channel: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find every diagonal coefficient above a threshold from a triplet log.
    Sieve {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        threshold: f64,
        #[arg(long)]
        channel: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification suites for `n` qubits.
    Verify {
        #[arg(long)]
        n: usize,
        #[arg(long = "verify-level", default_value = "quick")]
        verify_level: String,
        /// Also write the JSON summary here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::InvalidLabel(_) | Error::QubitMismatch(..) => (3, "invalid_label"),
            Error::DenseCapExceeded { .. } => (4, "dense_cap_exceeded"),
            Error::SingleBase => (6, "single_base_log"),
            Error::MalformedLog(_) => (2, "malformed_log"),
            Error::Internal(_) => (1, "internal"),
            Error::Io(_) => (2, "io"),
            _ => (2, "malformed_input"),
        };
        Failure { code, kind, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, Failure>;

fn load_spec(path: &Path) -> CliResult<ChannelSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: 2,
        kind: "malformed_spec",
        message: format!("{}: {e}", path.display()),
    })?;
    Ok(ChannelSpec::from_json(&text)?)
}

fn parse_label(s: &str, n: usize) -> CliResult<PauliLabel> {
    let label: PauliLabel = s.parse().map_err(|e: Error| Failure { code: 3, kind: "invalid_label", message: e.to_string() })?;
    if label.num_qubits() != n {
        return Err(Failure {
            code: 3,
            kind: "invalid_label",
            message: format!("label {s:?} has {} qubits, channel has {n}", label.num_qubits()),
        });
    }
    Ok(label)
}

fn config(run: &Run) -> CliResult<EstimatorConfig> {
    let mode: Mode = run.mode.parse()?;
    let sample_size = match (run.budget.experiments, run.budget.epsilon) {
        (Some(m), None) => SampleSize::Experiments(m),
        (None, Some(eps)) => SampleSize::Epsilon(eps),
        _ => unreachable!("clap enforces exactly one of --M and --epsilon"),
    };
    Ok(EstimatorConfig { sample_size, seed: run.seed, mode })
}

fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure {
            code: 2,
            kind: "io",
            message: format!("{}: {e}", path.display()),
        }),
        None => {
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure { code: 2, kind: "io", message: e.to_string() })
        }
    }
}

fn oracle_chi(channel: &Channel64) -> Option<seqpt::ChiMatrix64> {
    (channel.num_qubits() <= ORACLE_CAP).then(|| exact_chi(channel).ok()).flatten()
}

fn estimate_diag(run: &Run, m: &str) -> CliResult<()> {
    let spec = load_spec(&run.channel)?;
    let cfg = config(run)?;
    let m = parse_label(m, spec.n)?;
    let channel: Channel64 = spec.build()?;
    let estimate = estimate_chi_diag(&channel, &m, &cfg)?;
    let mut entry = ReportEntry::new(ProtocolKind::Diagonal, m, None, &estimate);
    if let Some(chi) = oracle_chi(&channel) {
        entry = entry.with_oracle(chi.get(&m, &m)?);
    }
    let manifest = RunManifest::new(
        "estimate-diag",
        Some(spec.sha256()),
        json!({
            "channel": run.channel.display().to_string(),
            "m": m.to_string(),
            "sample_size": cfg.sample_size,
            "M": cfg.experiments(Protocol::Fidelity).ok(),
            "seed": cfg.seed,
            "mode": cfg.mode,
            "observable_scale": "fidelity (D chi + 1) / (D + 1)",
        }),
    );
    emit(&estimation_report(manifest, &[entry]).to_json(), run.out.as_deref())
}

fn estimate_offdiag(run: &Run, m: &str, n_label: &str) -> CliResult<()> {
    let spec = load_spec(&run.channel)?;
    let cfg = config(run)?;
    let m = parse_label(m, spec.n)?;
    let nl = parse_label(n_label, spec.n)?;
    let channel: Channel64 = spec.build()?;
    let estimate = estimate_chi_offdiag(&channel, &m, &nl, &cfg)?;
    let mut entry = ReportEntry::new(ProtocolKind::Offdiagonal, m, Some(nl), &estimate);
    if let Some(chi) = oracle_chi(&channel) {
        entry = entry.with_oracle(chi.get(&m, &nl)?);
    }
    let manifest = RunManifest::new(
        "estimate-offdiag",
        Some(spec.sha256()),
        json!({
            "channel": run.channel.display().to_string(),
            "m": m.to_string(),
            "n_label": nl.to_string(),
            "sample_size": cfg.sample_size,
            "M": cfg.experiments(Protocol::Offdiagonal).ok(),
            "seed": cfg.seed,
            "mode": cfg.mode,
            "observable_scale": "ancilla polarisation (D chi + delta) / (D + 1)",
        }),
    );
    emit(&estimation_report(manifest, &[entry]).to_json(), run.out.as_deref())
}

fn triplets(channel_path: &Path, experiments: usize, seed: u64, out: &Path) -> CliResult<()> {
    let spec = load_spec(channel_path)?;
    let channel: Channel64 = spec.build()?;
    let set = run_triplet_experiments(&channel, &EstimatorConfig::new(experiments, seed))?;
    let header = LogHeader { n: spec.n, seed, experiments, channel_sha256: spec.sha256() };
    let file = File::create(out).map_err(|e| Failure { code: 2, kind: "io", message: format!("{}: {e}", out.display()) })?;
    write_log(std::io::BufWriter::new(file), &header, &set)?;
    let manifest = RunManifest::new(
        "triplets",
        Some(spec.sha256()),
        json!({ "channel": channel_path.display().to_string(), "M": experiments, "seed": seed, "out": out.display().to_string() }),
    );
    emit(&(serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n"), None)
}

struct LoadedLog {
    header: LogHeader,
    set: seqpt::triplet::TripletSet,
    channel: Option<Channel64>,
}

fn load_log(path: &Path, channel_path: Option<&Path>) -> CliResult<LoadedLog> {
    let file = File::open(path).map_err(|e| Failure { code: 2, kind: "malformed_log", message: format!("{}: {e}", path.display()) })?;
    let (header, set) = read_log(BufReader::new(file))?;
    let channel = match channel_path {
        Some(p) => {
            let spec = load_spec(p)?;
            if spec.sha256() != header.channel_sha256 {
                return Err(Failure {
                    code: 5,
                    kind: "hash_mismatch",
                    message: format!("log was produced by channel {}, spec hashes to {}", header.channel_sha256, spec.sha256()),
                });
            }
            Some(spec.build()?)
        }
        None => None,
    };
    Ok(LoadedLog { header, set, channel })
}

fn log_manifest(command: &str, log: &LoadedLog, path: &Path, extra: serde_json::Value) -> RunManifest {
    let mut config = json!({
        "log": path.display().to_string(),
        "n": log.header.n,
        "M": log.header.experiments,
        "seed": log.header.seed,
        "observable_scale": "m-type event frequency (D chi + 1) / (D + 1)",
    });
    if let (Some(obj), serde_json::Value::Object(more)) = (config.as_object_mut(), extra) {
        obj.extend(more);
    }
    RunManifest::new(command, Some(log.header.channel_sha256.clone()), config)
}

fn with_oracle(entry: ReportEntry, channel: Option<&Channel64>, chi: &mut Option<Option<seqpt::ChiMatrix64>>) -> CliResult<ReportEntry> {
    let Some(channel) = channel else { return Ok(entry) };
    let chi = chi.get_or_insert_with(|| oracle_chi(channel));
    Ok(match chi {
        Some(chi) => {
            let v = chi.get(&entry.m, &entry.m)?;
            entry.with_oracle(v)
        }
        None => entry,
    })
}

fn diag_from_log(path: &Path, labels: &[String], channel_path: Option<&Path>, out: Option<&Path>) -> CliResult<()> {
    let log = load_log(path, channel_path)?;
    let mut chi = None;
    let mut entries = Vec::new();
    for s in labels {
        let m = parse_label(s.trim(), log.set.num_qubits())?;
        let e = estimate_diag_from_triplets(&log.set, &m)?;
        entries.push(with_oracle(ReportEntry::new(ProtocolKind::Triplet, m, None, &e), log.channel.as_ref(), &mut chi)?);
    }
    let manifest = log_manifest("diag-from-log", &log, path, json!({ "m": labels }));
    emit(&estimation_report(manifest, &entries).to_json(), out)
}

fn sieve(path: &Path, threshold: f64, channel_path: Option<&Path>, out: Option<&Path>) -> CliResult<()> {
    let log = load_log(path, channel_path)?;
    let outcome = sieve_large_diagonals(&log.set, threshold)?;
    let mut chi = None;
    let entries = outcome
        .hits
        .iter()
        .map(|(m, e)| with_oracle(ReportEntry::new(ProtocolKind::Sieve, *m, None, e), log.channel.as_ref(), &mut chi))
        .collect::<CliResult<Vec<_>>>()?;
    let manifest = log_manifest("sieve", &log, path, json!({ "threshold": threshold }));
    let report = Report {
        details: Some(json!({
            "pairs_processed": outcome.pairs_processed,
            "pair_bound": outcome.pair_bound,
            "subsampled": outcome.subsampled,
            "candidates": outcome.candidates,
        })),
        ..estimation_report(manifest, &entries)
    };
    emit(&report.to_json(), out)
}

fn verify(n: usize, level: &str, out: Option<&Path>) -> CliResult<()> {
    let level: VerifyLevel = level.parse()?;
    let summary = run_verify(n, level)?;
    print!("{}", summary.table());
    println!("n = {n}, level = {level:?}: {}", if summary.passed { "PASS" } else { "FAIL" });
    eprintln!("verify finished in {:.2} s", summary.elapsed_seconds);
    if let Some(path) = out {
        let manifest = RunManifest::new("verify", None, json!({ "n": n, "verify_level": level }));
        let doc = json!({ "manifest": manifest, "summary": summary });
        emit(&(serde_json::to_string_pretty(&doc).expect("summary serialises") + "\n"), Some(path))?;
    }
    if summary.passed {
        Ok(())
    } else {
        Err(Failure { code: 1, kind: "verify_failed", message: format!("verification failed for n = {n}") })
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::EstimateDiag { run, m } => estimate_diag(&run, &m),
        Command::EstimateOffdiag { run, m, n_label } => estimate_offdiag(&run, &m, &n_label),
        Command::Triplets { channel, experiments, seed, out } => triplets(&channel, experiments, seed, &out),
        Command::DiagFromLog { log, m, channel, out } => diag_from_log(&log, &m, channel.as_deref(), out.as_deref()),
        Command::Sieve { log, threshold, channel, out } => sieve(&log, threshold, channel.as_deref(), out.as_deref()),
        Command::Verify { n, verify_level, out } => verify(n, &verify_level, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({ "error": f.kind, "message": f.message, "exit_code": f.code }));
            ExitCode::from(f.code)
        }
    }
}
