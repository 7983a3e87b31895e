use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use bvbench::circuit::{build_bv_circuit, OracleStyle, SecretString};
use bvbench::harness::{
    builtin_suite, generate_report, ingest_hardware_counts, run_scenario, Manifest, NoiseContext, ReportFormat,
    RunOptions, Scenario, ScenarioResult, TestPattern,
};
use bvbench::noise::{CalibrationSnapshot, NoiseOptions};
use bvbench::simulator::DEFAULT_SHOTS;
use bvbench::tomography::{run_qst, MAX_QST_QUBITS};
use bvbench::Error;

const EXIT_INVALID: u8 = 2;
const EXIT_SNAPSHOT: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_TOO_LARGE: u8 = 5;

#[derive(Parser)]
#[command(name = "bvbench", version, about = "Bernstein-Vazirani benchmarking: simulate, emulate noise, run tomography, build reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one pattern under one scenario and write the result JSON.
    Run(RunArgs),
    /// Run a manifest (or the built-in suite) and write the full report tree.
    Suite(SuiteArgs),
    /// State tomography of the data register.
    Tomo(TomoArgs),
    /// Ingest hardware counts files.
    Ingest(IngestArgs),
    /// Rebuild reports from saved result JSON files.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SimScenario {
    Ideal,
    Noisy,
}

impl From<SimScenario> for Scenario {
    fn from(s: SimScenario) -> Self {
        match s {
            SimScenario::Ideal => Scenario::Ideal,
            SimScenario::Noisy => Scenario::Noisy,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Oracle {
    Cnot,
    Ecr,
}

impl From<Oracle> for OracleStyle {
    fn from(o: Oracle) -> Self {
        match o {
            Oracle::Cnot => OracleStyle::Cnot,
            Oracle::Ecr => OracleStyle::Ecr,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Plotdata,
    All,
}

#[derive(Args)]
struct NoiseArgs {
    /// Calibration snapshot JSON (required for --scenario noisy).
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Let qubits outside each gate relax for the gate's duration.
    #[arg(long)]
    idle_decay: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    secret: String,
    #[arg(long, value_enum, default_value = "ideal")]
    scenario: SimScenario,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value_t = DEFAULT_SHOTS)]
    shots: u64,
    /// Base seed; a random one is chosen and logged when absent.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "cnot")]
    oracle: Oracle,
    /// Also run tomography with this many shots (n ≤ 6).
    #[arg(long)]
    qst_shots: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    /// Run manifest JSON; the ideal built-in suite when absent.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Falls back to the manifest's out_dir, then $BVBENCH_OUT_DIR.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Seed used when the manifest does not set one.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct TomoArgs {
    #[arg(long)]
    secret: String,
    #[arg(long, value_enum, default_value = "ideal")]
    scenario: SimScenario,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value_t = DEFAULT_SHOTS)]
    shots: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "cnot")]
    oracle: Oracle,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    /// Hardware counts files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Emulate the same patterns under this snapshot so gaps can be computed.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SHOTS)]
    shots: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Write a report tree here instead of printing results.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Result JSON files, each holding one result or an array of them.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    format: Format,
}

struct Failure {
    code: u8,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match &error {
            Error::Io { .. } => EXIT_IO,
            Error::RegisterTooLarge { .. } => EXIT_TOO_LARGE,
            Error::Snapshot(_)
            | Error::UnphysicalCoherence { .. }
            | Error::MissingCalibration { .. }
            | Error::MissingQubit(_) => EXIT_SNAPSHOT,
            _ => EXIT_INVALID,
        };
        Self { code, error }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INVALID,
        error: Error::InvalidConfig(msg.into()),
    }
}

fn seed_or_random(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        warn!("no --seed given; using random seed {s}");
        eprintln!("seed: {s}");
        s
    })
}

/// Everything that goes wrong while loading or applying a snapshot, other
/// than plain I/O, is a snapshot error.
fn load_noise(path: &Path, idle_decay: bool) -> CliResult<NoiseContext> {
    let as_snapshot = |e: Error| match e {
        Error::Io { .. } => Failure::from(e),
        other => Failure {
            code: EXIT_SNAPSHOT,
            error: other,
        },
    };
    let snap = CalibrationSnapshot::load(path).map_err(as_snapshot)?;
    let ctx = NoiseContext::from_snapshot(&snap, NoiseOptions { idle_decay }).map_err(as_snapshot)?;
    info!("loaded snapshot {}", ctx.snapshot_id);
    Ok(ctx)
}

fn noise_for(scenario: SimScenario, args: &NoiseArgs) -> CliResult<Option<NoiseContext>> {
    match (scenario, &args.snapshot) {
        (SimScenario::Noisy, None) => Err(Failure {
            code: EXIT_SNAPSHOT,
            error: Error::Snapshot("--scenario noisy needs --snapshot".into()),
        }),
        (SimScenario::Noisy, Some(p)) => load_noise(p, args.idle_decay).map(Some),
        (SimScenario::Ideal, Some(_)) => {
            warn!("--snapshot ignored for the ideal scenario");
            Ok(None)
        }
        (SimScenario::Ideal, None) => Ok(None),
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::Io {
                    path: dir.display().to_string(),
                    source: e,
                })?;
            }
            fs::write(p, text).map_err(|e| Error::Io {
                path: p.display().to_string(),
                source: e,
            })?;
            info!("wrote {}", p.display());
        }
        None => println!("{}", text.trim_end()),
    }
    Ok(())
}

fn pattern_for(secret: &str) -> CliResult<TestPattern> {
    let s = SecretString::new(secret)?;
    Ok(builtin_suite()
        .into_iter()
        .find(|p| p.secret == s)
        .unwrap_or_else(|| TestPattern::adhoc(&s)))
}

fn out_dir_or_env(flag: Option<PathBuf>, manifest: Option<PathBuf>) -> CliResult<PathBuf> {
    flag.or(manifest)
        .or_else(|| std::env::var_os("BVBENCH_OUT_DIR").map(PathBuf::from))
        .ok_or_else(|| invalid("no output directory: pass --out-dir or set BVBENCH_OUT_DIR"))
}

fn cmd_run(a: RunArgs) -> CliResult<()> {
    let pattern = pattern_for(&a.secret)?;
    let noise = noise_for(a.scenario, &a.noise)?;
    let opts = RunOptions {
        shots: a.shots,
        seed: seed_or_random(a.seed),
        oracle: a.oracle.into(),
        qst_shots: a.qst_shots,
    };
    let r = run_scenario(&pattern, a.scenario.into(), noise.as_ref(), &opts)?;
    info!("{} {}: P_success = {:.1}%", pattern.label, r.scenario, r.success_probability());
    emit(a.out.as_deref(), &(r.to_json() + "\n"))
}

fn cmd_suite(a: SuiteArgs) -> CliResult<()> {
    if a.jobs == 0 {
        return Err(invalid("--jobs must be at least 1"));
    }
    let (manifest, base) = match &a.manifest {
        Some(p) => Manifest::load(p)?,
        None => (Manifest::from_json("{}")?, PathBuf::from(".")),
    };
    let seed = match manifest.seed {
        Some(s) => s,
        None => seed_or_random(a.seed),
    };
    let resolved = manifest.resolve(&base, seed)?;
    if let Some(p) = &resolved.snapshot {
        // Surface snapshot problems with their own exit code before any work.
        load_noise(p, resolved.idle_decay)?;
    }
    let out_dir = out_dir_or_env(a.out_dir, resolved.out_dir.clone())?;
    let written = resolved.run_to(&out_dir, a.jobs)?;
    for p in &written {
        info!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_tomo(a: TomoArgs) -> CliResult<()> {
    let secret = SecretString::new(&a.secret)?;
    if secret.len() > MAX_QST_QUBITS {
        return Err(Error::RegisterTooLarge {
            qubits: secret.len(),
            limit: MAX_QST_QUBITS,
        }
        .into());
    }
    let noise = noise_for(a.scenario, &a.noise)?;
    let seed = seed_or_random(a.seed);
    let circuit = build_bv_circuit(&secret, a.oracle.into())?;
    let t = run_qst(&circuit, noise.as_ref().map(|c| &c.model), a.shots, seed)?;
    info!("{secret}: fidelity = {:.4} over {} settings", t.fidelity, t.settings);
    emit(a.out.as_deref(), &(t.to_json() + "\n"))
}

fn cmd_ingest(a: IngestArgs) -> CliResult<()> {
    let suite = builtin_suite();
    let mut hardware = Vec::new();
    for f in &a.files {
        hardware.push(ingest_hardware_counts(f, &suite)?);
    }
    let mut results = Vec::new();
    if let Some(p) = &a.snapshot {
        let ctx = load_noise(p, false)?;
        let opts = RunOptions {
            shots: a.shots,
            seed: seed_or_random(a.seed),
            ..RunOptions::default()
        };
        let mut seen = std::collections::BTreeSet::new();
        for h in &hardware {
            if seen.insert(h.pattern.label.clone()) {
                results.push(run_scenario(&h.pattern, Scenario::Noisy, Some(&ctx), &opts)?);
            }
        }
    }
    results.extend(hardware);
    match a.out_dir.or_else(|| std::env::var_os("BVBENCH_OUT_DIR").map(PathBuf::from)) {
        Some(dir) => write_reports(&results, Format::All, &dir),
        None => emit(None, &serde_json::to_string_pretty(&results).map_err(Error::from)?),
    }
}

fn write_reports(results: &[ScenarioResult], format: Format, dir: &Path) -> CliResult<()> {
    let formats: &[ReportFormat] = match format {
        Format::Csv => &[ReportFormat::Csv],
        Format::Json => &[ReportFormat::Json],
        Format::Plotdata => &[ReportFormat::Plotdata],
        Format::All => &ReportFormat::ALL,
    };
    for &f in formats {
        for p in generate_report(results, f, dir)? {
            info!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> CliResult<()> {
    let mut results: Vec<ScenarioResult> = Vec::new();
    for p in &a.inputs {
        let text = fs::read_to_string(p).map_err(|e| Error::Io {
            path: p.display().to_string(),
            source: e,
        })?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(Error::from)?;
        match v {
            serde_json::Value::Array(items) => {
                for item in items {
                    results.push(serde_json::from_value(item).map_err(Error::from)?);
                }
            }
            one => results.push(serde_json::from_value(one).map_err(Error::from)?),
        }
    }
    let dir = out_dir_or_env(a.out_dir, None)?;
    write_reports(&results, a.format, &dir)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Suite(a) => cmd_suite(a),
        Command::Tomo(a) => cmd_tomo(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Report(a) => cmd_report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}
