//! Command-line front end for TPM key reconciliation.
//!
//! Machine-readable results (reports, tables) go to standard output;
//! human-readable summaries and progress notes go to standard error.
//! Exit codes are stable: 0 success, 1 usage error (bad flags, bad
//! files, mismatched handshake), 2 frame discarded by the protocol,
//! 3 transport failure (connection, malformed frames).

use std::env;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use tpm_reconcile::codec::{derive_halfwidth, BitString};
use tpm_reconcile::error::{Error, Result};
use tpm_reconcile::session::{
    challenge_rng, reconcile_detailed, trial_keys, ReconciliationReport, SessionConfig,
};
use tpm_reconcile::sweep::{
    default_qber_grid, default_range_grid, emit_table, run_sweep, with_thread_limit, OutputFormat,
    SweepSpec, SweepTable,
};
use tpm_reconcile::tpm::{LearningRule, TpmParams};
use tpm_reconcile::wire::{
    accept_one, connect_retry, open_listener, run_peer_tcp, session_id, Role,
};
use tpm_reconcile::SessionRecord;

/// Tree-parity-machine key reconciliation for QKD post-processing.
#[derive(Parser)]
#[command(name = "tpm-reconcile", version, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one reconciliation frame in process and print its report.
    Reconcile(ReconcileArgs),
    /// Run a Monte-Carlo sweep and emit the aggregated table.
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Run one side of a reconciliation session over TCP.
    Peer(PeerArgs),
    /// Replay a recorded session against the naive passive adversary.
    Attack(AttackArgs),
}

/// Network geometry and protocol limits, shared by all subcommands.
/// The defaults reproduce the standard experimental setup.
#[derive(Args)]
struct GeometryArgs {
    /// Hidden units K.
    #[arg(long = "tpm-k", value_name = "K", default_value_t = 10)]
    hidden_units: usize,
    /// Inputs per hidden unit N.
    #[arg(long = "tpm-n", value_name = "N", default_value_t = 15)]
    inputs_per_unit: usize,
    /// Training rule: hebbian, anti-hebbian, or random-walk.
    #[arg(long, value_name = "RULE", default_value = "hebbian", value_parser = parse_rule)]
    rule: LearningRule,
    /// Iteration cap per frame; frames that exceed it are discarded.
    #[arg(long, value_name = "COUNT", default_value_t = 300)]
    max_iterations: u64,
}

/// Geometry plus the key-block width. Range sweeps take only
/// [`GeometryArgs`]: there b follows from each grid point's L.
#[derive(Args)]
struct TpmArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    /// Key bits per weight b; the weight range is L = 2^(b-1).
    #[arg(long = "tpm-b", value_name = "B", default_value_t = 4)]
    block_bits: u32,
}

#[derive(Args)]
struct ReconcileArgs {
    #[command(flatten)]
    tpm: TpmArgs,
    /// Channel error rate applied to Bob's copy of the key.
    #[arg(long, value_name = "RATE", default_value_t = 0.0)]
    qber: f64,
    /// Base seed; keys, noise, and challenges derive from it.
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    seed: u64,
    /// Also write a session record (config, Alice's final weights,
    /// full transcript) to this file, for later `attack` replay.
    #[arg(long, value_name = "PATH")]
    record: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SweepCommand {
    /// Sweep the channel error rate at fixed geometry.
    Qber(QberSweepArgs),
    /// Sweep the weight half-width L at fixed error rate.
    Range(RangeSweepArgs),
}

/// Output options shared by both sweep flavors.
#[derive(Args)]
struct SweepOutputArgs {
    /// Trials per grid point.
    #[arg(long, value_name = "COUNT", default_value_t = 1000)]
    trials: u64,
    /// Base seed; every trial seed derives from it.
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    seed: u64,
    /// Write the table here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Table format: csv or json.
    #[arg(long, value_name = "FORMAT", default_value = "csv", value_parser = parse_format)]
    format: OutputFormat,
}

#[derive(Args)]
struct QberSweepArgs {
    #[command(flatten)]
    tpm: TpmArgs,
    /// Comma-separated QBER grid; defaults to 0.005..0.15 in steps
    /// of 0.005 (30 points).
    #[arg(long, value_name = "Q1,Q2,...")]
    grid: Option<String>,
    #[command(flatten)]
    output: SweepOutputArgs,
}

#[derive(Args)]
struct RangeSweepArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    /// Fixed channel error rate for every point.
    #[arg(long, value_name = "RATE", default_value_t = 0.15)]
    qber: f64,
    /// Comma-separated half-width grid (powers of two); defaults to
    /// 8,16,32,64,128,256,512.
    #[arg(long, value_name = "L1,L2,...")]
    grid: Option<String>,
    #[command(flatten)]
    output: SweepOutputArgs,
}

#[derive(Args)]
struct PeerArgs {
    #[command(flatten)]
    tpm: TpmArgs,
    /// Which end of the session this process plays: alice or bob.
    #[arg(long, value_name = "ROLE", value_parser = parse_role)]
    role: Role,
    /// Bind here and accept one connection (the bound address is
    /// echoed on standard error).
    #[arg(long, value_name = "ADDR", conflicts_with = "connect")]
    listen: Option<String>,
    /// Connect to a listening peer, retrying briefly.
    #[arg(long, value_name = "ADDR")]
    connect: Option<String>,
    /// Base seed shared by both peers; Alice's challenges and the
    /// session id derive from it.
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    seed: u64,
    /// Simulated channel error rate: Bob's derived key is Alice's
    /// with this flip rate (ignored when --key-file is given).
    #[arg(long, value_name = "RATE", default_value_t = 0.0)]
    qber: f64,
    /// Read this side's raw key from a file of '0'/'1' characters
    /// instead of deriving it from the seed.
    #[arg(long, value_name = "PATH")]
    key_file: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    /// Session record written by `reconcile --record`.
    #[arg(long, value_name = "PATH")]
    record: PathBuf,
    /// Seed for Eve's random initial weights.
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    eve_seed: u64,
}

fn parse_rule(text: &str) -> std::result::Result<LearningRule, String> {
    text.parse().map_err(|e: Error| e.to_string())
}

fn parse_role(text: &str) -> std::result::Result<Role, String> {
    text.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(text: &str) -> std::result::Result<OutputFormat, String> {
    text.parse().map_err(|e: Error| e.to_string())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors; everything
            // else is a usage problem.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            process::exit(code);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    process::exit(code);
}

/// Maps error categories to the documented exit codes.
fn exit_code(error: &Error) -> i32 {
    match error {
        Error::InvalidParameter(_)
        | Error::Codec(_)
        | Error::Record(_)
        | Error::HandshakeMismatch(_) => 1,
        Error::Frame(_) | Error::Protocol(_) | Error::Transport(_) => 3,
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Reconcile(args) => cmd_reconcile(args),
        Command::Sweep(SweepCommand::Qber(args)) => cmd_sweep_qber(args),
        Command::Sweep(SweepCommand::Range(args)) => cmd_sweep_range(args),
        Command::Peer(args) => cmd_peer(args),
        Command::Attack(args) => cmd_attack(args),
    }
}

/// Builds the session config from the shared TPM flags.
fn session_config(tpm: &TpmArgs, record_transcript: bool) -> Result<SessionConfig> {
    let half_width = derive_halfwidth(tpm.block_bits)?;
    let params = TpmParams::new(
        tpm.geometry.hidden_units,
        tpm.geometry.inputs_per_unit,
        half_width,
        tpm.geometry.rule,
    )?;
    SessionConfig::new(
        params,
        tpm.block_bits,
        tpm.geometry.max_iterations,
        record_transcript,
    )
}

/// Reads the optional thread cap; 0 (or unset) lets rayon choose.
fn thread_limit() -> Result<usize> {
    match env::var("TPM_RECONCILE_THREADS") {
        Ok(value) => value.trim().parse().map_err(|_| {
            Error::InvalidParameter(format!(
                "TPM_RECONCILE_THREADS must be a nonnegative integer, got {value:?}"
            ))
        }),
        Err(env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(Error::InvalidParameter(format!(
            "TPM_RECONCILE_THREADS: {e}"
        ))),
    }
}

/// Prints a report on standard output (never including the
/// transcript) and a one-line summary on standard error; returns the
/// frame's exit code.
fn finish_frame(mut report: ReconciliationReport, context: &str) -> Result<i32> {
    report.transcript = None;
    let json = serde_json::to_string_pretty(&report).expect("reports always serialize");
    println!("{json}");
    if report.success {
        eprintln!(
            "{context}: reconciled in {} iterations over {} rounds (Z = {:.3})",
            report.total_iterations, report.rounds, report.entropy_loss
        );
        Ok(0)
    } else {
        eprintln!(
            "{context}: frame discarded at the {}-iteration cap (Z = {:.3})",
            report.total_iterations, report.entropy_loss
        );
        Ok(2)
    }
}

fn cmd_reconcile(args: ReconcileArgs) -> Result<i32> {
    let config = session_config(&args.tpm, args.record.is_some())?;
    let (alice_key, bob_key) = trial_keys(&config, args.qber, args.seed)?;
    let mut challenges = challenge_rng(args.seed);
    let (mut report, alice, _) =
        reconcile_detailed(&alice_key, &bob_key, &config, &mut challenges)?;
    if let Some(path) = &args.record {
        let transcript = report.transcript.take().unwrap_or_default();
        let record = SessionRecord::new(config, alice.weights(), transcript)?;
        write_text(path, &record.to_json())?;
        eprintln!("recorded session to {}", path.display());
    }
    finish_frame(report, "reconcile")
}

/// Writes with usage-error (not transport) semantics: an unwritable
/// output path is the caller's mistake.
fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)
        .map_err(|e| Error::InvalidParameter(format!("cannot write {}: {e}", path.display())))
}

fn parse_float_grid(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|token| {
            token.trim().parse::<f64>().map_err(|_| {
                Error::InvalidParameter(format!("grid entry {token:?} is not a number"))
            })
        })
        .collect()
}

fn parse_int_grid(text: &str) -> Result<Vec<i64>> {
    text.split(',')
        .map(|token| {
            token.trim().parse::<i64>().map_err(|_| {
                Error::InvalidParameter(format!("grid entry {token:?} is not an integer"))
            })
        })
        .collect()
}

/// Runs the sweep under the optional thread cap and emits the table.
fn run_and_emit(spec: SweepSpec, output: &SweepOutputArgs) -> Result<i32> {
    spec.validate()?;
    let threads = thread_limit()?;
    let table: SweepTable = with_thread_limit(threads, || run_sweep(&spec))??;
    match &output.out {
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            emit_table(&table, output.format, &mut lock).map_err(Error::Transport)?;
            lock.flush().map_err(Error::Transport)?;
        }
        Some(path) => {
            let mut buffer = Vec::new();
            emit_table(&table, output.format, &mut buffer).expect("vec writes cannot fail");
            write_text(
                path,
                std::str::from_utf8(&buffer).expect("tables are utf-8"),
            )?;
            eprintln!(
                "wrote {} rows ({}) to {}",
                table.rows.len(),
                output.format,
                path.display()
            );
        }
    }
    eprintln!(
        "swept {} points x {} trials (seed {})",
        table.rows.len(),
        table.spec.trials_per_point,
        table.spec.base_seed
    );
    Ok(0)
}

fn cmd_sweep_qber(args: QberSweepArgs) -> Result<i32> {
    let grid = match &args.grid {
        Some(text) => parse_float_grid(text)?,
        None => default_qber_grid(),
    };
    let mut spec = SweepSpec::qber_sweep(grid);
    spec.hidden_units = args.tpm.geometry.hidden_units;
    spec.inputs_per_unit = args.tpm.geometry.inputs_per_unit;
    spec.block_bits = Some(args.tpm.block_bits);
    spec.rule = args.tpm.geometry.rule;
    spec.max_iterations = args.tpm.geometry.max_iterations;
    spec.trials_per_point = args.output.trials;
    spec.base_seed = args.output.seed;
    run_and_emit(spec, &args.output)
}

fn cmd_sweep_range(args: RangeSweepArgs) -> Result<i32> {
    let grid = match &args.grid {
        Some(text) => parse_int_grid(text)?,
        None => default_range_grid(),
    };
    let mut spec = SweepSpec::range_sweep(args.qber, &grid);
    spec.hidden_units = args.geometry.hidden_units;
    spec.inputs_per_unit = args.geometry.inputs_per_unit;
    spec.rule = args.geometry.rule;
    spec.max_iterations = args.geometry.max_iterations;
    spec.trials_per_point = args.output.trials;
    spec.base_seed = args.output.seed;
    run_and_emit(spec, &args.output)
}

/// Resolves this side's raw key: an explicit key file wins, otherwise
/// it derives from the shared seed (Bob's copy gets the --qber noise).
fn peer_key(args: &PeerArgs, config: &SessionConfig) -> Result<BitString> {
    if let Some(path) = &args.key_file {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
        return text.trim().parse();
    }
    let (alice_key, bob_key) = trial_keys(config, args.qber, args.seed)?;
    Ok(match args.role {
        Role::Alice => alice_key,
        Role::Bob => bob_key,
    })
}

fn cmd_peer(args: PeerArgs) -> Result<i32> {
    let config = session_config(&args.tpm, false)?;
    let key = peer_key(&args, &config)?;
    let stream = match (&args.listen, &args.connect) {
        (Some(addr), None) => {
            let (listener, local) = open_listener(addr)?;
            eprintln!("listening on {local}");
            accept_one(&listener)?
        }
        (None, Some(addr)) => connect_retry(addr, 20, Duration::from_millis(200))?,
        _ => {
            return Err(Error::InvalidParameter(
                "exactly one of --listen or --connect is required".into(),
            ))
        }
    };
    let mut challenges = challenge_rng(args.seed);
    let report = run_peer_tcp(
        args.role,
        stream,
        &config,
        &key,
        &mut challenges,
        session_id(args.seed),
    )?;
    finish_frame(report, &format!("peer ({})", args.role))
}

fn cmd_attack(args: AttackArgs) -> Result<i32> {
    let text = fs::read_to_string(&args.record).map_err(|e| {
        Error::InvalidParameter(format!("cannot read {}: {e}", args.record.display()))
    })?;
    let record = SessionRecord::from_json(&text)?;
    let report = record.replay(args.eve_seed)?;
    let json = serde_json::to_string_pretty(&report).expect("reports always serialize");
    println!("{json}");
    eprintln!(
        "eve replayed {} iterations: overlap {:.4}, synchronized = {}",
        report.iterations_observed, report.overlap, report.synchronized
    );
    Ok(0)
}
