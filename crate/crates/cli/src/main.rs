// SPDX-License-Identifier: Apache-2.0

//! Command-line front end.
//!
//! Key and identity generation, directory management, an encrypted chat
//! relay over TCP (handshake, record layer, disconnect recovery), scenario
//! execution, and golden-vector emission. Exit codes: 0 success, 1 scenario
//! reported FAIL, 2 handshake or session abort, 3 I/O, 4 usage.

mod chat;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pfslink_core::clock::SystemClock;
use pfslink_core::curve::CurveParams;
use pfslink_core::drbg::DrbgState;
use pfslink_core::handshake::{Handshake, Protocol, Role};
use pfslink_core::keystore::{
    export_identity, export_ltk, gen_identity, generate_ltk, import_identity, GroupDirectory,
};
use pfslink_core::simnet::{run_scenario_with, ScenarioConfig, ScenarioId, Seeds, SimError};

/// Environment variable holding the default curve parameter file.
const CURVE_ENV: &str = "PFSLINK_CURVE";
const DEFAULT_CURVE_PATH: &str = "params/toy97.curve";

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
    Abort(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 4,
            CliError::Io(_) => 3,
            CliError::Abort(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(msg) | CliError::Io(msg) | CliError::Abort(msg) => msg,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

impl From<pfslink_core::keystore::KeystoreError> for CliError {
    fn from(err: pfslink_core::keystore::KeystoreError) -> Self {
        CliError::Io(err.to_string())
    }
}

impl From<pfslink_core::curve::CurveError> for CliError {
    fn from(err: pfslink_core::curve::CurveError) -> Self {
        CliError::Io(format!("curve parameters: {err}"))
    }
}

#[derive(Parser)]
#[command(
    name = "pfslink",
    version,
    about = "PSK-authenticated ECDH handshakes with an AES record layer and an adversary simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProtocolArg {
    A,
    B,
}

impl From<ProtocolArg> for Protocol {
    fn from(arg: ProtocolArg) -> Self {
        match arg {
            ProtocolArg::A => Protocol::A,
            ProtocolArg::B => Protocol::B,
        }
    }
}

#[derive(clap::Args, Clone)]
struct ChannelArgs {
    /// Address to listen on / connect to, e.g. 127.0.0.1:7000
    #[arg(long)]
    addr: String,
    /// Long-term key file (PFSK format)
    #[arg(long)]
    psk: PathBuf,
    /// Handshake protocol variant
    #[arg(long, value_enum, default_value = "a")]
    protocol: ProtocolArg,
    /// Curve parameter file (falls back to $PFSLINK_CURVE, then params/toy97.curve)
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Identity key file (protocol B)
    #[arg(long)]
    identity: Option<PathBuf>,
    /// Group directory file (protocol B)
    #[arg(long)]
    directory: Option<PathBuf>,
    /// Hex DRBG seed (32 hex digits) for reproducible runs; omitted = OS entropy
    #[arg(long)]
    seed: Option<String>,
    /// Write the handshake transcript (hex) here after establishment
    #[arg(long)]
    transcript_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a long-term group key file
    KeygenLtk {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "group key")]
        label: String,
        #[arg(long)]
        seed: Option<String>,
    },
    /// Generate an identity key pair; optionally publish it to a directory
    KeygenId {
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long)]
        id: String,
        #[arg(long)]
        out: PathBuf,
        /// Directory file to add the public point to (created if missing)
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<String>,
    },
    /// Add a public point to a group directory
    DirAdd {
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        id: String,
        /// Hex point encoding (04 || x || y)
        #[arg(long, conflicts_with = "key")]
        point: Option<String>,
        /// Identity key file to take the public point from
        #[arg(long)]
        key: Option<PathBuf>,
    },
    /// List directory entries
    DirList {
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long)]
        dir: PathBuf,
    },
    /// Wait for a peer, handshake, then relay lines (stdin -> send, recv -> stdout)
    Listen {
        #[command(flatten)]
        channel: ChannelArgs,
    },
    /// Connect to a listener, handshake, then relay lines
    Connect {
        #[command(flatten)]
        channel: ChannelArgs,
        /// Drop the connection after this many sent records (disconnect drill)
        #[arg(long)]
        drop_after: Option<u64>,
        /// Simulated gap in seconds before reconnecting (with --drop-after)
        #[arg(long, default_value_t = 5)]
        reconnect_after: u64,
    },
    /// Connect, send one file through the record layer, and close
    SendFile {
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long)]
        file: PathBuf,
    },
    /// Run an adversary scenario (S1..S5) and print its report
    RunScenario {
        id: String,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        curve: Option<PathBuf>,
        /// Override the trial count for the battery scenarios (S2, S5)
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Emit seeded golden vectors (handshake transcripts, DRBG stream)
    Vectors {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        curve: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 4,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("pfslink: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}

fn curve_path(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(CURVE_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CURVE_PATH))
}

fn load_curve(flag: Option<PathBuf>) -> Result<CurveParams, CliError> {
    let path = curve_path(flag);
    CurveParams::from_path(&path)
        .map_err(|err| CliError::Io(format!("loading {}: {err}", path.display())))
}

/// DRBG from --seed hex, or from the platform entropy source.
fn make_rng(seed: Option<&str>) -> Result<DrbgState, CliError> {
    let entropy: [u8; 16] = match seed {
        Some(text) => hex::decode(text)
            .ok()
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| CliError::Usage("--seed must be 32 hex digits".into()))?,
        None => {
            let mut buf = [0u8; 16];
            getrandom::fill(&mut buf)
                .map_err(|err| CliError::Io(format!("entropy source: {err}")))?;
            buf
        }
    };
    DrbgState::seed(&entropy).map_err(|err| CliError::Io(err.to_string()))
}

fn parse_seeds(seed: Option<&str>) -> Result<Seeds, CliError> {
    match seed {
        None => Ok(Seeds::default()),
        Some(text) => Seeds::from_hex(text)
            .map_err(|_| CliError::Usage("--seed must be 32 hex digits".into())),
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::KeygenLtk { out, label, seed } => {
            let mut rng = make_rng(seed.as_deref())?;
            let key = generate_ltk(&mut rng, label.as_str(), SystemClock.now_secs())
                .map_err(|err| CliError::Io(err.to_string()))?;
            export_ltk(&key, &out)?;
            eprintln!("wrote long-term key `{label}` to {}", out.display());
            Ok(0)
        }
        Command::KeygenId {
            curve,
            id,
            out,
            dir,
            seed,
        } => {
            let params = load_curve(curve)?;
            let mut rng = make_rng(seed.as_deref())?;
            let keypair = gen_identity(&mut rng, &params, &id)?;
            export_identity(&params, &keypair, &out)?;
            eprintln!("wrote identity `{id}` to {}", out.display());
            if let Some(dir_path) = dir {
                let mut directory = if dir_path.exists() {
                    GroupDirectory::load(&params, &dir_path)?
                } else {
                    GroupDirectory::new(params.name())
                };
                directory.add(&params, &id, keypair.public().clone())?;
                directory.save(&params, &dir_path)?;
                eprintln!("published `{id}` in {}", dir_path.display());
            }
            Ok(0)
        }
        Command::DirAdd {
            curve,
            dir,
            id,
            point,
            key,
        } => {
            let params = load_curve(curve)?;
            let public = match (point, key) {
                (Some(hex_point), None) => {
                    let bytes = hex::decode(&hex_point)
                        .map_err(|_| CliError::Usage("--point must be hex".into()))?;
                    params.decode_point(&bytes)?
                }
                (None, Some(key_path)) => import_identity(&params, &key_path)?.public().clone(),
                _ => {
                    return Err(CliError::Usage(
                        "dir-add needs exactly one of --point or --key".into(),
                    ))
                }
            };
            let mut directory = if dir.exists() {
                GroupDirectory::load(&params, &dir)?
            } else {
                GroupDirectory::new(params.name())
            };
            directory.add(&params, &id, public)?;
            directory.save(&params, &dir)?;
            eprintln!("published `{id}` in {}", dir.display());
            Ok(0)
        }
        Command::DirList { curve, dir } => {
            let params = load_curve(curve)?;
            let directory = GroupDirectory::load(&params, &dir)?;
            println!("curve: {}", directory.curve_name());
            for (id, public) in directory.entries() {
                println!("{id} = {}", hex::encode(params.encode_point(public)));
            }
            Ok(0)
        }
        Command::Listen { channel } => {
            let config = chat::ChannelConfig::from_args(&channel)?;
            chat::listen(&channel.addr, config)
        }
        Command::Connect {
            channel,
            drop_after,
            reconnect_after,
        } => {
            let config = chat::ChannelConfig::from_args(&channel)?;
            chat::connect(
                &channel.addr,
                config,
                drop_after.map(|records| chat::DisconnectDrill {
                    drop_after_records: records,
                    gap_secs: reconnect_after,
                }),
            )
        }
        Command::SendFile { channel, file } => {
            let config = chat::ChannelConfig::from_args(&channel)?;
            chat::send_file(&channel.addr, config, &file)
        }
        Command::RunScenario {
            id,
            seed,
            curve,
            trials,
        } => {
            let scenario =
                ScenarioId::parse(&id).map_err(|err| CliError::Usage(err.to_string()))?;
            let params = load_curve(curve)?;
            let seeds = parse_seeds(seed.as_deref())?;
            let mut config = ScenarioConfig::default();
            if let Some(trials) = trials {
                config.s2_trials = trials;
                config.s5_trials = trials;
            }
            let report = run_scenario_with(scenario, &seeds, &params, None, &config).map_err(
                |err| match err {
                    SimError::UnknownScenario(_) | SimError::Unsupported(_) => {
                        CliError::Usage(err.to_string())
                    }
                    other => CliError::Io(other.to_string()),
                },
            )?;
            print!("{report}");
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::Vectors { out, seed, curve } => {
            let params = load_curve(curve)?;
            let seeds = parse_seeds(seed.as_deref())?;
            write_vectors(&out, &seeds, &params)?;
            eprintln!("wrote vectors to {}", out.display());
            Ok(0)
        }
    }
}

trait NowSecs {
    fn now_secs(&self) -> u64;
}

impl NowSecs for SystemClock {
    fn now_secs(&self) -> u64 {
        use pfslink_core::clock::Clock;
        self.now()
    }
}

/// Deterministic conformance vectors: seeded handshake transcripts for both
/// protocols, a DRBG stream sample, and one sealed record.
fn write_vectors(out_dir: &Path, seeds: &Seeds, params: &CurveParams) -> Result<(), CliError> {
    use pfslink_core::session::derive;
    use std::fmt::Write as _;

    std::fs::create_dir_all(out_dir)?;

    let mut ltk_rng = seeds.drbg("vectors-ltk");
    let psk =
        generate_ltk(&mut ltk_rng, "vectors", 0).map_err(|err| CliError::Io(err.to_string()))?;

    // Protocol A transcript.
    let mut alice_rng = seeds.drbg("vectors-alice");
    let mut bob_rng = seeds.drbg("vectors-bob");
    let (mut alice, msg_a) = Handshake::start(
        Role::Initiator,
        Protocol::A,
        &psk,
        params,
        &mut alice_rng,
        None,
        None,
    )
    .map_err(|err| CliError::Abort(err.to_string()))?;
    let (mut bob, msg_b) = Handshake::start(
        Role::Responder,
        Protocol::A,
        &psk,
        params,
        &mut bob_rng,
        None,
        None,
    )
    .map_err(|err| CliError::Abort(err.to_string()))?;
    let material = bob
        .absorb(&msg_a)
        .and_then(|_| alice.absorb(&msg_b))
        .map_err(|err| CliError::Abort(err.to_string()))?;

    let mut text = String::new();
    let _ = writeln!(text, "# protocol A seeded handshake transcript");
    let _ = writeln!(
        text,
        "initiator = {}",
        hex::encode(alice.transcript_bytes())
    );
    let _ = writeln!(text, "responder = {}", hex::encode(bob.transcript_bytes()));
    std::fs::write(out_dir.join("protocol_a_transcript.txt"), text)?;

    // Protocol B initiator message.
    let mut id_rng = seeds.drbg("vectors-identities");
    let alice_id = gen_identity(&mut id_rng, params, "alice")?;
    let bob_id = gen_identity(&mut id_rng, params, "bob")?;
    let mut directory = GroupDirectory::new(params.name());
    directory.add(params, "alice", alice_id.public().clone())?;
    directory.add(params, "bob", bob_id.public().clone())?;
    let mut alice_b_rng = seeds.drbg("vectors-alice-b");
    let (_, msg) = Handshake::start(
        Role::Initiator,
        Protocol::B,
        &psk,
        params,
        &mut alice_b_rng,
        Some(&alice_id),
        Some(&directory),
    )
    .map_err(|err| CliError::Abort(err.to_string()))?;
    let mut text = String::new();
    let _ = writeln!(text, "# protocol B seeded initiator message");
    let _ = writeln!(text, "message = {}", hex::encode(msg.encode()));
    std::fs::write(out_dir.join("protocol_b_message.txt"), text)?;

    // DRBG stream sample.
    let mut stream_rng = seeds.drbg("vectors-stream");
    let stream = stream_rng
        .next_bytes(64)
        .map_err(|err| CliError::Io(err.to_string()))?;
    std::fs::write(
        out_dir.join("drbg_stream.txt"),
        format!(
            "# 64-byte seeded DRBG stream\nstream = {}\n",
            hex::encode(stream)
        ),
    )?;

    // One sealed record under the derived session key.
    let clock = pfslink_core::clock::ManualClock::new(0);
    let key =
        derive(params, material.point(), &clock).map_err(|err| CliError::Abort(err.to_string()))?;
    let mut session = pfslink_core::session::Session::new(key, std::sync::Arc::new(clock));
    let record = session
        .send(b"vector record payload")
        .map_err(|err| CliError::Abort(err.to_string()))?;
    std::fs::write(
        out_dir.join("record_sample.txt"),
        format!(
            "# first record of the seeded session\nrecord = {}\n",
            hex::encode(record.encode())
        ),
    )?;

    Ok(())
}
