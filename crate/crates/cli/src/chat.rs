// SPDX-License-Identifier: Apache-2.0

//! Encrypted chat over a TCP stream: handshake, record relay, and the
//! disconnect-recovery drill.
//!
//! Socket framing is `type(1) || len(4 BE) || payload`:
//!
//! - `0x01` handshake message
//! - `0x02` record message
//! - `0x03` resume request: `token(8) || gap_secs(8 BE)`
//! - `0x04` resume decision: one byte (1 same key, 2 renegotiate, 3 destroyed)
//! - `0x05` clean close
//!
//! The resume token is the session id the connecting side used in its
//! handshake message. A reconnect carries an explicit simulated gap so the
//! recovery rules can be driven end to end without sleeping through them;
//! both sides then agree on the decision by construction. The reconnecting
//! side initiates renegotiation when the gap demands one.

use std::io::{BufRead, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::mpsc::{Receiver, Sender};
use std::sync::{Arc, Mutex};

use pfslink_core::clock::{Clock, SystemClock, Timestamp};
use pfslink_core::curve::CurveParams;
use pfslink_core::drbg::DrbgState;
use pfslink_core::handshake::{Handshake, HandshakeMessage, Protocol, Role};
use pfslink_core::keystore::{import_identity, import_ltk, GroupDirectory, LongTermKey};
use pfslink_core::session::{derive, RecordMessage, ResumeDecision, Session};
use pfslink_core::sig::KeyPair;

use crate::{make_rng, ChannelArgs, CliError};

const FRAME_HANDSHAKE: u8 = 0x01;
const FRAME_RECORD: u8 = 0x02;
const FRAME_RESUME: u8 = 0x03;
const FRAME_DECISION: u8 = 0x04;
const FRAME_CLOSE: u8 = 0x05;

const MAX_FRAME: usize = 1 << 24;

const DECISION_SAME_KEY: u8 = 1;
const DECISION_RENEGOTIATE: u8 = 2;
const DECISION_DESTROYED: u8 = 3;

pub struct ChannelConfig {
    params: CurveParams,
    psk: LongTermKey,
    protocol: Protocol,
    identity: Option<KeyPair>,
    directory: Option<GroupDirectory>,
    rng: Mutex<DrbgState>,
    transcript_out: Option<std::path::PathBuf>,
}

impl ChannelConfig {
    pub fn from_args(args: &ChannelArgs) -> Result<Self, CliError> {
        let rng = Mutex::new(make_rng(args.seed.as_deref())?);
        let params = crate::load_curve(args.curve.clone())?;
        let psk = import_ltk(&args.psk)?;
        let identity = args
            .identity
            .as_ref()
            .map(|path| import_identity(&params, path))
            .transpose()?;
        let directory = args
            .directory
            .as_ref()
            .map(|path| GroupDirectory::load(&params, path))
            .transpose()?;
        Ok(Self {
            params,
            psk,
            protocol: args.protocol.into(),
            identity,
            directory,
            rng,
            transcript_out: args.transcript_out.clone(),
        })
    }

    fn start_handshake(&self, role: Role) -> Result<(Handshake, HandshakeMessage), CliError> {
        let mut rng = self.rng.lock().expect("rng lock");
        Handshake::start(
            role,
            self.protocol,
            &self.psk,
            &self.params,
            &mut rng,
            self.identity.as_ref(),
            self.directory.as_ref(),
        )
        .map_err(|err| CliError::Abort(format!("handshake: {err}")))
    }

    fn write_transcript(&self, handshake: &Handshake) -> Result<(), CliError> {
        if let Some(path) = &self.transcript_out {
            std::fs::write(path, hex::encode(handshake.transcript_bytes()))?;
        }
        Ok(())
    }
}

pub struct DisconnectDrill {
    pub drop_after_records: u64,
    pub gap_secs: u64,
}

fn write_frame(stream: &mut TcpStream, frame_type: u8, payload: &[u8]) -> std::io::Result<()> {
    let mut out = Vec::with_capacity(5 + payload.len());
    out.push(frame_type);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    stream.write_all(&out)
}

/// Blocking frame read; `None` on a clean EOF at a frame boundary.
fn read_frame(stream: &mut TcpStream) -> std::io::Result<Option<(u8, Vec<u8>)>> {
    let mut header = [0u8; 5];
    let mut filled = 0;
    while filled < header.len() {
        match stream.read(&mut header[filled..]) {
            Ok(0) => {
                return if filled == 0 {
                    Ok(None)
                } else {
                    Err(std::io::Error::new(
                        std::io::ErrorKind::UnexpectedEof,
                        "truncated frame header",
                    ))
                }
            }
            Ok(n) => filled += n,
            Err(err) => return Err(err),
        }
    }
    let len = u32::from_be_bytes(header[1..5].try_into().unwrap()) as usize;
    if len > MAX_FRAME {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "oversized frame",
        ));
    }
    let mut payload = vec![0u8; len];
    stream.read_exact(&mut payload)?;
    Ok(Some((header[0], payload)))
}

enum Event {
    Line(Vec<u8>),
    StdinClosed,
    Frame(u8, Vec<u8>),
    SocketClosed,
}

fn spawn_stdin_pump(tx: Sender<Event>) {
    std::thread::spawn(move || {
        let stdin = std::io::stdin();
        let mut lines = stdin.lock();
        loop {
            let mut line = String::new();
            match lines.read_line(&mut line) {
                Ok(0) | Err(_) => break,
                Ok(_) => {
                    if tx.send(Event::Line(line.into_bytes())).is_err() {
                        return;
                    }
                }
            }
        }
        let _ = tx.send(Event::StdinClosed);
    });
}

fn spawn_reader(stream: TcpStream, tx: Sender<Event>) {
    std::thread::spawn(move || {
        let mut stream = stream;
        loop {
            match read_frame(&mut stream) {
                Ok(Some((frame_type, payload))) => {
                    if tx.send(Event::Frame(frame_type, payload)).is_err() {
                        return;
                    }
                }
                Ok(None) | Err(_) => {
                    let _ = tx.send(Event::SocketClosed);
                    return;
                }
            }
        }
    });
}

fn send_record(
    session: &Mutex<Session>,
    stream: &mut TcpStream,
    payload: &[u8],
) -> Result<(), CliError> {
    let record = session
        .lock()
        .expect("session lock")
        .send(payload)
        .map_err(|err| CliError::Abort(format!("send: {err}")))?;
    write_frame(stream, FRAME_RECORD, &record.encode())?;
    Ok(())
}

fn deliver_record(session: &Mutex<Session>, payload: &[u8]) {
    let Some(record) = RecordMessage::decode(payload) else {
        eprintln!("pfslink: dropping truncated record frame");
        return;
    };
    match session.lock().expect("session lock").recv(&record) {
        Ok(plaintext) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(&plaintext);
            let _ = stdout.flush();
        }
        Err(err) => eprintln!("pfslink: rejected record: {err}"),
    }
}

fn established_line(session: &Mutex<Session>, peer: Option<&str>) {
    let epoch = session
        .lock()
        .expect("session lock")
        .epoch()
        .unwrap_or_default();
    match peer {
        Some(peer) => eprintln!("established epoch={epoch} peer={peer}"),
        None => eprintln!("established epoch={epoch}"),
    }
}

// ---------------------------------------------------------------------------
// Listener
// ---------------------------------------------------------------------------

struct SuspendedSession {
    session: Arc<Mutex<Session>>,
    token: [u8; 8],
    since: Timestamp,
}

enum Served {
    CleanClose,
    PeerVanished,
}

pub fn listen(addr: &str, config: ChannelConfig) -> Result<u8, CliError> {
    let listener = TcpListener::bind(addr)?;
    eprintln!("listening on {}", listener.local_addr()?);

    let (tx, rx) = std::sync::mpsc::channel::<Event>();
    spawn_stdin_pump(tx.clone());
    let mut stdin_open = true;
    let mut suspended: Option<SuspendedSession> = None;

    loop {
        let (mut stream, peer_addr) = listener.accept()?;
        eprintln!("connection from {peer_addr}");

        let session_and_token = match read_frame(&mut stream)? {
            Some((FRAME_HANDSHAKE, payload)) => {
                Some(respond_handshake(&config, &mut stream, &payload)?)
            }
            Some((FRAME_RESUME, payload)) => {
                match resume_as_listener(&config, &mut stream, &payload, suspended.take())? {
                    ResumeOutcome::Continue(entry) => Some(entry),
                    ResumeOutcome::Destroyed => {
                        eprintln!("session destroyed");
                        return Ok(0);
                    }
                    ResumeOutcome::Rejected => None,
                }
            }
            Some((other, _)) => {
                eprintln!("pfslink: unexpected first frame {other:#04x}; dropping connection");
                None
            }
            None => None,
        };
        let Some((session, token)) = session_and_token else {
            continue;
        };

        spawn_reader(stream.try_clone()?, tx.clone());
        match chat_loop(&session, &mut stream, &rx, &mut stdin_open)? {
            Served::CleanClose => return Ok(0),
            Served::PeerVanished => {
                let since = SystemClock.now();
                session
                    .lock()
                    .expect("session lock")
                    .mark_disconnected(since)
                    .map_err(|err| CliError::Abort(format!("suspend: {err}")))?;
                eprintln!("peer vanished; session suspended");
                suspended = Some(SuspendedSession {
                    session,
                    token,
                    since,
                });
            }
        }
    }
}

enum ResumeOutcome {
    Continue((Arc<Mutex<Session>>, [u8; 8])),
    Destroyed,
    Rejected,
}

fn resume_as_listener(
    config: &ChannelConfig,
    stream: &mut TcpStream,
    payload: &[u8],
    suspended: Option<SuspendedSession>,
) -> Result<ResumeOutcome, CliError> {
    let Some(state) = suspended else {
        eprintln!("pfslink: resume request with no suspended session");
        return Ok(ResumeOutcome::Rejected);
    };
    if payload.len() != 16 || payload[..8] != state.token {
        eprintln!("pfslink: resume token mismatch");
        return Ok(ResumeOutcome::Rejected);
    }
    let gap = u64::from_be_bytes(payload[8..16].try_into().unwrap());

    let decision = state
        .session
        .lock()
        .expect("session lock")
        .attempt_resume(state.since + gap)
        .map_err(|err| CliError::Abort(format!("resume: {err}")))?;
    match decision {
        ResumeDecision::ResumeWithSameKey => {
            write_frame(stream, FRAME_DECISION, &[DECISION_SAME_KEY])?;
            eprintln!(
                "resumed epoch={} (same key, gap {gap}s)",
                state
                    .session
                    .lock()
                    .expect("session lock")
                    .epoch()
                    .unwrap_or_default()
            );
            Ok(ResumeOutcome::Continue((state.session, state.token)))
        }
        ResumeDecision::RequireRenegotiation => {
            write_frame(stream, FRAME_DECISION, &[DECISION_RENEGOTIATE])?;
            // The reconnecting side initiates the new handshake.
            let Some((FRAME_HANDSHAKE, hs_payload)) = read_frame(stream)? else {
                return Err(CliError::Abort(
                    "peer did not renegotiate after the resume decision".into(),
                ));
            };
            let (new_key, token, _) = respond_handshake_inner(config, stream, &hs_payload)?;
            state
                .session
                .lock()
                .expect("session lock")
                .install_rekey(new_key)
                .map_err(|err| CliError::Abort(format!("rekey: {err}")))?;
            eprintln!(
                "renegotiated epoch={} (gap {gap}s)",
                state
                    .session
                    .lock()
                    .expect("session lock")
                    .epoch()
                    .unwrap_or_default()
            );
            Ok(ResumeOutcome::Continue((state.session, token)))
        }
        ResumeDecision::SessionDestroyed => {
            write_frame(stream, FRAME_DECISION, &[DECISION_DESTROYED])?;
            Ok(ResumeOutcome::Destroyed)
        }
    }
}

/// Responds to a fresh handshake frame: emits our share, absorbs theirs,
/// derives the session.
fn respond_handshake(
    config: &ChannelConfig,
    stream: &mut TcpStream,
    payload: &[u8],
) -> Result<(Arc<Mutex<Session>>, [u8; 8]), CliError> {
    let (key, token, peer) = respond_handshake_inner(config, stream, payload)?;
    let session = Arc::new(Mutex::new(Session::new(key, Arc::new(SystemClock))));
    established_line(&session, peer.as_deref());
    Ok((session, token))
}

type HandshakeResult = (pfslink_core::session::SessionKey, [u8; 8], Option<String>);

fn respond_handshake_inner(
    config: &ChannelConfig,
    stream: &mut TcpStream,
    payload: &[u8],
) -> Result<HandshakeResult, CliError> {
    let peer_msg = HandshakeMessage::decode(payload)
        .map_err(|err| CliError::Abort(format!("handshake: {err}")))?;
    let (mut handshake, own_msg) = config.start_handshake(Role::Responder)?;
    write_frame(stream, FRAME_HANDSHAKE, &own_msg.encode())?;
    let material = handshake
        .absorb(&peer_msg)
        .map_err(|err| CliError::Abort(format!("handshake: {err}")))?;
    config.write_transcript(&handshake)?;
    let key = derive(&config.params, material.point(), &SystemClock)
        .map_err(|err| CliError::Abort(format!("derive: {err}")))?;
    Ok((key, peer_msg.session_id, peer_msg.sender_claim))
}

/// Relay loop for the listening side: stdin lines become records, record
/// frames become stdout bytes. The listener never initiates the close —
/// its stdin running dry only stops its sending half, so a quiet terminal
/// (or a closed pipe) does not tear the session down under the peer.
fn chat_loop(
    session: &Arc<Mutex<Session>>,
    stream: &mut TcpStream,
    rx: &Receiver<Event>,
    stdin_open: &mut bool,
) -> Result<Served, CliError> {
    let close_sent = false;
    loop {
        match rx.recv().expect("event channel open") {
            Event::Line(line) => {
                if let Err(err) = send_record(session, stream, &line) {
                    eprintln!("pfslink: {}", err.message());
                }
            }
            Event::StdinClosed => {
                *stdin_open = false;
            }
            Event::Frame(FRAME_RECORD, payload) => deliver_record(session, &payload),
            Event::Frame(FRAME_CLOSE, _) => {
                if !close_sent {
                    let _ = write_frame(stream, FRAME_CLOSE, &[]);
                }
                return Ok(Served::CleanClose);
            }
            Event::Frame(other, _) => {
                eprintln!("pfslink: ignoring unexpected frame {other:#04x}");
            }
            Event::SocketClosed => {
                return Ok(if close_sent {
                    Served::CleanClose
                } else {
                    Served::PeerVanished
                });
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Connector
// ---------------------------------------------------------------------------

pub fn connect(
    addr: &str,
    config: ChannelConfig,
    drill: Option<DisconnectDrill>,
) -> Result<u8, CliError> {
    let mut stream = TcpStream::connect(addr)?;
    let (session, token, peer) = initiate_handshake(&config, &mut stream)?;
    let session = Arc::new(Mutex::new(session));
    established_line(&session, peer.as_deref());

    let (tx, rx) = std::sync::mpsc::channel::<Event>();
    spawn_stdin_pump(tx.clone());
    spawn_reader(stream.try_clone()?, tx.clone());

    let mut records_sent: u64 = 0;
    let mut drill = drill;
    let mut close_sent = false;
    loop {
        match rx.recv().expect("event channel open") {
            Event::Line(line) => {
                send_record(&session, &mut stream, &line)?;
                records_sent += 1;
                let should_drill = drill
                    .as_ref()
                    .is_some_and(|d| records_sent >= d.drop_after_records);
                if should_drill {
                    let drill_config = drill.take().expect("drill present");
                    // Tear the old connection down first so the listener's
                    // accept loop can pick up the reconnect.
                    let _ = stream.shutdown(std::net::Shutdown::Both);
                    match run_disconnect_drill(addr, &config, &session, token, &drill_config, &tx)?
                    {
                        Some(new_stream) => stream = new_stream,
                        None => {
                            eprintln!("session destroyed");
                            return Ok(0);
                        }
                    }
                }
            }
            Event::StdinClosed => {
                write_frame(&mut stream, FRAME_CLOSE, &[])?;
                close_sent = true;
            }
            Event::Frame(FRAME_RECORD, payload) => deliver_record(&session, &payload),
            Event::Frame(FRAME_CLOSE, _) => return Ok(0),
            Event::Frame(other, _) => {
                eprintln!("pfslink: ignoring unexpected frame {other:#04x}");
            }
            Event::SocketClosed => {
                return if close_sent {
                    Ok(0)
                } else {
                    Err(CliError::Io("connection lost".into()))
                };
            }
        }
    }
}

fn initiate_handshake(
    config: &ChannelConfig,
    stream: &mut TcpStream,
) -> Result<(Session, [u8; 8], Option<String>), CliError> {
    let (mut handshake, own_msg) = config.start_handshake(Role::Initiator)?;
    write_frame(stream, FRAME_HANDSHAKE, &own_msg.encode())?;
    let Some((FRAME_HANDSHAKE, payload)) = read_frame(stream)? else {
        return Err(CliError::Abort("peer closed during handshake".into()));
    };
    let peer_msg = HandshakeMessage::decode(&payload)
        .map_err(|err| CliError::Abort(format!("handshake: {err}")))?;
    let claim = peer_msg.sender_claim.clone();
    let material = handshake
        .absorb(&peer_msg)
        .map_err(|err| CliError::Abort(format!("handshake: {err}")))?;
    config.write_transcript(&handshake)?;
    let key = derive(&config.params, material.point(), &SystemClock)
        .map_err(|err| CliError::Abort(format!("derive: {err}")))?;
    Ok((
        Session::new(key, Arc::new(SystemClock)),
        own_msg.session_id,
        claim,
    ))
}

/// Drops the connection without warning, then reconnects with a simulated
/// gap and follows the listener's decision. `None` means the session was
/// destroyed by the ten-minute rule.
fn run_disconnect_drill(
    addr: &str,
    config: &ChannelConfig,
    session: &Arc<Mutex<Session>>,
    token: [u8; 8],
    drill: &DisconnectDrill,
    tx: &Sender<Event>,
) -> Result<Option<TcpStream>, CliError> {
    let since = SystemClock.now();
    session
        .lock()
        .expect("session lock")
        .mark_disconnected(since)
        .map_err(|err| CliError::Abort(format!("suspend: {err}")))?;
    eprintln!(
        "dropped connection (drill); reconnecting with gap {}s",
        drill.gap_secs
    );

    // Give the listener a beat to notice the vanished peer and suspend.
    std::thread::sleep(std::time::Duration::from_millis(150));
    let mut stream = TcpStream::connect(addr)?;
    let mut resume = Vec::with_capacity(16);
    resume.extend_from_slice(&token);
    resume.extend_from_slice(&drill.gap_secs.to_be_bytes());
    write_frame(&mut stream, FRAME_RESUME, &resume)?;

    let Some((FRAME_DECISION, decision)) = read_frame(&mut stream)? else {
        return Err(CliError::Abort("no resume decision from peer".into()));
    };
    let local = session
        .lock()
        .expect("session lock")
        .attempt_resume(since + drill.gap_secs)
        .map_err(|err| CliError::Abort(format!("resume: {err}")))?;

    match (decision.first().copied(), local) {
        (Some(DECISION_SAME_KEY), ResumeDecision::ResumeWithSameKey) => {
            eprintln!(
                "resumed epoch={} (same key, gap {}s)",
                session
                    .lock()
                    .expect("session lock")
                    .epoch()
                    .unwrap_or_default(),
                drill.gap_secs
            );
            spawn_reader(stream.try_clone()?, tx.clone());
            Ok(Some(stream))
        }
        (Some(DECISION_RENEGOTIATE), ResumeDecision::RequireRenegotiation) => {
            let (mut handshake, own_msg) = config.start_handshake(Role::Initiator)?;
            write_frame(&mut stream, FRAME_HANDSHAKE, &own_msg.encode())?;
            let Some((FRAME_HANDSHAKE, payload)) = read_frame(&mut stream)? else {
                return Err(CliError::Abort("peer closed during renegotiation".into()));
            };
            let peer_msg = HandshakeMessage::decode(&payload)
                .map_err(|err| CliError::Abort(format!("handshake: {err}")))?;
            let material = handshake
                .absorb(&peer_msg)
                .map_err(|err| CliError::Abort(format!("handshake: {err}")))?;
            let new_key = derive(&config.params, material.point(), &SystemClock)
                .map_err(|err| CliError::Abort(format!("derive: {err}")))?;
            session
                .lock()
                .expect("session lock")
                .install_rekey(new_key)
                .map_err(|err| CliError::Abort(format!("rekey: {err}")))?;
            eprintln!(
                "renegotiated epoch={} (gap {}s)",
                session
                    .lock()
                    .expect("session lock")
                    .epoch()
                    .unwrap_or_default(),
                drill.gap_secs
            );
            spawn_reader(stream.try_clone()?, tx.clone());
            Ok(Some(stream))
        }
        (Some(DECISION_DESTROYED), ResumeDecision::SessionDestroyed) => Ok(None),
        (peer_decision, local_decision) => Err(CliError::Abort(format!(
            "resume decisions diverged: peer {peer_decision:?}, local {local_decision:?}"
        ))),
    }
}

// ---------------------------------------------------------------------------
// File transfer
// ---------------------------------------------------------------------------

pub fn send_file(addr: &str, config: ChannelConfig, path: &Path) -> Result<u8, CliError> {
    let contents = std::fs::read(path)?;
    let mut stream = TcpStream::connect(addr)?;
    let (session, _, peer) = initiate_handshake(&config, &mut stream)?;
    let session = Mutex::new(session);
    established_line(&session, peer.as_deref());

    for chunk in contents.chunks(4096) {
        send_record(&session, &mut stream, chunk)?;
    }
    write_frame(&mut stream, FRAME_CLOSE, &[])?;
    // Drain until the peer acknowledges the close or hangs up.
    loop {
        match read_frame(&mut stream)? {
            Some((FRAME_CLOSE, _)) | None => break,
            Some((FRAME_RECORD, payload)) => deliver_record(&session, &payload),
            Some(_) => {}
        }
    }
    eprintln!("sent {} bytes from {}", contents.len(), path.display());
    Ok(0)
}
