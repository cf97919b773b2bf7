//! Two-process reconciliation over a byte stream.
//!
//! Alice drives the session; Bob reacts. Traffic is strictly
//! half-duplex — each side knows exactly which frame must arrive next
//! — so plain blocking I/O suffices and every delivered byte sequence
//! has exactly one valid interpretation.
//!
//! ```text
//! Alice                                Bob
//!   HELLO ------------------------------>
//!   <------------- HELLO (echo session)
//!   SYNC_PROBE(round 0) --------------->   initial-identity check
//!   <-------------------------- SYNC_ACK
//!   CHALLENGE(i) ---------------------->   repeated per iteration
//!   <-------------------------- RESPONSE
//!   SYNC_PROBE(round r) --------------->   after each trained round
//!   <-------------------------- SYNC_ACK
//!   DONE ------------------------------>
//! ```
//!
//! Both sides run the same counters the in-process simulator runs, so
//! given the same keys and challenge stream they finish with reports
//! whose fields are identical to the simulator's — and to each
//! other's, since a frame either succeeds (equal weights, equal
//! decoded bits) or is discarded with both bit strings left empty.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::thread::sleep;
use std::time::Duration;

use crate::channel::{SeededRng, STREAM_SESSION};
use crate::codec::BitString;
use crate::error::{Error, Result};
use crate::metrics;
use crate::session::{PartyState, ReconciliationReport, SessionConfig, TranscriptEntry};
use crate::wire::frame::{
    read_message, weight_digest, write_message, Message, Role, PROTOCOL_VERSION,
};

use crate::channel;

/// Derives the public session identifier from the base seed's
/// dedicated substream. The challenge stream is never touched, so
/// announcing this value reveals nothing about the challenges.
pub fn session_id(seed: u64) -> u64 {
    SeededRng::stream(seed, STREAM_SESSION).value()
}

/// Builds this side's HELLO from its config.
fn hello_message(role: Role, config: &SessionConfig, session_id: u64) -> Result<Message> {
    let hidden_units = u32::try_from(config.params.hidden_units)
        .map_err(|_| Error::InvalidParameter("hidden unit count exceeds u32".into()))?;
    let inputs_per_unit = u32::try_from(config.params.inputs_per_unit)
        .map_err(|_| Error::InvalidParameter("input count exceeds u32".into()))?;
    let block_bits = u8::try_from(config.block_bits)
        .map_err(|_| Error::InvalidParameter("block size exceeds u8".into()))?;
    Ok(Message::Hello {
        version: PROTOCOL_VERSION,
        role,
        rule: config.params.rule,
        block_bits,
        hidden_units,
        inputs_per_unit,
        half_width: config.params.half_width as u32,
        max_iterations: config.max_iterations,
        session_id,
    })
}

/// Checks a received HELLO against our config and expected role.
/// Returns the peer's session id on success.
fn check_hello(message: &Message, expected_role: Role, config: &SessionConfig) -> Result<u64> {
    let Message::Hello {
        version,
        role,
        rule,
        block_bits,
        hidden_units,
        inputs_per_unit,
        half_width,
        max_iterations,
        session_id,
    } = message
    else {
        return Err(Error::Protocol(format!(
            "expected HELLO, got frame type {}",
            message.type_code()
        )));
    };
    let mut mismatches = Vec::new();
    if *version != PROTOCOL_VERSION {
        mismatches.push(format!("version {version} != {PROTOCOL_VERSION}"));
    }
    if *role != expected_role {
        mismatches.push(format!("role {role} != {expected_role}"));
    }
    if *rule != config.params.rule {
        mismatches.push(format!("rule {rule} != {}", config.params.rule));
    }
    if u32::from(*block_bits) != config.block_bits {
        mismatches.push(format!("block size {block_bits} != {}", config.block_bits));
    }
    if u64::from(*hidden_units) != config.params.hidden_units as u64 {
        mismatches.push(format!(
            "hidden units {hidden_units} != {}",
            config.params.hidden_units
        ));
    }
    if u64::from(*inputs_per_unit) != config.params.inputs_per_unit as u64 {
        mismatches.push(format!(
            "inputs per unit {inputs_per_unit} != {}",
            config.params.inputs_per_unit
        ));
    }
    if *half_width != config.params.half_width as u32 {
        mismatches.push(format!(
            "half-width {half_width} != {}",
            config.params.half_width
        ));
    }
    if *max_iterations != config.max_iterations {
        mismatches.push(format!(
            "iteration cap {max_iterations} != {}",
            config.max_iterations
        ));
    }
    if mismatches.is_empty() {
        Ok(*session_id)
    } else {
        Err(Error::HandshakeMismatch(mismatches.join("; ")))
    }
}

/// Shared per-session bookkeeping for both roles.
struct PeerSession<'a, S: Read + Write> {
    stream: &'a mut S,
    config: &'a SessionConfig,
    state: PartyState,
    total_iterations: u64,
    rounds: u64,
    transcript: Option<Vec<TranscriptEntry>>,
}

impl<'a, S: Read + Write> PeerSession<'a, S> {
    fn new(stream: &'a mut S, config: &'a SessionConfig, key: &BitString) -> Result<Self> {
        config.validate()?;
        let expected = config.key_length()?;
        if key.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "key must be exactly {expected} bits, got {}",
                key.len()
            )));
        }
        Ok(PeerSession {
            stream,
            config,
            state: PartyState::from_key(key, config)?,
            total_iterations: 0,
            rounds: 0,
            transcript: config.record_transcript.then(Vec::new),
        })
    }

    fn record(&mut self, entry: TranscriptEntry) {
        if let Some(t) = self.transcript.as_mut() {
            t.push(entry);
        }
    }

    /// Assembles the final report; identical construction on both
    /// sides. On success the weights are equal, so each side's own
    /// decoded bits are also the peer's — on failure neither side
    /// keeps any bits at all.
    fn into_report(self, success: bool) -> Result<ReconciliationReport> {
        let bits = if success {
            self.state.decode_bits(self.config.block_bits)?
        } else {
            BitString::new()
        };
        Ok(ReconciliationReport {
            success,
            rounds: self.rounds,
            total_iterations: self.total_iterations,
            entropy_loss: metrics::entropy_loss(
                self.total_iterations,
                self.config.params.half_width,
            ),
            alice_bits: bits.clone(),
            bob_bits: bits,
            transcript: self.transcript,
        })
    }
}

/// Runs one reconciliation session over `stream` in the given role.
///
/// `challenges` is consumed only by Alice, one input vector per
/// iteration — pass the trial's challenge stream to reproduce an
/// in-process run exactly; Bob never draws from it. `session_id` is
/// likewise Alice's to announce; Bob echoes hers.
pub fn run_peer<S: Read + Write>(
    role: Role,
    stream: &mut S,
    config: &SessionConfig,
    key: &BitString,
    challenges: &mut SeededRng,
    session_id: u64,
) -> Result<ReconciliationReport> {
    match role {
        Role::Alice => run_alice(stream, config, key, challenges, session_id),
        Role::Bob => run_bob(stream, config, key),
    }
}

fn run_alice<S: Read + Write>(
    stream: &mut S,
    config: &SessionConfig,
    key: &BitString,
    challenges: &mut SeededRng,
    session_id: u64,
) -> Result<ReconciliationReport> {
    let mut session = PeerSession::new(stream, config, key)?;
    let hello = hello_message(Role::Alice, config, session_id)?;
    write_message(session.stream, &hello)?;
    let reply = read_message(session.stream)?;
    let echoed = check_hello(&reply, Role::Bob, config)?;
    if echoed != session_id {
        return Err(Error::HandshakeMismatch(format!(
            "peer echoed session {echoed:#018x}, expected {session_id:#018x}"
        )));
    }

    let entry_count = config.params.hidden_units * config.params.inputs_per_unit;
    // Probe the initial weights: identical keys reconcile for free.
    let mut synced = probe_sync(&mut session, 0)?;

    while !synced && session.total_iterations < config.max_iterations {
        let round_index = session.rounds + 1;
        let mut trained = false;
        while session.total_iterations < config.max_iterations {
            let iteration_index = session.total_iterations + 1;
            let input = channel::random_input(entry_count, challenges)?;
            let eval = session.state.evaluate(&input)?;
            write_message(
                session.stream,
                &Message::Challenge {
                    iteration_index,
                    hidden_units: config.params.hidden_units as u32,
                    inputs_per_unit: config.params.inputs_per_unit as u32,
                    tau: eval.output,
                    input: input.clone(),
                },
            )?;
            let reply = read_message(session.stream)?;
            let Message::Response {
                iteration_index: echoed_index,
                tau: tau_bob,
            } = reply
            else {
                return Err(Error::Protocol(format!(
                    "expected RESPONSE, got frame type {}",
                    reply.type_code()
                )));
            };
            if echoed_index != iteration_index {
                return Err(Error::Protocol(format!(
                    "response echoes iteration {echoed_index}, expected {iteration_index}"
                )));
            }
            let matched = eval.output == tau_bob;
            if matched {
                session.state.apply_training(&input, &eval)?;
            }
            session.total_iterations += 1;
            session.record(TranscriptEntry {
                round_index,
                iteration_index,
                input,
                tau_alice: eval.output,
                tau_bob,
                matched,
                trained: matched,
            });
            if matched {
                trained = true;
                break;
            }
        }
        session.rounds += 1;
        if trained {
            let completed = session.rounds;
            synced = probe_sync(&mut session, completed)?;
        }
    }

    write_message(
        session.stream,
        &Message::Done {
            success: synced,
            total_iterations: session.total_iterations,
            rounds: session.rounds,
        },
    )?;
    session.into_report(synced)
}

/// One digest probe from Alice's side; returns Bob's verdict.
fn probe_sync<S: Read + Write>(session: &mut PeerSession<'_, S>, round_index: u64) -> Result<bool> {
    let digest = weight_digest(session.state.weights())?;
    write_message(
        session.stream,
        &Message::SyncProbe {
            round_index,
            digest,
        },
    )?;
    let reply = read_message(session.stream)?;
    let Message::SyncAck {
        round_index: echoed,
        equal,
    } = reply
    else {
        return Err(Error::Protocol(format!(
            "expected SYNC_ACK, got frame type {}",
            reply.type_code()
        )));
    };
    if echoed != round_index {
        return Err(Error::Protocol(format!(
            "sync ack echoes round {echoed}, expected {round_index}"
        )));
    }
    Ok(equal)
}

fn run_bob<S: Read + Write>(
    stream: &mut S,
    config: &SessionConfig,
    key: &BitString,
) -> Result<ReconciliationReport> {
    let mut session = PeerSession::new(stream, config, key)?;
    let opener = read_message(session.stream)?;
    // Echo our parameters (and Alice's session id) before judging the
    // handshake, so a mismatch is observed symmetrically: Alice reads
    // our HELLO and reaches the same verdict instead of hitting EOF.
    if let Message::Hello { session_id, .. } = &opener {
        let hello = hello_message(Role::Bob, config, *session_id)?;
        write_message(session.stream, &hello)?;
    }
    check_hello(&opener, Role::Alice, config)?;

    let mut synced = false;
    let mut in_round = false;
    loop {
        let message = read_message(session.stream)?;
        match message {
            Message::SyncProbe {
                round_index,
                digest,
            } => {
                let mine = weight_digest(session.state.weights())?;
                let equal = mine == digest;
                write_message(session.stream, &Message::SyncAck { round_index, equal })?;
                synced = equal;
            }
            Message::Challenge {
                iteration_index,
                hidden_units,
                inputs_per_unit,
                tau: tau_alice,
                input,
            } => {
                if u64::from(hidden_units) != config.params.hidden_units as u64
                    || u64::from(inputs_per_unit) != config.params.inputs_per_unit as u64
                {
                    return Err(Error::Protocol(format!(
                        "challenge geometry {hidden_units}x{inputs_per_unit} does not match the session"
                    )));
                }
                if iteration_index != session.total_iterations + 1
                    || iteration_index > config.max_iterations
                {
                    return Err(Error::Protocol(format!(
                        "challenge numbers iteration {iteration_index}, expected {}",
                        session.total_iterations + 1
                    )));
                }
                let eval = session.state.evaluate(&input)?;
                write_message(
                    session.stream,
                    &Message::Response {
                        iteration_index,
                        tau: eval.output,
                    },
                )?;
                let matched = tau_alice == eval.output;
                if matched {
                    session.state.apply_training(&input, &eval)?;
                }
                in_round = true;
                session.total_iterations += 1;
                session.record(TranscriptEntry {
                    round_index: session.rounds + 1,
                    iteration_index,
                    input,
                    tau_alice,
                    tau_bob: eval.output,
                    matched,
                    trained: matched,
                });
                if matched {
                    session.rounds += 1;
                    in_round = false;
                }
            }
            Message::Done {
                success,
                total_iterations,
                rounds,
            } => {
                if in_round {
                    // Alice's budget ran out mid-round; that truncated
                    // round still counts, exactly as the simulator
                    // counts it.
                    session.rounds += 1;
                }
                if success != synced
                    || total_iterations != session.total_iterations
                    || rounds != session.rounds
                {
                    return Err(Error::Protocol(format!(
                        "DONE carries success={success} iterations={total_iterations} \
                         rounds={rounds}, but this side saw success={synced} \
                         iterations={} rounds={}",
                        session.total_iterations, session.rounds
                    )));
                }
                return session.into_report(success);
            }
            other => {
                return Err(Error::Protocol(format!(
                    "unexpected frame type {} mid-session",
                    other.type_code()
                )));
            }
        }
    }
}

/// Binds a listener; `addr` is typically `127.0.0.1:0` to let the OS
/// pick a port (read it back from the returned address).
pub fn open_listener(addr: &str) -> Result<(TcpListener, SocketAddr)> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    Ok((listener, local))
}

/// Accepts a single connection and prepares it for the protocol's
/// small half-duplex frames.
pub fn accept_one(listener: &TcpListener) -> Result<TcpStream> {
    let (stream, _) = listener.accept()?;
    stream.set_nodelay(true)?;
    Ok(stream)
}

/// Connects to a peer, retrying while it finishes binding.
pub fn connect_retry(addr: &str, attempts: u32, delay: Duration) -> Result<TcpStream> {
    let targets: Vec<SocketAddr> = addr.to_socket_addrs()?.collect();
    let mut last_error = None;
    for attempt in 0..attempts.max(1) {
        if attempt > 0 {
            sleep(delay);
        }
        match TcpStream::connect(&targets[..]) {
            Ok(stream) => {
                stream.set_nodelay(true)?;
                return Ok(stream);
            }
            Err(e) => last_error = Some(e),
        }
    }
    Err(Error::Transport(last_error.expect("at least one attempt")))
}

/// [`run_peer`] over a fresh TCP stream, with Nagle's algorithm
/// disabled for the request-response pattern.
pub fn run_peer_tcp(
    role: Role,
    stream: TcpStream,
    config: &SessionConfig,
    key: &BitString,
    challenges: &mut SeededRng,
    session_id: u64,
) -> Result<ReconciliationReport> {
    stream.set_nodelay(true)?;
    let mut stream = stream;
    run_peer(role, &mut stream, config, key, challenges, session_id)
}
