//! The two session state machines.
//!
//! The victim garbles and the attacker evaluates. Each side runs one
//! strictly ordered exchange; any unexpected frame is answered with ABORT
//! tagged with the protocol step in progress.

use std::fmt;
use std::io::{self, Read, Write};
use std::net::{Shutdown, TcpStream};
use std::time::{Duration, Instant};

use parley_circuit::{build_from_scaled, circuit_digest_bytes, Circuit, GateKind, MechanismCircuit, PartyInputs};
use parley_core::mechanism::MechanismOutcome;
use parley_garble::ot::{OtReceiver, OtSender};
use parley_garble::{decode_and_prove, evaluate, garble, verify_output, Block, GarbledCircuit};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{NegotiationConfig, Role};
use crate::message::{self, Hello};
use crate::transcript::{Direction, SessionTranscript};
use crate::wire::{read_message, write_message, MsgType, WireMessage};

pub const DEFAULT_STEP_TIMEOUT: Duration = Duration::from_secs(10);

/// Protocol step an abort is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Stage {
    /// Agreeing on the strategy profile and exchange time.
    Agreement = 1,
    /// Garbling and transferring the circuit.
    Circuit = 2,
    /// Input labels and oblivious transfer.
    Inputs = 3,
    /// Evaluation, decoding, and the circuit correspondence check.
    Evaluation = 4,
    /// The victim's check of the returned output labels.
    Verification = 5,
}

impl Stage {
    pub fn from_byte(b: u8) -> Option<Self> {
        use Stage::*;
        [Agreement, Circuit, Inputs, Evaluation, Verification]
            .into_iter()
            .find(|s| *s as u8 == b)
    }

    pub fn step(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Local,
    Remote,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Local => "local",
            Origin::Remote => "peer",
        })
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{origin} abort at step {stage}: {reason}")]
    Aborted {
        stage: Stage,
        origin: Origin,
        reason: String,
    },
    #[error("timed out at step {stage}")]
    Timeout { stage: Stage },
    #[error("transport failure at step {stage}: {source}")]
    Transport {
        stage: Stage,
        #[source]
        source: io::Error,
    },
}

impl SessionError {
    pub fn stage(&self) -> Stage {
        match self {
            SessionError::Aborted { stage, .. }
            | SessionError::Timeout { stage }
            | SessionError::Transport { stage, .. } => *stage,
        }
    }

    /// 2 for aborts and timeouts, 3 for transport failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            SessionError::Aborted { .. } | SessionError::Timeout { .. } => 2,
            SessionError::Transport { .. } => 3,
        }
    }

    fn is_local_abort(&self) -> bool {
        matches!(
            self,
            SessionError::Aborted {
                origin: Origin::Local,
                ..
            } | SessionError::Timeout { .. }
        )
    }
}

/// Fault injection for negative tests. Honest parties use `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Tamper {
    #[default]
    None,
    /// Victim flips a byte in every row of the last AND table that
    /// influences an output.
    GarbledTable,
    /// Victim garbles a circuit whose `q_scale` is off by one.
    WrongQScale,
    /// Attacker alters one returned output label.
    ForgedOutputLabel,
}

#[derive(Debug, Clone)]
pub struct SessionOptions {
    /// Deterministic randomness for tests. The party's coin shares are then
    /// reported in [`Agreement::shares`].
    pub seed: Option<[u8; 32]>,
    pub step_timeout: Duration,
    pub tamper: Tamper,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            seed: None,
            step_timeout: DEFAULT_STEP_TIMEOUT,
            tamper: Tamper::None,
        }
    }
}

impl SessionOptions {
    pub fn seeded(seed: [u8; 32]) -> Self {
        Self {
            seed: Some(seed),
            ..Self::default()
        }
    }
}

/// One party's XOR shares of the two coins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CoinShares {
    pub s0: u64,
    pub s1: u64,
}

/// A completed negotiation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agreement {
    pub outcome: MechanismOutcome<u64>,
    /// Present only in seeded mode.
    pub shares: Option<CoinShares>,
}

#[derive(Debug)]
pub struct SessionReport {
    pub transcript: SessionTranscript,
    pub result: Result<Agreement, SessionError>,
}

impl SessionReport {
    pub fn outcome(&self) -> Option<&MechanismOutcome<u64>> {
        self.result.as_ref().ok().map(|a| &a.outcome)
    }
}

/// Uniform `k`-bit shares.
pub fn draw_shares<R: RngCore>(rng: &mut R, k: u32) -> CoinShares {
    let mask = if k >= 64 { u64::MAX } else { (1u64 << k) - 1 };
    CoinShares {
        s0: rng.next_u64() & mask,
        s1: rng.next_u64() & mask,
    }
}

fn session_rng(seed: Option<[u8; 32]>, role: Role) -> ChaCha20Rng {
    match seed {
        Some(seed) => {
            let mut h = Sha256::new();
            h.update(b"parley-session");
            h.update([role as u8]);
            h.update(seed);
            ChaCha20Rng::from_seed(h.finalize().into())
        }
        None => ChaCha20Rng::from_entropy(),
    }
}

struct Channel<'a, S> {
    stream: &'a mut S,
    transcript: SessionTranscript,
    stage: Stage,
}

impl<S: Read + Write> Channel<'_, S> {
    fn io_error(&mut self, e: io::Error) -> SessionError {
        match e.kind() {
            io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => {
                self.send_abort(self.stage, "step timed out");
                SessionError::Timeout { stage: self.stage }
            }
            io::ErrorKind::InvalidData => self.abort(format!("malformed frame: {e}")),
            _ => SessionError::Transport {
                stage: self.stage,
                source: e,
            },
        }
    }

    fn send(&mut self, msg_type: MsgType, payload: Vec<u8>) -> Result<(), SessionError> {
        let msg = WireMessage::new(msg_type, payload);
        self.transcript.record(Direction::Sent, &msg);
        write_message(self.stream, &msg).map_err(|e| self.io_error(e))
    }

    fn send_abort(&mut self, stage: Stage, reason: &str) {
        let msg = WireMessage::new(MsgType::Abort, message::encode_abort(stage, reason));
        self.transcript.record(Direction::Sent, &msg);
        let _ = write_message(self.stream, &msg);
    }

    fn abort_at(&mut self, stage: Stage, reason: impl Into<String>) -> SessionError {
        let reason = reason.into();
        self.send_abort(stage, &reason);
        SessionError::Aborted {
            stage,
            origin: Origin::Local,
            reason,
        }
    }

    fn abort(&mut self, reason: impl Into<String>) -> SessionError {
        self.abort_at(self.stage, reason)
    }

    fn recv(&mut self, expected: MsgType) -> Result<Vec<u8>, SessionError> {
        let msg = read_message(self.stream).map_err(|e| self.io_error(e))?;
        self.transcript.record(Direction::Received, &msg);
        if msg.msg_type == MsgType::Abort {
            let (stage, reason) = message::decode_abort(&msg.payload);
            return Err(SessionError::Aborted {
                stage: stage.unwrap_or(self.stage),
                origin: Origin::Remote,
                reason,
            });
        }
        if msg.msg_type != expected {
            return Err(self.abort(format!("unexpected {} while waiting for {expected}", msg.msg_type)));
        }
        Ok(msg.payload)
    }
}

fn run<S, F>(stream: &mut S, body: F) -> SessionReport
where
    S: Read + Write,
    F: FnOnce(&mut Channel<'_, S>) -> Result<Agreement, SessionError>,
{
    let mut ch = Channel {
        stream,
        transcript: SessionTranscript::new(),
        stage: Stage::Agreement,
    };
    let result = body(&mut ch);
    SessionReport {
        transcript: ch.transcript,
        result,
    }
}

fn prepare(stream: &TcpStream, timeout: Duration) {
    let _ = stream.set_nodelay(true);
    let _ = stream.set_read_timeout(Some(timeout));
    let _ = stream.set_write_timeout(Some(timeout));
}

/// After a local abort, stop writing and read until the peer closes, so
/// that our ABORT is not lost to a connection reset.
fn linger(stream: &mut TcpStream, report: &SessionReport) {
    if report.result.as_ref().err().is_some_and(SessionError::is_local_abort) {
        let _ = stream.shutdown(Shutdown::Write);
        let _ = stream.set_read_timeout(Some(Duration::from_millis(200)));
        let deadline = Instant::now() + Duration::from_secs(2);
        let mut sink = [0u8; 4096];
        while Instant::now() < deadline {
            match stream.read(&mut sink) {
                Ok(0) | Err(_) => break,
                Ok(_) => {}
            }
        }
    }
}

/// Victim side over a connected socket.
pub fn run_victim(stream: &mut TcpStream, config: &NegotiationConfig, options: &SessionOptions) -> SessionReport {
    prepare(stream, options.step_timeout);
    let report = run_victim_over(stream, config, options);
    linger(stream, &report);
    report
}

/// Attacker side over a connected socket.
pub fn run_attacker(stream: &mut TcpStream, config: &NegotiationConfig, options: &SessionOptions) -> SessionReport {
    prepare(stream, options.step_timeout);
    let report = run_attacker_over(stream, config, options);
    linger(stream, &report);
    report
}

/// Victim side over any byte stream. Timeouts are the stream's own.
pub fn run_victim_over<S: Read + Write>(
    stream: &mut S,
    config: &NegotiationConfig,
    options: &SessionOptions,
) -> SessionReport {
    run(stream, |ch| victim(ch, config, options))
}

/// Attacker side over any byte stream. Timeouts are the stream's own.
pub fn run_attacker_over<S: Read + Write>(
    stream: &mut S,
    config: &NegotiationConfig,
    options: &SessionOptions,
) -> SessionReport {
    run(stream, |ch| attacker(ch, config, options))
}

fn victim<S: Read + Write>(
    ch: &mut Channel<'_, S>,
    config: &NegotiationConfig,
    options: &SessionOptions,
) -> Result<Agreement, SessionError> {
    let mut rng = session_rng(options.seed, Role::Victim);

    ch.stage = Stage::Agreement;
    let proposal = config
        .hello()
        .ok()
        .and_then(|h| h.encode())
        .ok_or_else(|| ch.abort("strategy profile is not representable"))?;
    let expected_ack = Sha256::digest(&proposal).to_vec();
    ch.send(MsgType::Hello, proposal)?;
    if ch.recv(MsgType::PiAck)? != expected_ack {
        return Err(ch.abort("acknowledgement does not match the proposal"));
    }

    ch.stage = Stage::Circuit;
    let mut scaled = config.scaled();
    if options.tamper == Tamper::WrongQScale {
        scaled.q_scale = if scaled.q_scale > 1 {
            scaled.q_scale - 1
        } else {
            scaled.q_scale + 1
        };
    }
    let mc = build_from_scaled(&scaled).map_err(|e| ch.abort(format!("cannot build circuit: {e}")))?;
    let mut garble_seed = [0u8; 16];
    rng.fill_bytes(&mut garble_seed);
    let (mut gc, state) = garble(&mc.circuit, garble_seed);
    if options.tamper == Tamper::GarbledTable {
        corrupt_live_table(&mc.circuit, &mut gc);
    }
    ch.send(
        MsgType::Circuit,
        message::encode_circuit(&mc.circuit.to_bytes(), &gc.to_bytes()),
    )?;

    ch.stage = Stage::Inputs;
    let shares = draw_shares(&mut rng, config.params.k());
    let own_bits = mc.layout.encode_party(&PartyInputs {
        s0: shares.s0,
        s1: shares.s1,
        theta: config.theta,
    });
    let own_labels: Vec<Block> = own_bits
        .iter()
        .enumerate()
        .map(|(w, &b)| state.input_label(w, b))
        .collect();
    ch.send(MsgType::GarblerInputLabels, message::encode_labels(&own_labels))?;

    let n = own_bits.len();
    let (sender, msg1) = OtSender::new(&mut rng);
    ch.send(MsgType::OtMsg1, message::encode_point(&msg1))?;
    let payload = ch.recv(MsgType::OtMsg2)?;
    let points = message::decode_points(&payload).map_err(|e| ch.abort(e.to_string()))?;
    let pairs: Vec<(Block, Block)> = (n..2 * n).map(|w| state.input_pair(w)).collect();
    let ciphertexts = sender
        .respond(&points, &pairs)
        .map_err(|e| ch.abort(format!("oblivious transfer: {e}")))?;
    ch.send(MsgType::OtMsg3, message::encode_ciphertexts(&ciphertexts))?;

    ch.stage = Stage::Evaluation;
    let payload = ch.recv(MsgType::OutputLabels)?;
    ch.stage = Stage::Verification;
    let labels = message::decode_labels("OUTPUT_LABELS", &payload).map_err(|e| ch.abort(e.to_string()))?;
    let bits = verify_output(&state, &labels).map_err(|e| ch.abort(format!("invalid output label: {e}")))?;
    let outcome = decode_outcome(ch, &mc, &bits)?;
    ch.send(MsgType::ResultAck, message::encode_result(&outcome))?;

    Ok(Agreement {
        outcome,
        shares: options.seed.map(|_| shares),
    })
}

fn attacker<S: Read + Write>(
    ch: &mut Channel<'_, S>,
    config: &NegotiationConfig,
    options: &SessionOptions,
) -> Result<Agreement, SessionError> {
    let mut rng = session_rng(options.seed, Role::Attacker);

    ch.stage = Stage::Agreement;
    let payload = ch.recv(MsgType::Hello)?;
    let proposal = Hello::decode(&payload).map_err(|e| ch.abort(e.to_string()))?;
    if !config.accepts(&proposal) {
        return Err(ch.abort("proposed strategy profile differs from the configured one"));
    }
    ch.send(MsgType::PiAck, Sha256::digest(&payload).to_vec())?;

    ch.stage = Stage::Circuit;
    let own = build_from_scaled(&config.scaled()).map_err(|e| ch.abort(format!("cannot build circuit: {e}")))?;
    let payload = ch.recv(MsgType::Circuit)?;
    let (circuit_bytes, garbled_bytes) = message::decode_circuit(&payload).map_err(|e| ch.abort(e.to_string()))?;
    let gc = GarbledCircuit::from_bytes(garbled_bytes).map_err(|e| ch.abort(e.to_string()))?;
    let digest = own.circuit.digest();
    if circuit_digest_bytes(circuit_bytes) != digest || gc.circuit_digest != digest {
        return Err(ch.abort_at(
            Stage::Evaluation,
            "circuit does not correspond to the agreed mechanism",
        ));
    }

    ch.stage = Stage::Inputs;
    let n = own.layout.party_bits() as usize;
    let payload = ch.recv(MsgType::GarblerInputLabels)?;
    let garbler_labels =
        message::decode_labels("GARBLER_INPUT_LABELS", &payload).map_err(|e| ch.abort(e.to_string()))?;
    if garbler_labels.len() != n {
        return Err(ch.abort(format!("expected {n} garbler input labels, got {}", garbler_labels.len())));
    }
    let payload = ch.recv(MsgType::OtMsg1)?;
    let msg1 = message::decode_point(&payload).map_err(|e| ch.abort(e.to_string()))?;
    let shares = draw_shares(&mut rng, config.params.k());
    let choices = own.layout.encode_party(&PartyInputs {
        s0: shares.s0,
        s1: shares.s1,
        theta: config.theta,
    });
    let (receiver, msg2) =
        OtReceiver::new(&mut rng, &msg1, &choices).map_err(|e| ch.abort(format!("oblivious transfer: {e}")))?;
    ch.send(MsgType::OtMsg2, message::encode_points(&msg2))?;
    let payload = ch.recv(MsgType::OtMsg3)?;
    let ciphertexts = message::decode_ciphertexts(&payload).map_err(|e| ch.abort(e.to_string()))?;
    let own_labels = receiver
        .finish(&ciphertexts)
        .map_err(|e| ch.abort(format!("oblivious transfer: {e}")))?;

    ch.stage = Stage::Evaluation;
    let mut inputs = garbler_labels;
    inputs.extend(own_labels);
    let out = evaluate(&gc, &own.circuit, &inputs).map_err(|e| ch.abort(format!("evaluation failed: {e}")))?;
    let (bits, mut proof) = decode_and_prove(&gc, &out).map_err(|e| ch.abort(format!("output decoding failed: {e}")))?;
    let outcome = decode_outcome(ch, &own, &bits)?;
    if options.tamper == Tamper::ForgedOutputLabel {
        proof[0] ^= Block(1 << 64);
    }
    ch.send(MsgType::OutputLabels, message::encode_labels(&proof))?;

    ch.stage = Stage::Verification;
    let payload = ch.recv(MsgType::ResultAck)?;
    let acked = message::decode_result(&payload).map_err(|e| ch.abort(e.to_string()))?;
    if acked != outcome {
        return Err(ch.abort("victim acknowledged a different outcome"));
    }

    Ok(Agreement {
        outcome,
        shares: options.seed.map(|_| shares),
    })
}

fn decode_outcome<S: Read + Write>(
    ch: &mut Channel<'_, S>,
    mc: &MechanismCircuit,
    bits: &[bool],
) -> Result<MechanismOutcome<u64>, SessionError> {
    let outcome = mc.layout.decode(bits).map_err(|e| ch.abort(e.to_string()))?;
    if !outcome.is_consistent() || outcome.r_f >> mc.layout.k_theta != 0 {
        return Err(ch.abort("decoded outcome is inconsistent"));
    }
    Ok(outcome)
}

/// Flips the low byte of each row of the last AND gate on a path to an output.
fn corrupt_live_table(circuit: &Circuit, gc: &mut GarbledCircuit) {
    let mut live = vec![false; circuit.wire_count() as usize];
    for w in circuit.output_wires() {
        live[w as usize] = true;
    }
    let mut and_index = circuit.and_count();
    for g in circuit.gates().iter().rev() {
        if g.kind == GateKind::And {
            and_index -= 1;
        }
        if !live[g.out as usize] {
            continue;
        }
        if g.kind == GateKind::And {
            for row in &mut gc.tables[and_index] {
                *row ^= Block(0xff);
            }
            return;
        }
        live[g.in_a as usize] = true;
        if g.kind == GateKind::Xor {
            live[g.in_b as usize] = true;
        }
    }
}
