use parley_circuit::{Circuit, GateKind};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::block::{Block, GateHash, Prp};

const COMMIT_DOMAIN: &[u8] = b"parley-output-label";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GarbleError {
    #[error("garbled circuit was built for a different circuit")]
    DigestMismatch,
    #[error("expected {expected} {what}, got {got}")]
    Count {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("output label {index} matches neither commitment")]
    InvalidOutputLabel { index: usize },
    #[error("serialized garbled circuit is malformed: {0}")]
    Malformed(&'static str),
}

/// What the evaluator receives: AND tables and output commitments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GarbledCircuit {
    pub circuit_digest: [u8; 32],
    pub gate_count: u32,
    /// Four rows per AND gate in gate order, indexed by the input color bits.
    pub tables: Vec<[Block; 4]>,
    /// `(H(label₀), H(label₁))` per output bit.
    pub output_decode: Vec<([u8; 32], [u8; 32])>,
}

/// The garbler's secrets: the free-XOR offset and the zero labels it needs.
#[derive(Debug, Clone)]
pub struct GarblerState {
    delta: Block,
    input_zero: Vec<Block>,
    output_zero: Vec<Block>,
}

impl GarblerState {
    pub fn delta(&self) -> Block {
        self.delta
    }

    /// `(label₀, label₁)` of input wire `wire`.
    pub fn input_pair(&self, wire: usize) -> (Block, Block) {
        let zero = self.input_zero[wire];
        (zero, zero ^ self.delta)
    }

    pub fn input_label(&self, wire: usize, bit: bool) -> Block {
        let (zero, one) = self.input_pair(wire);
        if bit {
            one
        } else {
            zero
        }
    }

    /// `(label₀, label₁)` of output bit `index`.
    pub fn output_pair(&self, index: usize) -> (Block, Block) {
        let zero = self.output_zero[index];
        (zero, zero ^ self.delta)
    }

    pub fn input_count(&self) -> usize {
        self.input_zero.len()
    }
}

fn commit(index: usize, label: Block) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(COMMIT_DOMAIN);
    h.update((index as u32).to_le_bytes());
    h.update(label.to_bytes());
    h.finalize().into()
}

/// Garbles `circuit` with labels derived from `seed`.
pub fn garble(circuit: &Circuit, seed: [u8; 16]) -> (GarbledCircuit, GarblerState) {
    let prg = Prp::new(seed);
    let hash = GateHash::new();
    let delta = Block(prg.permute(Block(u128::MAX)).0 | 1);

    let n_inputs = circuit.input_count() as usize;
    let mut zero = Vec::with_capacity(circuit.wire_count() as usize);
    zero.extend((0..n_inputs).map(|w| prg.permute(Block(w as u128))));

    let mut tables = Vec::with_capacity(circuit.and_count());
    for (gid, g) in circuit.gates().iter().enumerate() {
        let a0 = zero[g.in_a as usize];
        let out0 = match g.kind {
            GateKind::Xor => a0 ^ zero[g.in_b as usize],
            GateKind::Not => a0 ^ delta,
            GateKind::And => {
                let b0 = zero[g.in_b as usize];
                let out0 = prg.permute(Block(g.out as u128));
                let mut rows = [Block::ZERO; 4];
                for (x, y) in [(false, false), (false, true), (true, false), (true, true)] {
                    let la = if x { a0 ^ delta } else { a0 };
                    let lb = if y { b0 ^ delta } else { b0 };
                    let lo = if x && y { out0 ^ delta } else { out0 };
                    let row = 2 * la.lsb() as usize + lb.lsb() as usize;
                    rows[row] = hash.hash(la, lb, gid as u64) ^ lo;
                }
                tables.push(rows);
                out0
            }
        };
        zero.push(out0);
    }

    let output_zero: Vec<Block> = circuit.output_wires().map(|w| zero[w as usize]).collect();
    let output_decode = output_zero
        .iter()
        .enumerate()
        .map(|(i, &l)| (commit(i, l), commit(i, l ^ delta)))
        .collect();
    zero.truncate(n_inputs);

    (
        GarbledCircuit {
            circuit_digest: circuit.digest(),
            gate_count: circuit.gates().len() as u32,
            tables,
            output_decode,
        },
        GarblerState {
            delta,
            input_zero: zero,
            output_zero,
        },
    )
}

/// Evaluates under encryption. The circuit must match the digest the
/// garbled circuit was built for.
pub fn evaluate(gc: &GarbledCircuit, circuit: &Circuit, input_labels: &[Block]) -> Result<Vec<Block>, GarbleError> {
    if gc.circuit_digest != circuit.digest() {
        return Err(GarbleError::DigestMismatch);
    }
    let n_inputs = circuit.input_count() as usize;
    if input_labels.len() != n_inputs {
        return Err(GarbleError::Count {
            what: "input labels",
            expected: n_inputs,
            got: input_labels.len(),
        });
    }
    if gc.tables.len() != circuit.and_count() {
        return Err(GarbleError::Count {
            what: "garbled tables",
            expected: circuit.and_count(),
            got: gc.tables.len(),
        });
    }
    if gc.output_decode.len() != circuit.output_count() {
        return Err(GarbleError::Count {
            what: "output commitments",
            expected: circuit.output_count(),
            got: gc.output_decode.len(),
        });
    }
    let hash = GateHash::new();
    let mut labels = Vec::with_capacity(circuit.wire_count() as usize);
    labels.extend_from_slice(input_labels);
    let mut tables = gc.tables.iter();
    for (gid, g) in circuit.gates().iter().enumerate() {
        let a = labels[g.in_a as usize];
        let out = match g.kind {
            GateKind::Xor => a ^ labels[g.in_b as usize],
            GateKind::Not => a,
            GateKind::And => {
                let b = labels[g.in_b as usize];
                let rows = tables.next().expect("table count checked");
                rows[2 * a.lsb() as usize + b.lsb() as usize] ^ hash.hash(a, b, gid as u64)
            }
        };
        labels.push(out);
    }
    Ok(circuit.output_wires().map(|w| labels[w as usize]).collect())
}

/// Decodes output labels against the commitments, returning the bits and the
/// labels to send back as proof.
pub fn decode_and_prove(gc: &GarbledCircuit, output_labels: &[Block]) -> Result<(Vec<bool>, Vec<Block>), GarbleError> {
    if output_labels.len() != gc.output_decode.len() {
        return Err(GarbleError::Count {
            what: "output labels",
            expected: gc.output_decode.len(),
            got: output_labels.len(),
        });
    }
    let bits = output_labels
        .iter()
        .zip(&gc.output_decode)
        .enumerate()
        .map(|(index, (&label, (c0, c1)))| {
            let c = commit(index, label);
            if c == *c0 {
                Ok(false)
            } else if c == *c1 {
                Ok(true)
            } else {
                Err(GarbleError::InvalidOutputLabel { index })
            }
        })
        .collect::<Result<_, _>>()?;
    Ok((bits, output_labels.to_vec()))
}

/// Garbler-side check that each returned label is one of the two it issued.
pub fn verify_output(state: &GarblerState, labels: &[Block]) -> Result<Vec<bool>, GarbleError> {
    if labels.len() != state.output_zero.len() {
        return Err(GarbleError::Count {
            what: "output labels",
            expected: state.output_zero.len(),
            got: labels.len(),
        });
    }
    labels
        .iter()
        .enumerate()
        .map(|(index, &l)| {
            let (zero, one) = state.output_pair(index);
            if l == zero {
                Ok(false)
            } else if l == one {
                Ok(true)
            } else {
                Err(GarbleError::InvalidOutputLabel { index })
            }
        })
        .collect()
}

impl GarbledCircuit {
    /// Little-endian encoding: digest, gate count, AND tables, commitments.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(44 + self.tables.len() * 64 + self.output_decode.len() * 64);
        out.extend_from_slice(&self.circuit_digest);
        out.extend_from_slice(&self.gate_count.to_le_bytes());
        out.extend_from_slice(&(self.tables.len() as u32).to_le_bytes());
        for rows in &self.tables {
            for r in rows {
                out.extend_from_slice(&r.to_bytes());
            }
        }
        out.extend_from_slice(&(self.output_decode.len() as u32).to_le_bytes());
        for (c0, c1) in &self.output_decode {
            out.extend_from_slice(c0);
            out.extend_from_slice(c1);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GarbleError> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8], GarbleError> {
            let end = pos.checked_add(n).filter(|&e| e <= bytes.len());
            let end = end.ok_or(GarbleError::Malformed("truncated"))?;
            let s = &bytes[pos..end];
            pos = end;
            Ok(s)
        };
        let circuit_digest: [u8; 32] = take(32)?.try_into().unwrap();
        let gate_count = u32::from_le_bytes(take(4)?.try_into().unwrap());
        let n_tables = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        if n_tables > gate_count as usize {
            return Err(GarbleError::Malformed("more tables than gates"));
        }
        let mut tables = Vec::with_capacity(n_tables.min(bytes.len() / 64));
        for _ in 0..n_tables {
            let raw = take(64)?;
            tables.push(core::array::from_fn(|i| {
                Block::from_bytes(raw[16 * i..16 * (i + 1)].try_into().unwrap())
            }));
        }
        let n_out = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let mut output_decode = Vec::with_capacity(n_out.min(bytes.len() / 64));
        for _ in 0..n_out {
            let raw = take(64)?;
            output_decode.push((raw[..32].try_into().unwrap(), raw[32..].try_into().unwrap()));
        }
        if take(1).is_ok() {
            return Err(GarbleError::Malformed("trailing bytes"));
        }
        Ok(Self {
            circuit_digest,
            gate_count,
            tables,
            output_decode,
        })
    }
}
