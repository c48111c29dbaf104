//! Gate-level boolean circuits over XOR, AND and NOT.
//!
//! Circuits are immutable once built. Input wires come first and are numbered
//! `0..input_count`; every gate writes a fresh wire after all of its inputs.
//! The canonical byte encoding ([`Circuit::to_bytes`]) feeds both the digest
//! two parties compare and the wire protocol.

mod builder;
mod mechanism;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use builder::Builder;
pub use mechanism::{build_from_scaled, build_mechanism_circuit, MechanismCircuit, MechanismInputs, MechanismLayout, PartyInputs};

/// Wire index.
pub type Wire = u32;

/// `in_b` value stored for single-input gates.
pub const NO_WIRE: Wire = u32::MAX;

const MAGIC: &[u8; 4] = b"PRLC";
const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum GateKind {
    Xor = 0,
    And = 1,
    Not = 2,
}

impl GateKind {
    fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(GateKind::Xor),
            1 => Some(GateKind::And),
            2 => Some(GateKind::Not),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Gate {
    pub kind: GateKind,
    pub in_a: Wire,
    pub in_b: Wire,
    pub out: Wire,
}

/// Which party supplies an input range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Owner {
    Garbler = 0,
    Evaluator = 1,
}

/// Contiguous block of input wires, least significant bit first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InputRange {
    pub label: String,
    pub owner: Owner,
    pub start: Wire,
    pub len: u32,
}

impl InputRange {
    pub fn wires(&self) -> std::ops::Range<Wire> {
        self.start..self.start + self.len
    }
}

/// Named output word, least significant bit first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OutputRange {
    pub label: String,
    pub wires: Vec<Wire>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("expected {expected} input bits, got {got}")]
    InputLength { expected: usize, got: usize },
    #[error("gate {index} reads wire {wire} before it is assigned")]
    NotTopological { index: usize, wire: Wire },
    #[error("gate {index} writes wire {wire} which is not the next free wire")]
    BadOutputWire { index: usize, wire: Wire },
    #[error("gate {index} has an unexpected second input")]
    BadArity { index: usize },
    #[error("input ranges do not tile wires 0..{0}")]
    InputLayout(u32),
    #[error("output refers to unknown wire {0}")]
    UnknownOutput(Wire),
    #[error("wire count {declared} does not match {actual}")]
    WireCount { declared: u32, actual: u32 },
    #[error("serialized circuit is malformed: {0}")]
    Malformed(&'static str),
    #[error("circuit too large: {0}")]
    TooLarge(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Circuit {
    wire_count: u32,
    gates: Vec<Gate>,
    inputs: Vec<InputRange>,
    outputs: Vec<OutputRange>,
}

impl Circuit {
    /// Assembles a circuit and checks every structural invariant.
    pub fn new(
        wire_count: u32,
        gates: Vec<Gate>,
        inputs: Vec<InputRange>,
        outputs: Vec<OutputRange>,
    ) -> Result<Self, CircuitError> {
        let circuit = Self {
            wire_count,
            gates,
            inputs,
            outputs,
        };
        circuit.validate()?;
        Ok(circuit)
    }

    fn validate(&self) -> Result<(), CircuitError> {
        let mut next = 0u32;
        for range in &self.inputs {
            if range.start != next {
                return Err(CircuitError::InputLayout(self.input_count()));
            }
            next = next
                .checked_add(range.len)
                .ok_or(CircuitError::TooLarge("input wires"))?;
        }
        for (index, gate) in self.gates.iter().enumerate() {
            if gate.out != next {
                return Err(CircuitError::BadOutputWire { index, wire: gate.out });
            }
            let reads: &[Wire] = match gate.kind {
                GateKind::Not => {
                    if gate.in_b != NO_WIRE {
                        return Err(CircuitError::BadArity { index });
                    }
                    std::slice::from_ref(&gate.in_a)
                }
                _ => &[gate.in_a, gate.in_b],
            };
            if let Some(&wire) = reads.iter().find(|&&w| w >= next) {
                return Err(CircuitError::NotTopological { index, wire });
            }
            next += 1;
        }
        if next != self.wire_count {
            return Err(CircuitError::WireCount {
                declared: self.wire_count,
                actual: next,
            });
        }
        for out in &self.outputs {
            if let Some(&w) = out.wires.iter().find(|&&w| w >= self.wire_count) {
                return Err(CircuitError::UnknownOutput(w));
            }
        }
        Ok(())
    }

    pub fn wire_count(&self) -> u32 {
        self.wire_count
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn inputs(&self) -> &[InputRange] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[OutputRange] {
        &self.outputs
    }

    pub fn input_count(&self) -> u32 {
        self.inputs.iter().map(|r| r.len).sum()
    }

    /// All output wires in declaration order.
    pub fn output_wires(&self) -> impl Iterator<Item = Wire> + '_ {
        self.outputs.iter().flat_map(|o| o.wires.iter().copied())
    }

    pub fn output_count(&self) -> usize {
        self.outputs.iter().map(|o| o.wires.len()).sum()
    }

    pub fn input(&self, label: &str) -> Option<&InputRange> {
        self.inputs.iter().find(|r| r.label == label)
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }

    pub fn and_count(&self) -> usize {
        self.count(GateKind::And)
    }

    /// Value of every wire for the given input bits.
    pub fn eval_wires(&self, inputs: &[bool]) -> Result<Vec<bool>, CircuitError> {
        let expected = self.input_count() as usize;
        if inputs.len() != expected {
            return Err(CircuitError::InputLength {
                expected,
                got: inputs.len(),
            });
        }
        let mut wires = Vec::with_capacity(self.wire_count as usize);
        wires.extend_from_slice(inputs);
        for g in &self.gates {
            let a = wires[g.in_a as usize];
            let v = match g.kind {
                GateKind::Xor => a ^ wires[g.in_b as usize],
                GateKind::And => a & wires[g.in_b as usize],
                GateKind::Not => !a,
            };
            wires.push(v);
        }
        Ok(wires)
    }

    /// Output bits for the given input bits.
    pub fn eval_plain(&self, inputs: &[bool]) -> Result<Vec<bool>, CircuitError> {
        let wires = self.eval_wires(inputs)?;
        Ok(self.output_wires().map(|w| wires[w as usize]).collect())
    }

    /// Canonical little-endian encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.gates.len() * 13);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.wire_count.to_le_bytes());
        out.extend_from_slice(&(self.gates.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.inputs.len() as u32).to_le_bytes());
        for r in &self.inputs {
            put_label(&mut out, &r.label);
            out.push(r.owner as u8);
            out.extend_from_slice(&r.start.to_le_bytes());
            out.extend_from_slice(&r.len.to_le_bytes());
        }
        out.extend_from_slice(&(self.outputs.len() as u32).to_le_bytes());
        for o in &self.outputs {
            put_label(&mut out, &o.label);
            out.extend_from_slice(&(o.wires.len() as u32).to_le_bytes());
            for w in &o.wires {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        for g in &self.gates {
            out.push(g.kind as u8);
            out.extend_from_slice(&g.in_a.to_le_bytes());
            out.extend_from_slice(&g.in_b.to_le_bytes());
            out.extend_from_slice(&g.out.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CircuitError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(CircuitError::Malformed("bad magic"));
        }
        if r.u16()? != VERSION {
            return Err(CircuitError::Malformed("unsupported version"));
        }
        let wire_count = r.u32()?;
        let gate_count = r.u32()? as usize;
        let input_count = r.u32()? as usize;
        let mut inputs = Vec::new();
        for _ in 0..input_count {
            let label = r.label()?;
            let owner = match r.u8()? {
                0 => Owner::Garbler,
                1 => Owner::Evaluator,
                _ => return Err(CircuitError::Malformed("bad owner")),
            };
            inputs.push(InputRange {
                label,
                owner,
                start: r.u32()?,
                len: r.u32()?,
            });
        }
        let output_count = r.u32()? as usize;
        let mut outputs = Vec::new();
        for _ in 0..output_count {
            let label = r.label()?;
            let n = r.u32()? as usize;
            if n > r.remaining() / 4 {
                return Err(CircuitError::Malformed("truncated output range"));
            }
            let wires = (0..n).map(|_| r.u32()).collect::<Result<_, _>>()?;
            outputs.push(OutputRange { label, wires });
        }
        if gate_count != r.remaining() / 13 || r.remaining() % 13 != 0 {
            return Err(CircuitError::Malformed("gate section length"));
        }
        let mut gates = Vec::with_capacity(gate_count);
        for _ in 0..gate_count {
            let kind = GateKind::from_u8(r.u8()?).ok_or(CircuitError::Malformed("bad gate kind"))?;
            gates.push(Gate {
                kind,
                in_a: r.u32()?,
                in_b: r.u32()?,
                out: r.u32()?,
            });
        }
        Self::new(wire_count, gates, inputs, outputs)
    }

    pub fn digest(&self) -> [u8; 32] {
        circuit_digest_bytes(&self.to_bytes())
    }
}

/// SHA-256 of a canonical circuit encoding.
pub fn circuit_digest_bytes(encoded: &[u8]) -> [u8; 32] {
    Sha256::digest(encoded).into()
}

pub fn circuit_digest(circuit: &Circuit) -> [u8; 32] {
    circuit.digest()
}

fn put_label(out: &mut Vec<u8>, label: &str) {
    let bytes = label.as_bytes();
    let len = u8::try_from(bytes.len()).expect("labels are short");
    out.push(len);
    out.extend_from_slice(bytes);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CircuitError> {
        if n > self.remaining() {
            return Err(CircuitError::Malformed("truncated"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CircuitError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CircuitError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CircuitError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn label(&mut self) -> Result<String, CircuitError> {
        let n = self.u8()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| CircuitError::Malformed("label not utf-8"))
    }
}

/// Little-endian bits of `value`, `width` of them.
pub fn to_bits(value: u64, width: u32) -> Vec<bool> {
    (0..width).map(|i| i < 64 && (value >> i) & 1 == 1).collect()
}

/// Inverse of [`to_bits`]; bits beyond 64 must be zero.
pub fn from_bits(bits: &[bool]) -> u64 {
    bits.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .fold(0u64, |acc, (i, _)| acc | (1u64 << i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(kind: GateKind) -> Circuit {
        let mut b = Builder::new();
        let x = b.input("x", Owner::Garbler, 1);
        let y = b.input("y", Owner::Evaluator, 1);
        let z = match kind {
            GateKind::Xor => b.xor(x[0], y[0]),
            GateKind::And => b.and(x[0], y[0]),
            GateKind::Not => b.not(x[0]),
        };
        b.output("z", vec![z]);
        b.finish()
    }

    #[test]
    fn single_gate_examples() {
        assert_eq!(single(GateKind::Xor).eval_plain(&[true, true]).unwrap(), vec![false]);
        assert_eq!(single(GateKind::And).eval_plain(&[true, false]).unwrap(), vec![false]);
        assert_eq!(single(GateKind::Not).eval_plain(&[false, true]).unwrap(), vec![true]);
    }

    #[test]
    fn length_mismatch() {
        assert_eq!(
            single(GateKind::Xor).eval_plain(&[true]),
            Err(CircuitError::InputLength { expected: 2, got: 1 })
        );
    }

    #[test]
    fn serialization_roundtrip() {
        for kind in [GateKind::Xor, GateKind::And, GateKind::Not] {
            let c = single(kind);
            assert_eq!(Circuit::from_bytes(&c.to_bytes()).unwrap(), c);
        }
    }

    #[test]
    fn rejects_malformed() {
        let bytes = single(GateKind::And).to_bytes();
        assert!(Circuit::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Circuit::from_bytes(&bad).is_err());
        let mut cyclic = bytes.clone();
        let n = cyclic.len();
        // Point the gate's first input at its own output.
        cyclic[n - 12..n - 8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            Circuit::from_bytes(&cyclic),
            Err(CircuitError::NotTopological { .. })
        ));
    }

    #[test]
    fn bits_roundtrip() {
        assert_eq!(to_bits(6, 4), vec![false, true, true, false]);
        assert_eq!(from_bits(&to_bits(0xdead_beef, 40)), 0xdead_beef);
    }
}
