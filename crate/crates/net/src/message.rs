//! Payload codecs for each message type.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use parley_core::mechanism::MechanismOutcome;
use parley_garble::ot::PointBytes;
use parley_garble::Block;
use thiserror::Error;

use crate::session::Stage;

const HELLO_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed {what} payload: {reason}")]
pub struct DecodeError {
    pub what: &'static str,
    pub reason: &'static str,
}

struct Reader<'a> {
    what: &'static str,
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(what: &'static str, bytes: &'a [u8]) -> Self {
        Self { what, bytes }
    }

    fn err(&self, reason: &'static str) -> DecodeError {
        DecodeError { what: self.what, reason }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.bytes.len() < n {
            return Err(self.err("truncated"));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bool(&mut self) -> Result<bool, DecodeError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(self.err("flag is not 0 or 1")),
        }
    }

    /// `count: u32` followed by exactly `count` items of `size` bytes and
    /// nothing else.
    fn items(&mut self, size: usize) -> Result<Vec<&'a [u8]>, DecodeError> {
        let n = self.u32()? as usize;
        if self.bytes.len() != n.checked_mul(size).ok_or(self.err("count overflow"))? {
            return Err(self.err("count does not match length"));
        }
        Ok((0..n).map(|_| self.take(size).unwrap()).collect())
    }

    fn rest(&mut self) -> &'a [u8] {
        std::mem::take(&mut self.bytes)
    }

    fn finish(self) -> Result<(), DecodeError> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(self.err("trailing bytes"))
        }
    }
}

/// Non-negative rational with numerator and denominator in `u64`.
pub fn rational_to_u64_pair(x: &BigRational) -> Option<(u64, u64)> {
    if x.is_negative() {
        return None;
    }
    Some((x.numer().to_u64()?, x.denom().to_u64()?))
}

fn pair_to_rational(r: &Reader<'_>, (n, d): (u64, u64)) -> Result<BigRational, DecodeError> {
    if d == 0 {
        return Err(r.err("zero denominator"));
    }
    Ok(BigRational::new(BigInt::from(n), BigInt::from(d)))
}

/// The victim's proposal of the strategy profile and exchange time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hello {
    pub q: BigRational,
    pub p_bar: BigRational,
    pub k: u32,
    pub k_theta: u32,
    pub exchange_time: BigRational,
}

impl Hello {
    /// `version: u16`, then `q`, `p̄` as `u64` pairs, `k`, `k_θ` as `u32`,
    /// `t_e` as a `u64` pair. `None` if a rational does not fit.
    pub fn encode(&self) -> Option<Vec<u8>> {
        let mut out = Vec::with_capacity(50);
        out.extend_from_slice(&HELLO_VERSION.to_le_bytes());
        for x in [&self.q, &self.p_bar] {
            let (n, d) = rational_to_u64_pair(x)?;
            out.extend_from_slice(&n.to_le_bytes());
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&self.k.to_le_bytes());
        out.extend_from_slice(&self.k_theta.to_le_bytes());
        let (n, d) = rational_to_u64_pair(&self.exchange_time)?;
        out.extend_from_slice(&n.to_le_bytes());
        out.extend_from_slice(&d.to_le_bytes());
        Some(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new("HELLO", bytes);
        if r.u16()? != HELLO_VERSION {
            return Err(r.err("unsupported version"));
        }
        let q = (r.u64()?, r.u64()?);
        let p_bar = (r.u64()?, r.u64()?);
        let k = r.u32()?;
        let k_theta = r.u32()?;
        let t_e = (r.u64()?, r.u64()?);
        let hello = Self {
            q: pair_to_rational(&r, q)?,
            p_bar: pair_to_rational(&r, p_bar)?,
            k,
            k_theta,
            exchange_time: pair_to_rational(&r, t_e)?,
        };
        r.finish()?;
        Ok(hello)
    }
}

/// `circuit_len: u32`, the serialized circuit, then the garbled circuit.
pub fn encode_circuit(circuit: &[u8], garbled: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + circuit.len() + garbled.len());
    out.extend_from_slice(&(circuit.len() as u32).to_le_bytes());
    out.extend_from_slice(circuit);
    out.extend_from_slice(garbled);
    out
}

pub fn decode_circuit(bytes: &[u8]) -> Result<(&[u8], &[u8]), DecodeError> {
    let mut r = Reader::new("CIRCUIT", bytes);
    let n = r.u32()? as usize;
    let circuit = r.take(n)?;
    Ok((circuit, r.rest()))
}

pub fn encode_labels(labels: &[Block]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 16 * labels.len());
    out.extend_from_slice(&(labels.len() as u32).to_le_bytes());
    for l in labels {
        out.extend_from_slice(&l.to_bytes());
    }
    out
}

pub fn decode_labels(what: &'static str, bytes: &[u8]) -> Result<Vec<Block>, DecodeError> {
    let mut r = Reader::new(what, bytes);
    Ok(r.items(16)?
        .into_iter()
        .map(|b| Block::from_bytes(b.try_into().unwrap()))
        .collect())
}

pub fn encode_point(p: &PointBytes) -> Vec<u8> {
    p.to_vec()
}

pub fn decode_point(bytes: &[u8]) -> Result<PointBytes, DecodeError> {
    bytes.try_into().map_err(|_| DecodeError {
        what: "OT_MSG1",
        reason: "expected 32 bytes",
    })
}

pub fn encode_points(points: &[PointBytes]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 32 * points.len());
    out.extend_from_slice(&(points.len() as u32).to_le_bytes());
    for p in points {
        out.extend_from_slice(p);
    }
    out
}

pub fn decode_points(bytes: &[u8]) -> Result<Vec<PointBytes>, DecodeError> {
    let mut r = Reader::new("OT_MSG2", bytes);
    Ok(r.items(32)?.into_iter().map(|b| b.try_into().unwrap()).collect())
}

pub fn encode_ciphertexts(pairs: &[(Block, Block)]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 32 * pairs.len());
    out.extend_from_slice(&(pairs.len() as u32).to_le_bytes());
    for (a, b) in pairs {
        out.extend_from_slice(&a.to_bytes());
        out.extend_from_slice(&b.to_bytes());
    }
    out
}

pub fn decode_ciphertexts(bytes: &[u8]) -> Result<Vec<(Block, Block)>, DecodeError> {
    let mut r = Reader::new("OT_MSG3", bytes);
    Ok(r.items(32)?
        .into_iter()
        .map(|b| {
            (
                Block::from_bytes(b[..16].try_into().unwrap()),
                Block::from_bytes(b[16..].try_into().unwrap()),
            )
        })
        .collect())
}

/// `r_f: u64`, `alpha: u8`, `sigma: u8`.
pub fn encode_result(o: &MechanismOutcome<u64>) -> Vec<u8> {
    let mut out = o.r_f.to_le_bytes().to_vec();
    out.push(o.alpha as u8);
    out.push(o.sigma as u8);
    out
}

pub fn decode_result(bytes: &[u8]) -> Result<MechanismOutcome<u64>, DecodeError> {
    let mut r = Reader::new("RESULT_ACK", bytes);
    let r_f = r.u64()?;
    let alpha = r.bool()?;
    let sigma = r.bool()?;
    r.finish()?;
    Ok(MechanismOutcome { alpha, r_f, sigma })
}

/// `stage: u8` then a UTF-8 reason.
pub fn encode_abort(stage: Stage, reason: &str) -> Vec<u8> {
    let mut out = vec![stage as u8];
    out.extend_from_slice(reason.as_bytes());
    out
}

/// Unknown stage bytes and invalid UTF-8 are tolerated: an abort is honored
/// whatever its content.
pub fn decode_abort(bytes: &[u8]) -> (Option<Stage>, String) {
    match bytes.split_first() {
        Some((&s, reason)) => (Stage::from_byte(s), String::from_utf8_lossy(reason).into_owned()),
        None => (None, String::new()),
    }
}
