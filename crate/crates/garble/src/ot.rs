//! Chou–Orlandi "simplest OT" over the Ristretto group.
//!
//! The sender publishes `S = y·G`. For choice bit `c` the receiver sends
//! `R = c·S + x·G` and keys its message with `x·S`. The sender can compute
//! both `y·R` and `y·(R − S)`; exactly one of them equals `x·S`.

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_TABLE;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::Block;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OtError {
    #[error("invalid group element in OT message")]
    BadPoint,
    #[error("expected {expected} OT entries, got {got}")]
    Count { expected: usize, got: usize },
}

/// Compressed group element on the wire.
pub type PointBytes = [u8; 32];

fn decompress(bytes: &PointBytes) -> Result<RistrettoPoint, OtError> {
    CompressedRistretto(*bytes).decompress().ok_or(OtError::BadPoint)
}

fn random_scalar<R: RngCore + CryptoRng>(rng: &mut R) -> Scalar {
    let mut wide = [0u8; 64];
    rng.fill_bytes(&mut wide);
    Scalar::from_bytes_mod_order_wide(&wide)
}

fn key(index: usize, s: &RistrettoPoint, r: &RistrettoPoint, shared: &RistrettoPoint) -> Block {
    let mut h = Sha256::new();
    h.update(b"parley-ot");
    h.update((index as u64).to_le_bytes());
    h.update(s.compress().as_bytes());
    h.update(r.compress().as_bytes());
    h.update(shared.compress().as_bytes());
    let d = h.finalize();
    Block::from_bytes(d[..16].try_into().unwrap())
}

pub struct OtSender {
    y: Scalar,
    s: RistrettoPoint,
}

impl OtSender {
    /// Returns the sender and its first message, `S`.
    pub fn new<R: RngCore + CryptoRng>(rng: &mut R) -> (Self, PointBytes) {
        let y = random_scalar(rng);
        let s = &y * RISTRETTO_BASEPOINT_TABLE;
        (Self { y, s }, s.compress().to_bytes())
    }

    /// Encrypts each message pair under the two keys derived from the
    /// receiver's point.
    pub fn respond(&self, points: &[PointBytes], pairs: &[(Block, Block)]) -> Result<Vec<(Block, Block)>, OtError> {
        if points.len() != pairs.len() {
            return Err(OtError::Count {
                expected: pairs.len(),
                got: points.len(),
            });
        }
        points
            .iter()
            .zip(pairs)
            .enumerate()
            .map(|(i, (p, &(m0, m1)))| {
                let r = decompress(p)?;
                let k0 = key(i, &self.s, &r, &(self.y * r));
                let k1 = key(i, &self.s, &r, &(self.y * (r - self.s)));
                Ok((m0 ^ k0, m1 ^ k1))
            })
            .collect()
    }
}

pub struct OtReceiver {
    choices: Vec<bool>,
    keys: Vec<Block>,
}

impl OtReceiver {
    /// Consumes the sender's `S` and returns one point per choice bit.
    pub fn new<R: RngCore + CryptoRng>(
        rng: &mut R,
        sender_point: &PointBytes,
        choices: &[bool],
    ) -> Result<(Self, Vec<PointBytes>), OtError> {
        let s = decompress(sender_point)?;
        let mut points = Vec::with_capacity(choices.len());
        let mut keys = Vec::with_capacity(choices.len());
        for (i, &c) in choices.iter().enumerate() {
            let x = random_scalar(rng);
            let xg = &x * RISTRETTO_BASEPOINT_TABLE;
            let r = if c { s + xg } else { xg };
            keys.push(key(i, &s, &r, &(x * s)));
            points.push(r.compress().to_bytes());
        }
        Ok((
            Self {
                choices: choices.to_vec(),
                keys,
            },
            points,
        ))
    }

    /// Decrypts the chosen message of each pair.
    pub fn finish(&self, ciphertexts: &[(Block, Block)]) -> Result<Vec<Block>, OtError> {
        if ciphertexts.len() != self.choices.len() {
            return Err(OtError::Count {
                expected: self.choices.len(),
                got: ciphertexts.len(),
            });
        }
        Ok(ciphertexts
            .iter()
            .zip(&self.choices)
            .zip(&self.keys)
            .map(|((&(c0, c1), &choice), &k)| if choice { c1 ^ k } else { c0 ^ k })
            .collect())
    }
}

/// Runs both sides in memory.
pub fn ot_transfer<R: RngCore + CryptoRng>(
    rng: &mut R,
    pairs: &[(Block, Block)],
    choices: &[bool],
) -> Result<Vec<Block>, OtError> {
    let (sender, msg1) = OtSender::new(rng);
    let (receiver, msg2) = OtReceiver::new(rng, &msg1, choices)?;
    let msg3 = sender.respond(&msg2, pairs)?;
    receiver.finish(&msg3)
}
