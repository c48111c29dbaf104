use std::fmt;
use std::ops::{BitXor, BitXorAssign};

use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes128;

/// A 128-bit wire label.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Block(pub u128);

impl Block {
    pub const ZERO: Block = Block(0);

    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        Block(u128::from_le_bytes(bytes))
    }

    pub fn to_bytes(self) -> [u8; 16] {
        self.0.to_le_bytes()
    }

    /// Point-and-permute color bit.
    pub fn lsb(self) -> bool {
        self.0 & 1 == 1
    }

    /// Multiplication by `x` in GF(2^128) modulo `x^128 + x^7 + x^2 + x + 1`.
    pub fn double(self) -> Self {
        let carry = self.0 >> 127;
        Block((self.0 << 1) ^ (carry * 0x87))
    }
}

impl BitXor for Block {
    type Output = Block;

    fn bitxor(self, rhs: Block) -> Block {
        Block(self.0 ^ rhs.0)
    }
}

impl BitXorAssign for Block {
    fn bitxor_assign(&mut self, rhs: Block) {
        self.0 ^= rhs.0;
    }
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Block({:032x})", self.0)
    }
}

/// AES-128 under a single key, applied to one block at a time.
#[derive(Clone)]
pub(crate) struct Prp(Aes128);

impl Prp {
    pub fn new(key: [u8; 16]) -> Self {
        Prp(Aes128::new(GenericArray::from_slice(&key)))
    }

    pub fn permute(&self, x: Block) -> Block {
        let mut b = GenericArray::clone_from_slice(&x.to_bytes());
        self.0.encrypt_block(&mut b);
        Block::from_bytes(b.into())
    }
}

/// Public key for the gate hash.
const FIXED_KEY: [u8; 16] = *b"parley-garbling!";

/// Tweakable circular-correlation-robust hash `π(K) ⊕ K` with
/// `K = 2A ⊕ 4B ⊕ tweak` and `π` fixed-key AES.
#[derive(Clone)]
pub(crate) struct GateHash(Prp);

impl GateHash {
    pub fn new() -> Self {
        GateHash(Prp::new(FIXED_KEY))
    }

    pub fn hash(&self, a: Block, b: Block, tweak: u64) -> Block {
        let k = a.double() ^ b.double().double() ^ Block(tweak as u128);
        self.0.permute(k) ^ k
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_reduces() {
        assert_eq!(Block(1).double(), Block(2));
        assert_eq!(Block(1 << 127).double(), Block(0x87));
    }

    #[test]
    fn aes_known_answer() {
        // FIPS-197 appendix C.1.
        let key: [u8; 16] = core::array::from_fn(|i| i as u8);
        let pt: [u8; 16] = core::array::from_fn(|i| (i as u8) * 0x11);
        let ct = Prp::new(key).permute(Block::from_bytes(pt));
        assert_eq!(
            ct.to_bytes(),
            [0x69, 0xc4, 0xe0, 0xd8, 0x6a, 0x7b, 0x04, 0x30, 0xd8, 0xcd, 0xb7, 0x80, 0x70, 0xb4, 0xc5, 0x5a]
        );
    }

    #[test]
    fn hash_depends_on_every_argument() {
        let h = GateHash::new();
        let base = h.hash(Block(1), Block(2), 3);
        assert_ne!(base, h.hash(Block(5), Block(2), 3));
        assert_ne!(base, h.hash(Block(1), Block(6), 3));
        assert_ne!(base, h.hash(Block(1), Block(2), 4));
        assert_ne!(h.hash(Block(1), Block(2), 0), h.hash(Block(2), Block(1), 0));
    }
}
