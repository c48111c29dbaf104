//! Two-party negotiation over TCP.
//!
//! The victim garbles the mechanism circuit and the attacker evaluates it;
//! both end with the same `(r_f, α, σ)` or with a stage-tagged abort.

pub mod bench;
pub mod config;
pub mod message;
pub mod serve;
pub mod session;
pub mod transcript;
pub mod wire;

pub use config::{NegotiationConfig, NegotiationConfigError, Role};
pub use serve::serve;
pub use session::{
    draw_shares, run_attacker, run_attacker_over, run_victim, run_victim_over, Agreement, CoinShares, Origin,
    SessionError, SessionOptions, SessionReport, Stage, Tamper,
};
pub use transcript::{load_transcript, persist_transcript, Direction, SessionTranscript, TranscriptRecord};
pub use wire::{MsgType, WireMessage};

/// Parses a seed of 1 to 32 hex-encoded bytes, zero-padded on the right.
pub fn parse_seed(hex_seed: &str) -> Option<[u8; 32]> {
    let digits = hex_seed.trim().trim_start_matches("0x");
    let bytes = hex::decode(digits).ok()?;
    if bytes.is_empty() || bytes.len() > 32 {
        return None;
    }
    let mut seed = [0u8; 32];
    seed[..bytes.len()].copy_from_slice(&bytes);
    Some(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds() {
        let s = parse_seed("0102").unwrap();
        assert_eq!(&s[..3], &[1, 2, 0]);
        assert!(parse_seed("abc").is_none());
        assert!(parse_seed("").is_none());
        assert!(parse_seed("zz").is_none());
        assert!(parse_seed(&"00".repeat(33)).is_none());
    }
}
