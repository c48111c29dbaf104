//! Append-only record of the frames one party sent and received.
//!
//! Only payload digests are kept, never payloads, so a transcript holds no
//! plaintext input of either party.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::wire::{MsgType, WireMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Sent,
    Received,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub seq: u64,
    pub direction: Direction,
    pub msg_type: MsgType,
    /// Payload length in bytes.
    pub length: u64,
    /// Hex SHA-256 of the payload.
    pub digest: String,
    /// Microseconds since the Unix epoch.
    pub timestamp_us: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionTranscript {
    records: Vec<TranscriptRecord>,
}

impl SessionTranscript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, direction: Direction, msg: &WireMessage) {
        let timestamp_us = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_micros() as u64)
            .unwrap_or(0);
        self.records.push(TranscriptRecord {
            seq: self.records.len() as u64,
            direction,
            msg_type: msg.msg_type,
            length: msg.payload.len() as u64,
            digest: hex::encode(Sha256::digest(&msg.payload)),
            timestamp_us,
        });
    }

    pub fn records(&self) -> &[TranscriptRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TranscriptRecord> {
        self.records.last()
    }

    /// `(direction, type, length)` per record.
    pub fn shape(&self) -> Vec<(Direction, MsgType, u64)> {
        self.records
            .iter()
            .map(|r| (r.direction, r.msg_type, r.length))
            .collect()
    }

    pub fn digests(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.digest.as_str()).collect()
    }

    /// One JSON object per line.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn read_from<R: BufRead>(r: R) -> io::Result<Self> {
        let mut records = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TranscriptRecord = serde_json::from_str(&line)?;
            if rec.seq != records.len() as u64 {
                return Err(io::Error::new(io::ErrorKind::InvalidData, "transcript records out of order"));
            }
            records.push(rec);
        }
        Ok(Self { records })
    }
}

pub fn persist_transcript(t: &SessionTranscript, path: impl AsRef<Path>) -> io::Result<()> {
    t.write_to(BufWriter::new(File::create(path)?))
}

pub fn load_transcript(path: impl AsRef<Path>) -> io::Result<SessionTranscript> {
    SessionTranscript::read_from(BufReader::new(File::open(path)?))
}
