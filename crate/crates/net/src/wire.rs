//! Length-prefixed framing.
//!
//! A frame is `len: u32 LE`, `type: u8`, then `len - 1` payload bytes, so
//! `len` counts the type byte and the payload.

use std::fmt;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

/// Largest accepted `len` field.
pub const MAX_FRAME_LEN: u32 = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
#[repr(u8)]
pub enum MsgType {
    Hello = 1,
    PiAck = 2,
    Circuit = 3,
    GarblerInputLabels = 4,
    OtMsg1 = 5,
    OtMsg2 = 6,
    OtMsg3 = 7,
    OutputLabels = 8,
    ResultAck = 9,
    Abort = 0xFF,
}

impl MsgType {
    pub const ALL: [MsgType; 10] = [
        MsgType::Hello,
        MsgType::PiAck,
        MsgType::Circuit,
        MsgType::GarblerInputLabels,
        MsgType::OtMsg1,
        MsgType::OtMsg2,
        MsgType::OtMsg3,
        MsgType::OutputLabels,
        MsgType::ResultAck,
        MsgType::Abort,
    ];

    pub fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| *t as u8 == b)
    }
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            MsgType::Hello => "HELLO",
            MsgType::PiAck => "PI_ACK",
            MsgType::Circuit => "CIRCUIT",
            MsgType::GarblerInputLabels => "GARBLER_INPUT_LABELS",
            MsgType::OtMsg1 => "OT_MSG1",
            MsgType::OtMsg2 => "OT_MSG2",
            MsgType::OtMsg3 => "OT_MSG3",
            MsgType::OutputLabels => "OUTPUT_LABELS",
            MsgType::ResultAck => "RESULT_ACK",
            MsgType::Abort => "ABORT",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireMessage {
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

impl WireMessage {
    pub fn new(msg_type: MsgType, payload: Vec<u8>) -> Self {
        Self { msg_type, payload }
    }

    pub fn encode(&self) -> Vec<u8> {
        let len = self.payload.len() as u32 + 1;
        let mut out = Vec::with_capacity(5 + self.payload.len());
        out.extend_from_slice(&len.to_le_bytes());
        out.push(self.msg_type as u8);
        out.extend_from_slice(&self.payload);
        out
    }
}

pub fn write_message<W: Write>(w: &mut W, msg: &WireMessage) -> io::Result<()> {
    if msg.payload.len() as u64 + 1 > MAX_FRAME_LEN as u64 {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "frame too large"));
    }
    w.write_all(&msg.encode())?;
    w.flush()
}

/// Reads one frame. Malformed headers surface as `InvalidData`.
pub fn read_message<R: Read>(r: &mut R) -> io::Result<WireMessage> {
    let mut header = [0u8; 4];
    r.read_exact(&mut header)?;
    let len = u32::from_le_bytes(header);
    if len == 0 || len > MAX_FRAME_LEN {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("bad frame length {len}")));
    }
    let mut ty = [0u8; 1];
    r.read_exact(&mut ty)?;
    let msg_type = MsgType::from_byte(ty[0])
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, format!("unknown message type {:#04x}", ty[0])))?;
    let body = (len - 1) as u64;
    let mut payload = Vec::new();
    r.take(body).read_to_end(&mut payload)?;
    if payload.len() as u64 != body {
        return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated frame"));
    }
    Ok(WireMessage { msg_type, payload })
}
