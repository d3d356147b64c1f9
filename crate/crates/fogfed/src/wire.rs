//! Bit-exact wire codec for fog↔cloud traffic.
//!
//! Frame layout (all integers little-endian):
//!
//! ```text
//! magic "FFL1" (4 bytes) | version u8 = 1 | msg_type u8 | round_id u32 |
//! payload_len u32 | payload
//! ```
//!
//! Payloads:
//!
//! * `RoundStart` (1): `window_index u32`
//! * `ModelUpdate` (2): `fog_id u32 | sample_count u64 | local_loss f32 |
//!   tensor_count u8 = 4 | per tensor: elem_count u32 + that many f32`
//! * `GlobalModel` (3): `tensor_count u8 = 4 | tensors as above`
//!
//! Tensors serialize in fixed order `w1, b1, w2, b2`, row-major. The format
//! is normative: `decode(encode(m)) == m` bit-exactly for every valid
//! message, and `decode` is total — arbitrary input yields a message or a
//! typed error, never a panic or an unbounded allocation.

use thiserror::Error;

use crate::nn::params::ModelParams;
use crate::protocol::{GlobalModel, ModelUpdate};

pub const MAGIC: [u8; 4] = *b"FFL1";
pub const VERSION: u8 = 1;
/// Bytes before the payload: magic + version + msg_type + round_id + payload_len.
pub const HEADER_LEN: usize = 4 + 1 + 1 + 4 + 4;

pub const MSG_ROUND_START: u8 = 1;
pub const MSG_MODEL_UPDATE: u8 = 2;
pub const MSG_GLOBAL_MODEL: u8 = 3;

/// Decode failures, each naming what the input violated.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("truncated frame: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("bad magic: frame does not start with \"FFL1\"")]
    BadMagic,
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported message type {0}")]
    UnsupportedMsgType(u8),
    #[error("framing error: {0}")]
    Framing(String),
}

/// A decoded protocol message.
#[derive(Debug, Clone, PartialEq)]
pub enum WireMessage {
    /// Cloud → fog: a round is beginning; train on the given window.
    RoundStart { round_id: u32, window_index: u32 },
    /// Fog → cloud: locally trained parameters.
    ModelUpdate(ModelUpdate),
    /// Cloud → fog: the aggregated global model.
    GlobalModel(GlobalModel),
}

impl WireMessage {
    pub fn msg_type(&self) -> u8 {
        match self {
            Self::RoundStart { .. } => MSG_ROUND_START,
            Self::ModelUpdate(_) => MSG_MODEL_UPDATE,
            Self::GlobalModel(_) => MSG_GLOBAL_MODEL,
        }
    }

    pub fn round_id(&self) -> u32 {
        match self {
            Self::RoundStart { round_id, .. } => *round_id,
            Self::ModelUpdate(u) => u.round_id,
            Self::GlobalModel(g) => g.round_id,
        }
    }
}

fn put_tensors(out: &mut Vec<u8>, params: &ModelParams) {
    out.push(4);
    for block in params.blocks() {
        out.extend_from_slice(
            &u32::try_from(block.len())
                .expect("tensor length fits u32")
                .to_le_bytes(),
        );
        for v in block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

/// Serializes a message; deterministic (same message → same bytes).
pub fn encode(msg: &WireMessage) -> Vec<u8> {
    let mut payload = Vec::new();
    match msg {
        WireMessage::RoundStart { window_index, .. } => {
            payload.extend_from_slice(&window_index.to_le_bytes());
        }
        WireMessage::ModelUpdate(u) => {
            payload.extend_from_slice(&u.fog_id.to_le_bytes());
            payload.extend_from_slice(&u.sample_count.to_le_bytes());
            payload.extend_from_slice(&u.local_loss.to_le_bytes());
            put_tensors(&mut payload, &u.params);
        }
        WireMessage::GlobalModel(g) => {
            put_tensors(&mut payload, &g.params);
        }
    }

    let mut frame = Vec::with_capacity(HEADER_LEN + payload.len());
    frame.extend_from_slice(&MAGIC);
    frame.push(VERSION);
    frame.push(msg.msg_type());
    frame.extend_from_slice(&msg.round_id().to_le_bytes());
    frame.extend_from_slice(
        &u32::try_from(payload.len())
            .expect("payload fits u32")
            .to_le_bytes(),
    );
    frame.extend_from_slice(&payload);
    frame
}

/// Sequential reader over a validated payload. All failures inside a
/// correctly framed payload are [`WireError::Framing`]; outer-frame
/// truncation is reported by [`decode`] before this runs.
struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], WireError> {
        if self.buf.len() - self.pos < n {
            return Err(WireError::Framing(format!(
                "payload too short for {what}: need {n} bytes at offset {}, have {}",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32, WireError> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u8(&mut self, what: &str) -> Result<u8, WireError> {
        Ok(self.take(1, what)?[0])
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn finish(self) -> Result<(), WireError> {
        if self.pos != self.buf.len() {
            return Err(WireError::Framing(format!(
                "{} unread payload bytes after the message body",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn read_tensors(r: &mut Reader<'_>) -> Result<ModelParams, WireError> {
    let tensor_count = r.u8("tensor count")?;
    if tensor_count != 4 {
        return Err(WireError::Framing(format!(
            "tensor count {tensor_count}, expected 4"
        )));
    }
    let mut tensors: Vec<Vec<f32>> = Vec::with_capacity(4);
    for t in 0..4 {
        let elem_count = r.u32("tensor element count")? as usize;
        // Bounds-check against the remaining bytes before allocating, so a
        // corrupt count cannot request an absurd buffer.
        if elem_count.checked_mul(4).is_none_or(|b| b > r.remaining()) {
            return Err(WireError::Framing(format!(
                "tensor {t} declares {elem_count} elements but only {} payload bytes remain",
                r.remaining()
            )));
        }
        let mut tensor = Vec::with_capacity(elem_count);
        for _ in 0..elem_count {
            let v = r.f32("tensor element")?;
            if !v.is_finite() {
                return Err(WireError::Framing(format!(
                    "non-finite value {v} in tensor {t}"
                )));
            }
            tensor.push(v);
        }
        tensors.push(tensor);
    }
    let b2 = tensors.pop().unwrap();
    let w2 = tensors.pop().unwrap();
    let b1 = tensors.pop().unwrap();
    let w1 = tensors.pop().unwrap();
    ModelParams::from_tensors(w1, b1, w2, b2).map_err(|e| WireError::Framing(e.to_string()))
}

/// Parses one frame. Total over arbitrary input: every failure is a typed
/// [`WireError`]; allocations are bounded by the input length.
pub fn decode(bytes: &[u8]) -> Result<WireMessage, WireError> {
    if bytes.len() < 4 {
        return Err(WireError::Truncated {
            needed: HEADER_LEN,
            have: bytes.len(),
        });
    }
    if bytes[0..4] != MAGIC {
        return Err(WireError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(WireError::Truncated {
            needed: HEADER_LEN,
            have: bytes.len(),
        });
    }
    let version = bytes[4];
    if version != VERSION {
        return Err(WireError::UnsupportedVersion(version));
    }
    let msg_type = bytes[5];
    let round_id = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
    let payload_len = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let total = HEADER_LEN
        .checked_add(payload_len)
        .ok_or_else(|| WireError::Framing("payload length overflows".into()))?;
    if bytes.len() < total {
        return Err(WireError::Truncated {
            needed: total,
            have: bytes.len(),
        });
    }
    if bytes.len() > total {
        return Err(WireError::Framing(format!(
            "{} bytes after the declared frame end",
            bytes.len() - total
        )));
    }
    let mut r = Reader::new(&bytes[HEADER_LEN..total]);

    let msg = match msg_type {
        MSG_ROUND_START => WireMessage::RoundStart {
            round_id,
            window_index: r.u32("window index")?,
        },
        MSG_MODEL_UPDATE => {
            let fog_id = r.u32("fog id")?;
            let sample_count = r.u64("sample count")?;
            if sample_count == 0 {
                return Err(WireError::Framing("sample count must be >= 1".into()));
            }
            let local_loss = r.f32("local loss")?;
            if !local_loss.is_finite() {
                return Err(WireError::Framing(format!(
                    "non-finite local loss {local_loss}"
                )));
            }
            let params = read_tensors(&mut r)?;
            WireMessage::ModelUpdate(ModelUpdate {
                round_id,
                fog_id,
                sample_count,
                params,
                local_loss,
            })
        }
        MSG_GLOBAL_MODEL => WireMessage::GlobalModel(GlobalModel {
            round_id,
            params: read_tensors(&mut r)?,
        }),
        other => return Err(WireError::UnsupportedMsgType(other)),
    };
    r.finish()?;
    Ok(msg)
}
