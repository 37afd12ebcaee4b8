//! Coding header, coded messages and their wire layout.
//!
//! A coded message carries a contiguous window of message IDs
//! `[id_oldest, id_newest]`, the true length of every message in the window,
//! one coefficient per message, and the linear combination of the
//! zero-padded payloads.
//!
//! Wire layout (big-endian):
//!
//! ```text
//! "NCR1" | id_oldest u64 | id_newest u64 | w u16 | w x length u32 | w x coeff u8 | payload
//! "NCA1" | seen_newest u64 | unseen_newest u64
//! ```
//!
//! The payload is exactly `max(lengths)` bytes.

use std::fmt;

use thiserror::Error;

use crate::gf256::{self, Gf256};

pub const MESSAGE_MAGIC: [u8; 4] = *b"NCR1";
pub const RESPONSE_MAGIC: [u8; 4] = *b"NCA1";

/// Size of the fixed part of a coded-message header.
pub const FIXED_HEADER_LEN: usize = 4 + 8 + 8 + 2;
/// Encoded size of a response.
pub const RESPONSE_LEN: usize = 4 + 8 + 8;
/// Largest window a header can describe.
pub const MAX_WINDOW: usize = u16::MAX as usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("coding window is empty")]
    EmptyWindow,
    #[error("message IDs are not contiguous and ascending (expected {expected}, found {found})")]
    NonContiguousIds { expected: MessageId, found: MessageId },
    #[error("{coefficients} coefficients for a window of {window} messages")]
    CoefficientCountMismatch { window: usize, coefficients: usize },
    #[error("{lengths} lengths for a window of {window} messages")]
    LengthCountMismatch { window: usize, lengths: usize },
    #[error("coefficient of the newest message is zero")]
    ZeroNewestCoefficient,
    #[error("window of {0} messages exceeds the header limit")]
    WindowTooLarge(u64),
    #[error("id_oldest {oldest} is greater than id_newest {newest}")]
    InvertedWindow { oldest: MessageId, newest: MessageId },
    #[error("message IDs start at 1")]
    ZeroId,
    #[error("message payload is empty")]
    EmptyPayload,
    #[error("message payload of {0} bytes exceeds the 32-bit length field")]
    PayloadTooLarge(usize),
    #[error("payload is {actual} bytes, header requires {expected}")]
    PayloadLengthMismatch { expected: usize, actual: usize },
    #[error("true length {length} exceeds payload of {payload} bytes")]
    LengthExceedsPayload { length: usize, payload: usize },
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("input truncated: needed {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("{0} trailing bytes after message")]
    TrailingBytes(usize),
    #[error("response has seen_newest {seen} > unseen_newest {unseen}")]
    InvalidResponse { seen: MessageId, unseen: MessageId },
}

/// Identifier of a native message, assigned in submission order from 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MessageId(pub u64);

impl MessageId {
    /// Sentinel for "nothing yet" in responses and counters.
    pub const NONE: MessageId = MessageId(0);
    pub const FIRST: MessageId = MessageId(1);

    #[inline]
    pub const fn get(self) -> u64 {
        self.0
    }

    #[inline]
    pub const fn next(self) -> MessageId {
        MessageId(self.0 + 1)
    }
}

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for MessageId {
    fn from(v: u64) -> Self {
        MessageId(v)
    }
}

/// An uncoded request as handed over by the REST layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NativeMessage {
    id: MessageId,
    payload: Vec<u8>,
}

impl NativeMessage {
    pub fn new(id: MessageId, payload: Vec<u8>) -> Result<Self, CodecError> {
        if id == MessageId::NONE {
            return Err(CodecError::ZeroId);
        }
        if payload.is_empty() {
            return Err(CodecError::EmptyPayload);
        }
        if payload.len() > u32::MAX as usize {
            return Err(CodecError::PayloadTooLarge(payload.len()));
        }
        Ok(NativeMessage { id, payload })
    }

    pub fn id(&self) -> MessageId {
        self.id
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    pub fn into_payload(self) -> Vec<u8> {
        self.payload
    }
}

/// Window, lengths and coefficients of one linear combination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodingHeader {
    id_oldest: MessageId,
    id_newest: MessageId,
    lengths: Vec<u32>,
    coefficients: Vec<Gf256>,
}

impl CodingHeader {
    pub fn new(
        id_oldest: MessageId,
        id_newest: MessageId,
        lengths: Vec<u32>,
        coefficients: Vec<Gf256>,
    ) -> Result<Self, CodecError> {
        if id_oldest == MessageId::NONE {
            return Err(CodecError::ZeroId);
        }
        if id_oldest > id_newest {
            return Err(CodecError::InvertedWindow {
                oldest: id_oldest,
                newest: id_newest,
            });
        }
        let span = id_newest.0 - id_oldest.0 + 1;
        if span > MAX_WINDOW as u64 {
            return Err(CodecError::WindowTooLarge(span));
        }
        let window = span as usize;
        if lengths.len() != window {
            return Err(CodecError::LengthCountMismatch {
                window,
                lengths: lengths.len(),
            });
        }
        if coefficients.len() != window {
            return Err(CodecError::CoefficientCountMismatch {
                window,
                coefficients: coefficients.len(),
            });
        }
        if coefficients[window - 1].is_zero() {
            return Err(CodecError::ZeroNewestCoefficient);
        }
        Ok(CodingHeader {
            id_oldest,
            id_newest,
            lengths,
            coefficients,
        })
    }

    pub fn id_oldest(&self) -> MessageId {
        self.id_oldest
    }

    pub fn id_newest(&self) -> MessageId {
        self.id_newest
    }

    pub fn lengths(&self) -> &[u32] {
        &self.lengths
    }

    pub fn coefficients(&self) -> &[Gf256] {
        &self.coefficients
    }

    pub fn window_len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = MessageId> {
        (self.id_oldest.0..=self.id_newest.0).map(MessageId)
    }

    /// Length of the padded payload.
    pub fn payload_len(&self) -> usize {
        self.lengths.iter().copied().max().unwrap_or(0) as usize
    }

    pub fn length_of(&self, id: MessageId) -> Option<u32> {
        self.index_of(id).map(|i| self.lengths[i])
    }

    pub fn coefficient_of(&self, id: MessageId) -> Option<Gf256> {
        self.index_of(id).map(|i| self.coefficients[i])
    }

    fn index_of(&self, id: MessageId) -> Option<usize> {
        (self.id_oldest..=self.id_newest)
            .contains(&id)
            .then(|| (id.0 - self.id_oldest.0) as usize)
    }

    /// Encoded size of the header alone.
    pub fn encoded_len(&self) -> usize {
        FIXED_HEADER_LEN + self.window_len() * 5
    }
}

/// A coding header together with the combined payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedMessage {
    header: CodingHeader,
    payload: Vec<u8>,
}

impl CodedMessage {
    pub fn new(header: CodingHeader, payload: Vec<u8>) -> Result<Self, CodecError> {
        let expected = header.payload_len();
        if payload.len() != expected {
            return Err(CodecError::PayloadLengthMismatch {
                expected,
                actual: payload.len(),
            });
        }
        Ok(CodedMessage { header, payload })
    }

    pub fn header(&self) -> &CodingHeader {
        &self.header
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn into_parts(self) -> (CodingHeader, Vec<u8>) {
        (self.header, self.payload)
    }

    pub fn encoded_len(&self) -> usize {
        self.header.encoded_len() + self.payload.len()
    }
}

/// Server feedback: newest seen and newest unseen message IDs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct NcResponse {
    pub seen_newest: MessageId,
    pub unseen_newest: MessageId,
}

impl NcResponse {
    pub fn new(seen_newest: MessageId, unseen_newest: MessageId) -> Result<Self, CodecError> {
        if seen_newest > unseen_newest {
            return Err(CodecError::InvalidResponse {
                seen: seen_newest,
                unseen: unseen_newest,
            });
        }
        Ok(NcResponse {
            seen_newest,
            unseen_newest,
        })
    }

    /// `unseen_newest - seen_newest`, saturating.
    pub fn gap(&self) -> u64 {
        self.unseen_newest.0.saturating_sub(self.seen_newest.0)
    }
}

impl fmt::Display for NcResponse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Response({},{})", self.seen_newest, self.unseen_newest)
    }
}

/// Forms `sum_i coefficients[i] * messages[i]` over zero-padded payloads.
pub fn combine(
    messages: &[NativeMessage],
    coefficients: &[Gf256],
) -> Result<CodedMessage, CodecError> {
    let first = messages.first().ok_or(CodecError::EmptyWindow)?;
    for (expected, msg) in (first.id.0..).map(MessageId).zip(messages) {
        if msg.id != expected {
            return Err(CodecError::NonContiguousIds {
                expected,
                found: msg.id,
            });
        }
    }
    if coefficients.len() != messages.len() {
        return Err(CodecError::CoefficientCountMismatch {
            window: messages.len(),
            coefficients: coefficients.len(),
        });
    }
    let last = messages[messages.len() - 1].id;
    let lengths = messages.iter().map(|m| m.payload.len() as u32).collect();
    let header = CodingHeader::new(first.id, last, lengths, coefficients.to_vec())?;

    let mut payload = vec![0u8; header.payload_len()];
    for (msg, &c) in messages.iter().zip(coefficients) {
        gf256::mul_add_slice(&mut payload, &msg.payload, c);
    }
    CodedMessage::new(header, payload)
}

/// Strips zero padding, keeping the first `true_length` bytes.
pub fn prune(payload: &[u8], true_length: usize) -> Result<&[u8], CodecError> {
    payload
        .get(..true_length)
        .ok_or(CodecError::LengthExceedsPayload {
            length: true_length,
            payload: payload.len(),
        })
}

pub fn serialize(msg: &CodedMessage) -> Vec<u8> {
    let h = &msg.header;
    let mut out = Vec::with_capacity(msg.encoded_len());
    out.extend_from_slice(&MESSAGE_MAGIC);
    out.extend_from_slice(&h.id_oldest.0.to_be_bytes());
    out.extend_from_slice(&h.id_newest.0.to_be_bytes());
    out.extend_from_slice(&(h.window_len() as u16).to_be_bytes());
    for len in &h.lengths {
        out.extend_from_slice(&len.to_be_bytes());
    }
    out.extend(h.coefficients.iter().map(|c| c.0));
    out.extend_from_slice(&msg.payload);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self.pos + n;
        let slice = self.buf.get(self.pos..end).ok_or(CodecError::Truncated {
            needed: end,
            have: self.buf.len(),
        })?;
        self.pos = end;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_be_bytes(self.array()?))
    }

    fn finish(self) -> Result<(), CodecError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(CodecError::TrailingBytes(n)),
        }
    }
}

pub fn deserialize(bytes: &[u8]) -> Result<CodedMessage, CodecError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.array::<4>()?;
    if magic != MESSAGE_MAGIC {
        return Err(CodecError::BadMagic(magic));
    }
    let id_oldest = MessageId(r.u64()?);
    let id_newest = MessageId(r.u64()?);
    let window = u16::from_be_bytes(r.array()?) as usize;
    let lengths = r
        .take(window * 4)?
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().expect("chunk of 4")))
        .collect::<Vec<_>>();
    let coefficients = r.take(window)?.iter().map(|&b| Gf256(b)).collect();
    let header = CodingHeader::new(id_oldest, id_newest, lengths, coefficients)?;
    let payload = r.take(header.payload_len())?.to_vec();
    r.finish()?;
    CodedMessage::new(header, payload)
}

pub fn serialize_response(resp: &NcResponse) -> [u8; RESPONSE_LEN] {
    let mut out = [0u8; RESPONSE_LEN];
    out[..4].copy_from_slice(&RESPONSE_MAGIC);
    out[4..12].copy_from_slice(&resp.seen_newest.0.to_be_bytes());
    out[12..].copy_from_slice(&resp.unseen_newest.0.to_be_bytes());
    out
}

pub fn deserialize_response(bytes: &[u8]) -> Result<NcResponse, CodecError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.array::<4>()?;
    if magic != RESPONSE_MAGIC {
        return Err(CodecError::BadMagic(magic));
    }
    let seen = MessageId(r.u64()?);
    let unseen = MessageId(r.u64()?);
    r.finish()?;
    NcResponse::new(seen, unseen)
}
