//! Server-side decoding layer.
//!
//! Every arriving combination is appended to a decoding matrix kept in
//! reduced row-echelon form over GF(2^8). Pivot columns are the *seen*
//! messages: a pivot row for message `k` reads `p_k + (combination of
//! newer messages)`. A response is produced for every arrival, before any
//! decoding happens, and rows that collapse to a single unit coefficient are
//! pruned and delivered exactly once.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::codec::{self, CodecError, CodedMessage, CodingHeader, MessageId, NativeMessage, NcResponse};
use crate::gf256::{self, Gf256};
use crate::idset::IdSet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServerError {
    #[error("malformed coded message: {0}")]
    MalformedHeader(#[from] CodecError),
    #[error("message {id} announced with length {got}, previously {known}")]
    LengthConflict { id: MessageId, known: u32, got: u32 },
}

/// What happened to an inserted row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Insertion {
    /// The row raised the rank; `pivot` is the newly seen message.
    Innovative { pivot: MessageId },
    /// Linearly dependent on the rows already held; discarded.
    Dependent,
    /// References columns that were already retired; discarded.
    Stale,
}

#[derive(Debug, Clone)]
struct Row {
    pivot: u64,
    coeffs: Vec<u8>,
    payload: Vec<u8>,
}

impl Row {
    /// `self -= c * other`, growing the payload if `other` is longer.
    fn eliminate(&mut self, other: &Row, c: Gf256) {
        if other.payload.len() > self.payload.len() {
            self.payload.resize(other.payload.len(), 0);
        }
        gf256::mul_add_slice(&mut self.coeffs, &other.coeffs, c);
        gf256::mul_add_slice(&mut self.payload, &other.payload, c);
    }

    fn nonzero_count(&self) -> usize {
        self.coeffs.iter().filter(|&&c| c != 0).count()
    }
}

/// Coefficient and payload rows over the active ID range `[base, base + width)`.
#[derive(Debug, Clone)]
pub struct DecodingMatrix {
    base: u64,
    width: usize,
    rows: Vec<Row>,
}

impl Default for DecodingMatrix {
    fn default() -> Self {
        Self::new()
    }
}

impl DecodingMatrix {
    pub fn new() -> Self {
        DecodingMatrix {
            base: 1,
            width: 0,
            rows: Vec::new(),
        }
    }

    /// ID of the first active column.
    pub fn base(&self) -> MessageId {
        MessageId(self.base)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Pivot IDs in ascending order.
    pub fn pivots(&self) -> impl Iterator<Item = MessageId> + '_ {
        self.rows.iter().map(|r| MessageId(r.pivot))
    }

    /// Coefficients of row `i` over the active columns.
    pub fn row_coefficients(&self, i: usize) -> Option<Vec<Gf256>> {
        self.rows
            .get(i)
            .map(|r| r.coeffs.iter().map(|&c| Gf256(c)).collect())
    }

    /// Checks the reduced row-echelon invariants.
    pub fn is_rref(&self) -> bool {
        let mut last_pivot = None;
        for row in &self.rows {
            if row.coeffs.len() != self.width || row.pivot < self.base {
                return false;
            }
            let col = (row.pivot - self.base) as usize;
            if last_pivot.is_some_and(|p| p >= row.pivot) {
                return false;
            }
            last_pivot = Some(row.pivot);
            if row.coeffs[..col].iter().any(|&c| c != 0) || row.coeffs[col] != 1 {
                return false;
            }
            let others_zero = self
                .rows
                .iter()
                .filter(|o| o.pivot != row.pivot)
                .all(|o| o.coeffs[col] == 0);
            if !others_zero {
                return false;
            }
        }
        true
    }

    fn extend_to(&mut self, newest: u64) {
        let needed = (newest + 1).saturating_sub(self.base) as usize;
        if needed > self.width {
            self.width = needed;
            for row in &mut self.rows {
                row.coeffs.resize(needed, 0);
            }
        }
    }

    /// Inserts one combination and restores reduced row-echelon form.
    pub fn insert(&mut self, header: &CodingHeader, payload: &[u8]) -> Insertion {
        let oldest = header.id_oldest().get();
        let coeffs = header.coefficients();
        if oldest < self.base {
            let retired = (self.base - oldest) as usize;
            if coeffs[..retired.min(coeffs.len())].iter().any(|c| !c.is_zero()) {
                return Insertion::Stale;
            }
        }
        // Leading columns without a pivot are zero in every row.
        while self.base < oldest && self.rows.first().is_none_or(|r| r.pivot > self.base) {
            if self.width == 0 {
                self.base = oldest;
                break;
            }
            for row in &mut self.rows {
                row.coeffs.remove(0);
            }
            self.base += 1;
            self.width -= 1;
        }
        self.extend_to(header.id_newest().get());

        let mut row = Row {
            pivot: 0,
            coeffs: vec![0; self.width],
            payload: payload.to_vec(),
        };
        for (id, c) in header.ids().zip(coeffs) {
            if id.get() >= self.base {
                row.coeffs[(id.get() - self.base) as usize] = c.0;
            }
        }

        for existing in &self.rows {
            let c = row.coeffs[(existing.pivot - self.base) as usize];
            if c != 0 {
                row.eliminate(existing, Gf256(c));
            }
        }

        let Some(lead) = row.coeffs.iter().position(|&c| c != 0) else {
            return Insertion::Dependent;
        };
        let scale = Gf256(row.coeffs[lead]).inv().expect("leading entry is nonzero");
        gf256::scale_slice(&mut row.coeffs, scale);
        gf256::scale_slice(&mut row.payload, scale);
        row.pivot = self.base + lead as u64;

        for existing in &mut self.rows {
            let c = existing.coeffs[lead];
            if c != 0 {
                existing.eliminate(&row, Gf256(c));
            }
        }
        let pivot = row.pivot;
        let at = self.rows.partition_point(|r| r.pivot < pivot);
        self.rows.insert(at, row);
        Insertion::Innovative {
            pivot: MessageId(pivot),
        }
    }

    /// Rows reduced to a single unit coefficient, as `(id, padded payload)`.
    pub fn decoded(&self) -> impl Iterator<Item = (MessageId, &[u8])> + '_ {
        self.rows
            .iter()
            .filter(|r| r.nonzero_count() == 1)
            .map(|r| (MessageId(r.pivot), r.payload.as_slice()))
    }

    /// Drops leading columns below `limit` whose message is decoded and for
    /// which `may_drop` holds. Stops at the first column that cannot go.
    pub fn drop_leading_decoded(
        &mut self,
        limit: MessageId,
        mut may_drop: impl FnMut(MessageId) -> bool,
    ) -> usize {
        let mut dropped = 0;
        while self.width > 0 && self.base < limit.get() {
            let id = MessageId(self.base);
            match self.rows.first() {
                Some(r) if r.pivot == self.base => {
                    if r.nonzero_count() != 1 || !may_drop(id) {
                        break;
                    }
                    self.rows.remove(0);
                }
                // No pivot in the lowest column means it is zero everywhere.
                _ => {}
            }
            for row in &mut self.rows {
                row.coeffs.remove(0);
            }
            self.base += 1;
            self.width -= 1;
            dropped += 1;
        }
        if self.width == 0 && self.base < limit.get() {
            self.base = limit.get();
        }
        dropped
    }
}

impl fmt::Display for DecodingMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "     ")?;
        for i in 0..self.width {
            write!(f, "{:>5}", format!("p{}", self.base + i as u64))?;
        }
        writeln!(f)?;
        for row in &self.rows {
            write!(f, "     ")?;
            for c in &row.coeffs {
                write!(f, "{c:>5}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Result of handing one coded message to the server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receipt {
    pub response: NcResponse,
    pub insertion: Insertion,
    /// Messages decoded by this arrival, in increasing ID order.
    pub delivered: Vec<NativeMessage>,
    pub retired: usize,
}

/// Decoder state for one client session.
#[derive(Debug, Clone, Default)]
pub struct ServerSession {
    matrix: DecodingMatrix,
    seen: IdSet,
    delivered: IdSet,
    max_id_observed: MessageId,
    // Everything below the newest id_oldest received is confirmed by the client.
    confirmed_below: MessageId,
    retained: BTreeMap<MessageId, Vec<u8>>,
    lengths: BTreeMap<MessageId, u32>,
    last_response: NcResponse,
}

impl ServerSession {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn matrix(&self) -> &DecodingMatrix {
        &self.matrix
    }

    pub fn seen(&self) -> &IdSet {
        &self.seen
    }

    pub fn delivered(&self) -> &IdSet {
        &self.delivered
    }

    pub fn max_id_observed(&self) -> MessageId {
        self.max_id_observed
    }

    /// Decoded messages still held in case the client combines them again.
    pub fn retained(&self) -> impl Iterator<Item = (MessageId, &[u8])> + '_ {
        self.retained.iter().map(|(id, p)| (*id, p.as_slice()))
    }

    pub fn last_response(&self) -> NcResponse {
        self.last_response
    }

    /// Feedback reflecting the current state.
    pub fn response(&self) -> NcResponse {
        let mut seen_newest = self.seen.prefix().max(self.confirmed_below);
        while self.seen.contains(seen_newest.next()) {
            seen_newest = seen_newest.next();
        }
        NcResponse {
            seen_newest,
            unseen_newest: self.max_id_observed.max(seen_newest),
        }
    }

    /// Decodes a wire-format message and returns the wire-format response.
    pub fn receive_bytes(
        &mut self,
        bytes: &[u8],
    ) -> Result<([u8; codec::RESPONSE_LEN], Vec<NativeMessage>), ServerError> {
        let msg = codec::deserialize(bytes)?;
        let receipt = self.receive(&msg)?;
        Ok((codec::serialize_response(&receipt.response), receipt.delivered))
    }

    pub fn receive(&mut self, msg: &CodedMessage) -> Result<Receipt, ServerError> {
        let mut receipt = self.absorb(msg)?;
        receipt.retired = self.cleanup(msg.header().id_oldest());
        Ok(receipt)
    }

    /// Inserts, responds and decodes, but leaves retirement to an explicit
    /// [`cleanup`](Self::cleanup) with the header's `id_oldest`.
    pub fn absorb(&mut self, msg: &CodedMessage) -> Result<Receipt, ServerError> {
        let mut delivered = Vec::new();
        let receipt = self.absorb_with(msg, |m| delivered.push(m))?;
        Ok(Receipt {
            delivered,
            ..receipt
        })
    }

    /// Like [`receive`](Self::receive), but hands each decoded message to
    /// `deliver` as soon as it is pruned. The returned receipt has an empty
    /// `delivered` list.
    pub fn receive_with(
        &mut self,
        msg: &CodedMessage,
        deliver: impl FnMut(NativeMessage),
    ) -> Result<Receipt, ServerError> {
        let mut receipt = self.absorb_with(msg, deliver)?;
        receipt.retired = self.cleanup(msg.header().id_oldest());
        Ok(receipt)
    }

    fn absorb_with(
        &mut self,
        msg: &CodedMessage,
        mut deliver: impl FnMut(NativeMessage),
    ) -> Result<Receipt, ServerError> {
        let header = msg.header();
        for (id, &len) in header.ids().zip(header.lengths()) {
            if id < self.matrix.base() {
                continue;
            }
            if let Some(&known) = self.lengths.get(&id) {
                if known != len {
                    return Err(ServerError::LengthConflict { id, known, got: len });
                }
            }
        }
        for (id, &len) in header.ids().zip(header.lengths()) {
            if id >= self.matrix.base() {
                self.lengths.insert(id, len);
            }
        }

        self.max_id_observed = self.max_id_observed.max(header.id_newest());
        let below = MessageId(header.id_oldest().get() - 1);
        self.confirmed_below = self.confirmed_below.max(below);

        let insertion = self.matrix.insert(header, msg.payload());
        if let Insertion::Innovative { pivot } = insertion {
            self.seen.insert(pivot);
        }
        // Feedback does not depend on decoding.
        let response = self.response();
        debug_assert!(response.seen_newest >= self.last_response.seen_newest);
        debug_assert!(response.unseen_newest >= self.last_response.unseen_newest);
        self.last_response = response;

        let fresh: Vec<(MessageId, Vec<u8>)> = self
            .matrix
            .decoded()
            .filter(|(id, _)| !self.delivered.contains(*id))
            .map(|(id, padded)| {
                let len = self.lengths.get(&id).copied().unwrap_or(padded.len() as u32) as usize;
                let mut payload = padded.to_vec();
                payload.resize(len, 0);
                (id, payload)
            })
            .collect();
        for (id, payload) in fresh {
            self.delivered.insert(id);
            self.retained.insert(id, payload.clone());
            deliver(NativeMessage::new(id, payload).map_err(ServerError::MalformedHeader)?);
        }

        Ok(Receipt {
            response,
            insertion,
            delivered: Vec::new(),
            retired: 0,
        })
    }

    /// Retires decoded messages older than `id_oldest`. Returns how many
    /// retained messages were dropped.
    pub fn cleanup(&mut self, id_oldest: MessageId) -> usize {
        if id_oldest > MessageId::NONE {
            self.confirmed_below = self.confirmed_below.max(MessageId(id_oldest.get() - 1));
        }
        let keep = self.retained.split_off(&id_oldest);
        let retired = self.retained.len();
        self.retained = keep;

        let delivered = &self.delivered;
        self.matrix
            .drop_leading_decoded(id_oldest, |id| delivered.contains(id));
        let base = self.matrix.base();
        self.lengths = self.lengths.split_off(&base);
        retired
    }
}
