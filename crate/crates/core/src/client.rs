//! Client-side coding layer.
//!
//! Requests from the REST layer are buffered until the server reports them
//! seen. Each submission emits one random linear combination over the
//! buffered window; server feedback drives how many additional combinations
//! are sent to make up for lost requests.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::codec::{self, CodecError, CodedMessage, MessageId, NativeMessage, NcResponse, MAX_WINDOW};
use crate::gf256::Gf256;

pub const DEFAULT_SUBSET_LIMIT: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("coding window already holds {0} unconfirmed messages")]
    WindowFull(usize),
    #[error("response has seen_newest {seen} > unseen_newest {unseen}")]
    InvalidResponse { seen: MessageId, unseen: MessageId },
    #[error("subset limit must be between 1 and {MAX_WINDOW}, got {0}")]
    InvalidSubsetLimit(usize),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Supplies one coefficient per message for every new combination.
///
/// The last coefficient (newest message) must be nonzero.
pub trait CoefficientSource: Send {
    fn draw(&mut self, window: usize) -> Vec<Gf256>;
}

/// Uniform coefficients from a seeded ChaCha stream: `1..=255` for the
/// newest message, `0..=255` for the rest.
#[derive(Debug, Clone)]
pub struct SeededCoefficients {
    rng: ChaCha8Rng,
}

impl SeededCoefficients {
    pub fn new(seed: u64) -> Self {
        SeededCoefficients {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl CoefficientSource for SeededCoefficients {
    fn draw(&mut self, window: usize) -> Vec<Gf256> {
        let mut out: Vec<Gf256> = (0..window).map(|_| Gf256(self.rng.gen())).collect();
        if let Some(last) = out.last_mut() {
            *last = Gf256(self.rng.gen_range(1..=255));
        }
        out
    }
}

/// Replays fixed coefficient vectors, then falls back to seeded draws.
///
/// A scripted vector whose length does not match the window is skipped in
/// favour of the fallback.
#[derive(Debug, Clone)]
pub struct ScriptedCoefficients {
    script: VecDeque<Vec<Gf256>>,
    fallback: SeededCoefficients,
}

impl ScriptedCoefficients {
    pub fn new(script: impl IntoIterator<Item = Vec<u8>>, fallback_seed: u64) -> Self {
        ScriptedCoefficients {
            script: script
                .into_iter()
                .map(|v| v.into_iter().map(Gf256).collect())
                .collect(),
            fallback: SeededCoefficients::new(fallback_seed),
        }
    }
}

impl CoefficientSource for ScriptedCoefficients {
    fn draw(&mut self, window: usize) -> Vec<Gf256> {
        match self.script.pop_front() {
            Some(v) if v.len() == window && v.last().is_some_and(|c| !c.is_zero()) => v,
            _ => self.fallback.draw(window),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClientConfig {
    pub subset_limit: usize,
    pub seed: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            subset_limit: DEFAULT_SUBSET_LIMIT,
            seed: 0,
        }
    }
}

/// Coding state for one client talking to one server.
pub struct ClientSession {
    buffer: VecDeque<NativeMessage>,
    next_id: MessageId,
    redundant_val: u64,
    r_id: MessageId,
    subset_limit: usize,
    coefficients: Box<dyn CoefficientSource>,
    last_response: Option<NcResponse>,
}

impl std::fmt::Debug for ClientSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClientSession")
            .field("buffer", &self.buffered_ids().collect::<Vec<_>>())
            .field("next_id", &self.next_id)
            .field("redundant_val", &self.redundant_val)
            .field("r_id", &self.r_id)
            .field("subset_limit", &self.subset_limit)
            .finish_non_exhaustive()
    }
}

impl ClientSession {
    pub fn new(config: ClientConfig) -> Result<Self, ClientError> {
        Self::with_coefficients(config.subset_limit, SeededCoefficients::new(config.seed))
    }

    pub fn with_coefficients(
        subset_limit: usize,
        coefficients: impl CoefficientSource + 'static,
    ) -> Result<Self, ClientError> {
        if subset_limit == 0 || subset_limit > MAX_WINDOW {
            return Err(ClientError::InvalidSubsetLimit(subset_limit));
        }
        Ok(ClientSession {
            buffer: VecDeque::new(),
            next_id: MessageId::FIRST,
            redundant_val: 0,
            r_id: MessageId::NONE,
            subset_limit,
            coefficients: Box::new(coefficients),
            last_response: None,
        })
    }

    pub fn subset_limit(&self) -> usize {
        self.subset_limit
    }

    pub fn next_id(&self) -> MessageId {
        self.next_id
    }

    pub fn r_id(&self) -> MessageId {
        self.r_id
    }

    pub fn redundant_val(&self) -> u64 {
        self.redundant_val
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn buffered_ids(&self) -> impl Iterator<Item = MessageId> + '_ {
        self.buffer.iter().map(|m| m.id())
    }

    pub fn oldest_buffered(&self) -> Option<MessageId> {
        self.buffer.front().map(|m| m.id())
    }

    pub fn newest_buffered(&self) -> Option<MessageId> {
        self.buffer.back().map(|m| m.id())
    }

    pub fn last_response(&self) -> Option<NcResponse> {
        self.last_response
    }

    /// Buffers a new request and returns its first coded transmission.
    pub fn submit(&mut self, payload: Vec<u8>) -> Result<CodedMessage, ClientError> {
        if self.buffer.len() >= self.subset_limit {
            return Err(ClientError::WindowFull(self.buffer.len()));
        }
        let msg = NativeMessage::new(self.next_id, payload)?;
        self.buffer.push_back(msg);
        self.next_id = self.next_id.next();
        self.fresh_combination()
            .expect("buffer is non-empty after push")
    }

    /// Processes feedback; returns the additional combinations to send.
    pub fn handle_response(
        &mut self,
        resp: NcResponse,
    ) -> Result<Vec<CodedMessage>, ClientError> {
        if resp.seen_newest > resp.unseen_newest {
            return Err(ClientError::InvalidResponse {
                seen: resp.seen_newest,
                unseen: resp.unseen_newest,
            });
        }
        self.last_response = Some(resp);
        while self
            .buffer
            .front()
            .is_some_and(|m| m.id() <= resp.seen_newest)
        {
            self.buffer.pop_front();
        }

        if resp.unseen_newest > resp.seen_newest && resp.unseen_newest > self.r_id {
            let Some(newest) = self.newest_buffered() else {
                return Ok(Vec::new());
            };
            self.redundant_val = resp.gap();
            self.r_id = newest;
            let mut out = Vec::with_capacity(self.redundant_val as usize);
            while self.redundant_val > 0 {
                out.push(self.fresh_combination().expect("buffer checked non-empty")?);
                self.redundant_val -= 1;
            }
            return Ok(out);
        }
        Ok(Vec::new())
    }

    /// One fresh combination of the current window, for timeout recovery.
    pub fn on_timeout(&mut self) -> Option<CodedMessage> {
        self.fresh_combination().map(|r| r.expect("client window is always valid"))
    }

    fn fresh_combination(&mut self) -> Option<Result<CodedMessage, ClientError>> {
        if self.buffer.is_empty() {
            return None;
        }
        let window = self.buffer.len().min(self.subset_limit);
        let start = self.buffer.len() - window;
        let messages: Vec<NativeMessage> = self.buffer.range(start..).cloned().collect();
        let coeffs = self.coefficients.draw(window);
        Some(codec::combine(&messages, &coeffs).map_err(ClientError::from))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resp(s: u64, u: u64) -> NcResponse {
        NcResponse::new(MessageId(s), MessageId(u)).unwrap()
    }

    fn client(limit: usize) -> ClientSession {
        ClientSession::new(ClientConfig {
            subset_limit: limit,
            seed: 7,
        })
        .unwrap()
    }

    #[test]
    fn first_submission_is_single_message() {
        let mut c = client(16);
        let m = c.submit(b"p1".to_vec()).unwrap();
        assert_eq!(m.header().id_oldest(), MessageId(1));
        assert_eq!(m.header().id_newest(), MessageId(1));
        assert!(!m.header().coefficients()[0].is_zero());
    }

    #[test]
    fn unconfirmed_message_joins_next_combination() {
        let mut c = client(16);
        c.submit(b"p1".to_vec()).unwrap();
        let m = c.submit(b"p2".to_vec()).unwrap();
        assert_eq!(m.header().id_oldest(), MessageId(1));
        assert_eq!(m.header().id_newest(), MessageId(2));
    }

    #[test]
    fn window_full_leaves_buffer_unchanged() {
        let mut c = client(2);
        for i in 0..4 {
            c.submit(vec![i]).unwrap_or_else(|_| panic!("submit {i}"));
            if i == 1 {
                c.handle_response(resp(2, 2)).unwrap();
            }
        }
        assert_eq!(c.buffered_ids().collect::<Vec<_>>(), vec![MessageId(3), MessageId(4)]);
        assert_eq!(c.submit(vec![5]), Err(ClientError::WindowFull(2)));
        assert_eq!(c.buffered_ids().collect::<Vec<_>>(), vec![MessageId(3), MessageId(4)]);
        assert_eq!(c.next_id(), MessageId(5));
    }

    #[test]
    fn response_sequence_from_scenario() {
        let mut c = client(16);
        for i in 1..=4u8 {
            c.submit(vec![i]).unwrap();
        }
        let extra = c.handle_response(resp(2, 4)).unwrap();
        assert_eq!(extra.len(), 2);
        for m in &extra {
            assert_eq!(m.header().id_oldest(), MessageId(3));
            assert_eq!(m.header().id_newest(), MessageId(4));
        }
        assert_eq!(c.r_id(), MessageId(4));
        assert_eq!(c.redundant_val(), 0);

        assert!(c.handle_response(resp(3, 4)).unwrap().is_empty());
        assert_eq!(c.buffered_ids().collect::<Vec<_>>(), vec![MessageId(4)]);

        assert!(c.handle_response(resp(4, 4)).unwrap().is_empty());
        assert_eq!(c.buffer_len(), 0);
    }

    #[test]
    fn no_retrigger_for_same_unseen() {
        let mut c = client(16);
        for i in 1..=5u8 {
            c.submit(vec![i]).unwrap();
        }
        assert_eq!(c.handle_response(resp(1, 5)).unwrap().len(), 4);
        assert!(c.handle_response(resp(1, 5)).unwrap().is_empty());
        assert!(c.handle_response(resp(2, 5)).unwrap().is_empty());
        c.submit(vec![6]).unwrap();
        assert_eq!(c.handle_response(resp(3, 6)).unwrap().len(), 3);
    }

    #[test]
    fn invalid_response_rejected() {
        let mut c = client(16);
        let bad = NcResponse {
            seen_newest: MessageId(3),
            unseen_newest: MessageId(2),
        };
        assert!(matches!(
            c.handle_response(bad),
            Err(ClientError::InvalidResponse { .. })
        ));
    }

    #[test]
    fn empty_payload_and_bad_limit() {
        let mut c = client(4);
        assert_eq!(
            c.submit(Vec::new()),
            Err(ClientError::Codec(CodecError::EmptyPayload))
        );
        assert_eq!(c.next_id(), MessageId(1));
        assert!(matches!(
            ClientSession::new(ClientConfig { subset_limit: 0, seed: 0 }),
            Err(ClientError::InvalidSubsetLimit(0))
        ));
    }

    #[test]
    fn timeout_reemits_window() {
        let mut c = client(16);
        assert!(c.on_timeout().is_none());
        c.submit(vec![1]).unwrap();
        c.submit(vec![2]).unwrap();
        let m = c.on_timeout().unwrap();
        assert_eq!(m.header().window_len(), 2);
    }

    #[test]
    fn seeded_coefficients_are_reproducible() {
        let mut a = SeededCoefficients::new(11);
        let mut b = SeededCoefficients::new(11);
        for w in 1..20 {
            let x = a.draw(w);
            assert_eq!(x, b.draw(w));
            assert!(!x[w - 1].is_zero());
        }
    }

    #[test]
    fn scripted_then_fallback() {
        let mut s = ScriptedCoefficients::new([vec![1, 2], vec![3]], 0);
        assert_eq!(s.draw(2), vec![Gf256(1), Gf256(2)]);
        assert_eq!(s.draw(1), vec![Gf256(3)]);
        assert_eq!(s.draw(3).len(), 3);
    }
}
