//! Discrete-event simulation of the request/response exchange over a lossy
//! link, for both the coded protocol and plain timeout-retransmit REST.
//!
//! Time advances in rounds. In each round the client first processes the
//! responses that arrived (those emitted in the previous round), then
//! submits at most one new request, then fires its timeout if it has been
//! idle for `timeout_rounds`. Requests reach the server within the round
//! they are sent; responses reach the client one round later.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::client::{ClientError, ClientSession, CoefficientSource, SeededCoefficients};
use crate::codec::{CodedMessage, CodingHeader, MessageId, NcResponse};
use crate::idset::IdSet;
use crate::server::{Insertion, ServerError, ServerSession};

pub const DEFAULT_TIMEOUT_ROUNDS: u64 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("loss probability p must lie in [0, 1), got {0}")]
    InvalidLossProbability(f64),
    #[error("request loss share alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("need at least one message")]
    NoMessages,
    #[error("timeout must be at least one round")]
    ZeroTimeout,
    #[error(
        "no convergence after {rounds} rounds: {delivered}/{n} delivered, \
         {transmissions} request transmissions, client buffer {buffered}"
    )]
    NonConvergence {
        rounds: u64,
        n: u64,
        delivered: u64,
        transmissions: u64,
        buffered: usize,
    },
    #[error("message {0} delivered twice")]
    DuplicateDelivery(MessageId),
    #[error("message {0} delivered with corrupted payload")]
    CorruptDelivery(MessageId),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Server(#[from] ServerError),
}

/// Round-trip loss probability `p`, split between directions by `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossModel {
    p: f64,
    alpha: f64,
    seed: u64,
}

impl LossModel {
    pub fn new(p: f64, alpha: f64, seed: u64) -> Result<Self, SimError> {
        if !(0.0..1.0).contains(&p) {
            return Err(SimError::InvalidLossProbability(p));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(SimError::InvalidAlpha(alpha));
        }
        Ok(LossModel { p, alpha, seed })
    }

    pub fn lossless(seed: u64) -> Self {
        LossModel {
            p: 0.0,
            alpha: 0.0,
            seed,
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(self, seed: u64) -> Self {
        LossModel { seed, ..self }
    }

    /// Request-direction loss `alpha * p`.
    pub fn q_req(&self) -> f64 {
        self.alpha * self.p
    }

    /// Response-direction loss chosen so that a round trip fails with
    /// probability exactly `p`.
    pub fn q_resp(&self) -> f64 {
        let q_req = self.q_req();
        ((1.0 - self.alpha) * self.p) / (1.0 - q_req)
    }

    pub fn channel(&self) -> BernoulliChannel {
        BernoulliChannel::new(self.q_req(), self.q_resp(), self.seed)
    }
}

/// Decides the fate of each transmission. Requests are indexed from 1 in
/// transmission order; a response carries the index of the request it
/// answers.
pub trait Channel {
    fn drop_request(&mut self, index: u64) -> bool;
    fn drop_response(&mut self, request_index: u64) -> bool;
}

#[derive(Debug, Clone)]
pub struct BernoulliChannel {
    q_req: f64,
    q_resp: f64,
    rng: ChaCha8Rng,
}

impl BernoulliChannel {
    pub fn new(q_req: f64, q_resp: f64, seed: u64) -> Self {
        BernoulliChannel {
            q_req,
            q_resp,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Channel for BernoulliChannel {
    fn drop_request(&mut self, _index: u64) -> bool {
        self.rng.gen::<f64>() < self.q_req
    }

    fn drop_response(&mut self, _request_index: u64) -> bool {
        self.rng.gen::<f64>() < self.q_resp
    }
}

/// Drops exactly the listed requests and responses.
#[derive(Debug, Clone, Default)]
pub struct ScriptedChannel {
    drop_requests: BTreeSet<u64>,
    drop_responses: BTreeSet<u64>,
}

impl ScriptedChannel {
    pub fn new(
        drop_requests: impl IntoIterator<Item = u64>,
        drop_responses: impl IntoIterator<Item = u64>,
    ) -> Self {
        ScriptedChannel {
            drop_requests: drop_requests.into_iter().collect(),
            drop_responses: drop_responses.into_iter().collect(),
        }
    }
}

impl Channel for ScriptedChannel {
    fn drop_request(&mut self, index: u64) -> bool {
        self.drop_requests.contains(&index)
    }

    fn drop_response(&mut self, request_index: u64) -> bool {
        self.drop_responses.contains(&request_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Nc,
    Rest,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Nc => "nc",
            Mode::Rest => "rest",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub subset_limit: usize,
    pub timeout_rounds: u64,
    /// Round cap; `None` picks a cap proportional to `n`.
    pub max_rounds: Option<u64>,
    /// Keep running after the server has everything until the client has
    /// confirmation too (buffer empty / every response received).
    pub until_confirmed: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            subset_limit: crate::client::DEFAULT_SUBSET_LIMIT,
            timeout_rounds: DEFAULT_TIMEOUT_ROUNDS,
            max_rounds: None,
            until_confirmed: false,
        }
    }
}

impl SimConfig {
    fn round_cap(&self, n: u64) -> u64 {
        self.max_rounds
            .unwrap_or_else(|| 100_000 + n.saturating_mul(10_000))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimResult {
    pub n_submitted: u64,
    pub n_request_transmissions: u64,
    pub n_additional: u64,
    pub n_delivered: u64,
    pub n_responses_sent: u64,
    pub elapsed_rounds: u64,
}

pub const CSV_HEADER: &str =
    "n,p,alpha,seed,mode,n_request_transmissions,n_additional,n_delivered,elapsed_rounds";

impl SimResult {
    pub fn csv_row(&self, loss: &LossModel, mode: Mode) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.n_submitted,
            loss.p(),
            loss.alpha(),
            loss.seed(),
            mode,
            self.n_request_transmissions,
            self.n_additional,
            self.n_delivered,
            self.elapsed_rounds
        )
    }
}

/// Why a coded message was sent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendKind {
    New,
    Additional,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Submitted {
        round: u64,
        id: MessageId,
    },
    WindowFull {
        round: u64,
    },
    Sent {
        round: u64,
        index: u64,
        kind: SendKind,
        header: CodingHeader,
    },
    RequestLost {
        round: u64,
        index: u64,
    },
    ServerReceived {
        round: u64,
        index: u64,
        insertion: Insertion,
        response: NcResponse,
        matrix: String,
        delivered: Vec<MessageId>,
    },
    ResponseLost {
        round: u64,
        index: u64,
        response: NcResponse,
    },
    ResponseArrived {
        round: u64,
        index: u64,
        response: NcResponse,
        removed: Vec<MessageId>,
    },
}

/// Deterministic request body for message `id`, 1 to 23 bytes long.
pub fn payload_for(id: MessageId) -> Vec<u8> {
    let id = id.get();
    let len = 1 + (id % 23) as usize;
    (0..len as u64)
        .map(|j| (id.wrapping_mul(0x9E37_79B9).wrapping_add(j * 31) >> 3) as u8)
        .collect()
}

fn coefficient_seed(seed: u64) -> u64 {
    seed ^ 0x5DEE_CE66_D1CE_4E5B
}

/// Coded-protocol simulation that can be stepped round by round.
pub struct NcSimulation<C: Channel> {
    n: u64,
    config: SimConfig,
    channel: C,
    client: ClientSession,
    server: ServerSession,
    round: u64,
    submitted: u64,
    transmissions: u64,
    responses_sent: u64,
    last_activity: u64,
    in_flight: Vec<(u64, NcResponse)>,
    delivered: IdSet,
    responses_seen: Vec<NcResponse>,
    events: Option<Vec<TraceEvent>>,
}

impl<C: Channel> NcSimulation<C> {
    pub fn new(
        n: u64,
        config: SimConfig,
        channel: C,
        coefficients: impl CoefficientSource + 'static,
    ) -> Result<Self, SimError> {
        if n == 0 {
            return Err(SimError::NoMessages);
        }
        if config.timeout_rounds == 0 {
            return Err(SimError::ZeroTimeout);
        }
        Ok(NcSimulation {
            n,
            config,
            channel,
            client: ClientSession::with_coefficients(config.subset_limit, coefficients)?,
            server: ServerSession::new(),
            round: 0,
            submitted: 0,
            transmissions: 0,
            responses_sent: 0,
            last_activity: 0,
            in_flight: Vec::new(),
            delivered: IdSet::new(),
            responses_seen: Vec::new(),
            events: None,
        })
    }

    /// Records a [`TraceEvent`] log, including the decoding matrix after
    /// every arrival.
    pub fn record_events(mut self) -> Self {
        self.events = Some(Vec::new());
        self
    }

    pub fn events(&self) -> &[TraceEvent] {
        self.events.as_deref().unwrap_or(&[])
    }

    pub fn client(&self) -> &ClientSession {
        &self.client
    }

    pub fn server(&self) -> &ServerSession {
        &self.server
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Responses that reached the client, in arrival order.
    pub fn responses_seen(&self) -> &[NcResponse] {
        &self.responses_seen
    }

    pub fn is_done(&self) -> bool {
        let delivered = self.delivered.len() == self.n;
        if self.config.until_confirmed {
            delivered && self.submitted == self.n && self.client.buffer_len() == 0
        } else {
            delivered
        }
    }

    pub fn result(&self) -> SimResult {
        SimResult {
            n_submitted: self.submitted,
            n_request_transmissions: self.transmissions,
            n_additional: self.transmissions - self.submitted,
            n_delivered: self.delivered.len(),
            n_responses_sent: self.responses_sent,
            elapsed_rounds: self.round,
        }
    }

    fn emit(&mut self, event: impl FnOnce() -> TraceEvent) {
        if let Some(events) = &mut self.events {
            events.push(event());
        }
    }

    fn transmit(&mut self, msg: CodedMessage, kind: SendKind) -> Result<(), SimError> {
        self.transmissions += 1;
        let index = self.transmissions;
        let round = self.round;
        self.emit(|| TraceEvent::Sent {
            round,
            index,
            kind,
            header: msg.header().clone(),
        });
        if self.channel.drop_request(index) {
            self.emit(|| TraceEvent::RequestLost { round, index });
            return Ok(());
        }

        let receipt = if self.events.is_some() {
            self.server.absorb(&msg)?
        } else {
            self.server.receive(&msg)?
        };
        for m in &receipt.delivered {
            if !self.delivered.insert(m.id()) {
                return Err(SimError::DuplicateDelivery(m.id()));
            }
            if m.payload() != payload_for(m.id()) {
                return Err(SimError::CorruptDelivery(m.id()));
            }
        }
        let response = receipt.response;
        if self.events.is_some() {
            let matrix = self.server.matrix().to_string();
            let delivered = receipt.delivered.iter().map(|m| m.id()).collect();
            self.emit(|| TraceEvent::ServerReceived {
                round,
                index,
                insertion: receipt.insertion,
                response,
                matrix,
                delivered,
            });
            self.server.cleanup(msg.header().id_oldest());
        }

        self.responses_sent += 1;
        if self.channel.drop_response(index) {
            self.emit(|| TraceEvent::ResponseLost {
                round,
                index,
                response,
            });
        } else {
            self.in_flight.push((index, response));
        }
        Ok(())
    }

    /// Advances one round. Returns `true` once the run is complete.
    pub fn step(&mut self) -> Result<bool, SimError> {
        if self.is_done() {
            return Ok(true);
        }
        self.round += 1;
        if self.round > self.config.round_cap(self.n) {
            return Err(SimError::NonConvergence {
                rounds: self.round - 1,
                n: self.n,
                delivered: self.delivered.len(),
                transmissions: self.transmissions,
                buffered: self.client.buffer_len(),
            });
        }
        let round = self.round;
        let mut sent = false;

        for (index, response) in std::mem::take(&mut self.in_flight) {
            self.last_activity = round;
            self.responses_seen.push(response);
            let before: Vec<MessageId> = self.client.buffered_ids().collect();
            let extra = self.client.handle_response(response)?;
            if self.events.is_some() {
                let removed = before
                    .into_iter()
                    .filter(|&id| id <= response.seen_newest)
                    .collect();
                self.emit(|| TraceEvent::ResponseArrived {
                    round,
                    index,
                    response,
                    removed,
                });
            }
            for msg in extra {
                self.transmit(msg, SendKind::Additional)?;
                sent = true;
            }
        }

        if self.submitted < self.n {
            let id = self.client.next_id();
            match self.client.submit(payload_for(id)) {
                Ok(msg) => {
                    self.submitted += 1;
                    self.emit(|| TraceEvent::Submitted { round, id });
                    self.transmit(msg, SendKind::New)?;
                    sent = true;
                }
                Err(ClientError::WindowFull(_)) => {
                    self.emit(|| TraceEvent::WindowFull { round });
                }
                Err(e) => return Err(e.into()),
            }
        }

        if !sent && round - self.last_activity >= self.config.timeout_rounds {
            if let Some(msg) = self.client.on_timeout() {
                self.transmit(msg, SendKind::Timeout)?;
                sent = true;
            }
        }
        if sent {
            self.last_activity = round;
        }
        Ok(self.is_done())
    }

    pub fn run(mut self) -> Result<SimResult, SimError> {
        while !self.step()? {}
        Ok(self.result())
    }
}

/// Coded protocol over a Bernoulli channel drawn from `loss`.
pub fn run_nc(
    n: u64,
    loss: &LossModel,
    subset_limit: usize,
    timeout_rounds: u64,
) -> Result<SimResult, SimError> {
    let config = SimConfig {
        subset_limit,
        timeout_rounds,
        ..SimConfig::default()
    };
    run_nc_with(n, loss, config)
}

pub fn run_nc_with(n: u64, loss: &LossModel, config: SimConfig) -> Result<SimResult, SimError> {
    NcSimulation::new(
        n,
        config,
        loss.channel(),
        SeededCoefficients::new(coefficient_seed(loss.seed())),
    )?
    .run()
}

/// Plain REST: each request is retransmitted every `timeout_rounds` until
/// its own response arrives.
pub struct RestSimulation<C: Channel> {
    n: u64,
    timeout_rounds: u64,
    cap: u64,
    channel: C,
    round: u64,
    submitted: u64,
    transmissions: u64,
    responses_sent: u64,
    // message id -> round at which it is retransmitted
    outstanding: BTreeMap<u64, u64>,
    applied: IdSet,
    acked: IdSet,
    in_flight: Vec<u64>,
}

impl<C: Channel> RestSimulation<C> {
    pub fn new(n: u64, config: SimConfig, channel: C) -> Result<Self, SimError> {
        if n == 0 {
            return Err(SimError::NoMessages);
        }
        if config.timeout_rounds == 0 {
            return Err(SimError::ZeroTimeout);
        }
        Ok(RestSimulation {
            n,
            timeout_rounds: config.timeout_rounds,
            cap: config.round_cap(n),
            channel,
            round: 0,
            submitted: 0,
            transmissions: 0,
            responses_sent: 0,
            outstanding: BTreeMap::new(),
            applied: IdSet::new(),
            acked: IdSet::new(),
            in_flight: Vec::new(),
        })
    }

    fn transmit(&mut self, id: u64) {
        self.transmissions += 1;
        self.outstanding.insert(id, self.round + self.timeout_rounds);
        if self.channel.drop_request(self.transmissions) {
            return;
        }
        // Unsafe methods are re-applied; only the first application counts
        // as a delivery.
        self.applied.insert(MessageId(id));
        self.responses_sent += 1;
        if !self.channel.drop_response(self.transmissions) {
            self.in_flight.push(id);
        }
    }

    pub fn is_done(&self) -> bool {
        self.acked.len() == self.n
    }

    pub fn result(&self) -> SimResult {
        SimResult {
            n_submitted: self.submitted,
            n_request_transmissions: self.transmissions,
            n_additional: self.transmissions - self.submitted,
            n_delivered: self.applied.len(),
            n_responses_sent: self.responses_sent,
            elapsed_rounds: self.round,
        }
    }

    pub fn step(&mut self) -> Result<bool, SimError> {
        if self.is_done() {
            return Ok(true);
        }
        self.round += 1;
        if self.round > self.cap {
            return Err(SimError::NonConvergence {
                rounds: self.round - 1,
                n: self.n,
                delivered: self.applied.len(),
                transmissions: self.transmissions,
                buffered: self.outstanding.len(),
            });
        }
        for id in std::mem::take(&mut self.in_flight) {
            self.acked.insert(MessageId(id));
            self.outstanding.remove(&id);
        }
        let due: Vec<u64> = self
            .outstanding
            .iter()
            .filter(|(_, &deadline)| deadline <= self.round)
            .map(|(&id, _)| id)
            .collect();
        if self.submitted < self.n {
            self.submitted += 1;
            self.transmit(self.submitted);
        }
        for id in due {
            self.transmit(id);
        }
        Ok(self.is_done())
    }

    pub fn run(mut self) -> Result<SimResult, SimError> {
        while !self.step()? {}
        Ok(self.result())
    }
}

pub fn run_rest_baseline(
    n: u64,
    loss: &LossModel,
    timeout_rounds: u64,
) -> Result<SimResult, SimError> {
    let config = SimConfig {
        timeout_rounds,
        ..SimConfig::default()
    };
    RestSimulation::new(n, config, loss.channel())?.run()
}

pub fn run_mode(
    mode: Mode,
    n: u64,
    loss: &LossModel,
    config: SimConfig,
) -> Result<SimResult, SimError> {
    match mode {
        Mode::Nc => run_nc_with(n, loss, config),
        Mode::Rest => RestSimulation::new(n, config, loss.channel())?.run(),
    }
}

/// Runs one simulation per seed in parallel; results come back in seed order.
pub fn monte_carlo(
    mode: Mode,
    n: u64,
    loss: &LossModel,
    seeds: std::ops::Range<u64>,
    config: SimConfig,
) -> Result<Vec<(LossModel, SimResult)>, SimError> {
    seeds
        .into_par_iter()
        .map(|seed| {
            let loss = loss.with_seed(seed);
            run_mode(mode, n, &loss, config).map(|r| (loss, r))
        })
        .collect()
}

/// Sample mean and (n-1) standard deviation.
pub fn mean_std(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let values: Vec<f64> = values.into_iter().collect();
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::ScriptedCoefficients;

    #[test]
    fn loss_decomposition() {
        for &p in &[0.0, 0.1, 0.5, 0.9] {
            for &alpha in &[0.0, 0.3, 1.0] {
                let l = LossModel::new(p, alpha, 0).unwrap();
                let total = 1.0 - (1.0 - l.q_req()) * (1.0 - l.q_resp());
                assert!((total - p).abs() < 1e-12, "p={p} alpha={alpha}");
                assert!((l.q_req() - alpha * p).abs() < 1e-15);
            }
        }
        assert!(LossModel::new(1.0, 0.5, 0).is_err());
        assert!(LossModel::new(-0.1, 0.5, 0).is_err());
        assert!(LossModel::new(0.5, 1.5, 0).is_err());
    }

    #[test]
    fn channel_calibration() {
        let loss = LossModel::new(0.4, 0.3, 99).unwrap();
        let mut ch = loss.channel();
        let trials = 200_000;
        let mut any = 0;
        for i in 1..=trials {
            let a = ch.drop_request(i);
            let b = ch.drop_response(i);
            if a || b {
                any += 1;
            }
        }
        let frac = any as f64 / trials as f64;
        // Five standard errors.
        let se = (0.4f64 * 0.6 / trials as f64).sqrt();
        assert!((frac - 0.4).abs() < 5.0 * se, "{frac}");
    }

    #[test]
    fn lossless_runs() {
        let loss = LossModel::lossless(1);
        let nc = run_nc(4, &loss, 16, 3).unwrap();
        assert_eq!(nc.n_additional, 0);
        assert_eq!(nc.n_delivered, 4);
        let rest = run_rest_baseline(4, &loss, 3).unwrap();
        assert_eq!(rest.n_additional, 0);
        assert_eq!(rest.n_delivered, 4);
    }

    #[test]
    fn deterministic_given_seed() {
        let loss = LossModel::new(0.5, 0.5, 42).unwrap();
        let a = run_nc(200, &loss, 16, 3).unwrap();
        let b = run_nc(200, &loss, 16, 3).unwrap();
        assert_eq!(a, b);
        let a = run_rest_baseline(200, &loss, 3).unwrap();
        let b = run_rest_baseline(200, &loss, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scripted_scenario() {
        let coeffs = ScriptedCoefficients::new(
            [
                vec![1],
                vec![1, 2],
                vec![1, 3, 2],
                vec![1, 4, 5, 1],
                vec![2, 3],
                vec![5, 6],
            ],
            0,
        );
        let config = SimConfig {
            until_confirmed: true,
            ..SimConfig::default()
        };
        let channel = ScriptedChannel::new([1, 3], [2]);
        let mut sim = NcSimulation::new(4, config, channel, coeffs).unwrap();
        while !sim.step().unwrap() {}
        let seen: Vec<(u64, u64)> = sim
            .responses_seen()
            .iter()
            .map(|r| (r.seen_newest.get(), r.unseen_newest.get()))
            .collect();
        assert_eq!(seen, vec![(2, 4), (3, 4), (4, 4)]);
        assert_eq!(sim.result().n_additional, 2);
    }

    #[test]
    fn zero_messages_rejected() {
        let loss = LossModel::lossless(0);
        assert_eq!(run_nc(0, &loss, 16, 3), Err(SimError::NoMessages));
        assert_eq!(run_rest_baseline(4, &loss, 0), Err(SimError::ZeroTimeout));
    }

    #[test]
    fn round_cap_reports_non_convergence() {
        let loss = LossModel::new(0.9, 1.0, 3).unwrap();
        let config = SimConfig {
            max_rounds: Some(5),
            ..SimConfig::default()
        };
        assert!(matches!(
            run_nc_with(100, &loss, config),
            Err(SimError::NonConvergence { .. })
        ));
    }

    #[test]
    fn mean_std_basic() {
        let (m, s) = mean_std([1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
    }
}
