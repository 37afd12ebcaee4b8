//! The four-request case study: request 1 and request 3 are lost, and the
//! response to request 2 is lost. The server answers the fourth combination
//! with Response(2,4), the client sends two additional combinations over
//! p3 and p4, and the server then reports Response(3,4) and Response(4,4).

use std::fmt::Write as _;

use crate::client::ScriptedCoefficients;
use crate::codec::{MessageId, NcResponse};
use crate::sim::{NcSimulation, ScriptedChannel, SendKind, SimConfig, SimError, SimResult, TraceEvent};

/// Coefficient vectors used by the case study, in transmission order.
pub const COEFFICIENTS: [&[u8]; 6] = [&[1], &[1, 2], &[1, 3, 2], &[1, 4, 5, 1], &[2, 3], &[5, 6]];
pub const DROPPED_REQUESTS: [u64; 2] = [1, 3];
pub const DROPPED_RESPONSES: [u64; 1] = [2];
pub const EXPECTED_RESPONSES: [(u64, u64); 3] = [(2, 4), (3, 4), (4, 4)];

#[derive(Debug, Clone)]
pub struct CaseStudy {
    pub events: Vec<TraceEvent>,
    pub responses: Vec<NcResponse>,
    pub result: SimResult,
}

impl CaseStudy {
    /// Windows of the combinations sent in reaction to feedback.
    pub fn additional_windows(&self) -> Vec<Vec<MessageId>> {
        self.events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Sent {
                    kind: SendKind::Additional,
                    header,
                    ..
                } => Some(header.ids().collect()),
                _ => None,
            })
            .collect()
    }

    pub fn delivered(&self) -> Vec<MessageId> {
        self.events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::ServerReceived { delivered, .. } => Some(delivered.clone()),
                _ => None,
            })
            .flatten()
            .collect()
    }

    pub fn matches_expected(&self) -> bool {
        let got: Vec<(u64, u64)> = self
            .responses
            .iter()
            .map(|r| (r.seen_newest.get(), r.unseen_newest.get()))
            .collect();
        got == EXPECTED_RESPONSES
    }

    pub fn transcript(&self) -> String {
        render(&self.events)
    }
}

pub fn run() -> Result<CaseStudy, SimError> {
    let coefficients = ScriptedCoefficients::new(COEFFICIENTS.iter().map(|c| c.to_vec()), 0);
    let channel = ScriptedChannel::new(DROPPED_REQUESTS, DROPPED_RESPONSES);
    let config = SimConfig {
        until_confirmed: true,
        max_rounds: Some(64),
        ..SimConfig::default()
    };
    let mut sim = NcSimulation::new(4, config, channel, coefficients)?.record_events();
    while !sim.step()? {}
    Ok(CaseStudy {
        events: sim.events().to_vec(),
        responses: sim.responses_seen().to_vec(),
        result: sim.result(),
    })
}

fn combination(header: &crate::codec::CodingHeader) -> String {
    header
        .ids()
        .zip(header.coefficients())
        .filter(|(_, c)| !c.is_zero())
        .map(|(id, c)| {
            if c.value() == 1 {
                format!("p{id}")
            } else {
                format!("{c}p{id}")
            }
        })
        .collect::<Vec<_>>()
        .join("+")
}

/// Human-readable transcript of a traced run.
pub fn render(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for event in events {
        match event {
            TraceEvent::Submitted { round, id } => {
                let _ = writeln!(out, "[round {round}] REST layer submits p{id}");
            }
            TraceEvent::WindowFull { round } => {
                let _ = writeln!(out, "[round {round}] coding window full, submission deferred");
            }
            TraceEvent::Sent {
                round,
                index,
                kind,
                header,
            } => {
                let kind = match kind {
                    SendKind::New => "coded request",
                    SendKind::Additional => "additional combination",
                    SendKind::Timeout => "timeout combination",
                };
                let _ = writeln!(
                    out,
                    "[round {round}] client -> server #{index}: {kind} {}",
                    combination(header)
                );
            }
            TraceEvent::RequestLost { round, index } => {
                let _ = writeln!(out, "[round {round}]   request #{index} LOST");
            }
            TraceEvent::ServerReceived {
                round,
                index,
                insertion,
                response,
                matrix,
                delivered,
            } => {
                let _ = writeln!(
                    out,
                    "[round {round}]   server got #{index} ({insertion:?}), decoding matrix after GJE:"
                );
                out.push_str(matrix);
                if !delivered.is_empty() {
                    let ids: Vec<String> = delivered.iter().map(|id| format!("p{id}")).collect();
                    let _ = writeln!(out, "[round {round}]   delivered to REST layer: {}", ids.join(", "));
                }
                let _ = writeln!(out, "[round {round}]   server -> client: {response}");
            }
            TraceEvent::ResponseLost {
                round,
                index,
                response,
            } => {
                let _ = writeln!(out, "[round {round}]   {response} for #{index} LOST");
            }
            TraceEvent::ResponseArrived {
                round,
                response,
                removed,
                ..
            } => {
                let ids: Vec<String> = removed.iter().map(|id| format!("p{id}")).collect();
                let _ = writeln!(
                    out,
                    "[round {round}] client receives {response}, drops [{}] from coding buffer",
                    ids.join(", ")
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_study_matches() {
        let cs = run().unwrap();
        assert!(cs.matches_expected(), "{:?}", cs.responses);
        assert_eq!(cs.result.n_additional, 2);
        assert_eq!(
            cs.additional_windows(),
            vec![vec![MessageId(3), MessageId(4)]; 2]
        );
        let text = cs.transcript();
        let a = text.find("Response(2,4)").unwrap();
        let b = text.find("Response(3,4)").unwrap();
        let c = text.find("Response(4,4)").unwrap();
        assert!(a < b && b < c);
        assert!(text.contains("p1+4p2+5p3+p4"));
        assert!(text.contains("2p3+3p4"));
        assert!(text.contains("5p3+6p4"));
    }
}
