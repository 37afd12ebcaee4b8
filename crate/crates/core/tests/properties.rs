use std::collections::BTreeSet;

use proptest::prelude::*;

use ncrest_core::codec::{self, combine, MessageId, NativeMessage, NcResponse};
use ncrest_core::gf256::{self, Gf256};
use ncrest_core::{ClientConfig, ClientSession, ServerSession};

fn messages(first: u64, payloads: Vec<Vec<u8>>) -> Vec<NativeMessage> {
    payloads
        .into_iter()
        .enumerate()
        .map(|(i, p)| NativeMessage::new(MessageId(first + i as u64), p).unwrap())
        .collect()
}

fn payloads(max_window: usize) -> impl Strategy<Value = Vec<Vec<u8>>> {
    prop::collection::vec(prop::collection::vec(any::<u8>(), 1..64), 1..=max_window)
}

fn rank(rows: &[Vec<u8>]) -> usize {
    let mut m = rows.to_vec();
    let cols = m.iter().map(Vec::len).max().unwrap_or(0);
    for r in &mut m {
        r.resize(cols, 0);
    }
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..m.len()).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(rank, p);
        let inv = Gf256(m[rank][col]).inv().unwrap();
        let pivot: Vec<u8> = m[rank].iter().map(|&x| (Gf256(x) * inv).0).collect();
        m[rank] = pivot.clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != rank && row[col] != 0 {
                let c = Gf256(row[col]);
                gf256::mul_add_slice(row, &pivot, c);
            }
        }
        rank += 1;
    }
    rank
}

proptest! {
    #[test]
    fn combine_is_linear(
        (ps, a, b) in payloads(8).prop_flat_map(|ps| {
            let w = ps.len();
            let rest = prop::collection::vec(any::<u8>(), w - 1);
            (Just(ps), rest.clone(), rest, 1..=255u8, 1..=254u8)
        }).prop_map(|(ps, mut a, mut b, an, bn)| {
            // Distinct newest coefficients keep the sum's newest nonzero.
            a.push(an);
            b.push(if bn >= an { bn + 1 } else { bn });
            let g = |v: Vec<u8>| v.into_iter().map(Gf256).collect::<Vec<_>>();
            (ps, g(a), g(b))
        }),
    ) {
        let ms = messages(1, ps);
        let sum: Vec<Gf256> = a.iter().zip(&b).map(|(&x, &y)| x + y).collect();
        let ca = combine(&ms, &a).unwrap();
        let cb = combine(&ms, &b).unwrap();
        let cs = combine(&ms, &sum).unwrap();
        let xor: Vec<u8> = ca.payload().iter().zip(cb.payload()).map(|(x, y)| x ^ y).collect();
        prop_assert_eq!(cs.payload(), &xor[..]);
    }

    #[test]
    fn serialize_is_a_bijection(
        first in 1..u64::MAX / 2,
        ps in payloads(16),
        seed in any::<u64>(),
    ) {
        let ms = messages(first, ps);
        let w = ms.len();
        let mut coeffs: Vec<Gf256> = (0..w).map(|i| Gf256((seed >> (i % 8 * 8)) as u8)).collect();
        coeffs[w - 1] = Gf256(1 + (seed % 255) as u8);
        let msg = combine(&ms, &coeffs).unwrap();
        let bytes = codec::serialize(&msg);
        prop_assert_eq!(bytes.len(), msg.encoded_len());
        let back = codec::deserialize(&bytes).unwrap();
        prop_assert_eq!(&back, &msg);
        prop_assert_eq!(codec::serialize(&back), bytes);
    }

    #[test]
    fn deserialize_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        if let Ok(msg) = codec::deserialize(&bytes) {
            prop_assert_eq!(codec::serialize(&msg), bytes);
        }
    }

    #[test]
    fn server_keeps_rref_and_rank(
        ps in payloads(10),
        draws in prop::collection::vec((any::<usize>(), any::<u64>()), 1..24),
    ) {
        let ms = messages(1, ps);
        let mut server = ServerSession::new();
        let mut rows: Vec<Vec<u8>> = Vec::new();
        for (end, seed) in draws {
            let w = 1 + end % ms.len();
            let mut coeffs: Vec<Gf256> = (0..w).map(|i| Gf256((seed >> (i % 8 * 8)) as u8)).collect();
            coeffs[w - 1] = Gf256(1 + (seed % 255) as u8);
            server.absorb(&combine(&ms[..w], &coeffs).unwrap()).unwrap();
            rows.push(coeffs.iter().map(|c| c.0).collect());
            prop_assert!(server.matrix().is_rref());
            prop_assert_eq!(server.matrix().rank(), rank(&rows));
            prop_assert_eq!(server.seen().len(), rank(&rows) as u64);
        }
    }

    #[test]
    fn responses_are_monotone_and_delivery_exactly_once(
        n in 1..30usize,
        limit in 1..8usize,
        seed in any::<u64>(),
        keep in prop::collection::vec(any::<bool>(), 256),
    ) {
        let mut client = ClientSession::new(ClientConfig { subset_limit: limit, seed }).unwrap();
        let mut server = ServerSession::new();
        let mut keep = keep.into_iter().cycle();
        let mut last = server.last_response();
        let mut delivered = Vec::new();
        let mut submitted = 0;
        let mut outbox = Vec::new();
        for _ in 0..400 {
            if submitted < n {
                if let Ok(m) = client.submit(vec![submitted as u8 + 1; 1 + submitted % 5]) {
                    submitted += 1;
                    outbox.push(m);
                }
            }
            if outbox.is_empty() {
                outbox.extend(client.on_timeout());
            }
            for m in std::mem::take(&mut outbox) {
                if !keep.next().unwrap() {
                    continue;
                }
                let r = server.receive(&m).unwrap();
                prop_assert!(r.response.seen_newest >= last.seen_newest);
                prop_assert!(r.response.unseen_newest >= last.unseen_newest);
                last = r.response;
                delivered.extend(r.delivered);
                if keep.next().unwrap() {
                    outbox.extend(client.handle_response(r.response).unwrap());
                }
            }
            if submitted == n && client.buffer_len() == 0 {
                break;
            }
        }
        let ids: Vec<MessageId> = delivered.iter().map(|m| m.id()).collect();
        let unique: BTreeSet<MessageId> = ids.iter().copied().collect();
        prop_assert_eq!(ids.len(), unique.len());
        for m in &delivered {
            let i = m.id().get() as usize - 1;
            prop_assert_eq!(m.payload(), &vec![i as u8 + 1; 1 + i % 5][..]);
        }
    }

    #[test]
    fn client_cleanup_and_redundancy(
        n in 1..20u64,
        seen in 0..20u64,
        extra in 0..20u64,
        limit in 1..32usize,
    ) {
        let mut client = ClientSession::new(ClientConfig { subset_limit: limit, seed: n }).unwrap();
        for i in 0..n {
            if client.submit(vec![i as u8 + 1]).is_err() {
                break;
            }
        }
        let newest = client.newest_buffered().unwrap();
        let seen = MessageId(seen.min(newest.get()));
        let unseen = MessageId((seen.get() + extra).min(newest.get()));
        let resp = NcResponse::new(seen, unseen).unwrap();

        let extra_msgs = client.handle_response(resp).unwrap();
        prop_assert!(client.buffered_ids().all(|id| id > seen));
        prop_assert!(client.buffer_len() <= limit);
        if unseen > seen {
            prop_assert_eq!(extra_msgs.len() as u64, resp.gap());
            prop_assert_eq!(client.r_id(), newest);
            for m in &extra_msgs {
                prop_assert!(m.header().id_oldest() > seen);
                prop_assert_eq!(m.header().id_newest(), newest);
            }
        } else {
            prop_assert!(extra_msgs.is_empty());
        }
        // The same feedback again must not trigger a second burst.
        prop_assert!(client.handle_response(resp).unwrap().is_empty());
        prop_assert_eq!(client.redundant_val(), 0);
    }
}
