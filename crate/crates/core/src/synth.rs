//! Seeded generators for synthetic systems with known integration structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::sampling::PacketRecord;
use crate::state::StateMatrix;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn node_labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn matrix(values: Vec<u8>, steps: usize, labels: Vec<String>) -> StateMatrix {
    StateMatrix::from_flat(values, steps, labels).expect("generator produces valid matrices")
}

/// `n` independent Bernoulli(`p`) nodes.
pub fn independent_coins(steps: usize, n: usize, p: f64, seed: u64) -> StateMatrix {
    let mut rng = rng(seed);
    let values = (0..steps * n).map(|_| u8::from(rng.random::<f64>() < p)).collect();
    matrix(values, steps, node_labels("n", n))
}

/// Node `A` is a fair coin and `B_t = A_{t-1}`, flipped with probability `flip`.
pub fn copy_pair(steps: usize, flip: f64, seed: u64) -> StateMatrix {
    let mut rng = rng(seed);
    let mut values = Vec::with_capacity(steps * 2);
    let mut prev_a = u8::from(rng.random::<bool>());
    for _ in 0..steps {
        let a = u8::from(rng.random::<bool>());
        let b = prev_a ^ u8::from(rng.random::<f64>() < flip);
        values.extend([a, b]);
        prev_a = a;
    }
    matrix(values, steps, vec!["A".into(), "B".into()])
}

/// Two independent copy pairs: nodes (0, 1) and (2, 3).
pub fn two_copy_pairs(steps: usize, seed: u64) -> StateMatrix {
    let first = copy_pair(steps, 0.0, seed);
    let second = copy_pair(steps, 0.0, seed.wrapping_add(0x9e37_79b9));
    let mut values = Vec::with_capacity(steps * 4);
    for (a, b) in first.rows().zip(second.rows()) {
        values.extend_from_slice(a);
        values.extend_from_slice(b);
    }
    matrix(values, steps, node_labels("n", 4))
}

/// A random network of `n` binary nodes where each node, with probability `coupling`, repeats
/// (or inverts) the previous state of a randomly assigned driver node and otherwise draws a
/// fresh fair coin.
pub fn coupled_binary(n: usize, steps: usize, coupling: f64, seed: u64) -> StateMatrix {
    let mut rng = rng(seed);
    let drivers: Vec<(usize, bool)> = (0..n)
        .map(|i| {
            let mut d = rng.random_range(0..n);
            if n > 1 && d == i {
                d = (d + 1) % n;
            }
            (d, rng.random::<bool>())
        })
        .collect();
    let mut prev: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
    let mut values = Vec::with_capacity(steps * n);
    for _ in 0..steps {
        let next: Vec<u8> = drivers
            .iter()
            .map(|&(d, invert)| {
                if rng.random::<f64>() < coupling {
                    prev[d] ^ u8::from(invert)
                } else {
                    u8::from(rng.random::<bool>())
                }
            })
            .collect();
        values.extend_from_slice(&next);
        prev = next;
    }
    matrix(values, steps, node_labels("n", n))
}

/// Densely coupled binary nodes: at each step every node, with probability `coupling`, copies
/// the previous state of a freshly drawn other node, and otherwise draws a fair coin.
pub fn mean_field_binary(n: usize, steps: usize, coupling: f64, seed: u64) -> StateMatrix {
    assert!(n >= 2, "need at least two nodes");
    let mut rng = rng(seed);
    let mut prev: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
    let mut values = Vec::with_capacity(steps * n);
    for _ in 0..steps {
        let next: Vec<u8> = (0..n)
            .map(|i| {
                if rng.random::<f64>() < coupling {
                    let j = rng.random_range(0..n - 1);
                    prev[if j >= i { j + 1 } else { j }]
                } else {
                    u8::from(rng.random::<bool>())
                }
            })
            .collect();
        values.extend_from_slice(&next);
        prev = next;
    }
    matrix(values, steps, node_labels("n", n))
}

/// Samples `x_t = A x_{t-1} + ε` with unit-variance Gaussian noise after a burn-in.
///
/// `coefficients` is the row-major `width × width` matrix `A`; output is row-major.
pub fn linear_gaussian(coefficients: &[f64], width: usize, steps: usize, seed: u64) -> Vec<f64> {
    assert_eq!(coefficients.len(), width * width, "coefficient matrix must be width × width");
    let mut rng = rng(seed);
    let mut state = vec![0.0; width];
    let mut next = vec![0.0; width];
    let burn_in = 1_000;
    let mut out = Vec::with_capacity(steps * width);
    for step in 0..burn_in + steps {
        for (i, slot) in next.iter_mut().enumerate() {
            let drift: f64 = (0..width).map(|j| coefficients[i * width + j] * state[j]).sum();
            let noise: f64 = StandardNormal.sample(&mut rng);
            *slot = drift + noise;
        }
        std::mem::swap(&mut state, &mut next);
        if step >= burn_in {
            out.extend_from_slice(&state);
        }
    }
    out
}

/// A conversation where a leader speaks in short bursts and every other member echoes the
/// leader's activity `lag` steps later, each step flipped with probability `noise`.
pub fn delayed_response_group(steps: usize, members: usize, lag: usize, noise: f64, seed: u64) -> StateMatrix {
    assert!(members >= 2, "need a leader and at least one responder");
    let mut rng = rng(seed);
    let stay = 0.6;
    let mut leader = Vec::with_capacity(steps + lag);
    let mut current = rng.random::<bool>();
    for _ in 0..steps + lag {
        if rng.random::<f64>() >= stay {
            current = !current;
        }
        leader.push(u8::from(current));
    }
    let mut values = Vec::with_capacity(steps * members);
    for t in lag..steps + lag {
        values.push(leader[t]);
        for _ in 1..members {
            values.push(leader[t - lag] ^ u8::from(rng.random::<f64>() < noise));
        }
    }
    let labels = (0..members).map(|i| format!("speaker{i}")).collect();
    matrix(values, steps, labels).with_step_duration_ms(200.0)
}

/// Parameters for [`request_response_traffic`].
#[derive(Clone, Debug)]
pub struct TrafficParams {
    pub clients: usize,
    pub servers: usize,
    pub duration_ms: f64,
    /// Mean requests per second per client.
    pub request_rate_hz: f64,
    /// Delay between a request and its response.
    pub latency_ms: f64,
    pub response_probability: f64,
    /// Mean unsolicited packets per second per node, sent to a random peer.
    pub background_rate_hz: f64,
    pub seed: u64,
}

impl Default for TrafficParams {
    fn default() -> Self {
        TrafficParams {
            clients: 40,
            servers: 10,
            duration_ms: 600_000.0,
            request_rate_hz: 2.0,
            latency_ms: 100.0,
            response_probability: 0.9,
            background_rate_hz: 0.2,
            seed: 0,
        }
    }
}

/// Poisson request traffic from clients to their assigned server, answered after a fixed
/// latency, plus Poisson background packets. Sorted by timestamp (microseconds from 0).
pub fn request_response_traffic(params: &TrafficParams) -> Vec<PacketRecord> {
    let mut rng = rng(params.seed);
    let span_us = (params.duration_ms * 1_000.0) as i64;
    let latency_us = (params.latency_ms * 1_000.0).round() as i64;
    let client = |i: usize| format!("c{i}");
    let server = |i: usize| format!("s{i}");
    let mut packets = Vec::new();
    if params.request_rate_hz > 0.0 {
        let gap = Exp::new(params.request_rate_hz / 1e6).expect("positive rate");
        for c in 0..params.clients {
            let s = c % params.servers.max(1);
            let mut t: f64 = gap.sample(&mut rng);
            while (t as i64) < span_us {
                let ts = t as i64;
                packets.push(PacketRecord { timestamp_us: ts, src: client(c), dst: server(s) });
                if rng.random::<f64>() < params.response_probability && ts + latency_us < span_us {
                    packets.push(PacketRecord { timestamp_us: ts + latency_us, src: server(s), dst: client(c) });
                }
                t += gap.sample(&mut rng);
            }
        }
    }
    if params.background_rate_hz > 0.0 {
        let all: Vec<String> = (0..params.clients).map(client).chain((0..params.servers).map(server)).collect();
        let gap = Exp::new(params.background_rate_hz / 1e6).expect("positive rate");
        for (i, src) in all.iter().enumerate() {
            let mut t: f64 = gap.sample(&mut rng);
            while (t as i64) < span_us {
                let mut j = rng.random_range(0..all.len());
                if j == i {
                    j = (j + 1) % all.len();
                }
                packets.push(PacketRecord { timestamp_us: t as i64, src: src.clone(), dst: all[j].clone() });
                t += gap.sample(&mut rng);
            }
        }
    }
    packets.sort_by(|a, b| (a.timestamp_us, &a.src, &a.dst).cmp(&(b.timestamp_us, &b.src, &b.dst)));
    packets
}
