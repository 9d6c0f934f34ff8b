//! Brute-force reference computations written directly from the definitions, sharing no code
//! with the library beyond reading matrix cells.

#![allow(dead_code)]

use std::collections::HashMap;

use groupphi::StateMatrix;

fn plug_in_entropy<K: std::hash::Hash + Eq>(counts: &HashMap<K, usize>) -> f64 {
    let total: usize = counts.values().sum();
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum()
}

fn key(states: &StateMatrix, t: usize, subset: &[usize]) -> Vec<u8> {
    subset.iter().map(|&i| states.get(t, i)).collect()
}

/// Entropies of past, present and (past, present) over the `steps - tau` aligned pairs.
pub fn lag_entropies(states: &StateMatrix, subset: &[usize], tau: usize) -> (f64, f64, f64) {
    let mut past = HashMap::new();
    let mut present = HashMap::new();
    let mut joint = HashMap::new();
    for t in tau..states.steps() {
        let p = key(states, t - tau, subset);
        let q = key(states, t, subset);
        *past.entry(p.clone()).or_insert(0usize) += 1;
        *present.entry(q.clone()).or_insert(0usize) += 1;
        *joint.entry((p, q)).or_insert(0usize) += 1;
    }
    (plug_in_entropy(&past), plug_in_entropy(&present), plug_in_entropy(&joint))
}

pub fn lag_mutual_information(states: &StateMatrix, subset: &[usize], tau: usize) -> f64 {
    let (hp, hq, hj) = lag_entropies(states, subset, tau);
    hp + hq - hj
}

/// Every unordered bipartition, as (block containing node 0, rest).
pub fn all_bipartitions(n: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    let mut assign = vec![false; n];
    fn go(i: usize, assign: &mut Vec<bool>, out: &mut Vec<(Vec<usize>, Vec<usize>)>) {
        if i == assign.len() {
            let a: Vec<usize> = (0..assign.len()).filter(|&k| !assign[k]).collect();
            let b: Vec<usize> = (0..assign.len()).filter(|&k| assign[k]).collect();
            if !b.is_empty() {
                out.push((a, b));
            }
            return;
        }
        for side in [false, true] {
            assign[i] = side;
            go(i + 1, assign, out);
        }
    }
    // node 0 is pinned to the first block
    go(1, &mut assign, &mut out);
    out
}

/// Sorted blocks, sorted by first element, for comparing partitions.
pub fn normalize(blocks: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut v: Vec<Vec<usize>> = blocks
        .iter()
        .map(|b| {
            let mut b = b.clone();
            b.sort_unstable();
            b
        })
        .collect();
    v.sort();
    v
}

pub struct OracleMib {
    pub blocks: Vec<Vec<usize>>,
    pub phi: f64,
    pub score: f64,
    /// Gap between the best and second-best normalised score.
    pub margin: f64,
}

/// Minimum of `ei / min(H(past of A), H(past of B))` over all bipartitions with a positive
/// normaliser.
pub fn brute_force_mib(states: &StateMatrix, tau: usize) -> Option<OracleMib> {
    let n = states.nodes();
    let all: Vec<usize> = (0..n).collect();
    let whole = lag_mutual_information(states, &all, tau);
    let mut scored: Vec<(f64, f64, Vec<Vec<usize>>)> = Vec::new();
    for (a, b) in all_bipartitions(n) {
        let (hpa, hqa, hja) = lag_entropies(states, &a, tau);
        let (hpb, hqb, hjb) = lag_entropies(states, &b, tau);
        let k = hpa.min(hpb);
        if k <= 1e-12 {
            continue;
        }
        let ei = whole - (hpa + hqa - hja) - (hpb + hqb - hjb);
        scored.push((ei / k, ei, vec![a, b]));
    }
    scored.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (score, phi, blocks) = scored.first()?.clone();
    let margin = scored.get(1).map_or(f64::INFINITY, |s| s.0 - score);
    Some(OracleMib { blocks: normalize(&blocks), phi, score, margin })
}

/// Tau-b from explicit enumeration of all pairs.
pub fn kendall_pairs(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tx += 1;
            }
            if dy == 0.0 {
                ty += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                if (dx > 0.0) == (dy > 0.0) {
                    conc += 1;
                } else {
                    disc += 1;
                }
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as u64;
    let (d1, d2) = (pairs - tx, pairs - ty);
    (conc - disc) as f64 / ((d1 as f64) * (d2 as f64)).sqrt()
}

/// Normal-approximation rank-sum z of `b` against `a`, ranks counted pairwise.
pub fn rank_sum_z(a: &[f64], b: &[f64]) -> f64 {
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = all.len() as f64;
    let rank = |v: f64| {
        let less = all.iter().filter(|&&w| w < v).count() as f64;
        let equal = all.iter().filter(|&&w| w == v).count() as f64;
        less + (equal + 1.0) / 2.0
    };
    let w: f64 = b.iter().map(|&v| rank(v)).sum();
    let mut tie_sum = 0.0;
    let mut seen: Vec<f64> = Vec::new();
    for &v in &all {
        if !seen.contains(&v) {
            seen.push(v);
            let t = all.iter().filter(|&&w| w == v).count() as f64;
            tie_sum += t * t * t - t;
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let var = na * nb / 12.0 * (n + 1.0 - tie_sum / (n * (n - 1.0)));
    if var <= 0.0 {
        return 0.0;
    }
    (w - nb * (n + 1.0) / 2.0) / var.sqrt()
}

/// Solves `(XᵀX) β = Xᵀy` by Gauss-Jordan elimination with partial pivoting.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * yi;
        }
    }
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        let d = a[c][c];
        for v in a[c].iter_mut() {
            *v /= d;
        }
        for r in 0..p {
            if r != c {
                let f = a[r][c];
                let pivot_row = a[c].clone();
                for (v, pv) in a[r].iter_mut().zip(pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    a.iter().map(|r| r[p]).collect()
}

/// Stationary covariance of `x_t = A x_{t-1} + e`, `e ~ N(0, I)`, by fixed-point iteration.
pub fn lyapunov(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut s = vec![vec![0.0; n]; n];
    for _ in 0..5_000 {
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = if i == j { 1.0 } else { 0.0 };
                for k in 0..n {
                    for l in 0..n {
                        acc += a[i][k] * s[k][l] * a[j][l];
                    }
                }
                next[i][j] = acc;
            }
        }
        s = next;
    }
    s
}

pub fn det(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        n => (0..n)
            .map(|c| {
                let minor: Vec<Vec<f64>> =
                    m[1..].iter().map(|r| r.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, v)| *v).collect()).collect();
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][c] * det(&minor)
            })
            .sum(),
    }
}

/// Closed-form atomic auto-regressive phi in bits for a stable linear-Gaussian system with unit
/// noise: the whole system's residual is the identity, and each single node is regressed on its
/// own past only.
pub fn gaussian_atomic_phi(a: &[Vec<f64>]) -> f64 {
    let s = lyapunov(a);
    let n = a.len();
    let mut nats = 0.5 * det(&s).ln();
    for k in 0..n {
        // cov(x_k(t-1), x_k(t)) = (S Aᵀ)_kk
        let c: f64 = (0..n).map(|l| s[k][l] * a[k][l]).sum();
        let resid = s[k][k] - c * c / s[k][k];
        nats -= 0.5 * (s[k][k] / resid).ln();
    }
    nats / std::f64::consts::LN_2
}
