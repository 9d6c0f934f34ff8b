//! Plug-in entropy, conditional entropy and mutual information over lagged state pairs.
//!
//! All quantities are in bits. States of a node subset are packed into a `u64` key whose bit `j`
//! holds the state of the subset's `j`-th node, so subsets are limited to 64 nodes.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::state::StateMatrix;

const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Empirical joint distribution of (state at `t - tau`, state at `t`) for a node subset.
#[derive(Clone, Debug, PartialEq)]
pub struct JointLagDistribution {
    subset: Vec<usize>,
    tau: usize,
    table: BTreeMap<(u64, u64), f64>,
    sample_count: usize,
}

/// Which side of a lagged pair is conditioned on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `H(past | present)`.
    PastGivenPresent,
    /// `H(present | past)`.
    PresentGivenPast,
}

impl JointLagDistribution {
    /// A distribution given directly as probabilities over `width`-node state keys.
    pub fn from_probabilities(
        width: usize,
        tau: usize,
        table: BTreeMap<(u64, u64), f64>,
        sample_count: usize,
    ) -> Result<Self> {
        if width == 0 {
            return Err(Error::EmptySubset);
        }
        if width > 64 {
            return Err(Error::SubsetTooLarge(width));
        }
        let limit = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        if table.keys().any(|&(a, b)| a > limit || b > limit) {
            return Err(Error::InvalidPartition(format!("state key wider than {width} nodes")));
        }
        if table.values().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::UnnormalizedDistribution(f64::NAN));
        }
        let total: f64 = table.values().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::UnnormalizedDistribution(total));
        }
        if sample_count == 0 {
            return Err(Error::TooFewObservations { needed: 1, got: 0 });
        }
        Ok(JointLagDistribution { subset: (0..width).collect(), tau, table, sample_count })
    }

    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn table(&self) -> &BTreeMap<(u64, u64), f64> {
        &self.table
    }

    pub fn probability(&self, past: u64, present: u64) -> f64 {
        self.table.get(&(past, present)).copied().unwrap_or(0.0)
    }

    pub fn past_marginal(&self) -> BTreeMap<u64, f64> {
        let mut out = BTreeMap::new();
        for (&(past, _), &p) in &self.table {
            *out.entry(past).or_insert(0.0) += p;
        }
        out
    }

    pub fn present_marginal(&self) -> BTreeMap<u64, f64> {
        let mut out = BTreeMap::new();
        for (&(_, present), &p) in &self.table {
            *out.entry(present).or_insert(0.0) += p;
        }
        out
    }

    fn joint_entropy(&self) -> f64 {
        plugin_entropy(self.table.values().copied())
    }
}

/// Counts the `T - tau` overlapping (row `t - tau`, row `t`) pairs restricted to `subset`.
pub fn joint_lag_distribution(
    states: &StateMatrix,
    subset: &[usize],
    tau: usize,
) -> Result<JointLagDistribution> {
    check_tau(tau, states.steps())?;
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    if subset.len() > 64 {
        return Err(Error::SubsetTooLarge(subset.len()));
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= states.nodes()) {
        return Err(Error::InvalidPartition(format!("node {bad} out of range")));
    }
    let key = |t: usize| {
        let row = states.row(t);
        subset
            .iter()
            .enumerate()
            .fold(0u64, |acc, (j, &i)| acc | (u64::from(row[i]) << j))
    };
    let pairs = states.steps() - tau;
    let mut counts: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    for t in tau..states.steps() {
        *counts.entry((key(t - tau), key(t))).or_insert(0) += 1;
    }
    let table = counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / pairs as f64))
        .collect();
    Ok(JointLagDistribution { subset: subset.to_vec(), tau, table, sample_count: pairs })
}

/// Shannon entropy `-Σ p log2 p` of a probability table, with `0 log 0 = 0`.
pub fn entropy<I: IntoIterator<Item = f64>>(probabilities: I) -> Result<f64> {
    let probs: Vec<f64> = probabilities.into_iter().collect();
    if probs.iter().any(|p| *p < 0.0 || !p.is_finite()) {
        return Err(Error::UnnormalizedDistribution(f64::NAN));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::UnnormalizedDistribution(total));
    }
    Ok(plugin_entropy(probs))
}

fn plugin_entropy<I: IntoIterator<Item = f64>>(probabilities: I) -> f64 {
    let h: f64 = probabilities
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum();
    h.max(0.0)
}

/// `H(A | B) = H(A, B) - H(B)`.
pub fn conditional_entropy(joint: &JointLagDistribution, direction: Direction) -> f64 {
    let given = match direction {
        Direction::PastGivenPresent => joint.present_marginal(),
        Direction::PresentGivenPast => joint.past_marginal(),
    };
    (joint.joint_entropy() - plugin_entropy(given.into_values())).max(0.0)
}

/// `I(past; present) = H(past) + H(present) - H(past, present)`.
pub fn mutual_information(joint: &JointLagDistribution) -> f64 {
    let h_past = plugin_entropy(joint.past_marginal().into_values());
    let h_present = plugin_entropy(joint.present_marginal().into_values());
    (h_past + h_present - joint.joint_entropy()).max(0.0)
}

pub(crate) fn check_tau(tau: usize, steps: usize) -> Result<()> {
    if tau == 0 || tau >= steps {
        Err(Error::TauOutOfRange { tau, steps })
    } else {
        Ok(())
    }
}

/// Entropy in bits of the empirical distribution of `keys` (sorted in place).
fn sorted_key_entropy(keys: &mut [u64]) -> f64 {
    keys.sort_unstable();
    let n = keys.len() as f64;
    let mut acc = 0.0;
    let mut run = 1usize;
    for i in 1..=keys.len() {
        if i < keys.len() && keys[i] == keys[i - 1] {
            run += 1;
        } else {
            let c = run as f64;
            acc += c * c.log2();
            run = 1;
        }
    }
    (n.log2() - acc / n).max(0.0)
}

/// Lagged entropies of a node subset: `H(past)`, `H(present)`, `H(past, present)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LagEntropies {
    pub past: f64,
    pub present: f64,
    pub joint: f64,
}

impl LagEntropies {
    pub fn mutual_information(&self) -> f64 {
        self.past + self.present - self.joint
    }
}

/// Precomputed row codes for repeated subset queries on matrices of at most 32 nodes.
///
/// Subset states are taken as `code & mask` without compacting the bits; entropies only depend
/// on the multiset of counts so the result equals that of the compacted keys.
pub(crate) struct PackedStates {
    codes: Vec<u64>,
    scratch: std::cell::RefCell<Vec<u64>>,
}

impl PackedStates {
    pub fn new(states: &StateMatrix) -> Result<Self> {
        if states.nodes() > 32 {
            return Err(Error::SubsetTooLarge(states.nodes()));
        }
        Ok(PackedStates { codes: states.row_codes()?, scratch: Default::default() })
    }

    pub fn lag_entropies(&self, mask: u64, tau: usize) -> LagEntropies {
        let steps = self.codes.len();
        let mut buf = self.scratch.borrow_mut();
        buf.clear();
        buf.extend(self.codes[..steps - tau].iter().map(|c| c & mask));
        let past = sorted_key_entropy(&mut buf);
        buf.clear();
        buf.extend(self.codes[tau..].iter().map(|c| c & mask));
        let present = sorted_key_entropy(&mut buf);
        buf.clear();
        buf.extend(
            self.codes[..steps - tau]
                .iter()
                .zip(&self.codes[tau..])
                .map(|(p, q)| (p & mask) << 32 | (q & mask)),
        );
        let joint = sorted_key_entropy(&mut buf);
        LagEntropies { past, present, joint }
    }
}
