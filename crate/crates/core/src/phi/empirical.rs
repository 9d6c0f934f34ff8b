//! Empirical phi: lagged mutual information of the whole minus that of the parts, minimised over
//! all bipartitions after normalising by the smaller part's past-state entropy.

use crate::error::{Error, Result};
use crate::info::{check_tau, joint_lag_distribution, mutual_information, PackedStates};
use crate::state::{Partition, PhiMethod, PhiResult, StateMatrix};

/// Largest system for which every bipartition is enumerated.
pub const DEFAULT_NODE_CAP: usize = 16;

/// Normalisations at or below this are treated as zero and the bipartition is skipped.
pub(crate) const DEGENERATE_NORMALIZATION: f64 = 1e-12;

/// Relative tolerance under which two normalised scores count as tied; ties keep the earlier
/// bipartition in enumeration order.
pub(crate) const TIE_TOLERANCE: f64 = 1e-12;

pub(crate) fn check_bipartition(states: &StateMatrix, partition: &Partition) -> Result<()> {
    if !partition.is_bipartition() {
        return Err(Error::InvalidPartition(format!("expected 2 blocks, got {}", partition.blocks().len())));
    }
    if partition.n_nodes() != states.nodes() {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} nodes, matrix has {}",
            partition.n_nodes(),
            states.nodes()
        )));
    }
    Ok(())
}

fn mask_of(block: &[usize]) -> u64 {
    block.iter().fold(0u64, |m, &i| m | 1 << i)
}

/// `I(X_{t-τ}; X_t) - I(M¹_{t-τ}; M¹_t) - I(M²_{t-τ}; M²_t)` for one bipartition, in bits.
///
/// Not clamped: a bipartition other than the minimum one can come out negative.
pub fn effective_information(states: &StateMatrix, tau: usize, bipartition: &Partition) -> Result<f64> {
    check_tau(tau, states.steps())?;
    check_bipartition(states, bipartition)?;
    if states.nodes() <= 32 {
        let packed = PackedStates::new(states)?;
        let whole = (1u64 << states.nodes()) - 1;
        let mut ei = packed.lag_entropies(whole, tau).mutual_information();
        for block in bipartition.blocks() {
            ei -= packed.lag_entropies(mask_of(block), tau).mutual_information();
        }
        Ok(ei)
    } else {
        let all: Vec<usize> = (0..states.nodes()).collect();
        let mut ei = mutual_information(&joint_lag_distribution(states, &all, tau)?);
        for block in bipartition.blocks() {
            ei -= mutual_information(&joint_lag_distribution(states, block, tau)?);
        }
        Ok(ei)
    }
}

/// Tracks the best normalised score seen during a bipartition scan.
#[derive(Default)]
pub(crate) struct MinTracker {
    best: Option<(f64, u64, f64)>,
}

impl MinTracker {
    pub fn offer(&mut self, score: f64, mask: u64, value: f64) {
        if !score.is_finite() {
            return;
        }
        match self.best {
            Some((s, _, _)) if score >= s - TIE_TOLERANCE * s.abs().max(1.0) => {}
            _ => self.best = Some((score, mask, value)),
        }
    }

    pub fn finish(self) -> Option<(u64, f64)> {
        self.best.map(|(_, mask, value)| (mask, value))
    }
}

/// Searches all `2^(N-1) - 1` bipartitions with the default node cap.
pub fn minimum_information_bipartition(states: &StateMatrix, tau: usize) -> Result<(Partition, PhiResult)> {
    minimum_information_bipartition_capped(states, tau, DEFAULT_NODE_CAP)
}

/// Enumerates every bipartition, minimising `ei / min(H(M¹_{t-τ}), H(M²_{t-τ}))`.
///
/// Bipartitions are visited by the bitmask of the block that excludes the last node, in
/// increasing order; the returned phi is the unnormalised effective information at the winner.
pub fn minimum_information_bipartition_capped(
    states: &StateMatrix,
    tau: usize,
    cap: usize,
) -> Result<(Partition, PhiResult)> {
    let n = states.nodes();
    if n > cap.min(32) {
        return Err(Error::NodeCapExceeded { nodes: n, cap: cap.min(32) });
    }
    if n < 2 {
        return Err(Error::InvalidPartition("need at least 2 nodes to bipartition".into()));
    }
    check_tau(tau, states.steps())?;
    let packed = PackedStates::new(states)?;
    let full = (1u64 << n) - 1;
    let whole = packed.lag_entropies(full, tau).mutual_information();
    let mut tracker = MinTracker::default();
    for mask in 1..(1u64 << (n - 1)) {
        let first = packed.lag_entropies(mask, tau);
        let second = packed.lag_entropies(full & !mask, tau);
        let norm = first.past.min(second.past);
        if norm <= DEGENERATE_NORMALIZATION {
            continue;
        }
        let ei = whole - first.mutual_information() - second.mutual_information();
        tracker.offer(ei / norm, mask, ei);
    }
    let (mask, value) = tracker.finish().ok_or(Error::AllBipartitionsDegenerate)?;
    let partition = Partition::from_mask(mask, n)?;
    let result = PhiResult::direct(value, PhiMethod::Empirical, partition.clone(), tau);
    Ok((partition, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::make_state_matrix;
    use crate::synth;

    #[test]
    fn copy_pair_has_one_bit() {
        let m = synth::copy_pair(100_000, 0.0, 11);
        let p = Partition::new(vec![vec![0], vec![1]], 2).unwrap();
        let ei = effective_information(&m, 1, &p).unwrap();
        assert!((ei - 1.0).abs() < 0.02, "{ei}");
        let (mib, res) = minimum_information_bipartition(&m, 1).unwrap();
        assert_eq!(mib, p);
        assert!((res.value - ei).abs() < 1e-12);
        assert!(res.valid);
    }

    #[test]
    fn independent_coins_have_none() {
        let m = synth::independent_coins(50_000, 2, 0.5, 3);
        let p = Partition::new(vec![vec![0], vec![1]], 2).unwrap();
        assert!(effective_information(&m, 1, &p).unwrap().abs() < 0.01);
    }

    #[test]
    fn separating_two_copy_pairs_gives_zero() {
        let m = synth::two_copy_pairs(100_000, 5);
        // pairs are (0,1) and (2,3)
        let sep = Partition::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        assert!(effective_information(&m, 1, &sep).unwrap().abs() < 0.01);
        let (mib, res) = minimum_information_bipartition(&m, 1).unwrap();
        assert_eq!(mib.canonical(), sep);
        assert!(res.value.abs() < 0.01);
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = synth::independent_coins(100, 3, 0.5, 1);
        let atomic = Partition::atomic(3);
        assert!(matches!(effective_information(&m, 1, &atomic), Err(Error::InvalidPartition(_))));
        let p = Partition::new(vec![vec![0], vec![1]], 2).unwrap();
        assert!(matches!(effective_information(&m, 1, &p), Err(Error::InvalidPartition(_))));
        assert!(matches!(effective_information(&m, 100, &Partition::from_mask(1, 3).unwrap()), Err(Error::TauOutOfRange { .. })));
        let big = synth::independent_coins(10, 17, 0.5, 1);
        assert!(matches!(minimum_information_bipartition(&big, 1), Err(Error::NodeCapExceeded { nodes: 17, cap: 16 })));
    }

    #[test]
    fn constant_system_is_degenerate() {
        let m = make_state_matrix(vec![vec![1, 0]; 10], vec!["a", "b"]).unwrap();
        assert!(matches!(minimum_information_bipartition(&m, 1), Err(Error::AllBipartitionsDegenerate)));
    }
}
