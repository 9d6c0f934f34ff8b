//! Phi estimators, validity checking, stability correction and subsample averaging.

pub mod autoregressive;
pub mod empirical;

pub use autoregressive::{
    ar_minimum_bipartition, lagged_covariances, phi_atomic, phi_autoregressive,
    phi_autoregressive_from_covariance, residual_covariance, LaggedCovariance, ResidualCovariance,
};
pub use empirical::{
    effective_information, minimum_information_bipartition, minimum_information_bipartition_capped,
    DEFAULT_NODE_CAP,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{PhiMethod, PhiResult, StateMatrix};

/// Lower slack on the valid range, absorbing round-off at exactly zero.
pub const VALIDITY_EPSILON: f64 = 1e-9;

/// Fraction of the current node count dropped per stability-correction round.
pub const DROP_FRACTION: f64 = 0.05;

/// A phi value is valid when finite and inside `[0, n_nodes]` (with [`VALIDITY_EPSILON`] below 0).
pub fn validate_phi(value: f64, n_nodes: usize) -> bool {
    value.is_finite() && value >= -VALIDITY_EPSILON && value <= n_nodes as f64
}

/// One uncorrected phi computation with the given method.
pub fn compute_phi(states: &StateMatrix, tau: usize, method: PhiMethod) -> Result<PhiResult> {
    match method {
        PhiMethod::Empirical => minimum_information_bipartition(states, tau).map(|(_, r)| r),
        PhiMethod::Autoregressive => ar_minimum_bipartition(states, tau).map(|(_, r)| r),
        PhiMethod::Atomic => phi_atomic(states, tau),
    }
}

/// Errors that signal numerical trouble and are answered by dropping low-variance nodes.
fn is_numerical(err: &Error) -> bool {
    matches!(err, Error::SingularCovariance | Error::AllBipartitionsDegenerate)
}

/// Computes phi, dropping the 5% least-variable nodes (at least one) and retrying until the
/// value is valid.
///
/// Ties in variance drop the lower node index first. The returned partition refers to node
/// indices of `states`.
pub fn stabilized_phi(states: &StateMatrix, tau: usize, method: PhiMethod) -> Result<PhiResult> {
    if states.nodes() < 2 {
        return Err(Error::ExhaustedNodes);
    }
    let variances: Vec<f64> = (0..states.nodes()).map(|i| states.column_variance(i)).collect();
    let mut keep: Vec<usize> = (0..states.nodes()).collect();
    let mut dropped = Vec::new();
    let mut retries = 0;
    loop {
        if keep.len() < 2 {
            return Err(Error::ExhaustedNodes);
        }
        let attempt = if dropped.is_empty() {
            compute_phi(states, tau, method)
        } else {
            compute_phi(&states.select_nodes(&keep)?, tau, method)
        };
        match attempt {
            Ok(result) if validate_phi(result.value, keep.len()) => {
                return Ok(PhiResult {
                    partition: result.partition.remap(&keep),
                    dropped_nodes: dropped,
                    retries,
                    n_nodes: keep.len(),
                    valid: true,
                    ..result
                });
            }
            Ok(_) => {}
            Err(e) if is_numerical(&e) => {}
            Err(e) => return Err(e),
        }
        let count = ((DROP_FRACTION * keep.len() as f64).floor() as usize).max(1);
        let mut order = keep.clone();
        order.sort_by(|&a, &b| variances[a].total_cmp(&variances[b]).then(a.cmp(&b)));
        let removed = &order[..count.min(order.len())];
        dropped.extend(removed.iter().map(|&i| states.labels()[i].clone()));
        keep.retain(|i| !removed.contains(i));
        retries += 1;
    }
}

/// Mean and standard error of the valid values in a set of results.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiAverage {
    pub mean: f64,
    pub stderr: f64,
    pub n_valid: usize,
}

/// Averages valid results only; invalid ones are excluded from both the mean and `n_valid`.
pub fn averaged_phi(results: &[PhiResult]) -> Result<PhiAverage> {
    let values: Vec<f64> = results
        .iter()
        .filter(|r| r.valid && r.value.is_finite())
        .map(|r| r.value)
        .collect();
    mean_and_stderr(&values).ok_or(Error::NoValidResults)
}

/// Sample mean and standard error (`s / sqrt(n)`, zero for a single value).
pub fn mean_and_stderr(values: &[f64]) -> Option<PhiAverage> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let stderr = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Some(PhiAverage { mean, stderr, n_valid: values.len() })
}
