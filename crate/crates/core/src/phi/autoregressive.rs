//! Auto-regressive phi: the linear-Gaussian estimator built from covariance determinants of the
//! states and of the residuals of regressing the present on the past.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::info::{check_tau, PackedStates};
use crate::phi::empirical::{MinTracker, DEGENERATE_NORMALIZATION, DEFAULT_NODE_CAP};
use crate::state::{Partition, PhiMethod, PhiResult, StateMatrix};

/// Ridge added to the past covariance before inversion, relative to its mean diagonal.
const RIDGE: f64 = 1e-10;

/// Smallest Cholesky pivot (squared, relative to the mean diagonal) accepted as non-singular.
const SINGULAR_PIVOT: f64 = 1e-12;

/// Covariance of the mean-centred states and their lag-`tau` cross-covariance.
///
/// One covariance serves both the past and the present (stationarity). `sigma_lag[i][j]` is the
/// covariance of node `i` at `t - tau` with node `j` at `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaggedCovariance {
    pub sigma: DMatrix<f64>,
    pub sigma_lag: DMatrix<f64>,
    pub tau: usize,
}

/// Covariance of the residuals of the least-squares prediction of the present from the past.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualCovariance {
    pub sigma_e: DMatrix<f64>,
}

impl LaggedCovariance {
    /// Covariances of a real-valued series given as `steps` rows of `width` values.
    pub fn from_series(data: &[f64], width: usize, tau: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::EmptySubset);
        }
        if !data.len().is_multiple_of(width) {
            return Err(Error::RaggedRows { row: data.len() / width, expected: width, found: data.len() % width });
        }
        let steps = data.len() / width;
        check_tau(tau, steps)?;
        let mut x = DMatrix::from_row_slice(steps, width, data);
        for mut col in x.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        let sigma = (x.transpose() * &x) / steps as f64;
        let past = x.rows(0, steps - tau);
        let present = x.rows(tau, steps - tau);
        let sigma_lag = (past.transpose() * present) / (steps - tau) as f64;
        Ok(LaggedCovariance { sigma: symmetrize(sigma), sigma_lag, tau })
    }

    pub fn width(&self) -> usize {
        self.sigma.nrows()
    }

    /// The same quantities for a sub-block of nodes.
    pub fn restrict(&self, block: &[usize]) -> LaggedCovariance {
        LaggedCovariance {
            sigma: self.sigma.select_rows(block).select_columns(block),
            sigma_lag: self.sigma_lag.select_rows(block).select_columns(block),
            tau: self.tau,
        }
    }
}

/// Covariances of the `subset` columns of a binary state matrix.
pub fn lagged_covariances(states: &StateMatrix, subset: &[usize], tau: usize) -> Result<LaggedCovariance> {
    check_tau(tau, states.steps())?;
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= states.nodes()) {
        return Err(Error::InvalidPartition(format!("node {bad} out of range")));
    }
    let mut data = Vec::with_capacity(states.steps() * subset.len());
    for row in states.rows() {
        data.extend(subset.iter().map(|&i| f64::from(row[i])));
    }
    LaggedCovariance::from_series(&data, subset.len(), tau)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn mean_diagonal(m: &DMatrix<f64>) -> f64 {
    m.trace() / m.nrows().max(1) as f64
}

/// `sigma - sigma_lagᵀ (sigma + ridge)⁻¹ sigma_lag`, the partial covariance of the present
/// given the past.
pub fn residual_covariance(cov: &LaggedCovariance) -> Result<ResidualCovariance> {
    let n = cov.width();
    let scale = mean_diagonal(&cov.sigma);
    if !(scale > 0.0) {
        return Err(Error::SingularCovariance);
    }
    let regularized = &cov.sigma + DMatrix::identity(n, n) * (RIDGE * scale);
    let chol = regularized.cholesky().ok_or(Error::SingularCovariance)?;
    let solved = chol.solve(&cov.sigma_lag);
    let sigma_e = &cov.sigma - cov.sigma_lag.transpose() * solved;
    Ok(ResidualCovariance { sigma_e: symmetrize(sigma_e) })
}

/// Natural log-determinant of a symmetric positive definite matrix.
///
/// `reference` sets the scale against which tiny pivots count as singular.
fn log_det(m: &DMatrix<f64>, reference: f64) -> Result<f64> {
    if !(reference > 0.0) {
        return Err(Error::SingularCovariance);
    }
    let chol = m.clone().cholesky().ok_or(Error::SingularCovariance)?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        let d = l[(i, i)];
        if !(d * d > SINGULAR_PIVOT * reference) {
            return Err(Error::SingularCovariance);
        }
        acc += d.ln();
    }
    Ok(2.0 * acc)
}

/// `½ ln(det Σ / det Σ_E)` in nats for one block.
fn block_information(cov: &LaggedCovariance) -> Result<f64> {
    let scale = mean_diagonal(&cov.sigma);
    let residual = residual_covariance(cov)?;
    let ld_sigma = log_det(&cov.sigma, scale)?;
    let ld_resid = log_det(&residual.sigma_e, scale)?;
    Ok(0.5 * (ld_sigma - ld_resid))
}

/// Auto-regressive phi in bits for an arbitrary partition of the covariance's nodes.
///
/// Each block is regressed only on its own past.
pub fn phi_autoregressive_from_covariance(cov: &LaggedCovariance, partition: &Partition) -> Result<f64> {
    if partition.n_nodes() != cov.width() {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} nodes, covariance has {}",
            partition.n_nodes(),
            cov.width()
        )));
    }
    let mut nats = block_information(cov)?;
    for block in partition.blocks() {
        nats -= block_information(&cov.restrict(block))?;
    }
    Ok(nats / std::f64::consts::LN_2)
}

/// Auto-regressive phi of a state matrix at a given partition. Validity is reported, not enforced.
pub fn phi_autoregressive(states: &StateMatrix, tau: usize, partition: &Partition) -> Result<PhiResult> {
    if partition.n_nodes() != states.nodes() {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} nodes, matrix has {}",
            partition.n_nodes(),
            states.nodes()
        )));
    }
    let all: Vec<usize> = (0..states.nodes()).collect();
    let cov = lagged_covariances(states, &all, tau)?;
    let value = phi_autoregressive_from_covariance(&cov, partition)?;
    let method = if partition.is_atomic() && !partition.is_bipartition() {
        PhiMethod::Atomic
    } else {
        PhiMethod::Autoregressive
    };
    Ok(PhiResult::direct(value, method, partition.clone(), tau))
}

/// Auto-regressive phi over the atomic partition (every node its own part).
pub fn phi_atomic(states: &StateMatrix, tau: usize) -> Result<PhiResult> {
    if states.nodes() < 2 {
        return Err(Error::InvalidPartition("atomic phi needs at least 2 nodes".into()));
    }
    let mut result = phi_autoregressive(states, tau, &Partition::atomic(states.nodes()))?;
    result.method = PhiMethod::Atomic;
    Ok(result)
}

/// Auto-regressive phi at the bipartition minimising `phi_AR / min(H(M¹_{t-τ}), H(M²_{t-τ}))`,
/// with the same discrete past-state entropy normalisation and enumeration order as the
/// empirical search.
pub fn ar_minimum_bipartition(states: &StateMatrix, tau: usize) -> Result<(Partition, PhiResult)> {
    let n = states.nodes();
    if n > DEFAULT_NODE_CAP {
        return Err(Error::NodeCapExceeded { nodes: n, cap: DEFAULT_NODE_CAP });
    }
    if n < 2 {
        return Err(Error::InvalidPartition("need at least 2 nodes to bipartition".into()));
    }
    let all: Vec<usize> = (0..n).collect();
    let cov = lagged_covariances(states, &all, tau)?;
    let whole = block_information(&cov)?;
    let packed = PackedStates::new(states)?;
    let full = (1u64 << n) - 1;
    let mut tracker = MinTracker::default();
    for mask in 1..(1u64 << (n - 1)) {
        let partition = Partition::from_mask(mask, n)?;
        let [first, second] = [&partition.blocks()[0], &partition.blocks()[1]];
        let norm = packed
            .lag_entropies(mask, tau)
            .past
            .min(packed.lag_entropies(full & !mask, tau).past);
        if norm <= DEGENERATE_NORMALIZATION {
            continue;
        }
        let nats = whole - block_information(&cov.restrict(first))? - block_information(&cov.restrict(second))?;
        let bits = nats / std::f64::consts::LN_2;
        tracker.offer(bits / norm, mask, bits);
    }
    let (mask, value) = tracker.finish().ok_or(Error::AllBipartitionsDegenerate)?;
    let partition = Partition::from_mask(mask, n)?;
    let result = PhiResult::direct(value, PhiMethod::Autoregressive, partition.clone(), tau);
    Ok((partition, result))
}
