mod common;

use groupphi::phi::{
    compute_phi, effective_information, lagged_covariances, minimum_information_bipartition, phi_atomic,
    phi_autoregressive_from_covariance, residual_covariance, stabilized_phi, LaggedCovariance,
};
use groupphi::{synth, Partition, PhiMethod, StateMatrix};

fn interleave(a: &StateMatrix, b: &StateMatrix) -> StateMatrix {
    let rows: Vec<Vec<u8>> = a.rows().zip(b.rows()).map(|(x, y)| x.iter().chain(y).copied().collect()).collect();
    let labels: Vec<String> = (0..a.nodes() + b.nodes()).map(|i| format!("n{i}")).collect();
    StateMatrix::new(rows, labels).unwrap()
}

#[test]
fn independent_halves_have_no_integration() {
    let left = synth::coupled_binary(2, 100_000, 0.8, 5);
    let right = synth::coupled_binary(3, 100_000, 0.8, 6);
    let m = interleave(&left, &right);
    let split = Partition::new(vec![vec![0, 1], vec![2, 3, 4]], 5).unwrap();
    let ei = effective_information(&m, 1, &split).unwrap();
    assert!(ei.abs() <= 0.05, "{ei}");
}

#[test]
fn mib_matches_brute_force() {
    for seed in 0..12 {
        let n = 3 + (seed as usize % 6);
        let m = synth::coupled_binary(n, 5_000, 0.3 + 0.05 * seed as f64, 100 + seed);
        let oracle = common::brute_force_mib(&m, 1).unwrap();
        let (mib, result) = minimum_information_bipartition(&m, 1).unwrap();
        assert!(oracle.margin > 1e-9, "seed {seed}: oracle winner is not unique");
        assert_eq!(common::normalize(mib.blocks()), oracle.blocks, "seed {seed}");
        assert!((result.value - oracle.phi).abs() < 1e-9, "seed {seed}");
    }
}

#[test]
fn permuting_nodes_permutes_the_mib() {
    let m = synth::coupled_binary(6, 5_000, 0.6, 77);
    let perm = [3, 0, 5, 1, 4, 2];
    let rows: Vec<Vec<u8>> = m.rows().map(|r| perm.iter().map(|&i| r[i]).collect()).collect();
    let labels: Vec<String> = perm.iter().map(|&i| m.labels()[i].clone()).collect();
    let permuted = StateMatrix::new(rows, labels).unwrap();
    let (a, ra) = minimum_information_bipartition(&m, 1).unwrap();
    let (b, rb) = minimum_information_bipartition(&permuted, 1).unwrap();
    assert!((ra.value - rb.value).abs() < 1e-12);
    // new index j holds old node perm[j]
    let back: Vec<Vec<usize>> = b.blocks().iter().map(|blk| blk.iter().map(|&j| perm[j]).collect()).collect();
    assert_eq!(common::normalize(&back), common::normalize(a.blocks()));
}

fn gaussian_phi(a: &[Vec<f64>], steps: usize, seed: u64) -> f64 {
    let flat: Vec<f64> = a.iter().flatten().copied().collect();
    let series = synth::linear_gaussian(&flat, a.len(), steps, seed);
    let cov = LaggedCovariance::from_series(&series, a.len(), 1).unwrap();
    phi_autoregressive_from_covariance(&cov, &Partition::atomic(a.len())).unwrap()
}

#[test]
fn gaussian_systems_match_the_lyapunov_solution() {
    let systems = [
        vec![vec![0.0, 0.9], vec![0.9, 0.0]],
        vec![vec![0.5, 0.3], vec![-0.2, 0.4]],
        vec![vec![0.3, 0.4, 0.0], vec![0.0, 0.2, 0.5], vec![0.4, 0.0, 0.1]],
    ];
    for (k, a) in systems.iter().enumerate() {
        let exact = common::gaussian_atomic_phi(a);
        let est = gaussian_phi(a, 300_000, 9 + k as u64);
        assert!((est - exact).abs() < 0.05, "system {k}: {est} vs {exact}");
    }
    let crossed = common::gaussian_atomic_phi(&systems[0]);
    assert!((crossed - (1.0f64 / 0.19).ln() / 2f64.ln()).abs() < 1e-9);
}

#[test]
fn residual_determinant_never_exceeds_total() {
    for seed in 0..20 {
        let m = synth::coupled_binary(5, 2_000, 0.7, seed);
        let all: Vec<usize> = (0..5).collect();
        for tau in [1, 2, 5] {
            let cov = lagged_covariances(&m, &all, tau).unwrap();
            let res = residual_covariance(&cov).unwrap();
            let (d, de) = (cov.sigma.determinant(), res.sigma_e.determinant());
            assert!(de <= d * (1.0 + 1e-9), "seed {seed} tau {tau}: {de} > {d}");
        }
    }
}

#[test]
fn correction_retries_are_bounded() {
    for seed in 0..10 {
        let n = 6 + seed as usize;
        let mut rows: Vec<Vec<u8>> = synth::coupled_binary(n, 400, 0.9, seed).rows().map(<[u8]>::to_vec).collect();
        // make a third of the columns constant
        for r in rows.iter_mut() {
            for c in (0..n).step_by(3) {
                r[c] = 0;
            }
        }
        let labels: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
        let m = StateMatrix::new(rows, labels).unwrap();
        let bound = ((n as f64).ln() / (1.0f64 / 0.95).ln()).ceil() as usize + n;
        for method in [PhiMethod::Atomic, PhiMethod::Autoregressive, PhiMethod::Empirical] {
            match stabilized_phi(&m, 1, method) {
                Ok(r) => {
                    assert!(r.retries <= bound);
                    assert!(r.valid);
                }
                Err(e) => assert_eq!(e.kind(), "ExhaustedNodes"),
            }
        }
    }
}

#[test]
fn atomic_phi_dispatch_agrees() {
    let m = synth::coupled_binary(4, 3_000, 0.5, 3);
    assert_eq!(compute_phi(&m, 1, PhiMethod::Atomic).unwrap(), phi_atomic(&m, 1).unwrap());
}
