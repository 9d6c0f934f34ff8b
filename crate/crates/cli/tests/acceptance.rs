//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use groupphi::phi::{compute_phi, minimum_information_bipartition, phi_atomic, stabilized_phi};
use groupphi::phi::{phi_autoregressive_from_covariance, LaggedCovariance};
use groupphi::sampling::{build_packet_graph, replicate_samples, PacketRecord, SampleConfig, SampleMethod};
use groupphi::stats::{hardware_adjust, kendall_tau, ols_fit, wilcoxon_z, DesignMatrix};
use groupphi::sweep::{default_tau_grid, sweep_step_size, sweep_time_delay, DEFAULT_DELTA_GRID_MS};
use groupphi::synth::{self, TrafficParams};
use groupphi::{Partition, PhiMethod, StateMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c1_zero_integration() -> Outcome {
    let m = synth::independent_coins(100_000, 4, 0.5, 1);
    let (_, e) = minimum_information_bipartition(&m, 1).unwrap();
    let a = phi_atomic(&m, 1).unwrap();
    outcome(
        e.value.abs() <= 0.05 && a.value.abs() <= 0.05,
        format!("phi_E = {:.5}, atomic phi_AR = {:.5}", e.value, a.value),
    )
}

fn c2_copy_pair() -> Outcome {
    let m = synth::copy_pair(100_000, 0.0, 2);
    let (_, e) = minimum_information_bipartition(&m, 1).unwrap();
    outcome((e.value - 1.0).abs() <= 0.02, format!("phi_E = {:.5}", e.value))
}

fn c3_mib_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = Vec::new();
    let mut worst = 0.0f64;
    for k in 0..50 {
        let n = rng.random_range(2..=10);
        let coupling = rng.random_range(0.2..0.95);
        let m = synth::coupled_binary(n, 5_000, coupling, 1_000 + k);
        let oracle = common::brute_force_mib(&m, 1).expect("some bipartition has positive entropy");
        let (mib, r) = minimum_information_bipartition(&m, 1).unwrap();
        let diff = (r.value - oracle.phi).abs();
        worst = worst.max(diff);
        if common::normalize(mib.blocks()) != oracle.blocks || diff > 1e-9 {
            mismatches.push(k);
        }
    }
    outcome(mismatches.is_empty(), format!("mismatched systems {mismatches:?}, max |dphi| = {worst:.2e}"))
}

fn c4_gaussian() -> Outcome {
    let a = [0.0, 0.9, 0.9, 0.0];
    let series = synth::linear_gaussian(&a, 2, 1_000_000, 4);
    let cov = LaggedCovariance::from_series(&series, 2, 1).unwrap();
    let phi = phi_autoregressive_from_covariance(&cov, &Partition::atomic(2)).unwrap();
    let exact = (1.0f64 / 0.19).ln() / 2f64.ln();
    outcome((phi - exact).abs() <= 0.05, format!("phi_AR = {phi:.4}, closed form {exact:.4}"))
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

fn c5_atomic_vs_mib() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut atomic, mut mib) = (Vec::new(), Vec::new());
    for k in 0..200 {
        let n = rng.random_range(2..=10);
        let coupling = rng.random_range(0.0..0.95);
        let m = synth::mean_field_binary(n, 2_000, coupling, 5_000 + k);
        let a = compute_phi(&m, 1, PhiMethod::Atomic);
        let b = compute_phi(&m, 1, PhiMethod::Autoregressive);
        if let (Ok(a), Ok(b)) = (a, b) {
            atomic.push(a.value);
            mib.push(b.value);
        }
    }
    let r = pearson(&atomic, &mib);
    outcome(atomic.len() >= 190 && r >= 0.7, format!("r = {r:.4} over {} systems", atomic.len()))
}

fn c6_stability() -> Outcome {
    let base = synth::coupled_binary(20, 5_000, 0.6, 6);
    let constant = [2usize, 9, 15];
    let rows: Vec<Vec<u8>> = base
        .rows()
        .map(|r| r.iter().enumerate().map(|(i, &v)| if constant.contains(&i) { 0 } else { v }).collect())
        .collect();
    let m = StateMatrix::new(rows, base.labels().to_vec()).unwrap();
    match stabilized_phi(&m, 1, PhiMethod::Atomic) {
        Ok(r) => {
            let dropped: BTreeSet<&str> = r.dropped_nodes.iter().map(String::as_str).collect();
            let covered = constant.iter().all(|&c| dropped.contains(m.labels()[c].as_str()));
            outcome(
                r.valid && covered && r.retries <= 10,
                format!("phi = {:.4}, valid {}, retries {}, dropped {:?}", r.value, r.valid, r.retries, r.dropped_nodes),
            )
        }
        Err(e) => outcome(false, format!("error {e}")),
    }
}

fn c7a_tau_sweep() -> Outcome {
    let m = synth::delayed_response_group(5_000, 3, 10, 0.1, 7);
    let sweep = sweep_time_delay(&m, &default_tau_grid(), PhiMethod::Empirical).unwrap();
    outcome(sweep.argmax == 10.0, format!("argmax tau = {}", sweep.argmax))
}

fn c7b_delta_sweep() -> Outcome {
    let packets = synth::request_response_traffic(&TrafficParams { seed: 8, ..Default::default() });
    let cfg = SampleConfig::new(SampleMethod::RandomWalk, 20, 8);
    let sweep = sweep_step_size(&packets, &cfg, &DEFAULT_DELTA_GRID_MS, 20).unwrap();
    let profile: Vec<String> =
        sweep.parameter_values.iter().zip(&sweep.mean_phi).map(|(d, p)| format!("{d}:{p:.3}")).collect();
    outcome(sweep.argmax == 100.0, format!("argmax delta = {} ms [{}]", sweep.argmax, profile.join(" ")))
}

fn random_graph_packets(nodes: usize, out_degree: usize, seed: u64) -> Vec<PacketRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut packets = Vec::with_capacity(nodes * out_degree);
    for i in 0..nodes {
        for _ in 0..out_degree {
            let mut j = rng.random_range(0..nodes);
            if j == i {
                j = (j + 1) % nodes;
            }
            packets.push(PacketRecord {
                timestamp_us: rng.random_range(0..60_000_000),
                src: format!("h{i}"),
                dst: format!("h{j}"),
            });
        }
    }
    packets.sort_by_key(|p| p.timestamp_us);
    packets
}

fn c8_sampling() -> Outcome {
    let graph = build_packet_graph(&random_graph_packets(10_000, 3, 9));
    let mut failures = Vec::new();
    for method in SampleMethod::ALL {
        let cfg = SampleConfig::new(method, 100, 9);
        let first = replicate_samples(&graph, &cfg, 100).unwrap();
        let again = replicate_samples(&graph, &cfg, 100).unwrap();
        let sizes_ok = first.iter().all(|s| s.len() == 100 && s.iter().collect::<BTreeSet<_>>().len() == 100);
        let distinct = first.iter().collect::<BTreeSet<_>>().len();
        if !sizes_ok || first != again || distinct < 2 {
            failures.push(method.as_str());
        }
    }
    outcome(failures.is_empty(), format!("{} nodes, failing methods {failures:?}", graph.len()))
}

fn c9_hardware() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let origin = NaiveDate::from_ymd_opt(2008, 1, 1).unwrap();
    let break_date = NaiveDate::from_ymd_opt(2011, 7, 1).unwrap();
    let (mut dates, mut phis) = (Vec::new(), Vec::new());
    for week in 0..7 * 52 {
        let d = origin + chrono::Duration::days(7 * week);
        let years = (d - origin).num_days() as f64 / 365.25;
        let step = if d >= break_date { -3.0 } else { 0.0 };
        let noise: f64 = StandardNormal.sample(&mut rng);
        dates.push(d);
        phis.push(10.0 + 1.7 * years + step + 0.25 * noise);
    }
    let adj = hardware_adjust(&dates, &phis, break_date).unwrap();
    outcome(
        (adj.adjustment - 3.0).abs() <= 0.1 && (adj.slope_per_year - 1.7).abs() <= 0.05,
        format!("adjustment = {:.4}, slope = {:.4}/yr", adj.adjustment, adj.slope_per_year),
    )
}

fn tied(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let levels = rng.random_range(2..8);
    (0..n).map(|_| rng.random_range(0..levels) as f64).collect()
}

fn c10_statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut kendall_bad, mut wilcoxon_worst, mut ortho_worst) = (0, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(3..60);
        let x = tied(&mut rng, n);
        let y = tied(&mut rng, n);
        if let Ok(t) = kendall_tau(&x, &y) {
            if t != common::kendall_pairs(&x, &y) {
                kendall_bad += 1;
            }
        }
        let m = rng.random_range(2..40);
        let b = tied(&mut rng, m);
        if let Ok(z) = wilcoxon_z(&x, &b) {
            let oracle = common::rank_sum_z(&x, &b);
            wilcoxon_worst = wilcoxon_worst.max(if oracle.is_finite() { (z - oracle).abs() } else { f64::INFINITY });
        }
        let cols: Vec<Vec<f64>> =
            (0..3).map(|_| (0..n + 5).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
        let yv: Vec<f64> = (0..n + 5).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut design = DesignMatrix::with_intercept(n + 5);
        for (j, c) in cols.iter().enumerate() {
            design = design.numeric(&format!("v{j}"), c).unwrap();
        }
        let fit = ols_fit(&design, &yv).unwrap();
        let mut worst = fit.residuals.iter().sum::<f64>().abs();
        for c in &cols {
            worst = worst.max(c.iter().zip(&fit.residuals).map(|(a, r)| a * r).sum::<f64>().abs());
        }
        ortho_worst = ortho_worst.max(worst);
    }
    outcome(
        kendall_bad == 0 && wilcoxon_worst <= 1e-9 && ortho_worst <= 1e-8,
        format!("kendall mismatches {kendall_bad}, max |dz| = {wilcoxon_worst:.2e}, max |X'r| = {ortho_worst:.2e}"),
    )
}

fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn c11_determinism() -> Outcome {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let dir = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for run in ["first", "second"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_groupphi"))
            .args(["pipeline", "study3", "--input"])
            .arg(fixtures.join("packets.csv"))
            .arg("--config")
            .arg(fixtures.join("study3.conf"))
            .arg("--output")
            .arg(&out)
            .output()
            .unwrap();
        if !status.status.success() {
            return outcome(false, format!("run failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        trees.push(read_tree(&out));
    }
    let differing: Vec<_> = trees[0].iter().filter(|(k, v)| trees[1].get(*k) != Some(v)).map(|(k, _)| k.clone()).collect();
    let same_files = trees[0].keys().eq(trees[1].keys());
    outcome(
        same_files && differing.is_empty() && !trees[0].is_empty(),
        format!("{} files compared, differing {differing:?}", trees[0].len()),
    )
}

type Criterion = (&'static str, &'static str, Option<Duration>, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("1", "zero integration", Some(Duration::from_secs(5)), c1_zero_integration),
        ("2", "copy system", Some(Duration::from_secs(2)), c2_copy_pair),
        ("3", "MIB oracle equivalence", Some(Duration::from_secs(60)), c3_mib_oracle),
        ("4", "Gaussian closed form", Some(Duration::from_secs(10)), c4_gaussian),
        ("5", "atomic vs bipartition", Some(Duration::from_secs(300)), c5_atomic_vs_mib),
        ("6", "stability correction", None, c6_stability),
        ("7a", "delay recovery (tau)", Some(Duration::from_secs(60)), c7a_tau_sweep),
        ("7b", "delay recovery (delta)", Some(Duration::from_secs(60)), c7b_delta_sweep),
        ("8", "sampling contracts", Some(Duration::from_secs(30)), c8_sampling),
        ("9", "hardware adjustment", Some(Duration::from_secs(1)), c9_hardware),
        ("10", "statistics oracles", None, c10_statistics),
        ("11", "end-to-end determinism", None, c11_determinism),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed < l);
        let pass = result.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget = limit.map_or(String::new(), |l| format!(" / {}s", l.as_secs()));
        let late = if in_time { "" } else { " TOO SLOW" };
        println!(
            "{} criterion {id} {name}: {} ({:.2}s{budget}{late})",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
