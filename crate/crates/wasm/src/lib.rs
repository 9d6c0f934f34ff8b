//! Browser bindings: each export takes plain numbers and returns a JSON string for the page
//! to plot.

use groupphi::phi::{phi_autoregressive_from_covariance, LaggedCovariance};
use groupphi::sampling::{SampleConfig, SampleMethod};
use groupphi::sweep::{sweep_step_size, sweep_time_delay, DEFAULT_DELTA_GRID_MS};
use groupphi::synth::{self, TrafficParams};
use groupphi::{Partition, PhiMethod, SweepResult};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Profile {
    x: Vec<f64>,
    phi: Vec<f64>,
    stderr: Vec<f64>,
    argmax: f64,
}

impl From<SweepResult> for Profile {
    fn from(s: SweepResult) -> Self {
        Profile { x: s.parameter_values, phi: s.mean_phi, stderr: s.stderr_phi, argmax: s.argmax }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serialises")
}

/// Empirical phi against τ = 1..=`max_tau` for a group whose members echo a leader `lag` steps
/// later.
pub fn tau_profile(lag: usize, members: usize, noise: f64, steps: usize, max_tau: usize, seed: u64) -> groupphi::Result<String> {
    let states = synth::delayed_response_group(steps, members.max(2), lag, noise, seed);
    let taus: Vec<usize> = (1..=max_tau).collect();
    let sweep = sweep_time_delay(&states, &taus, PhiMethod::Empirical)?;
    Ok(to_json(&Profile::from(sweep)))
}

/// Mean atomic phi of random-walk subsamples against packet bin width for request/response
/// traffic with a fixed server latency.
pub fn delta_profile(latency_ms: f64, duration_s: f64, goal: usize, replicates: usize, seed: u64) -> groupphi::Result<String> {
    let params = TrafficParams { latency_ms, duration_ms: duration_s * 1_000.0, seed, ..Default::default() };
    let packets = synth::request_response_traffic(&params);
    let cfg = SampleConfig::new(SampleMethod::RandomWalk, goal, seed);
    let sweep = sweep_step_size(&packets, &cfg, &DEFAULT_DELTA_GRID_MS, replicates)?;
    Ok(to_json(&Profile::from(sweep)))
}

#[derive(Serialize)]
struct GaussianPoint {
    coupling: f64,
    estimate: f64,
    exact: f64,
}

/// Atomic Φ_AR of the crossed system `x' = c y + ε, y' = c x + ε`, simulated and in closed form,
/// for each coupling in `0, step, 2 step, ... < 1`.
pub fn gaussian_curve(step: f64, steps: usize, seed: u64) -> groupphi::Result<String> {
    if !(step > 0.0 && step < 1.0) {
        return Err(groupphi::Error::InvalidConfig("step must lie in (0, 1)".into()));
    }
    let mut points = Vec::new();
    for k in 0.. {
        let c = k as f64 * step;
        if c >= 1.0 - 1e-9 {
            break;
        }
        let series = synth::linear_gaussian(&[0.0, c, c, 0.0], 2, steps, seed);
        let cov = LaggedCovariance::from_series(&series, 2, 1)?;
        let estimate = phi_autoregressive_from_covariance(&cov, &Partition::atomic(2))?;
        points.push(GaussianPoint { coupling: c, estimate, exact: -(1.0 - c * c).log2() });
    }
    Ok(to_json(&points))
}

fn js(r: groupphi::Result<String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = tauProfile)]
pub fn tau_profile_js(lag: usize, members: usize, noise: f64, steps: usize, max_tau: usize, seed: u32) -> Result<String, JsError> {
    js(tau_profile(lag, members, noise, steps, max_tau, seed.into()))
}

#[wasm_bindgen(js_name = deltaProfile)]
pub fn delta_profile_js(latency_ms: f64, duration_s: f64, goal: usize, replicates: usize, seed: u32) -> Result<String, JsError> {
    js(delta_profile(latency_ms, duration_s, goal, replicates, seed.into()))
}

#[wasm_bindgen(js_name = gaussianCurve)]
pub fn gaussian_curve_js(step: f64, steps: usize, seed: u32) -> Result<String, JsError> {
    js(gaussian_curve(step, steps, seed.into()))
}
