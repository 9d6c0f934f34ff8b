//! Parameter sweeps over the time delay τ and the packet time step size δ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::SendTimes;
use crate::info::check_tau;
use crate::phi::{averaged_phi, mean_and_stderr, stabilized_phi, PhiAverage};
use crate::sampling::{build_packet_graph, replicate_samples, PacketRecord, SampleConfig};
use crate::state::{PhiMethod, PhiResult, StateMatrix, SweepResult};

/// τ grid used when none is given: 1..=30 steps.
pub fn default_tau_grid() -> Vec<usize> {
    (1..=30).collect()
}

/// δ grid used when none is given, in milliseconds.
pub const DEFAULT_DELTA_GRID_MS: [f64; 8] = [10.0, 25.0, 50.0, 100.0, 150.0, 200.0, 500.0, 1000.0];

/// Stabilised phi of one matrix at every τ in `taus`.
pub fn sweep_time_delay(states: &StateMatrix, taus: &[usize], method: PhiMethod) -> Result<SweepResult> {
    sweep_time_delay_groups(std::slice::from_ref(states), taus, method)
}

/// Stabilised phi of every group at every τ, averaged across groups.
///
/// Groups whose correction fails at some τ are left out of that grid point; a point where
/// every group fails has a NaN mean.
pub fn sweep_time_delay_groups(groups: &[StateMatrix], taus: &[usize], method: PhiMethod) -> Result<SweepResult> {
    if taus.is_empty() {
        return Err(Error::InvalidConfig("empty τ grid".into()));
    }
    for g in groups {
        for &tau in taus {
            check_tau(tau, g.steps())?;
        }
    }
    let mut means = Vec::with_capacity(taus.len());
    let mut stderrs = Vec::with_capacity(taus.len());
    for &tau in taus {
        let mut values = Vec::new();
        for g in groups {
            match stabilized_phi(g, tau, method) {
                Ok(r) => values.push(r.value),
                Err(Error::ExhaustedNodes) => {}
                Err(e) => return Err(e),
            }
        }
        let avg = mean_and_stderr(&values);
        means.push(avg.map_or(f64::NAN, |a| a.mean));
        stderrs.push(avg.map_or(f64::NAN, |a| a.stderr));
    }
    SweepResult::new(taus.iter().map(|&t| t as f64).collect(), means, stderrs)
}

/// Subsample replicates and atomic phi for one packet trace at one step size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSizePoint {
    pub delta_ms: f64,
    pub average: Option<PhiAverage>,
    pub replicates: Vec<Option<PhiResult>>,
}

/// Prepared packet trace: graph, send times and the node samples used for every δ.
pub struct PacketStudy {
    pub send_times: SendTimes,
    pub samples: Vec<Vec<usize>>,
    pub sample_labels: Vec<Vec<String>>,
}

impl PacketStudy {
    pub fn new(packets: &[PacketRecord], sampling: &SampleConfig, replicates: usize) -> Result<Self> {
        if packets.is_empty() {
            return Err(Error::InsufficientNodes { available: 0, goal: sampling.goal });
        }
        let graph = build_packet_graph(packets);
        let samples = replicate_samples(&graph, sampling, replicates)?;
        let sample_labels = samples
            .iter()
            .map(|s| s.iter().map(|&i| graph.id(i).to_string()).collect())
            .collect();
        Ok(PacketStudy { send_times: SendTimes::new(&graph, packets), samples, sample_labels })
    }

    /// Stabilised atomic phi at `tau = 1` for every replicate, averaged over the valid ones.
    pub fn evaluate(&self, delta_ms: f64) -> Result<StepSizePoint> {
        if !(delta_ms > 0.0) {
            return Err(Error::NonPositiveDelta(delta_ms));
        }
        let mut replicates = Vec::with_capacity(self.samples.len());
        for sample in &self.samples {
            let states = self.send_times.encode(sample, delta_ms)?;
            replicates.push(match stabilized_phi(&states, 1, PhiMethod::Atomic) {
                Ok(r) => Some(r),
                Err(Error::ExhaustedNodes) => None,
                Err(e) => return Err(e),
            });
        }
        let valid: Vec<PhiResult> = replicates.iter().flatten().cloned().collect();
        Ok(StepSizePoint { delta_ms, average: averaged_phi(&valid).ok(), replicates })
    }
}

/// Mean stabilised atomic phi (τ = 1) over `replicates` node samples at every δ.
pub fn sweep_step_size(
    packets: &[PacketRecord],
    sampling: &SampleConfig,
    deltas_ms: &[f64],
    replicates: usize,
) -> Result<SweepResult> {
    let study = PacketStudy::new(packets, sampling, replicates)?;
    sweep_prepared(&study, deltas_ms).map(|(s, _)| s)
}

/// Sweep over an already-sampled trace, also returning every per-δ detail.
pub fn sweep_prepared(study: &PacketStudy, deltas_ms: &[f64]) -> Result<(SweepResult, Vec<StepSizePoint>)> {
    if deltas_ms.is_empty() {
        return Err(Error::InvalidConfig("empty δ grid".into()));
    }
    if let Some(&bad) = deltas_ms.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::NonPositiveDelta(bad));
    }
    let points: Vec<StepSizePoint> = deltas_ms.iter().map(|&d| study.evaluate(d)).collect::<Result<_>>()?;
    let sweep = SweepResult::new(
        deltas_ms.to_vec(),
        points.iter().map(|p| p.average.map_or(f64::NAN, |a| a.mean)).collect(),
        points.iter().map(|p| p.average.map_or(f64::NAN, |a| a.stderr)).collect(),
    )?;
    Ok((sweep, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{encode_turns, TurnParams, VolumeTrack};
    use crate::sampling::SampleMethod;
    use crate::state::make_state_matrix;
    use crate::synth;

    #[test]
    fn single_point_grid() {
        let m = synth::copy_pair(2_000, 0.1, 3);
        let s = sweep_time_delay(&m, &[1], PhiMethod::Empirical).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.argmax, 1.0);
    }

    #[test]
    fn constant_matrix_has_no_valid_points() {
        let m = make_state_matrix(vec![vec![1, 0, 0]; 50], vec!["a", "b", "c"]).unwrap();
        assert!(matches!(sweep_time_delay(&m, &[1, 2, 3], PhiMethod::Empirical), Err(Error::NoValidResults)));
    }

    #[test]
    fn tau_outside_matrix_is_rejected() {
        let m = synth::copy_pair(20, 0.0, 3);
        assert!(matches!(sweep_time_delay(&m, &[1, 20], PhiMethod::Empirical), Err(Error::TauOutOfRange { .. })));
    }

    #[test]
    fn scaling_volumes_and_threshold_keeps_the_peak() {
        let group = synth::delayed_response_group(3_000, 2, 4, 0.05, 8);
        let tracks: Vec<VolumeTrack> = (0..2)
            .map(|k| VolumeTrack {
                speaker: group.labels()[k].clone(),
                samples: group.column(k).map(|v| if v == 1 { 3.0 } else { 0.2 }).collect(),
            })
            .collect();
        let taus: Vec<usize> = (1..=8).collect();
        let base = encode_turns(&tracks, &TurnParams { merge_gap_ms: 0.0, ..TurnParams::with_threshold(1.0) }).unwrap();
        let scaled_tracks: Vec<VolumeTrack> = tracks
            .iter()
            .map(|t| VolumeTrack { speaker: t.speaker.clone(), samples: t.samples.iter().map(|v| v * 7.5).collect() })
            .collect();
        let scaled = encode_turns(&scaled_tracks, &TurnParams { merge_gap_ms: 0.0, ..TurnParams::with_threshold(7.5) }).unwrap();
        let a = sweep_time_delay(&base, &taus, PhiMethod::Empirical).unwrap();
        let b = sweep_time_delay(&scaled, &taus, PhiMethod::Empirical).unwrap();
        assert_eq!(a.argmax, b.argmax);
        assert_eq!(a.argmax, 4.0);
    }

    #[test]
    fn step_size_sweep_is_deterministic() {
        let packets = synth::request_response_traffic(&synth::TrafficParams { duration_ms: 5_000.0, ..Default::default() });
        let cfg = SampleConfig::new(SampleMethod::RandomWalk, 6, 1);
        let a = sweep_step_size(&packets, &cfg, &[50.0, 100.0], 3).unwrap();
        let b = sweep_step_size(&packets, &cfg, &[50.0, 100.0], 3).unwrap();
        assert_eq!(a, b);
        assert!(matches!(sweep_step_size(&packets, &cfg, &[0.0], 3), Err(Error::NonPositiveDelta(_))));
        assert!(matches!(sweep_step_size(&[], &cfg, &[10.0], 3), Err(Error::InsufficientNodes { .. })));
    }
}
