//! Slot-level downlink simulator with per-RB round-robin scheduling.
//!
//! Only MAC-level resource allocation and the link abstraction are
//! modelled. Each slot every cell deals its resource blocks one at a time
//! across its backlogged UEs, starting from an offset that rotates with the
//! slot number. A UE's bits per RB follow from its spectral efficiency,
//! which is derived from the SINR computed with the cell's static load.

mod engine;

pub use engine::{run_replications, run_simulation, run_simulation_with_table};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How SINR maps to spectral efficiency.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkMode {
    /// Clamped linear regression.
    #[default]
    SeLine,
    /// Efficiency of the highest MCS whose interval starts at or below the SINR.
    McsQuantized,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficMode {
    /// Every UE always has data.
    #[default]
    FullBuffer,
    /// Fixed-size packets at a constant bit rate per UE.
    Cbr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub duration_slots: usize,
    /// Overrides the slot length implied by the numerology.
    pub slot_duration_s: Option<f64>,
    pub link_mode: LinkMode,
    pub traffic_mode: TrafficMode,
    pub cbr_rate_bps: f64,
    pub packet_size_bytes: usize,
    pub harq_enabled: bool,
    pub per_tx_error_prob: f64,
    pub max_harq_retx: u32,
    pub harq_rtt_slots: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration_slots: 1000,
            slot_duration_s: None,
            link_mode: LinkMode::SeLine,
            traffic_mode: TrafficMode::FullBuffer,
            cbr_rate_bps: 1e8,
            packet_size_bytes: 1500,
            harq_enabled: false,
            per_tx_error_prob: 0.0,
            max_harq_retx: 4,
            harq_rtt_slots: 8,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.duration_slots == 0 {
            return bad("duration_slots must be at least 1".into());
        }
        if let Some(t) = self.slot_duration_s {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("slot_duration_s must be positive, got {t}"));
            }
        }
        if !(self.cbr_rate_bps > 0.0 && self.cbr_rate_bps.is_finite()) {
            return bad(format!(
                "cbr_rate_bps must be positive, got {}",
                self.cbr_rate_bps
            ));
        }
        if self.packet_size_bytes == 0 {
            return bad("packet_size_bytes must be positive".into());
        }
        if !(0.0..1.0).contains(&self.per_tx_error_prob) {
            return bad(format!(
                "per_tx_error_prob must be in [0, 1), got {}",
                self.per_tx_error_prob
            ));
        }
        if self.harq_rtt_slots == 0 {
            return bad("harq_rtt_slots must be at least 1".into());
        }
        Ok(())
    }
}

/// One delivered packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub flow: usize,
    pub arrival_s: f64,
    pub completion_s: f64,
}

impl PacketRecord {
    pub fn delay_s(&self) -> f64 {
        self.completion_s - self.arrival_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    /// UE ids, one per flow.
    pub flow_ids: Vec<String>,
    pub per_flow_throughput_bps: Vec<f64>,
    pub aggregate_throughput_bps: f64,
    /// `None` for a flow with no completed packet.
    pub per_flow_mean_delay_s: Vec<Option<f64>>,
    pub delay_samples_s: Vec<Vec<f64>>,
    pub slots_simulated: usize,
    /// Successfully delivered bits per flow.
    pub served_bits: Vec<f64>,
    /// Bits that arrived per flow; zero under full-buffer traffic.
    pub offered_bits: Vec<f64>,
    pub dropped_packets: Vec<usize>,
    pub packets: Vec<PacketRecord>,
    pub replications: usize,
}

impl SimReport {
    /// Mean of the per-flow mean delays, over flows that completed a packet.
    pub fn mean_delay_s(&self) -> Option<f64> {
        let means: Vec<f64> = self
            .per_flow_mean_delay_s
            .iter()
            .flatten()
            .copied()
            .collect();
        (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64)
    }

    /// All delay samples pooled across flows.
    pub fn all_delays_s(&self) -> Vec<f64> {
        self.delay_samples_s.iter().flatten().copied().collect()
    }

    /// Nearest-rank percentile of the pooled delays.
    pub fn delay_percentile_s(&self, p: f64) -> Option<f64> {
        delay_percentile(&self.all_delays_s(), p).ok()
    }

    /// One CSV row per delivered packet.
    pub fn write_delay_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["flow_id", "arrival_s", "completion_s", "delay_s"])?;
        for p in &self.packets {
            w.write_record([
                self.flow_ids
                    .get(p.flow)
                    .cloned()
                    .unwrap_or_else(|| p.flow.to_string()),
                p.arrival_s.to_string(),
                p.completion_s.to_string(),
                p.delay_s().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Nearest-rank percentile: the sample at 1-indexed rank `ceil(p n)`,
/// with rank 0 treated as 1.
pub fn delay_percentile(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "percentile must be in [0, 1], got {p}"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Pool independent replications: throughputs are averaged, delay samples
/// and packet records concatenated.
pub fn merge_reports(reports: &[SimReport]) -> Result<SimReport> {
    let first = reports.first().ok_or(Error::EmptySamples)?;
    let flows = first.flow_ids.len();
    if reports.iter().any(|r| r.flow_ids != first.flow_ids) {
        return Err(Error::InvalidParameter(
            "replications cover different flows".into(),
        ));
    }
    let n = reports.len() as f64;
    let per_flow_throughput_bps: Vec<f64> = (0..flows)
        .map(|f| {
            reports
                .iter()
                .map(|r| r.per_flow_throughput_bps[f])
                .sum::<f64>()
                / n
        })
        .collect();
    let sum_flows = |get: &dyn Fn(&SimReport) -> &Vec<f64>| -> Vec<f64> {
        (0..flows)
            .map(|f| reports.iter().map(|r| get(r)[f]).sum())
            .collect()
    };
    let delay_samples_s: Vec<Vec<f64>> = (0..flows)
        .map(|f| {
            reports
                .iter()
                .flat_map(|r| r.delay_samples_s[f].iter().copied())
                .collect()
        })
        .collect();
    Ok(SimReport {
        flow_ids: first.flow_ids.clone(),
        aggregate_throughput_bps: crate::capacity::order_independent_sum(&per_flow_throughput_bps),
        per_flow_throughput_bps,
        per_flow_mean_delay_s: delay_samples_s.iter().map(|d| mean(d)).collect(),
        delay_samples_s,
        slots_simulated: reports.iter().map(|r| r.slots_simulated).sum(),
        served_bits: sum_flows(&|r| &r.served_bits),
        offered_bits: sum_flows(&|r| &r.offered_bits),
        dropped_packets: (0..flows)
            .map(|f| reports.iter().map(|r| r.dropped_packets[f]).sum())
            .collect(),
        packets: reports
            .iter()
            .flat_map(|r| r.packets.iter().cloned())
            .collect(),
        replications: reports.iter().map(|r| r.replications).sum(),
    })
}
