use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{merge_reports, LinkMode, PacketRecord, SimConfig, SimReport, TrafficMode};
use crate::capacity::{self, AssociationMatrix};
use crate::channel::{ModelConfig, Point3};
use crate::link::{McsTable, SeRegression};
use crate::scenario::Scenario;
use crate::{Error, Result};

const BIT_EPS: f64 = 1e-6;

struct Packet {
    arrival: f64,
    unsent: f64,
    outstanding: f64,
    dropped: bool,
}

/// A transport block awaiting (re)transmission.
struct Tb {
    due: usize,
    bits: f64,
    retx: u32,
    /// (packet index, bits of that packet carried)
    segments: Vec<(usize, f64)>,
}

struct Flow {
    cell: usize,
    bits_per_rb: f64,
    packets: Vec<Packet>,
    /// Packets with unsent bits, oldest first.
    queue: VecDeque<usize>,
    queued_bits: f64,
    harq: VecDeque<Tb>,
    served: f64,
    offered: f64,
    dropped: usize,
    delays: Vec<f64>,
    records: Vec<PacketRecord>,
}

impl Flow {
    fn due_retx(&self, slot: usize) -> bool {
        self.harq.front().is_some_and(|tb| tb.due <= slot)
    }

    fn demand_rbs(&self, traffic: TrafficMode, rb_count: usize) -> usize {
        match traffic {
            TrafficMode::FullBuffer => rb_count,
            // an unreachable UE still holds its share, as in the capacity model
            TrafficMode::Cbr if self.bits_per_rb <= 0.0 => {
                if self.queued_bits > 0.0 {
                    rb_count
                } else {
                    0
                }
            }
            TrafficMode::Cbr => {
                let rbs = (self.queued_bits / self.bits_per_rb - 1e-9).ceil();
                (rbs.max(0.0) as usize).min(rb_count)
            }
        }
    }

    fn fill_tb(&mut self, budget: f64, traffic: TrafficMode) -> Tb {
        let mut tb = Tb {
            due: 0,
            bits: 0.0,
            retx: 0,
            segments: Vec::new(),
        };
        if traffic == TrafficMode::FullBuffer {
            tb.bits = budget;
            return tb;
        }
        let mut left = budget;
        while left > BIT_EPS {
            let Some(&i) = self.queue.front() else { break };
            let p = &mut self.packets[i];
            let take = p.unsent.min(left);
            p.unsent -= take;
            p.outstanding += take;
            left -= take;
            tb.bits += take;
            tb.segments.push((i, take));
            if p.unsent <= BIT_EPS {
                p.unsent = 0.0;
                self.queue.pop_front();
            }
        }
        self.queued_bits = (self.queued_bits - tb.bits).max(0.0);
        tb
    }

    fn deliver(&mut self, tb: &Tb, completion: f64, flow: usize) {
        self.served += tb.bits;
        for &(i, bits) in &tb.segments {
            let p = &mut self.packets[i];
            p.outstanding -= bits;
            if !p.dropped && p.unsent == 0.0 && p.outstanding <= BIT_EPS {
                p.outstanding = 0.0;
                self.delays.push(completion - p.arrival);
                self.records.push(PacketRecord {
                    flow,
                    arrival_s: p.arrival,
                    completion_s: completion,
                });
            }
        }
    }

    fn drop_tb(&mut self, tb: &Tb) {
        for &(i, bits) in &tb.segments {
            let p = &mut self.packets[i];
            p.outstanding -= bits;
            if !p.dropped {
                p.dropped = true;
                self.dropped += 1;
            }
        }
    }

    fn schedule_retx(&mut self, tb: Tb) {
        let at = self.harq.partition_point(|t| t.due <= tb.due);
        self.harq.insert(at, tb);
    }
}

/// Round-robin dealing of `rb_count` RBs, one at a time, starting at
/// `offset` and skipping UEs whose demand is met.
fn deal_rbs(demand: &[usize], rb_count: usize, offset: usize) -> Vec<usize> {
    let k = demand.len();
    let mut alloc = vec![0; k];
    if k == 0 {
        return alloc;
    }
    let mut unmet = demand.iter().filter(|&&d| d > 0).count();
    let mut left = rb_count;
    let mut i = offset % k;
    while left > 0 && unmet > 0 {
        if alloc[i] < demand[i] {
            alloc[i] += 1;
            left -= 1;
            if alloc[i] == demand[i] {
                unmet -= 1;
            }
        }
        i = (i + 1) % k;
    }
    alloc
}

/// [`run_simulation_with_table`] with the bundled MCS ladder.
pub fn run_simulation(
    scenario: &Scenario,
    positions: &[Point3],
    assoc: &AssociationMatrix,
    cfg: &ModelConfig,
    reg: &SeRegression,
    sim: &SimConfig,
) -> Result<SimReport> {
    run_simulation_with_table(
        scenario,
        positions,
        assoc,
        cfg,
        reg,
        sim,
        &McsTable::reference(),
    )
}

/// Simulate `sim.duration_slots` slots of downlink traffic for a fixed
/// placement. `table` is only consulted in [`LinkMode::McsQuantized`].
pub fn run_simulation_with_table(
    scenario: &Scenario,
    positions: &[Point3],
    assoc: &AssociationMatrix,
    cfg: &ModelConfig,
    reg: &SeRegression,
    sim: &SimConfig,
    table: &McsTable,
) -> Result<SimReport> {
    if scenario.is_empty() {
        return Err(Error::EmptyScenario);
    }
    sim.validate()?;
    cfg.validate()?;
    if assoc.ue_count() != scenario.len() || assoc.cell_count() != positions.len() {
        return Err(Error::Association(format!(
            "matrix is {}x{}, placement needs {}x{}",
            assoc.ue_count(),
            assoc.cell_count(),
            scenario.len(),
            positions.len()
        )));
    }
    assoc.validate()?;

    let slot = sim.slot_duration_s.unwrap_or_else(|| cfg.slot_duration_s());
    let rb_bandwidth = cfg.data_subcarriers_per_rb as f64 * cfg.scs_hz();
    let rb_count = cfg.rb_count as usize;
    let loads = assoc.loads();

    let mut flows = Vec::with_capacity(scenario.len());
    for (u, ue) in scenario.ues().iter().enumerate() {
        let cell = assoc.serving_cell(u).expect("validated");
        let (sinr, line_se, _) =
            capacity::link_metrics(&positions[cell], &ue.position, loads[cell], cfg, reg)?;
        let se = match sim.link_mode {
            LinkMode::SeLine => line_se,
            LinkMode::McsQuantized => table.quantize(sinr).map_or(0.0, |e| e.spectral_efficiency),
        };
        flows.push(Flow {
            cell,
            bits_per_rb: se * rb_bandwidth * slot,
            packets: Vec::new(),
            queue: VecDeque::new(),
            queued_bits: 0.0,
            harq: VecDeque::new(),
            served: 0.0,
            offered: 0.0,
            dropped: 0,
            delays: Vec::new(),
            records: Vec::new(),
        });
    }
    let by_cell: Vec<Vec<usize>> = (0..positions.len())
        .map(|c| (0..flows.len()).filter(|&u| flows[u].cell == c).collect())
        .collect();

    let packet_bits = sim.packet_size_bytes as f64 * 8.0;
    let interarrival = packet_bits / sim.cbr_rate_bps;
    let horizon = sim.duration_slots as f64 * slot;
    let mut next_packet = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);

    for t in 0..sim.duration_slots {
        let start = t as f64 * slot;
        let end = (t + 1) as f64 * slot;
        if sim.traffic_mode == TrafficMode::Cbr {
            loop {
                let arrival = next_packet as f64 * interarrival;
                if arrival >= horizon || arrival > start * (1.0 + 1e-12) + 1e-15 {
                    break;
                }
                for f in &mut flows {
                    f.packets.push(Packet {
                        arrival,
                        unsent: packet_bits,
                        outstanding: 0.0,
                        dropped: false,
                    });
                    f.queue.push_back(f.packets.len() - 1);
                    f.queued_bits += packet_bits;
                    f.offered += packet_bits;
                }
                next_packet += 1;
            }
        }

        for members in &by_cell {
            let retx: Vec<bool> = members
                .iter()
                .map(|&u| sim.harq_enabled && flows[u].due_retx(t))
                .collect();
            let demand: Vec<usize> = members
                .iter()
                .zip(&retx)
                .map(|(&u, &r)| {
                    if r {
                        rb_count
                    } else {
                        flows[u].demand_rbs(sim.traffic_mode, rb_count)
                    }
                })
                .collect();
            let offset = if members.is_empty() {
                0
            } else {
                t % members.len()
            };
            let alloc = deal_rbs(&demand, rb_count, offset);

            for (k, &u) in members.iter().enumerate() {
                let f = &mut flows[u];
                let tb = if retx[k] {
                    f.harq.pop_front().expect("due retransmission")
                } else if alloc[k] > 0 {
                    f.fill_tb(alloc[k] as f64 * f.bits_per_rb, sim.traffic_mode)
                } else {
                    continue;
                };
                let failed = sim.harq_enabled && rng.random::<f64>() < sim.per_tx_error_prob;
                if !failed {
                    f.deliver(&tb, end, u);
                } else if tb.retx < sim.max_harq_retx {
                    f.schedule_retx(Tb {
                        due: t + sim.harq_rtt_slots,
                        retx: tb.retx + 1,
                        ..tb
                    });
                } else {
                    f.drop_tb(&tb);
                }
                debug_assert!(
                    sim.traffic_mode == TrafficMode::FullBuffer || f.served <= f.offered + BIT_EPS
                );
            }
        }
    }

    let duration = horizon;
    let per_flow_throughput_bps: Vec<f64> = flows.iter().map(|f| f.served / duration).collect();
    let mut packets: Vec<PacketRecord> =
        flows.iter_mut().flat_map(|f| f.records.drain(..)).collect();
    packets.sort_by(|a, b| {
        a.completion_s
            .total_cmp(&b.completion_s)
            .then(a.flow.cmp(&b.flow))
    });
    Ok(SimReport {
        flow_ids: scenario.ues().iter().map(|u| u.id.clone()).collect(),
        aggregate_throughput_bps: capacity::order_independent_sum(&per_flow_throughput_bps),
        per_flow_throughput_bps,
        per_flow_mean_delay_s: flows
            .iter()
            .map(|f| {
                (!f.delays.is_empty()).then(|| f.delays.iter().sum::<f64>() / f.delays.len() as f64)
            })
            .collect(),
        delay_samples_s: flows.iter().map(|f| f.delays.clone()).collect(),
        slots_simulated: sim.duration_slots,
        served_bits: flows.iter().map(|f| f.served).collect(),
        offered_bits: flows.iter().map(|f| f.offered).collect(),
        dropped_packets: flows.iter().map(|f| f.dropped).collect(),
        packets,
        replications: 1,
    })
}

/// Run `count` independent replications in parallel, seeded `seed`,
/// `seed + 1`, ..., and merge them.
#[allow(clippy::too_many_arguments)]
pub fn run_replications(
    scenario: &Scenario,
    positions: &[Point3],
    assoc: &AssociationMatrix,
    cfg: &ModelConfig,
    reg: &SeRegression,
    sim: &SimConfig,
    table: &McsTable,
    count: usize,
) -> Result<SimReport> {
    if count == 0 {
        return Err(Error::InvalidParameter(
            "replications must be at least 1".into(),
        ));
    }
    let reports: Vec<SimReport> = (0..count)
        .into_par_iter()
        .map(|i| {
            let run = SimConfig {
                seed: sim.seed.wrapping_add(i as u64),
                ..sim.clone()
            };
            run_simulation_with_table(scenario, positions, assoc, cfg, reg, &run, table)
        })
        .collect::<Result<_>>()?;
    merge_reports(&reports)
}
