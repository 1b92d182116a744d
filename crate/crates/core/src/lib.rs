//! Placement planning for a relocatable 5G cell.
//!
//! The crate chains a 3GPP UMa line-of-sight link budget into a per-UE
//! spectral efficiency and capacity, searches for the cell position that
//! maximises the aggregate downlink capacity, and checks the result with a
//! slot-level OFDMA round-robin simulator.
//!
//! Module map:
//!
//! - [`channel`]: distances, breakpoint, pathloss, RSRP, noise, SINR
//! - [`link`]: SE-vs-SINR regression and the MCS ladder
//! - [`capacity`]: per-UE and aggregate capacity
//! - [`placement`]: feasibility, fitness, genetic algorithm, grid oracle
//! - [`baseline`]: geo-mean position, diameter, gain comparison
//! - [`sim`]: slot-level downlink simulator and delay statistics
//! - [`scenario`]: scenario generation, sweeps, file formats

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod capacity;
pub mod channel;
mod error;
pub mod link;
pub mod placement;
pub mod scenario;
pub mod sim;

pub use baseline::{compare, geo_mean_position, max_pairwise_distance, Comparable, GainReport};
pub use capacity::{aggregate_capacity, AssociationMatrix, CapacityReport};
pub use channel::{ModelConfig, NoiseBandwidth, Point3, Volume};
pub use error::{Error, Result};
pub use link::{McsEntry, McsTable, SeRegression};
pub use placement::{
    check_feasibility, evaluate_fitness, evaluate_placement, grid_search, solve_ga, GaParams,
    Genome, PlacementProblem, PlacementSolution, Violation,
};
pub use scenario::{
    generate_scenario, generate_sweep, write_sweep_csv, Method, ResultRecord, RunManifest,
    Scenario, SimSummary, SweepRow, Ue, UeResult,
};
pub use sim::{
    delay_percentile, merge_reports, run_replications, run_simulation, run_simulation_with_table,
    LinkMode, SimConfig, SimReport, TrafficMode,
};
