//! Scenarios, sweeps, and the on-disk formats.
//!
//! Scenario file (`version` 1):
//!
//! ```json
//! {
//!   "version": 1,
//!   "label": "random-5ue-seed7",
//!   "volume": {"x_min": -1000, "x_max": 1000, "y_min": -1000, "y_max": 1000,
//!              "z_min": -1000, "z_max": 1000},
//!   "ngmc_count": 1,
//!   "ues": [{"id": "ue1", "x": 12.5, "y": -340.0, "z": 1.5}],
//!   "manifest": { ... }
//! }
//! ```
//!
//! Result file (`version` 1): `scenario_label`, `method` (`obtained` or
//! `geo_mean`), `position`, `per_ue` (`id`, `sinr_db`, `se`,
//! `capacity_bps`), `aggregate_capacity_bps`, optional `sim`
//! (`per_flow_throughput_bps`, `aggregate_throughput_bps`, `mean_delay_s`,
//! `p90_delay_s`, `replications`), `seed`, optional `timestamp` and
//! `manifest`. Unknown keys are rejected in both formats.
//!
//! Random scenarios use ChaCha8 seeded with `seed_from_u64`, so a seed
//! produces the same UEs on every platform.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capacity::CapacityReport;
use crate::channel::{Point3, Volume};
use crate::{Error, Result};

pub const SCENARIO_VERSION: u32 = 1;
pub const RESULT_VERSION: u32 = 1;

/// Default UE height, meters.
pub const DEFAULT_UE_Z: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Ue {
    pub id: String,
    pub position: Point3,
}

impl Ue {
    pub fn new(id: impl Into<String>, position: Point3) -> Self {
        Self {
            id: id.into(),
            position,
        }
    }
}

/// A set of UEs inside a coverage volume, to be served by `ngmc_count` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    label: String,
    volume: Volume,
    ngmc_count: usize,
    ues: Vec<Ue>,
}

impl Scenario {
    pub fn new(
        label: impl Into<String>,
        volume: Volume,
        ngmc_count: usize,
        ues: Vec<Ue>,
    ) -> Result<Self> {
        let s = Self {
            label: label.into(),
            volume,
            ngmc_count,
            ues,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.volume.validate()?;
        if self.ngmc_count == 0 {
            return Err(Error::Validation("ngmc_count must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for ue in &self.ues {
            if !seen.insert(ue.id.as_str()) {
                return Err(Error::Validation(format!("duplicate UE id {:?}", ue.id)));
            }
            if !ue.position.is_finite() {
                return Err(Error::Validation(format!(
                    "UE {:?} has non-finite coordinates",
                    ue.id
                )));
            }
            if !self.volume.contains(&ue.position) {
                return Err(Error::Validation(format!(
                    "UE {:?} at ({}, {}, {}) lies outside the volume",
                    ue.id, ue.position.x, ue.position.y, ue.position.z
                )));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn volume(&self) -> &Volume {
        &self.volume
    }

    pub fn ngmc_count(&self) -> usize {
        self.ngmc_count
    }

    pub fn ues(&self) -> &[Ue] {
        &self.ues
    }

    pub fn len(&self) -> usize {
        self.ues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ues.is_empty()
    }

    /// Serialize to the scenario file format, optionally embedding a manifest.
    pub fn to_json(&self, manifest: Option<&RunManifest>) -> String {
        let file = ScenarioFile {
            version: SCENARIO_VERSION,
            label: self.label.clone(),
            volume: self.volume,
            ngmc_count: self.ngmc_count,
            ues: self
                .ues
                .iter()
                .map(|u| UeRecord {
                    id: u.id.clone(),
                    x: u.position.x,
                    y: u.position.y,
                    z: u.position.z,
                })
                .collect(),
            manifest: manifest.cloned(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("scenario serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(Self::from_json_with_manifest(text)?.0)
    }

    pub fn from_json_with_manifest(text: &str) -> Result<(Self, Option<RunManifest>)> {
        check_version(text, "scenario", SCENARIO_VERSION)?;
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| Error::parse("scenario", e))?;
        let ues = file
            .ues
            .into_iter()
            .map(|r| Ue::new(r.id, Point3::new(r.x, r.y, r.z)))
            .collect();
        let scenario = Self::new(file.label, file.volume, file.ngmc_count, ues)?;
        Ok((scenario, file.manifest))
    }

    pub fn save(&self, path: impl AsRef<Path>, manifest: Option<&RunManifest>) -> Result<()> {
        std::fs::write(path, self.to_json(manifest))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| with_path(e, path))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UeRecord {
    id: String,
    x: f64,
    y: f64,
    z: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    version: u32,
    label: String,
    volume: Volume,
    ngmc_count: usize,
    ues: Vec<UeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    manifest: Option<RunManifest>,
}

fn check_version(text: &str, what: &str, expected: u32) -> Result<()> {
    #[derive(Deserialize)]
    struct Probe {
        version: Option<u32>,
    }
    let probe: Probe = serde_json::from_str(text).map_err(|e| Error::parse(what, e))?;
    match probe.version {
        Some(v) if v == expected => Ok(()),
        Some(found) => Err(Error::SchemaVersion { found, expected }),
        None => Err(Error::Parse {
            context: what.into(),
            message: "missing field `version`".into(),
        }),
    }
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse { context, message } => Error::Parse {
            context: format!("{} ({context})", path.display()),
            message,
        },
        other => other,
    }
}

/// Uniformly scatter `n_ues` UEs over the volume's ground extent at height
/// `ue_z`.
pub fn generate_scenario(n_ues: usize, volume: Volume, ue_z: f64, seed: u64) -> Result<Scenario> {
    if n_ues == 0 {
        return Err(Error::EmptyScenario);
    }
    volume.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ues = (0..n_ues)
        .map(|i| {
            let x = volume.x_min + (volume.x_max - volume.x_min) * rng.random::<f64>();
            let y = volume.y_min + (volume.y_max - volume.y_min) * rng.random::<f64>();
            Ue::new(format!("ue{}", i + 1), Point3::new(x, y, ue_z))
        })
        .collect();
    Scenario::new(format!("random-{n_ues}ue-seed{seed}"), volume, 1, ues)
}

/// Evenly spaced points along the ground segment from `ue_a` to `ue_b`,
/// trimmed by `margin` at both ends, at height `z`.
///
/// The spacing is the largest value not exceeding `step` that divides the
/// trimmed span evenly; both trimmed endpoints are always included, so a
/// step longer than the span yields just the two endpoints.
pub fn generate_sweep(
    ue_a: &Point3,
    ue_b: &Point3,
    margin: f64,
    step: f64,
    z: f64,
) -> Result<Vec<Point3>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sweep step must be positive, got {step}"
        )));
    }
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sweep margin must be non-negative, got {margin}"
        )));
    }
    let (dx, dy) = (ue_b.x - ue_a.x, ue_b.y - ue_a.y);
    let length = dx.hypot(dy);
    if !(length > 2.0 * margin) {
        return Err(Error::DegenerateSegment(format!(
            "segment length {length} m does not exceed twice the margin {margin} m"
        )));
    }
    let (ux, uy) = (dx / length, dy / length);
    let start = (ue_a.x + margin * ux, ue_a.y + margin * uy);
    let end = (ue_b.x - margin * ux, ue_b.y - margin * uy);
    let span = length - 2.0 * margin;
    let intervals = ((span / step - 1e-9).ceil() as usize).max(1);
    Ok((0..=intervals)
        .map(|k| {
            let t = k as f64 / intervals as f64;
            Point3::new(
                start.0 * (1.0 - t) + end.0 * t,
                start.1 * (1.0 - t) + end.1 * t,
                z,
            )
        })
        .collect())
}

/// Provenance embedded in every file the CLI writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub subcommand: String,
    /// Command-line arguments after the program name.
    pub args: Vec<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seeds: Vec<u64>,
    /// Effective configuration after defaults, config file, and flags.
    pub config: serde_json::Value,
    pub tool_version: String,
}

/// Which placement a result describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Obtained,
    GeoMean,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Obtained => "obtained",
            Method::GeoMean => "geo_mean",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeResult {
    pub id: String,
    /// Serving cell index; omitted for single-cell results.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub cell: usize,
    /// `None` when the link is outside the model's distance range.
    pub sinr_db: Option<f64>,
    pub se: f64,
    pub capacity_bps: f64,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

/// Simulator statistics as stored in a result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSummary {
    pub per_flow_throughput_bps: Vec<f64>,
    pub aggregate_throughput_bps: f64,
    pub mean_delay_s: Option<f64>,
    pub p90_delay_s: Option<f64>,
    pub replications: usize,
}

/// One placement's evaluation, as written by `solve`, `baseline`, and
/// `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub version: u32,
    pub scenario_label: String,
    pub method: Method,
    /// First (or only) cell.
    pub position: Point3,
    /// All cells, when there is more than one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<Point3>>,
    pub per_ue: Vec<UeResult>,
    pub aggregate_capacity_bps: f64,
    /// Largest UE-to-UE ground distance; absent for a single UE.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSummary>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

impl ResultRecord {
    /// Build a record from a capacity evaluation. `serving` gives each UE's
    /// cell index.
    pub fn from_capacity(
        scenario: &Scenario,
        method: Method,
        positions: &[Point3],
        serving: &[usize],
        report: &CapacityReport,
        seed: u64,
    ) -> Self {
        let per_ue = scenario
            .ues()
            .iter()
            .enumerate()
            .map(|(u, ue)| UeResult {
                id: ue.id.clone(),
                cell: serving.get(u).copied().unwrap_or(0),
                sinr_db: report.per_ue_sinr.get(u).copied().filter(|s| s.is_finite()),
                se: report.per_ue_se.get(u).copied().unwrap_or(0.0),
                capacity_bps: report.per_ue_capacity.get(u).copied().unwrap_or(0.0),
            })
            .collect();
        Self {
            version: RESULT_VERSION,
            scenario_label: scenario.label().to_string(),
            method,
            position: positions[0],
            positions: (positions.len() > 1).then(|| positions.to_vec()),
            per_ue,
            aggregate_capacity_bps: report.aggregate_capacity,
            diameter_m: crate::baseline::max_pairwise_distance(scenario).ok(),
            sim: None,
            seed,
            timestamp: None,
            manifest: None,
        }
    }

    /// All cell positions.
    pub fn cell_positions(&self) -> Vec<Point3> {
        self.positions
            .clone()
            .unwrap_or_else(|| vec![self.position])
    }

    /// Serving cell per UE.
    pub fn serving(&self) -> Vec<usize> {
        self.per_ue.iter().map(|u| u.cell).collect()
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("result serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        check_version(text, "result", RESULT_VERSION)?;
        serde_json::from_str(text).map_err(|e| Error::parse("result", e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| with_path(e, path))
    }
}

/// One point of a trajectory sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub position: Point3,
    pub aggregate_capacity_bps: f64,
    pub aggregate_throughput_bps: Option<f64>,
}

/// Columns `x, y, z, aggregate_capacity_bps`, plus
/// `aggregate_throughput_bps` when any row carries a simulated value.
pub fn write_sweep_csv<W: Write>(writer: W, rows: &[SweepRow]) -> Result<()> {
    let with_tput = rows.iter().any(|r| r.aggregate_throughput_bps.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["x", "y", "z", "aggregate_capacity_bps"];
    if with_tput {
        header.push("aggregate_throughput_bps");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.position.x.to_string(),
            r.position.y.to_string(),
            r.position.z.to_string(),
            r.aggregate_capacity_bps.to_string(),
        ];
        if with_tput {
            rec.push(
                r.aggregate_throughput_bps
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
            );
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
