//! Link abstraction: the spectral-efficiency regression line and the MCS
//! ladder it summarises.
//!
//! The regression is built from the 28 MCS SINR intervals: each interval's
//! bounds are averaged in the linear domain, converted back to dB, paired
//! with that MCS's spectral efficiency, and a least-squares line is fitted
//! through the 28 points ([`McsTable::fit_regression`]).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of rungs in the MCS ladder.
pub const MCS_COUNT: usize = 28;

/// Current MCS table file schema version.
pub const MCS_TABLE_VERSION: u32 = 1;

const REFERENCE_TABLE: &str = include_str!("../data/mcs_table.json");

/// Linear SE-vs-SINR model with a floor at zero and a ceiling at `se_cap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeRegression {
    /// bit/s/Hz per dB
    pub slope: f64,
    /// bit/s/Hz
    pub intercept: f64,
    pub se_cap: f64,
}

impl Default for SeRegression {
    fn default() -> Self {
        Self {
            slope: 0.23,
            intercept: -0.21,
            se_cap: 6.4,
        }
    }
}

impl SeRegression {
    pub fn new(slope: f64, intercept: f64, se_cap: f64) -> Result<Self> {
        let reg = Self {
            slope,
            intercept,
            se_cap,
        };
        reg.validate()?;
        Ok(reg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.slope.is_finite() && self.slope > 0.0) {
            return Err(Error::NonIncreasingFit(self.slope));
        }
        if !self.intercept.is_finite() {
            return Err(Error::InvalidParameter(
                "regression intercept must be finite".into(),
            ));
        }
        if !(self.se_cap.is_finite() && self.se_cap > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "se_cap must be positive, got {}",
                self.se_cap
            )));
        }
        Ok(())
    }

    /// Spectral efficiency for a SINR in dB, clamped to `[0, se_cap]`.
    /// NaN and negative infinity map to zero.
    pub fn se_from_sinr(&self, sinr_db: f64) -> f64 {
        let raw = self.slope * sinr_db + self.intercept;
        if raw.is_nan() || raw <= 0.0 {
            0.0
        } else {
            raw.min(self.se_cap)
        }
    }

    /// SINR below which the line is clamped to zero.
    pub fn floor_threshold_db(&self) -> f64 {
        -self.intercept / self.slope
    }

    /// SINR above which the line saturates at `se_cap`.
    pub fn cap_threshold_db(&self) -> f64 {
        (self.se_cap - self.intercept) / self.slope
    }
}

/// Free-function form of [`SeRegression::se_from_sinr`].
pub fn se_from_sinr(reg: &SeRegression, sinr_db: f64) -> f64 {
    reg.se_from_sinr(sinr_db)
}

/// Midpoint of a dB interval taken in the linear domain, expressed in dB.
pub fn interval_midpoint_db(sinr_min_db: f64, sinr_max_db: f64) -> Result<f64> {
    if !(sinr_min_db.is_finite() && sinr_max_db.is_finite() && sinr_min_db < sinr_max_db) {
        return Err(Error::InvalidInterval {
            lo: sinr_min_db,
            hi: sinr_max_db,
        });
    }
    let lo = 10f64.powf(sinr_min_db / 10.0);
    let hi = 10f64.powf(sinr_max_db / 10.0);
    Ok(10.0 * (lo + (hi - lo) / 2.0).log10())
}

/// Ordinary least squares through `(sinr_db, se)` points.
///
/// The returned regression carries the default 6.4 bit/s/Hz cap.
pub fn fit_se_regression(points: &[(f64, f64)]) -> Result<SeRegression> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit);
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (sxx, sxy) = points.iter().fold((0.0, 0.0), |(sxx, sxy), &(x, y)| {
        let dx = x - mean_x;
        (sxx + dx * dx, sxy + dx * (y - mean_y))
    });
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    SeRegression::new(slope, intercept, SeRegression::default().se_cap)
}

/// One rung of the MCS ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McsEntry {
    #[serde(rename = "index")]
    pub mcs_index: u8,
    pub sinr_min_db: f64,
    pub sinr_max_db: f64,
    pub spectral_efficiency: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct McsTableFile {
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    entries: Vec<McsEntry>,
}

/// Validated 28-entry MCS ladder, ascending in SINR and spectral efficiency.
#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

impl McsTable {
    pub fn new(entries: Vec<McsEntry>) -> Result<Self> {
        if entries.len() != MCS_COUNT {
            return Err(Error::InvalidMcsTable(format!(
                "expected {MCS_COUNT} entries, found {}",
                entries.len()
            )));
        }
        for (i, e) in entries.iter().enumerate() {
            if usize::from(e.mcs_index) != i {
                return Err(Error::InvalidMcsTable(format!(
                    "entry {i} has index {}",
                    e.mcs_index
                )));
            }
            if !(e.sinr_min_db.is_finite()
                && e.sinr_max_db.is_finite()
                && e.sinr_min_db < e.sinr_max_db)
            {
                return Err(Error::InvalidMcsTable(format!(
                    "entry {i} has an empty SINR interval"
                )));
            }
            if !(e.spectral_efficiency.is_finite() && e.spectral_efficiency > 0.0) {
                return Err(Error::InvalidMcsTable(format!(
                    "entry {i} spectral efficiency must be positive"
                )));
            }
        }
        for (i, pair) in entries.windows(2).enumerate() {
            if pair[1].spectral_efficiency <= pair[0].spectral_efficiency {
                return Err(Error::InvalidMcsTable(format!(
                    "spectral efficiency not increasing at entry {}",
                    i + 1
                )));
            }
            if pair[1].sinr_min_db < pair[0].sinr_max_db {
                return Err(Error::InvalidMcsTable(format!(
                    "SINR intervals overlap at entry {}",
                    i + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    /// The ladder bundled with the crate (`data/mcs_table.json`).
    pub fn reference() -> Self {
        Self::from_json(REFERENCE_TABLE).expect("bundled MCS table is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: McsTableFile =
            serde_json::from_str(text).map_err(|e| Error::parse("MCS table", e))?;
        if file.version != MCS_TABLE_VERSION {
            return Err(Error::SchemaVersion {
                found: file.version,
                expected: MCS_TABLE_VERSION,
            });
        }
        Self::new(file.entries)
    }

    pub fn to_json(&self) -> String {
        let file = McsTableFile {
            version: MCS_TABLE_VERSION,
            description: None,
            entries: self.entries.clone(),
        };
        serde_json::to_string_pretty(&file).expect("MCS table serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                context: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    /// The 28 `(linear-midpoint SINR in dB, spectral efficiency)` points.
    pub fn midpoint_points(&self) -> Vec<(f64, f64)> {
        self.entries
            .iter()
            .map(|e| {
                let mid =
                    interval_midpoint_db(e.sinr_min_db, e.sinr_max_db).expect("validated interval");
                (mid, e.spectral_efficiency)
            })
            .collect()
    }

    /// Least-squares line through [`Self::midpoint_points`].
    pub fn fit_regression(&self) -> Result<SeRegression> {
        fit_se_regression(&self.midpoint_points())
    }

    /// Highest MCS whose lower SINR bound is at or below `sinr_db`.
    pub fn quantize(&self, sinr_db: f64) -> Option<&McsEntry> {
        let n = self.entries.partition_point(|e| e.sinr_min_db <= sinr_db);
        n.checked_sub(1).map(|i| &self.entries[i])
    }
}

/// Free-function form of [`McsTable::quantize`].
pub fn quantize_to_mcs(sinr_db: f64, table: &McsTable) -> Option<&McsEntry> {
    table.quantize(sinr_db)
}
