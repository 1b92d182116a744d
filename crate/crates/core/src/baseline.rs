//! Comparison yardsticks: the geo-mean placement, scenario diameter, and
//! percentage gains of an obtained placement over a baseline.

use serde::{Deserialize, Serialize};

use crate::capacity::CapacityReport;
use crate::channel::{distance_2d, Point3};
use crate::scenario::{ResultRecord, Scenario};
use crate::sim::SimReport;
use crate::{Error, Result};

/// Mean UE ground position, lifted to the cell plane `z`.
pub fn geo_mean_position(scenario: &Scenario, z: f64) -> Result<Point3> {
    let ues = scenario.ues();
    if ues.is_empty() {
        return Err(Error::EmptyScenario);
    }
    let n = ues.len() as f64;
    let (sx, sy) = ues.iter().fold((0.0, 0.0), |(sx, sy), u| {
        (sx + u.position.x, sy + u.position.y)
    });
    Ok(Point3::new(sx / n, sy / n, z))
}

/// Largest 2D distance between any two UEs.
pub fn max_pairwise_distance(scenario: &Scenario) -> Result<f64> {
    let ues = scenario.ues();
    if ues.len() < 2 {
        return Err(Error::TooFewUes {
            needed: 2,
            found: ues.len(),
        });
    }
    let mut best = 0.0f64;
    for (i, a) in ues.iter().enumerate() {
        for b in &ues[i + 1..] {
            best = best.max(distance_2d(&a.position, &b.position));
        }
    }
    Ok(best)
}

/// Percentage changes of an obtained placement relative to a baseline.
///
/// A metric that does not apply to the compared report kind, or whose
/// baseline is zero, is `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub capacity_gain_pct: Option<f64>,
    pub throughput_gain_pct: Option<f64>,
    pub delay_reduction_pct: Option<f64>,
    /// meters
    pub diameter: f64,
}

/// `100 (obtained - baseline) / baseline`.
pub fn gain_pct(obtained: f64, baseline: f64) -> Option<f64> {
    (baseline != 0.0 && baseline.is_finite() && obtained.is_finite())
        .then(|| 100.0 * (obtained - baseline) / baseline)
}

/// `100 (baseline - obtained) / baseline`.
pub fn reduction_pct(obtained: f64, baseline: f64) -> Option<f64> {
    // adding 0.0 turns -0.0 into 0.0
    gain_pct(obtained, baseline).map(|g| -g + 0.0)
}

/// Reports that can be compared against a baseline of the same kind.
pub trait Comparable {
    fn gains_over(&self, baseline: &Self) -> GainReport;
}

impl Comparable for CapacityReport {
    fn gains_over(&self, baseline: &Self) -> GainReport {
        GainReport {
            capacity_gain_pct: gain_pct(self.aggregate_capacity, baseline.aggregate_capacity),
            ..Default::default()
        }
    }
}

impl Comparable for SimReport {
    fn gains_over(&self, baseline: &Self) -> GainReport {
        let delay = match (self.mean_delay_s(), baseline.mean_delay_s()) {
            (Some(o), Some(b)) => reduction_pct(o, b),
            _ => None,
        };
        GainReport {
            throughput_gain_pct: gain_pct(
                self.aggregate_throughput_bps,
                baseline.aggregate_throughput_bps,
            ),
            delay_reduction_pct: delay,
            ..Default::default()
        }
    }
}

impl Comparable for ResultRecord {
    fn gains_over(&self, baseline: &Self) -> GainReport {
        let (throughput, delay) = match (&self.sim, &baseline.sim) {
            (Some(o), Some(b)) => (
                gain_pct(o.aggregate_throughput_bps, b.aggregate_throughput_bps),
                match (o.mean_delay_s, b.mean_delay_s) {
                    (Some(od), Some(bd)) => reduction_pct(od, bd),
                    _ => None,
                },
            ),
            _ => (None, None),
        };
        GainReport {
            capacity_gain_pct: gain_pct(
                self.aggregate_capacity_bps,
                baseline.aggregate_capacity_bps,
            ),
            throughput_gain_pct: throughput,
            delay_reduction_pct: delay,
            diameter: self.diameter_m.unwrap_or(0.0),
        }
    }
}

/// Gains of `obtained` over `baseline`, tagged with the scenario diameter.
pub fn compare<T: Comparable>(obtained: &T, baseline: &T, diameter: f64) -> GainReport {
    GainReport {
        diameter,
        ..obtained.gains_over(baseline)
    }
}
