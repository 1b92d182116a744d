//! Per-UE and aggregate downlink capacity.
//!
//! A UE served by a cell with `U_m` associated UEs gets
//! `effective_bandwidth * SE / U_m`, where the SE comes from the regression
//! line evaluated at a SINR whose received power is also shared by `U_m`.

use serde::{Deserialize, Serialize};

use crate::channel::{self, ModelConfig, Point3};
use crate::link::SeRegression;
use crate::scenario::Scenario;
use crate::{Error, Result};

/// `2^mu * 15 kHz`.
pub fn subcarrier_spacing_hz(mu: i32) -> Result<f64> {
    if !(0..=30).contains(&mu) {
        return Err(Error::InvalidParameter(format!(
            "numerology {mu} must be non-negative"
        )));
    }
    Ok(15_000.0 * f64::from(1u32 << mu))
}

/// Data-carrying bandwidth: `B * data_subcarriers_per_rb * Δf`.
pub fn effective_bandwidth_hz(cfg: &ModelConfig) -> f64 {
    f64::from(cfg.rb_count) * f64::from(cfg.data_subcarriers_per_rb) * cfg.scs_hz()
}

/// Bandwidth available to one of `load` UEs sharing a cell.
pub fn bandwidth_share_hz(cfg: &ModelConfig, load: u32) -> Result<f64> {
    if load == 0 {
        return Err(Error::ZeroLoad);
    }
    Ok(effective_bandwidth_hz(cfg) / f64::from(load))
}

pub fn ue_capacity(se: f64, cfg: &ModelConfig, load: u32) -> Result<f64> {
    if !(se >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "spectral efficiency {se} is negative"
        )));
    }
    Ok(bandwidth_share_hz(cfg, load)? * se)
}

/// Binary UE-to-cell association, `ue_count` rows by `cell_count` columns.
///
/// The matrix may hold rows that do not sum to one so that feasibility
/// checks can report them; [`AssociationMatrix::validate`] enforces the
/// single-association rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationMatrix {
    ue_count: usize,
    cell_count: usize,
    entries: Vec<bool>,
}

impl AssociationMatrix {
    /// Every UE on cell 0.
    pub fn single_cell(ue_count: usize) -> Self {
        Self {
            ue_count,
            cell_count: 1,
            entries: vec![true; ue_count],
        }
    }

    /// One serving-cell index per UE.
    pub fn from_serving(serving: &[usize], cell_count: usize) -> Result<Self> {
        let mut m = Self {
            ue_count: serving.len(),
            cell_count,
            entries: vec![false; serving.len() * cell_count],
        };
        for (u, &c) in serving.iter().enumerate() {
            if c >= cell_count {
                return Err(Error::IndexOutOfRange {
                    index: c,
                    len: cell_count,
                });
            }
            m.entries[u * cell_count + c] = true;
        }
        Ok(m)
    }

    /// Arbitrary 0/1 rows; not validated.
    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let cell_count = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cell_count) {
            return Err(Error::Association("ragged association rows".into()));
        }
        Ok(Self {
            ue_count: rows.len(),
            cell_count,
            entries: rows.concat(),
        })
    }

    pub fn ue_count(&self) -> usize {
        self.ue_count
    }

    pub fn cell_count(&self) -> usize {
        self.cell_count
    }

    pub fn get(&self, ue: usize, cell: usize) -> bool {
        self.entries[ue * self.cell_count + cell]
    }

    pub fn row(&self, ue: usize) -> &[bool] {
        &self.entries[ue * self.cell_count..(ue + 1) * self.cell_count]
    }

    pub fn row_sum(&self, ue: usize) -> usize {
        self.row(ue).iter().filter(|&&s| s).count()
    }

    /// Serving cell if the row has exactly one association.
    pub fn serving_cell(&self, ue: usize) -> Option<usize> {
        let row = self.row(ue);
        match self.row_sum(ue) {
            1 => row.iter().position(|&s| s),
            _ => None,
        }
    }

    /// Number of UEs on `cell`.
    pub fn cell_load(&self, cell: usize) -> Result<u32> {
        if cell >= self.cell_count {
            return Err(Error::IndexOutOfRange {
                index: cell,
                len: self.cell_count,
            });
        }
        Ok((0..self.ue_count).filter(|&u| self.get(u, cell)).count() as u32)
    }

    pub fn loads(&self) -> Vec<u32> {
        (0..self.cell_count)
            .map(|c| self.cell_load(c).expect("in range"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        for u in 0..self.ue_count {
            let sum = self.row_sum(u);
            if sum != 1 {
                return Err(Error::Association(format!(
                    "UE {u} has {sum} associations, expected exactly 1"
                )));
            }
        }
        Ok(())
    }
}

/// Free-function form of [`AssociationMatrix::cell_load`].
pub fn cell_load(assoc: &AssociationMatrix, cell: usize) -> Result<u32> {
    assoc.cell_load(cell)
}

/// Per-UE link quality and capacity for one placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    /// bit/s
    pub per_ue_capacity: Vec<f64>,
    /// dB
    pub per_ue_sinr: Vec<f64>,
    /// bit/s/Hz
    pub per_ue_se: Vec<f64>,
    pub per_cell_load: Vec<u32>,
    /// bit/s
    pub aggregate_capacity: f64,
}

/// SINR, SE and capacity of one UE served by `cell` carrying `load` UEs.
pub fn link_metrics(
    cell: &Point3,
    ue: &Point3,
    load: u32,
    cfg: &ModelConfig,
    reg: &SeRegression,
) -> Result<(f64, f64, f64)> {
    let received = channel::rsrp(cell, ue, load, cfg)?;
    let sinr = channel::sinr_db(received, channel::noise_power(cfg));
    let se = reg.se_from_sinr(sinr);
    Ok((sinr, se, ue_capacity(se, cfg, load)?))
}

/// Evaluate every UE against its serving cell and sum the capacities.
///
/// Rows that do not sum to one and served pairs outside the pathloss
/// distance range are errors; the placement module decides how to treat
/// infeasible candidates before calling this.
pub fn aggregate_capacity(
    scenario: &Scenario,
    positions: &[Point3],
    assoc: &AssociationMatrix,
    cfg: &ModelConfig,
    reg: &SeRegression,
) -> Result<CapacityReport> {
    let ues = scenario.ues();
    if assoc.ue_count() != ues.len() || assoc.cell_count() != positions.len() {
        return Err(Error::Association(format!(
            "matrix is {}x{}, scenario needs {}x{}",
            assoc.ue_count(),
            assoc.cell_count(),
            ues.len(),
            positions.len()
        )));
    }
    assoc.validate()?;
    let loads = assoc.loads();
    let mut report = CapacityReport {
        per_ue_capacity: Vec::with_capacity(ues.len()),
        per_ue_sinr: Vec::with_capacity(ues.len()),
        per_ue_se: Vec::with_capacity(ues.len()),
        per_cell_load: loads.clone(),
        aggregate_capacity: 0.0,
    };
    for (u, ue) in ues.iter().enumerate() {
        let cell = assoc.serving_cell(u).expect("validated");
        let (sinr, se, cap) = link_metrics(&positions[cell], &ue.position, loads[cell], cfg, reg)?;
        report.per_ue_sinr.push(sinr);
        report.per_ue_se.push(se);
        report.per_ue_capacity.push(cap);
    }
    report.aggregate_capacity = order_independent_sum(&report.per_ue_capacity);
    Ok(report)
}

/// Sum in ascending order so the result does not depend on UE ordering.
pub(crate) fn order_independent_sum(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{NoiseBandwidth, Volume};
    use crate::scenario::Ue;
    use approx::assert_relative_eq;

    fn scenario(points: &[(f64, f64)]) -> Scenario {
        let ues = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Ue::new(format!("ue{}", i + 1), Point3::new(x, y, 1.5)))
            .collect();
        Scenario::new("test", Volume::default(), 1, ues).unwrap()
    }

    #[test]
    fn scs_examples() {
        assert_eq!(subcarrier_spacing_hz(0).unwrap(), 15_000.0);
        assert_eq!(subcarrier_spacing_hz(1).unwrap(), 30_000.0);
        assert_eq!(subcarrier_spacing_hz(2).unwrap(), 60_000.0);
        assert!(subcarrier_spacing_hz(-1).is_err());
        for mu in 0..5u32 {
            let cfg = ModelConfig {
                numerology: mu,
                ..Default::default()
            };
            assert_eq!(cfg.scs_hz(), subcarrier_spacing_hz(mu as i32).unwrap());
        }
    }

    #[test]
    fn load_examples() {
        let all = AssociationMatrix::single_cell(5);
        assert_eq!(cell_load(&all, 0).unwrap(), 5);
        let split = AssociationMatrix::from_serving(&[0, 0, 1], 2).unwrap();
        assert_eq!(split.loads(), vec![2, 1]);
        let unused = AssociationMatrix::from_serving(&[0, 0], 3).unwrap();
        assert_eq!(unused.cell_load(2).unwrap(), 0);
        assert!(matches!(
            unused.cell_load(3),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(AssociationMatrix::from_serving(&[2], 2).is_err());
    }

    #[test]
    fn association_rows() {
        let m = AssociationMatrix::from_rows(&[vec![true, false], vec![false, false]]).unwrap();
        assert_eq!(m.serving_cell(0), Some(0));
        assert_eq!(m.serving_cell(1), None);
        assert!(m.validate().is_err());
        assert!(AssociationMatrix::from_rows(&[vec![true], vec![true, false]]).is_err());
    }

    #[test]
    fn bandwidth_examples() {
        let cfg = ModelConfig::default();
        assert_eq!(effective_bandwidth_hz(&cfg), 35_910_000.0);
        let twelve = ModelConfig {
            data_subcarriers_per_rb: 12,
            ..cfg.clone()
        };
        assert_eq!(effective_bandwidth_hz(&twelve), 47_880_000.0);
        let one = ModelConfig {
            rb_count: 1,
            ..cfg.clone()
        };
        assert_eq!(effective_bandwidth_hz(&one), 135_000.0);

        assert_eq!(bandwidth_share_hz(&cfg, 1).unwrap(), 35_910_000.0);
        assert_eq!(bandwidth_share_hz(&cfg, 2).unwrap(), 17_955_000.0);
        assert_eq!(bandwidth_share_hz(&cfg, 5).unwrap(), 7_182_000.0);
        assert!(matches!(bandwidth_share_hz(&cfg, 0), Err(Error::ZeroLoad)));
    }

    #[test]
    fn ue_capacity_examples() {
        let cfg = ModelConfig::default();
        assert_relative_eq!(
            ue_capacity(6.4, &cfg, 1).unwrap(),
            229.824e6,
            max_relative = 1e-12
        );
        assert_eq!(ue_capacity(0.0, &cfg, 3).unwrap(), 0.0);
        assert!((ue_capacity(2.72, &cfg, 2).unwrap() / 1e6 - 48.84).abs() < 0.01);
        assert!(ue_capacity(1.0, &cfg, 0).is_err());
        assert!(ue_capacity(-0.1, &cfg, 1).is_err());
    }

    #[test]
    fn single_point_chain() {
        // PL 109.73 dB, RSRP -85.73 dBm, noise -107.99 dBm
        let s = scenario(&[(0.0, 0.0)]);
        let cell = [Point3::new(1000.0, 0.0, 25.0)];
        let cfg = ModelConfig::default();
        let r = aggregate_capacity(
            &s,
            &cell,
            &AssociationMatrix::single_cell(1),
            &cfg,
            &SeRegression::default(),
        )
        .unwrap();
        assert!(
            (r.per_ue_sinr[0] - 22.25).abs() < 0.1,
            "{}",
            r.per_ue_sinr[0]
        );
        assert!((r.per_ue_se[0] - 4.91).abs() < 0.03, "{}", r.per_ue_se[0]);
        assert!(
            (r.aggregate_capacity / 1e6 - 176.3).abs() < 1.5,
            "{}",
            r.aggregate_capacity
        );
        assert_eq!(r.per_cell_load, vec![1]);
    }

    #[test]
    fn symmetric_pair_has_identical_capacities() {
        let s = scenario(&[(-300.0, 0.0), (300.0, 0.0)]);
        let cell = [Point3::new(0.0, 0.0, 25.0)];
        let r = aggregate_capacity(
            &s,
            &cell,
            &AssociationMatrix::single_cell(2),
            &ModelConfig::default(),
            &SeRegression::default(),
        )
        .unwrap();
        assert_eq!(r.per_ue_capacity[0], r.per_ue_capacity[1]);
    }

    #[test]
    fn floored_ue_contributes_zero() {
        // far UE in the noisy bandwidth mode drops below the 0.913 dB floor
        let cfg = ModelConfig {
            noise_bandwidth: NoiseBandwidth::EffectiveData,
            tx_power_dbm: -10.0,
            ..Default::default()
        };
        let s = scenario(&[(0.0, 0.0), (-990.0, -990.0)]);
        let cell = [Point3::new(20.0, 0.0, 25.0)];
        let r = aggregate_capacity(
            &s,
            &cell,
            &AssociationMatrix::single_cell(2),
            &cfg,
            &SeRegression::default(),
        )
        .unwrap();
        assert_eq!(r.per_ue_se[1], 0.0);
        assert_eq!(r.per_ue_capacity[1], 0.0);
        assert_eq!(r.aggregate_capacity, r.per_ue_capacity[0]);
    }

    #[test]
    fn rejects_bad_association_and_distance() {
        let s = scenario(&[(0.0, 0.0), (100.0, 0.0)]);
        let cfg = ModelConfig::default();
        let reg = SeRegression::default();
        let bad = AssociationMatrix::from_rows(&[vec![true], vec![false]]).unwrap();
        assert!(aggregate_capacity(&s, &[Point3::new(50.0, 0.0, 25.0)], &bad, &cfg, &reg).is_err());
        let wrong_shape = AssociationMatrix::single_cell(3);
        assert!(aggregate_capacity(
            &s,
            &[Point3::new(50.0, 0.0, 25.0)],
            &wrong_shape,
            &cfg,
            &reg
        )
        .is_err());
        let on_top = aggregate_capacity(
            &s,
            &[Point3::new(0.0, 0.0, 25.0)],
            &AssociationMatrix::single_cell(2),
            &cfg,
            &reg,
        );
        assert!(matches!(on_top, Err(Error::DistanceOutOfRange { .. })));
    }

    #[test]
    fn doubling_load_reduces_capacity() {
        let cfg = ModelConfig::default();
        let reg = SeRegression::default();
        let cell = Point3::new(0.0, 0.0, 25.0);
        for d in [50.0, 300.0, 700.0, 1500.0] {
            let ue = Point3::new(d, 0.0, 1.5);
            for load in 1..5 {
                let (_, _, one) = link_metrics(&cell, &ue, load, &cfg, &reg).unwrap();
                let (_, _, two) = link_metrics(&cell, &ue, 2 * load, &cfg, &reg).unwrap();
                assert!(two < one, "d={d} load={load}");
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn layout() -> impl Strategy<Value = Vec<(f64, f64)>> {
            prop::collection::vec((-1000.0f64..1000.0, -1000.0f64..1000.0), 1..6)
        }

        proptest! {
            #[test]
            fn aggregate_is_sum_and_permutation_invariant(pts in layout(), rot in 0usize..6) {
                let cfg = ModelConfig::default();
                let reg = SeRegression::default();
                let cell = [Point3::new(1000.0, 1000.0, 25.0)];
                prop_assume!(pts.iter().all(|p| (p.0 - 1000.0).hypot(p.1 - 1000.0) >= 10.0));
                let s = scenario(&pts);
                let a = AssociationMatrix::single_cell(pts.len());
                let r = aggregate_capacity(&s, &cell, &a, &cfg, &reg).unwrap();
                let sum: f64 = r.per_ue_capacity.iter().sum();
                prop_assert!((r.aggregate_capacity - sum).abs() <= 1e-12 * sum.max(1.0));

                let mut rotated = pts.clone();
                rotated.rotate_left(rot % pts.len());
                let r2 = aggregate_capacity(&scenario(&rotated), &cell, &a, &cfg, &reg).unwrap();
                let mut c1 = r.per_ue_capacity.clone();
                let mut c2 = r2.per_ue_capacity.clone();
                c1.sort_by(f64::total_cmp);
                c2.sort_by(f64::total_cmp);
                prop_assert_eq!(c1, c2);
                prop_assert_eq!(r.aggregate_capacity, r2.aggregate_capacity);

                let bound = effective_bandwidth_hz(&cfg) * 6.4 / pts.len() as f64;
                prop_assert!(r.per_ue_capacity.iter().all(|&c| (0.0..=bound).contains(&c)));
            }

            #[test]
            fn capacity_nonincreasing_in_distance(d in 10.0f64..2800.0, step in 0.0f64..50.0) {
                let cfg = ModelConfig::default();
                let reg = SeRegression::default();
                let ue = Point3::new(0.0, 0.0, 1.5);
                let (_, _, near) = link_metrics(&Point3::new(d, 0.0, 25.0), &ue, 1, &cfg, &reg).unwrap();
                let (_, _, far) = link_metrics(&Point3::new(d + step, 0.0, 25.0), &ue, 1, &cfg, &reg).unwrap();
                prop_assert!(far <= near);
            }
        }
    }
}
