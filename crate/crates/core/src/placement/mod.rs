//! Cell placement: feasibility rules, the fitness function, a real-coded
//! genetic algorithm, and an exhaustive grid oracle for one cell.
//!
//! Infeasible candidates are handled in two ways. Positions outside the
//! volume are clamped back onto it before evaluation. A served UE closer
//! than `d2d_min` (or farther than `d2d_max`) gives the whole candidate a
//! fitness of zero.

mod ga;
mod grid;

pub use ga::{solve_ga, GaParams};
pub use grid::grid_search;

use serde::{Deserialize, Serialize};

use crate::capacity::{self, AssociationMatrix, CapacityReport};
use crate::channel::{distance_2d, ModelConfig, Point3};
use crate::link::SeRegression;
use crate::scenario::Scenario;
use crate::{Error, Result};

/// Everything needed to score a candidate placement.
#[derive(Debug, Clone)]
pub struct PlacementProblem {
    pub scenario: Scenario,
    pub cfg: ModelConfig,
    pub reg: SeRegression,
    pub ngmc_count: usize,
    /// Cell height when `free_z` is off.
    pub fixed_z: f64,
    /// Let the solver move cells vertically inside the volume.
    pub free_z: bool,
}

impl PlacementProblem {
    /// Cells pinned at the configured base-station height; cell count taken
    /// from the scenario.
    pub fn new(scenario: Scenario, cfg: ModelConfig, reg: SeRegression) -> Result<Self> {
        let p = Self {
            ngmc_count: scenario.ngmc_count(),
            fixed_z: cfg.h_bs,
            free_z: false,
            scenario,
            cfg,
            reg,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        self.reg.validate()?;
        self.scenario.validate()?;
        if self.ngmc_count == 0 {
            return Err(Error::InvalidParameter(
                "ngmc_count must be at least 1".into(),
            ));
        }
        let v = self.scenario.volume();
        if !(v.z_min..=v.z_max).contains(&self.fixed_z) {
            return Err(Error::InvalidParameter(format!(
                "fixed_z {} outside volume z range [{}, {}]",
                self.fixed_z, v.z_min, v.z_max
            )));
        }
        Ok(())
    }

    /// Clamp every cell into the volume and pin z unless `free_z`.
    pub fn repair(&self, genome: &Genome) -> Genome {
        let v = self.scenario.volume();
        let positions = genome
            .positions
            .iter()
            .map(|p| {
                let p = v.clamp(*p);
                if self.free_z {
                    p
                } else {
                    p.with_z(self.fixed_z)
                }
            })
            .collect();
        Genome {
            positions,
            serving: genome.serving.clone(),
        }
    }

    /// Association encoded by a genome (all UEs on cell 0 when M = 1).
    pub fn association(&self, genome: &Genome) -> Result<AssociationMatrix> {
        if self.ngmc_count == 1 {
            Ok(AssociationMatrix::single_cell(self.scenario.len()))
        } else {
            AssociationMatrix::from_serving(&genome.serving, self.ngmc_count)
        }
    }

    fn check_shape(&self, genome: &Genome) -> Result<()> {
        if genome.positions.len() != self.ngmc_count {
            return Err(Error::InvalidParameter(format!(
                "genome has {} cells, problem has {}",
                genome.positions.len(),
                self.ngmc_count
            )));
        }
        if self.ngmc_count > 1 && genome.serving.len() != self.scenario.len() {
            return Err(Error::InvalidParameter(format!(
                "genome has {} association genes, scenario has {} UEs",
                genome.serving.len(),
                self.scenario.len()
            )));
        }
        Ok(())
    }
}

/// Decision variables: one position per cell and, for more than one cell,
/// a serving-cell index per UE.
#[derive(Debug, Clone, PartialEq)]
pub struct Genome {
    pub positions: Vec<Point3>,
    /// Empty for single-cell problems.
    pub serving: Vec<usize>,
}

impl Genome {
    pub fn single(position: Point3) -> Self {
        Self {
            positions: vec![position],
            serving: Vec::new(),
        }
    }
}

/// A broken constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// UE is associated with `count` cells instead of exactly one.
    Association {
        ue: usize,
        count: usize,
    },
    DistanceBelowMin {
        ue: usize,
        cell: usize,
        d2d: f64,
    },
    DistanceAboveMax {
        ue: usize,
        cell: usize,
        d2d: f64,
    },
    SpectralEfficiency {
        ue: usize,
        se: f64,
    },
    OutsideVolume {
        cell: usize,
    },
}

/// List every violated constraint for a placement; empty means feasible.
pub fn check_feasibility(
    positions: &[Point3],
    assoc: &AssociationMatrix,
    problem: &PlacementProblem,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let ues = problem.scenario.ues();
    let volume = problem.scenario.volume();
    for (c, p) in positions.iter().enumerate() {
        if !volume.contains(p) {
            out.push(Violation::OutsideVolume { cell: c });
        }
    }
    let loads = assoc.loads();
    for (u, ue) in ues.iter().enumerate().take(assoc.ue_count()) {
        let count = assoc.row_sum(u);
        if count != 1 {
            out.push(Violation::Association { ue: u, count });
        }
        for (c, pos) in positions.iter().enumerate().take(assoc.cell_count()) {
            if !assoc.get(u, c) {
                continue;
            }
            let d2d = distance_2d(pos, &ue.position);
            if !(d2d >= problem.cfg.d2d_min) {
                out.push(Violation::DistanceBelowMin {
                    ue: u,
                    cell: c,
                    d2d,
                });
                continue;
            }
            if d2d > problem.cfg.d2d_max {
                out.push(Violation::DistanceAboveMax {
                    ue: u,
                    cell: c,
                    d2d,
                });
                continue;
            }
            if let Ok((_, se, _)) =
                capacity::link_metrics(pos, &ue.position, loads[c], &problem.cfg, &problem.reg)
            {
                if !(0.0..=problem.reg.se_cap).contains(&se) {
                    out.push(Violation::SpectralEfficiency { ue: u, se });
                }
            }
        }
    }
    out
}

/// Aggregate capacity of a genome after repair; zero if any served UE is
/// outside the model's distance range.
pub fn evaluate_fitness(genome: &Genome, problem: &PlacementProblem) -> f64 {
    if problem.check_shape(genome).is_err() {
        return 0.0;
    }
    let g = problem.repair(genome);
    let Ok(assoc) = problem.association(&g) else {
        return 0.0;
    };
    if !served_distances_ok(&g, &assoc, problem) {
        return 0.0;
    }
    capacity::aggregate_capacity(
        &problem.scenario,
        &g.positions,
        &assoc,
        &problem.cfg,
        &problem.reg,
    )
    .map(|r| r.aggregate_capacity)
    .unwrap_or(0.0)
}

fn served_distances_ok(g: &Genome, assoc: &AssociationMatrix, problem: &PlacementProblem) -> bool {
    problem.scenario.ues().iter().enumerate().all(|(u, ue)| {
        assoc.serving_cell(u).is_some_and(|c| {
            let d = distance_2d(&g.positions[c], &ue.position);
            d >= problem.cfg.d2d_min && d <= problem.cfg.d2d_max
        })
    })
}

/// Best placement found by a solver.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementSolution {
    pub positions: Vec<Point3>,
    pub assoc: AssociationMatrix,
    pub report: CapacityReport,
    /// Aggregate capacity, bit/s.
    pub fitness: f64,
    pub generations_run: usize,
    pub evaluations: usize,
    pub feasible: bool,
}

impl PlacementSolution {
    /// Serving cell per UE.
    pub fn serving(&self) -> Vec<usize> {
        (0..self.assoc.ue_count())
            .map(|u| self.assoc.serving_cell(u).unwrap_or(0))
            .collect()
    }
}

/// Score one placement without searching: repaired, checked, and evaluated.
/// An infeasible placement comes back with `feasible = false` and zero
/// capacity rather than an error.
pub fn evaluate_placement(
    problem: &PlacementProblem,
    genome: &Genome,
) -> Result<PlacementSolution> {
    problem.validate()?;
    problem.check_shape(genome)?;
    build_solution(problem, genome, 0, 1)
}

pub(crate) fn build_solution(
    problem: &PlacementProblem,
    genome: &Genome,
    generations_run: usize,
    evaluations: usize,
) -> Result<PlacementSolution> {
    let g = problem.repair(genome);
    let assoc = problem.association(&g)?;
    let violations = check_feasibility(&g.positions, &assoc, problem);
    let feasible = violations.is_empty();
    let report = if feasible {
        capacity::aggregate_capacity(
            &problem.scenario,
            &g.positions,
            &assoc,
            &problem.cfg,
            &problem.reg,
        )?
    } else {
        let n = problem.scenario.len();
        CapacityReport {
            per_ue_capacity: vec![0.0; n],
            per_ue_sinr: vec![f64::NEG_INFINITY; n],
            per_ue_se: vec![0.0; n],
            per_cell_load: assoc.loads(),
            aggregate_capacity: 0.0,
        }
    };
    Ok(PlacementSolution {
        fitness: report.aggregate_capacity,
        positions: g.positions,
        assoc,
        report,
        generations_run,
        evaluations,
        feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::geo_mean_position;
    use crate::channel::Volume;
    use crate::scenario::Ue;

    pub(crate) fn problem(points: &[(f64, f64)]) -> PlacementProblem {
        let ues = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Ue::new(format!("ue{}", i + 1), Point3::new(x, y, 1.5)))
            .collect();
        let s = Scenario::new("t", Volume::default(), 1, ues).unwrap();
        PlacementProblem::new(s, ModelConfig::default(), SeRegression::default()).unwrap()
    }

    #[test]
    fn feasibility_examples() {
        let p = problem(&[(0.0, 0.0), (400.0, 0.0)]);
        let a = AssociationMatrix::single_cell(2);
        let above = [Point3::new(0.0, 0.0, 25.0)];
        let v = check_feasibility(&above, &a, &p);
        assert!(
            matches!(v[..], [Violation::DistanceBelowMin { ue: 0, cell: 0, .. }]),
            "{v:?}"
        );

        let mid = [Point3::new(200.0, 0.0, 25.0)];
        assert!(check_feasibility(&mid, &a, &p).is_empty());

        let empty_row = AssociationMatrix::from_rows(&[vec![true], vec![false]]).unwrap();
        let v = check_feasibility(&mid, &empty_row, &p);
        assert_eq!(v, vec![Violation::Association { ue: 1, count: 0 }]);

        let outside = [Point3::new(1200.0, 0.0, 25.0)];
        assert!(check_feasibility(&outside, &a, &p).contains(&Violation::OutsideVolume { cell: 0 }));
    }

    #[test]
    fn fitness_death_penalty_and_repair() {
        let p = problem(&[(0.0, 0.0), (400.0, 0.0)]);
        assert_eq!(
            evaluate_fitness(&Genome::single(Point3::new(0.0, 0.0, 25.0)), &p),
            0.0
        );
        assert_eq!(
            evaluate_fitness(&Genome::single(Point3::new(5.0, 5.0, 25.0)), &p),
            0.0
        );
        // outside the volume gets clamped to the boundary and z pinned
        let far = evaluate_fitness(&Genome::single(Point3::new(5000.0, 0.0, 3.0)), &p);
        let edge = evaluate_fitness(&Genome::single(Point3::new(1000.0, 0.0, 25.0)), &p);
        assert_eq!(far, edge);
        assert!(edge > 0.0);
        // wrong shape scores zero rather than panicking
        assert_eq!(
            evaluate_fitness(
                &Genome {
                    positions: vec![],
                    serving: vec![]
                },
                &p
            ),
            0.0
        );
    }

    #[test]
    fn fitness_at_geo_mean_equals_aggregate_capacity() {
        let p = problem(&[(-300.0, 120.0), (250.0, -40.0), (90.0, 610.0)]);
        let g = geo_mean_position(&p.scenario, 25.0).unwrap();
        let direct = capacity::aggregate_capacity(
            &p.scenario,
            &[g],
            &AssociationMatrix::single_cell(3),
            &p.cfg,
            &p.reg,
        )
        .unwrap();
        assert_eq!(
            evaluate_fitness(&Genome::single(g), &p),
            direct.aggregate_capacity
        );
    }

    #[test]
    fn multi_cell_fitness_uses_association_genes() {
        let ues = vec![
            Ue::new("a", Point3::new(-600.0, 0.0, 1.5)),
            Ue::new("b", Point3::new(600.0, 0.0, 1.5)),
        ];
        let s = Scenario::new("two", Volume::default(), 2, ues).unwrap();
        let p = PlacementProblem::new(s, ModelConfig::default(), SeRegression::default()).unwrap();
        let cells = vec![
            Point3::new(-580.0, 0.0, 25.0),
            Point3::new(580.0, 0.0, 25.0),
        ];
        let near = Genome {
            positions: cells.clone(),
            serving: vec![0, 1],
        };
        let crossed = Genome {
            positions: cells,
            serving: vec![1, 0],
        };
        assert!(evaluate_fitness(&near, &p) > evaluate_fitness(&crossed, &p));
        // each cell alone at full SE cap
        assert!((evaluate_fitness(&near, &p) - 2.0 * 229.824e6).abs() < 1.0);
    }

    #[test]
    fn problem_validation() {
        let mut p = problem(&[(0.0, 0.0)]);
        p.fixed_z = 2000.0;
        assert!(p.validate().is_err());
        p.fixed_z = 25.0;
        p.ngmc_count = 0;
        assert!(p.validate().is_err());
    }
}
