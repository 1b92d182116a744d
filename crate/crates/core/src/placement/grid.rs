//! Exhaustive lattice search for a single cell.

use rayon::prelude::*;

use super::{build_solution, evaluate_fitness, Genome, PlacementProblem, PlacementSolution};
use crate::channel::Point3;
use crate::{Error, Result};

/// Number of lattice points along `[lo, hi]` at `step`, ends included.
fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

fn candidates(problem: &PlacementProblem, step: f64) -> Vec<Point3> {
    let v = problem.scenario.volume();
    let z = problem.fixed_z;
    let xs = axis(v.x_min, v.x_max, step);
    let ys = axis(v.y_min, v.y_max, step);
    let mut out = Vec::with_capacity(xs.len() * ys.len() + 8 * problem.scenario.len());
    for &x in &xs {
        for &y in &ys {
            out.push(Point3::new(x, y, z));
        }
    }
    // Nudge outward so rounding never lands a ring point inside d2d_min.
    let r = problem.cfg.d2d_min * (1.0 + 1e-9);
    for ue in problem.scenario.ues() {
        for k in 0..8 {
            let a = k as f64 * std::f64::consts::FRAC_PI_4;
            let p = Point3::new(ue.position.x + r * a.cos(), ue.position.y + r * a.sin(), z);
            if v.contains(&p) {
                out.push(p);
            }
        }
    }
    out
}

/// Best single-cell position on a lattice over the volume at `fixed_z`,
/// plus eight points on the minimum-distance ring of each UE.
///
/// Ties go to the smallest x, then the smallest y.
pub fn grid_search(problem: &PlacementProblem, step: f64) -> Result<PlacementSolution> {
    if problem.ngmc_count != 1 {
        return Err(Error::Unsupported(format!(
            "grid search handles one cell, problem has {}",
            problem.ngmc_count
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "grid step must be positive, got {step}"
        )));
    }
    if problem.scenario.is_empty() {
        return Err(Error::EmptyScenario);
    }
    problem.validate()?;

    let points = candidates(problem, step);
    let scored: Vec<f64> = points
        .par_iter()
        .map(|p| evaluate_fitness(&Genome::single(*p), problem))
        .collect();
    let mut best = 0;
    for i in 1..points.len() {
        let (f, b) = (scored[i], scored[best]);
        let (p, q) = (&points[i], &points[best]);
        if f > b || (f == b && (p.x < q.x || (p.x == q.x && p.y < q.y))) {
            best = i;
        }
    }
    build_solution(problem, &Genome::single(points[best]), 0, points.len())
}
