//! Real-coded genetic algorithm.
//!
//! Each (generation, individual) pair draws from its own ChaCha stream, so
//! the result does not depend on how rayon schedules the work.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_solution, evaluate_fitness, Genome, PlacementProblem, PlacementSolution};
use crate::baseline::geo_mean_position;
use crate::channel::{distance_2d, Point3};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaParams {
    pub population_size: usize,
    pub max_generations: usize,
    pub stall_tolerance: f64,
    pub stall_generations: usize,
    pub crossover_rate: f64,
    /// Initial Gaussian mutation step, meters.
    pub mutation_sigma: f64,
    /// Per-generation multiplier on `mutation_sigma`.
    pub sigma_decay: f64,
    /// BLX-alpha extension factor.
    pub blend_alpha: f64,
    pub tournament_size: usize,
    pub elite_count: usize,
    pub seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            population_size: 200,
            max_generations: 5000,
            stall_tolerance: 1e-30,
            stall_generations: 50,
            crossover_rate: 0.8,
            mutation_sigma: 50.0,
            sigma_decay: 0.99,
            blend_alpha: 0.5,
            tournament_size: 3,
            elite_count: 2,
            seed: 0,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.population_size < 2 {
            return bad("population_size must be at least 2");
        }
        if self.max_generations == 0 {
            return bad("max_generations must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return bad("crossover_rate must be in [0, 1]");
        }
        if !(self.mutation_sigma > 0.0 && self.mutation_sigma.is_finite()) {
            return bad("mutation_sigma must be positive");
        }
        if !(self.sigma_decay > 0.0 && self.sigma_decay <= 1.0) {
            return bad("sigma_decay must be in (0, 1]");
        }
        if !(self.blend_alpha >= 0.0 && self.blend_alpha.is_finite()) {
            return bad("blend_alpha must be non-negative");
        }
        if !(self.stall_tolerance >= 0.0) {
            return bad("stall_tolerance must be non-negative");
        }
        if self.stall_generations == 0 {
            return bad("stall_generations must be at least 1");
        }
        if self.tournament_size == 0 {
            return bad("tournament_size must be at least 1");
        }
        if self.elite_count >= self.population_size {
            return bad("elite_count must be below population_size");
        }
        Ok(())
    }
}

fn stream(seed: u64, generation: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | index as u64);
    rng
}

fn random_genome(problem: &PlacementProblem, rng: &mut ChaCha8Rng) -> Genome {
    let v = problem.scenario.volume();
    let positions = (0..problem.ngmc_count)
        .map(|_| {
            let x = rng.random_range(v.x_min..=v.x_max);
            let y = rng.random_range(v.y_min..=v.y_max);
            let z = if problem.free_z {
                rng.random_range(v.z_min..=v.z_max)
            } else {
                problem.fixed_z
            };
            Point3::new(x, y, z)
        })
        .collect();
    Genome {
        positions,
        serving: random_serving(problem, rng),
    }
}

fn random_serving(problem: &PlacementProblem, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if problem.ngmc_count == 1 {
        return Vec::new();
    }
    (0..problem.scenario.len())
        .map(|_| rng.random_range(0..problem.ngmc_count))
        .collect()
}

/// Geo-mean for the first cell, random spots for the rest, each UE on its
/// nearest cell.
fn seeded_genome(problem: &PlacementProblem, rng: &mut ChaCha8Rng) -> Result<Genome> {
    let g = geo_mean_position(&problem.scenario, problem.fixed_z)?;
    let mut positions = vec![g];
    for _ in 1..problem.ngmc_count {
        positions.push(random_genome(problem, rng).positions[0]);
    }
    let serving = if problem.ngmc_count == 1 {
        Vec::new()
    } else {
        problem
            .scenario
            .ues()
            .iter()
            .map(|ue| {
                let d = |c: usize| distance_2d(&positions[c], &ue.position);
                (0..positions.len())
                    .min_by(|&a, &b| d(a).total_cmp(&d(b)))
                    .unwrap_or(0)
            })
            .collect()
    };
    Ok(Genome { positions, serving })
}

fn tournament(fitness: &[f64], k: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..k {
        let i = rng.random_range(0..fitness.len());
        if fitness[i] > fitness[best] || (fitness[i] == fitness[best] && i < best) {
            best = i;
        }
    }
    best
}

fn blend(a: f64, b: f64, alpha: f64, rng: &mut ChaCha8Rng) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let d = hi - lo;
    if d == 0.0 {
        return a;
    }
    rng.random_range(lo - alpha * d..=hi + alpha * d)
}

fn offspring(
    problem: &PlacementProblem,
    params: &GaParams,
    pop: &[Genome],
    fitness: &[f64],
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Genome {
    let p1 = &pop[tournament(fitness, params.tournament_size, rng)];
    let p2 = &pop[tournament(fitness, params.tournament_size, rng)];
    let mut child = p1.clone();
    if rng.random::<f64>() < params.crossover_rate {
        for (c, b) in child.positions.iter_mut().zip(&p2.positions) {
            c.x = blend(c.x, b.x, params.blend_alpha, rng);
            c.y = blend(c.y, b.y, params.blend_alpha, rng);
            if problem.free_z {
                c.z = blend(c.z, b.z, params.blend_alpha, rng);
            }
        }
        for (s, o) in child.serving.iter_mut().zip(&p2.serving) {
            if rng.random::<bool>() {
                *s = *o;
            }
        }
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated positive");
    for c in &mut child.positions {
        c.x += normal.sample(rng);
        c.y += normal.sample(rng);
        if problem.free_z {
            c.z += normal.sample(rng);
        }
    }
    if problem.ngmc_count > 1 {
        let rate = 1.0 / child.serving.len() as f64;
        for s in &mut child.serving {
            if rng.random::<f64>() < rate {
                *s = rng.random_range(0..problem.ngmc_count);
            }
        }
    }
    problem.repair(&child)
}

fn best_index(fitness: &[f64]) -> usize {
    let mut best = 0;
    for (i, f) in fitness.iter().enumerate() {
        if *f > fitness[best] {
            best = i;
        }
    }
    best
}

/// Maximise aggregate capacity over cell positions (and associations when
/// there is more than one cell).
pub fn solve_ga(problem: &PlacementProblem, params: &GaParams) -> Result<PlacementSolution> {
    if problem.scenario.is_empty() {
        return Err(Error::EmptyScenario);
    }
    problem.validate()?;
    params.validate()?;

    let n = params.population_size;
    let mut pop: Vec<Genome> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(params.seed, 0, i);
            if i == 0 {
                seeded_genome(problem, &mut rng).map(|g| problem.repair(&g))
            } else {
                Ok(random_genome(problem, &mut rng))
            }
        })
        .collect::<Result<_>>()?;
    let mut fitness: Vec<f64> = pop
        .par_iter()
        .map(|g| evaluate_fitness(g, problem))
        .collect();
    let mut evaluations = n;

    let mut best_i = best_index(&fitness);
    let mut best = (pop[best_i].clone(), fitness[best_i]);
    let mut anchor = best.1;
    let mut stall = 0;
    let mut generations_run = 0;
    let mut sigma = params.mutation_sigma;

    for gen in 1..=params.max_generations {
        generations_run = gen;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));

        let elites = params.elite_count;
        let children: Vec<(Genome, f64)> = (elites..n)
            .into_par_iter()
            .map(|j| {
                let mut rng = stream(params.seed, gen, j);
                let child = offspring(problem, params, &pop, &fitness, sigma, &mut rng);
                let f = evaluate_fitness(&child, problem);
                (child, f)
            })
            .collect();
        evaluations += children.len();

        let mut next_pop = Vec::with_capacity(n);
        let mut next_fit = Vec::with_capacity(n);
        for &e in &order[..elites] {
            next_pop.push(pop[e].clone());
            next_fit.push(fitness[e]);
        }
        for (g, f) in children {
            next_pop.push(g);
            next_fit.push(f);
        }
        pop = next_pop;
        fitness = next_fit;

        best_i = best_index(&fitness);
        if fitness[best_i] > best.1 {
            best = (pop[best_i].clone(), fitness[best_i]);
        }
        if best.1 - anchor > params.stall_tolerance {
            anchor = best.1;
            stall = 0;
        } else {
            stall += 1;
            if stall >= params.stall_generations {
                break;
            }
        }
        sigma *= params.sigma_decay;
    }

    build_solution(problem, &best.0, generations_run, evaluations)
}
