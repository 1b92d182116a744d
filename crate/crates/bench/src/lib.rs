//! Shared fixtures for the criterion benches.

use ngmc_core::{
    generate_scenario, AssociationMatrix, GaParams, ModelConfig, PlacementProblem, SeRegression,
    Volume,
};

/// Seeded random single-cell problem with `n` UEs in the default volume.
pub fn random_problem(n: usize, seed: u64) -> PlacementProblem {
    let scenario = generate_scenario(n, Volume::default(), 1.5, seed).expect("valid scenario");
    PlacementProblem::new(scenario, ModelConfig::default(), SeRegression::default())
        .expect("valid problem")
}

/// A reduced GA budget so one bench iteration stays well under a second.
pub fn bench_ga_params(seed: u64) -> GaParams {
    GaParams {
        population_size: 100,
        max_generations: 200,
        seed,
        ..Default::default()
    }
}

pub fn single_cell(n: usize) -> AssociationMatrix {
    AssociationMatrix::single_cell(n)
}
