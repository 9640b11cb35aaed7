#![allow(dead_code)]

use dcaf::gain::{SyntheticGainModel, SyntheticRows, ValueDistribution};
use dcaf::{ActionSpace, AllocationProblem};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `m` distinct sorted integer costs drawn from `1..=max`.
pub fn random_costs<R: Rng>(rng: &mut R, m: usize, max: usize) -> ActionSpace {
    let mut costs: Vec<f64> = sample(rng, max, m).into_iter().map(|c| (c + 1) as f64).collect();
    costs.sort_by(f64::total_cmp);
    ActionSpace::new(costs).unwrap()
}

/// `v * q^alpha` rows with log-normal(0, sigma) values.
pub fn synthetic_problem<R: Rng>(
    rng: &mut R,
    actions: ActionSpace,
    alpha: f64,
    sigma: f64,
    n: usize,
    budget: f64,
) -> AllocationProblem<SyntheticRows> {
    let model = SyntheticGainModel::new(actions.clone(), alpha).unwrap();
    let rows = SyntheticRows::sample(model, &ValueDistribution::LogNormal { mu: 0.0, sigma }, n, rng);
    AllocationProblem::new(actions, rows, budget).unwrap()
}

/// Large-instance setup: N=1000, M=10 random integer costs, budget half of the
/// all-max cost.
pub fn large_instance(seed: u64) -> AllocationProblem<SyntheticRows> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actions = random_costs(&mut rng, 10, 200);
    let alpha = rng.random_range(0.2..0.8);
    let budget = 0.5 * 1000.0 * actions.max_cost();
    synthetic_problem(&mut rng, actions, alpha, 1.0, 1000, budget)
}

/// Row with non-decreasing gains and non-increasing gain per cost, otherwise
/// arbitrary (not necessarily concave).
pub fn assumption_row<R: Rng>(rng: &mut R, costs: &[f64]) -> Vec<f64> {
    let mut row = Vec::with_capacity(costs.len());
    row.push(rng.random_range(0.0..10.0));
    for j in 1..costs.len() {
        let prev = row[j - 1];
        let top = prev * costs[j] / costs[j - 1];
        row.push(prev + rng.random::<f64>() * (top - prev));
    }
    row
}
