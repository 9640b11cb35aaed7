mod common;

use dcaf::gain::{monotonize, FeatureDims, FeatureVector, LinearEstimator};
use dcaf::logio::{read_logs, write_logs, LogRecord};
use dcaf::oracle::{brute_force_mckp, OracleConfig};
use dcaf::{
    dual_mu, dual_value, solve_lambda, ActionRule, ActionSpace, AllocationProblem, GainMatrix, SolverConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::assumption_row;

fn costs_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(1u32..40, 1..6).prop_map(|s| s.into_iter().map(f64::from).collect())
}

/// Instance whose rows satisfy the monotone-gain and diminishing-ratio assumptions.
fn problem_strategy(max_n: usize) -> impl Strategy<Value = AllocationProblem> {
    (costs_strategy(), 1..=max_n, any::<u64>(), 0.0..1.0f64).prop_map(|(costs, n, seed, fraction)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| assumption_row(&mut rng, &costs)).collect();
        let budget = (fraction * n as f64 * costs[costs.len() - 1]).floor();
        let actions = ActionSpace::new(costs).unwrap();
        let m = actions.len();
        AllocationProblem::new(actions, GainMatrix::from_rows(m, &rows).unwrap(), budget).unwrap()
    })
}

fn finite_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, n)
}

proptest! {
    #[test]
    fn cost_and_gain_non_increasing_in_lambda(p in problem_strategy(30), a in 0.0..3.0f64, b in 0.0..3.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let s_lo = p.summarize(&ActionRule::new(lo));
        let s_hi = p.summarize(&ActionRule::new(hi));
        prop_assert!(s_hi.total_cost <= s_lo.total_cost);
        prop_assert!(s_hi.total_gain <= s_lo.total_gain);
    }

    #[test]
    fn per_request_cost_non_increasing_in_lambda(p in problem_strategy(30), a in 0.0..3.0f64, b in 0.0..3.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let cost = |c: Option<usize>| c.map_or(0.0, |j| p.actions().cost(j));
        let x = p.assign(&ActionRule::new(lo));
        let y = p.assign(&ActionRule::new(hi));
        for (cl, ch) in x.choices.iter().zip(&y.choices) {
            prop_assert!(cost(*ch) <= cost(*cl));
        }
    }

    #[test]
    fn dual_mu_matches_chosen_action(row in prop::collection::vec(0.0..100.0f64, 1..6), lambda in 0.0..5.0f64) {
        let actions = ActionSpace::ladder(row.len(), 3.0).unwrap();
        let mu = dual_mu(&row, &actions, lambda).unwrap();
        let net = match ActionRule::new(lambda).choose(&row, &actions) {
            Some(j) => row[j] - lambda * actions.cost(j),
            None => 0.0,
        };
        prop_assert!((mu - net).abs() <= 1e-9 * (1.0 + mu.abs()));
    }

    #[test]
    fn lagrangian_assignment_is_sandwiched_by_oracle(p in problem_strategy(8)) {
        let r = solve_lambda(&p, &SolverConfig::default()).unwrap();
        let (_, opt) = brute_force_mckp(&p, OracleConfig::default()).unwrap();
        let tol = 1e-9 * (1.0 + opt.total_gain);
        if r.achieved_cost <= p.budget() {
            prop_assert!(r.achieved_gain <= opt.total_gain + tol);
            prop_assert!(opt.total_gain - r.achieved_gain <= r.lambda_star * (p.budget() - r.achieved_cost) + tol);
        }
        prop_assert!(opt.total_gain <= dual_value(&p, r.lambda_star) + tol);
    }

    #[test]
    fn solver_respects_budget(p in problem_strategy(40)) {
        let r = solve_lambda(&p, &SolverConfig::default()).unwrap();
        prop_assert!(r.achieved_cost <= p.budget() + r.epsilon);
    }

    #[test]
    fn log_records_round_trip(
        gains in prop::collection::vec(0.0..1e6f64, 1..5),
        features in finite_vec(4),
        logged in prop::option::of((0usize..5, -1e3..1e3f64)),
    ) {
        let record = LogRecord {
            request_id: "r1".into(),
            timestamp: 1_700_000_000,
            features: FeatureVector {
                user_profile: features[..2].to_vec(),
                user_behavior: features[2..3].to_vec(),
                context: vec![],
                system_status: features[3..].to_vec(),
            },
            logged_action: logged.map(|l| l.0),
            realized_gain: logged.map(|l| l.1),
            per_action_gains: Some(gains),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        write_logs(std::slice::from_ref(&record), &path).unwrap();
        prop_assert_eq!(read_logs(&path).unwrap(), vec![record]);
    }

    #[test]
    fn estimator_text_round_trips(w in finite_vec(12), b in finite_vec(3), reg in 0.0..1.0f64) {
        let dims = FeatureDims { user_profile: 2, user_behavior: 1, context: 1, system_status: 0 };
        let weights = w.chunks(4).map(<[f64]>::to_vec).collect();
        let est = LinearEstimator::from_parts(dims, reg, b, weights).unwrap();
        prop_assert_eq!(LinearEstimator::from_text(&est.to_text()).unwrap(), est);
    }

    #[test]
    fn monotonize_is_non_decreasing_and_never_lowers(mut row in finite_vec(8)) {
        let before = row.clone();
        monotonize(&mut row);
        prop_assert!(row.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(row.iter().zip(&before).all(|(a, b)| a >= b));
    }
}
