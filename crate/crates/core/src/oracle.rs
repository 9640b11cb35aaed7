//! Exact dynamic-programming solver for small multiple-choice knapsack instances.
//!
//! Used to measure how far the Lagrangian assignment sits from the true integral
//! optimum. Costs are integerized at resolution `1 / cost_scale`.

use crate::allocation::{evaluate, AllocationProblem, AllocationSummary, Assignment, GainSource};
use crate::error::{invalid, DcafError, Result};

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub cost_scale: u32,
    /// Upper bound on `N * (capacity + 1) * (M + 1)` DP cell updates.
    pub work_limit: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            cost_scale: 1,
            work_limit: 50_000_000,
        }
    }
}

const NONE: u16 = 0;

/// Provably optimal assignment for the integerized instance.
///
/// Each cost is rounded up to the next multiple of `1 / cost_scale` and the budget
/// rounded down, so the returned assignment is feasible for the real-valued costs
/// and optimal whenever the costs are already multiples of the resolution.
pub fn brute_force_mckp<S: GainSource>(
    problem: &AllocationProblem<S>,
    config: OracleConfig,
) -> Result<(Assignment, AllocationSummary)> {
    if config.cost_scale == 0 {
        return Err(invalid("cost_scale must be positive"));
    }
    let m = problem.actions().len();
    if m >= u16::MAX as usize {
        return Err(invalid("too many actions for the exact oracle"));
    }
    let scale = config.cost_scale as f64;
    let weights: Vec<usize> = problem
        .actions()
        .costs()
        .iter()
        .map(|&q| (q * scale - 1e-9).ceil().max(1.0) as usize)
        .collect();
    let capacity_f = (problem.budget() * scale + 1e-9).floor();
    let n = problem.num_requests();
    let work = n as u128 * (capacity_f as u128 + 1) * (m as u128 + 1);
    if capacity_f > usize::MAX as f64 / 2.0 || work > config.work_limit as u128 {
        return Err(DcafError::WorkLimitExceeded {
            work,
            limit: config.work_limit,
        });
    }
    let capacity = capacity_f as usize;
    let width = capacity + 1;

    // best[c]: max gain over processed requests with integer cost <= c
    let mut best = vec![0.0f64; width];
    let mut next = vec![0.0f64; width];
    let mut choice = vec![NONE; n * width];
    problem.gains().for_each_row(|i, row| {
        let picks = &mut choice[i * width..(i + 1) * width];
        for c in 0..width {
            let mut v = best[c];
            let mut pick = NONE;
            for (j, &w) in weights.iter().enumerate() {
                if w > c {
                    break;
                }
                let cand = best[c - w] + row[j];
                if cand > v {
                    v = cand;
                    pick = j as u16 + 1;
                }
            }
            next[c] = v;
            picks[c] = pick;
        }
        std::mem::swap(&mut best, &mut next);
    });

    let mut choices = vec![None; n];
    let mut c = capacity;
    for i in (0..n).rev() {
        let pick = choice[i * width + c];
        if pick != NONE {
            let j = (pick - 1) as usize;
            choices[i] = Some(j);
            c -= weights[j];
        }
    }
    let assignment = Assignment { choices };
    let summary = evaluate(&assignment, problem)?;
    Ok((assignment, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{ActionSpace, GainMatrix};

    fn problem(budget: f64) -> AllocationProblem {
        let m = GainMatrix::from_rows(2, &[[1.0, 1.5], [2.0, 3.0]]).unwrap();
        AllocationProblem::new(ActionSpace::new(vec![1.0, 2.0]).unwrap(), m, budget).unwrap()
    }

    /// Enumerates all (M+1)^N assignments.
    fn enumerate_best(p: &AllocationProblem) -> f64 {
        let n = p.num_requests();
        let m = p.actions().len();
        let mut best = 0.0f64;
        let total = (m + 1).pow(n as u32);
        for code in 0..total {
            let mut k = code;
            let mut choices = Vec::with_capacity(n);
            for _ in 0..n {
                let d = k % (m + 1);
                k /= m + 1;
                choices.push(if d == 0 { None } else { Some(d - 1) });
            }
            let s = evaluate(&Assignment { choices }, p).unwrap();
            if s.total_cost <= p.budget() {
                best = best.max(s.total_gain);
            }
        }
        best
    }

    #[test]
    fn two_request_instance() {
        let p = problem(3.0);
        assert_eq!(enumerate_best(&p), 4.0);
        let (a, s) = brute_force_mckp(&p, OracleConfig::default()).unwrap();
        assert_eq!(a.choices, vec![Some(0), Some(1)]);
        assert_eq!(s.total_gain, 4.0);
        assert_eq!(s.total_cost, 3.0);
    }

    #[test]
    fn zero_budget_serves_nobody() {
        let (a, s) = brute_force_mckp(&problem(0.0), OracleConfig::default()).unwrap();
        assert_eq!(a, Assignment::none(2));
        assert_eq!(s.total_gain, 0.0);
    }

    #[test]
    fn slack_budget_takes_max_gain_actions() {
        let (a, s) = brute_force_mckp(&problem(4.0), OracleConfig::default()).unwrap();
        assert_eq!(a.choices, vec![Some(1), Some(1)]);
        assert_eq!(s.total_gain, 4.5);
    }

    #[test]
    fn work_limit_is_enforced() {
        let cfg = OracleConfig {
            cost_scale: 1000,
            work_limit: 100,
        };
        assert!(matches!(
            brute_force_mckp(&problem(3.0), cfg),
            Err(DcafError::WorkLimitExceeded { .. })
        ));
    }

    #[test]
    fn fractional_costs_with_scale() {
        let m = GainMatrix::from_rows(2, &[[1.0, 1.5], [2.0, 3.0]]).unwrap();
        let p = AllocationProblem::new(ActionSpace::new(vec![0.5, 1.0]).unwrap(), m, 1.5).unwrap();
        let (_, s) = brute_force_mckp(&p, OracleConfig { cost_scale: 2, ..Default::default() }).unwrap();
        assert_eq!(s.total_gain, 4.0);
        assert_eq!(s.total_cost, 1.5);
    }
}
