//! Offline comparisons between uniform, random and multiplier-priced allocation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{
    evaluate, ActionRule, AllocationProblem, AllocationSummary, Assignment, GainSource,
};
use crate::error::{invalid, Result};
use crate::solver::{default_interval, solve_lambda, SolverConfig};

/// Every request served with `action`.
pub fn baseline_summary<S: GainSource>(problem: &AllocationProblem<S>, action: usize) -> Result<AllocationSummary> {
    let m = problem.actions().len();
    if action >= m {
        return Err(invalid(format!("baseline action {action} outside 0..{m}")));
    }
    let cost = problem.actions().cost(action);
    let mut s = AllocationSummary::default();
    problem.gains().for_each_row(|_, row| {
        s.total_gain += row[action];
        s.total_cost += cost;
        s.served_count += 1;
    });
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub series: Series,
    /// Baseline action index for the uniform series, else the index of the
    /// baseline point whose cost was used as budget.
    pub action: usize,
    pub lambda: f64,
    pub total_cost: f64,
    pub total_gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    Baseline,
    Dcaf,
}

/// Gain against cost for uniform allocation at every action, and for the priced
/// rule given each of those costs as budget.
pub fn cost_gain_curves<S: GainSource + Clone>(
    problem: &AllocationProblem<S>,
    config: &SolverConfig,
) -> Result<Vec<CurvePoint>> {
    let mut out = Vec::with_capacity(2 * problem.actions().len());
    for j in 0..problem.actions().len() {
        let b = baseline_summary(problem, j)?;
        out.push(CurvePoint {
            series: Series::Baseline,
            action: j,
            lambda: 0.0,
            total_cost: b.total_cost,
            total_gain: b.total_gain,
        });
        let r = solve_lambda(&problem.clone().with_budget(b.total_cost)?, config)?;
        out.push(CurvePoint {
            series: Series::Dcaf,
            action: j,
            lambda: r.lambda_star,
            total_cost: r.achieved_cost,
            total_gain: r.achieved_gain,
        });
    }
    Ok(out)
}

/// Same actions, handed to random requests: equal total cost, no targeting.
pub fn shuffle_assignment(assignment: &Assignment, seed: u64) -> Assignment {
    let mut choices = assignment.choices.clone();
    choices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Assignment { choices }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricedPoint {
    pub lambda: f64,
    pub summary: AllocationSummary,
}

/// Cheapest point on the priced rule's path whose gain reaches `target`: the
/// largest multiplier with `gain >= target`, found by bisection since gain is
/// non-increasing in the multiplier.
pub fn dcaf_cost_at_gain<S: GainSource>(
    problem: &AllocationProblem<S>,
    target: f64,
    max_iterations: usize,
) -> Result<PricedPoint> {
    let gain_at = |lambda: f64| problem.summarize(&ActionRule::new(lambda));
    let top = gain_at(0.0);
    if top.total_gain < target {
        return Err(invalid(format!(
            "target gain {target} exceeds the unconstrained gain {}",
            top.total_gain
        )));
    }
    let (_, mut hi) = default_interval(problem.gains(), problem.actions());
    let mut lo = 0.0;
    let mut best = PricedPoint { lambda: 0.0, summary: top };
    for _ in 0..max_iterations {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        let s = gain_at(mid);
        if s.total_gain >= target {
            lo = mid;
            best = PricedPoint { lambda: mid, summary: s };
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub baseline_action: usize,
    pub baseline: AllocationSummary,
    /// Priced rule with the baseline's total cost as budget.
    pub dcaf_same_cost: PricedPoint,
    /// Priced rule at the smallest cost that matches the baseline's gain.
    pub dcaf_same_gain: PricedPoint,
    /// The same-cost allocation shuffled across requests.
    pub random_same_cost: AllocationSummary,
    /// `1 - dcaf_same_gain.cost / baseline.cost`
    pub cost_saving: f64,
    /// `dcaf_same_cost.gain / baseline.gain - 1`
    pub gain_lift: f64,
}

pub fn compare_with_baseline<S: GainSource + Clone>(
    problem: &AllocationProblem<S>,
    baseline_action: usize,
    config: &SolverConfig,
    seed: u64,
) -> Result<BaselineComparison> {
    let baseline = baseline_summary(problem, baseline_action)?;
    let at_cost = problem.clone().with_budget(baseline.total_cost)?;
    let r = solve_lambda(&at_cost, config)?;
    let assignment = at_cost.assign(&ActionRule::new(r.lambda_star));
    let random_same_cost = evaluate(&shuffle_assignment(&assignment, seed), &at_cost)?;
    let dcaf_same_gain = dcaf_cost_at_gain(problem, baseline.total_gain, 200)?;
    Ok(BaselineComparison {
        baseline_action,
        baseline,
        dcaf_same_cost: PricedPoint {
            lambda: r.lambda_star,
            summary: AllocationSummary {
                total_gain: r.achieved_gain,
                total_cost: r.achieved_cost,
                served_count: r.served_count,
            },
        },
        dcaf_same_gain,
        random_same_cost,
        cost_saving: 1.0 - ratio(dcaf_same_gain.summary.total_cost, baseline.total_cost),
        gain_lift: ratio(r.achieved_gain, baseline.total_gain) - 1.0,
    })
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionAggregate {
    pub action: usize,
    pub cost: f64,
    pub count: usize,
    pub sum_gain: f64,
    pub sum_cost: f64,
}

impl ActionAggregate {
    pub fn gain_per_cost(&self) -> f64 {
        if self.sum_cost > 0.0 {
            self.sum_gain / self.sum_cost
        } else {
            0.0
        }
    }
}

/// Which requests feed each action's totals.
#[derive(Debug, Clone, Copy)]
pub enum AggregateScope<'a> {
    /// Every request, evaluated under every action.
    AllRequests,
    /// Requests the assignment served, evaluated under every action.
    Served(&'a Assignment),
    /// Each action over only the requests assigned to it.
    Chosen(&'a Assignment),
}

/// Per-action gain and cost totals. Under `AllRequests` and `Served` the gain per
/// unit cost inherits the per-row diminishing-returns property exactly.
pub fn per_action_aggregates<S: GainSource>(
    problem: &AllocationProblem<S>,
    scope: AggregateScope<'_>,
) -> Result<Vec<ActionAggregate>> {
    if let AggregateScope::Served(a) | AggregateScope::Chosen(a) = scope {
        evaluate(a, problem)?;
    }
    let actions = problem.actions();
    let mut out: Vec<ActionAggregate> = (0..actions.len())
        .map(|j| ActionAggregate {
            action: j,
            cost: actions.cost(j),
            count: 0,
            sum_gain: 0.0,
            sum_cost: 0.0,
        })
        .collect();
    let add = |agg: &mut ActionAggregate, g: f64| {
        agg.count += 1;
        agg.sum_gain += g;
        agg.sum_cost += agg.cost;
    };
    problem.gains().for_each_row(|i, row| match scope {
        AggregateScope::AllRequests => out.iter_mut().zip(row).for_each(|(agg, &g)| add(agg, g)),
        AggregateScope::Served(a) => {
            if a.choices[i].is_some() {
                out.iter_mut().zip(row).for_each(|(agg, &g)| add(agg, g));
            }
        }
        AggregateScope::Chosen(a) => {
            if let Some(j) = a.choices[i] {
                add(&mut out[j], row[j]);
            }
        }
    });
    Ok(out)
}
