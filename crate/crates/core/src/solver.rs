//! Bisection search for the Lagrange multiplier that spends the budget.
//!
//! With gains increasing in cost and gain-per-cost diminishing, the total cost of
//! the per-request rule `argmax_j (Q_ij - lambda q_j)` is a non-increasing step
//! function of `lambda`, so the multiplier that meets the budget can be found by
//! halving a bracketing interval.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{
    verify_assumptions, ActionRule, ActionSpace, AllocationProblem, AllocationSummary, GainSource,
};
use crate::error::{invalid, Result};

/// Cost-gap tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Epsilon {
    Absolute(f64),
    /// Fraction of the budget.
    Relative(f64),
}

impl Epsilon {
    pub fn resolve(self, budget: f64) -> f64 {
        let eps = match self {
            Epsilon::Absolute(e) => e,
            Epsilon::Relative(r) => r * budget,
        };
        eps.max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionPolicy {
    /// Refuse to solve when a row breaks the monotonicity assumptions.
    Strict,
    /// Log the violation count and solve anyway.
    Warn,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub epsilon: Epsilon,
    pub max_iterations: usize,
    pub interval_override: Option<(f64, f64)>,
    pub assumptions: AssumptionPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: Epsilon::Relative(1e-3),
            max_iterations: 64,
            interval_override: None,
            assumptions: AssumptionPolicy::Warn,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let e = match self.epsilon {
            Epsilon::Absolute(e) | Epsilon::Relative(e) => e,
        };
        if !(e.is_finite() && e > 0.0) {
            return Err(invalid(format!("epsilon must be positive, got {e}")));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        if let Some((lo, hi)) = self.interval_override {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
                return Err(invalid(format!("invalid lambda interval [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// How the returned multiplier was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveRegime {
    Bisection,
    /// The lower end already fits the budget; no rationing is needed.
    BudgetSlack,
    /// Every gain is zero; nothing is worth serving.
    NothingToServe,
    /// The overridden interval does not bracket the budget.
    NotBracketed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub lambda: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub lambda_star: f64,
    pub achieved_cost: f64,
    pub achieved_gain: f64,
    pub served_count: usize,
    pub budget: f64,
    pub epsilon: f64,
    /// `|achieved_cost - budget|`
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub regime: SolveRegime,
    pub interval: (f64, f64),
    /// Midpoint evaluations in order.
    pub trace: Vec<TracePoint>,
}

/// `(0, max_ij Q_ij / q_j)`, nudged upward until no action has positive net gain,
/// so the upper end always serves nobody.
pub fn default_interval<S: GainSource>(gains: &S, actions: &ActionSpace) -> (f64, f64) {
    let q = actions.costs();
    let mut hi = 0.0f64;
    gains.for_each_row(|_, row| {
        for (g, c) in row.iter().zip(q) {
            hi = hi.max(g / c);
        }
    });
    if hi == 0.0 {
        return (0.0, 0.0);
    }
    loop {
        let mut positive = false;
        gains.for_each_row(|_, row| {
            positive |= row.iter().zip(q).any(|(g, c)| g - hi * c > 0.0);
        });
        if !positive {
            return (0.0, hi);
        }
        hi = hi.next_up();
    }
}

pub fn adjust_budget(budget: f64, qps_regular: f64, qps_current: f64) -> Result<f64> {
    if !(qps_current.is_finite() && qps_current > 0.0) {
        return Err(invalid(format!("current QPS must be positive, got {qps_current}")));
    }
    if !(qps_regular.is_finite() && qps_regular > 0.0) {
        return Err(invalid(format!("regular QPS must be positive, got {qps_regular}")));
    }
    Ok(budget * qps_regular / qps_current)
}

#[derive(Debug, Clone, Copy)]
struct Probe {
    lambda: f64,
    summary: AllocationSummary,
}

impl Probe {
    fn at<S: GainSource>(problem: &AllocationProblem<S>, lambda: f64) -> Self {
        Self {
            lambda,
            summary: problem.summarize(&ActionRule::new(lambda)),
        }
    }

    fn gap(&self, budget: f64) -> f64 {
        (self.summary.total_cost - budget).abs()
    }

    /// Smaller gap, then under budget, then smaller lambda.
    fn better_than(&self, other: &Probe, budget: f64) -> bool {
        let (a, b) = (self.gap(budget), other.gap(budget));
        if a != b {
            return a < b;
        }
        let (au, bu) = (
            self.summary.total_cost <= budget,
            other.summary.total_cost <= budget,
        );
        if au != bu {
            return au;
        }
        self.lambda < other.lambda
    }
}

fn finish(
    probe: Probe,
    budget: f64,
    epsilon: f64,
    iterations: usize,
    regime: SolveRegime,
    interval: (f64, f64),
    trace: Vec<TracePoint>,
) -> SolverResult {
    let gap = probe.gap(budget);
    SolverResult {
        lambda_star: probe.lambda,
        achieved_cost: probe.summary.total_cost,
        achieved_gain: probe.summary.total_gain,
        served_count: probe.summary.served_count,
        budget,
        epsilon,
        gap,
        iterations,
        converged: gap <= epsilon && regime != SolveRegime::NotBracketed,
        regime,
        interval,
        trace,
    }
}

/// Bisects `lambda` until the selected actions spend the budget within epsilon.
///
/// When no midpoint lands within tolerance the closest feasible probe is returned
/// with `converged = false`; the achieved cost never exceeds `budget + epsilon`
/// unless the interval was overridden and fails to bracket.
pub fn solve_lambda<S: GainSource>(
    problem: &AllocationProblem<S>,
    config: &SolverConfig,
) -> Result<SolverResult> {
    config.validate()?;
    if problem.num_requests() == 0 {
        return Err(invalid("cannot solve an empty request pool"));
    }
    match config.assumptions {
        AssumptionPolicy::Skip => {}
        policy => {
            let report = verify_assumptions(problem.gains(), problem.actions());
            if !report.holds() {
                let count = report.violations.len();
                if policy == AssumptionPolicy::Strict {
                    report.into_result()?;
                }
                warn!("{count} assumption violations in the request pool; bisection may not find the optimum");
            }
        }
    }

    let budget = problem.budget();
    let epsilon = config.epsilon.resolve(budget);
    let (mut lo, mut hi) = config
        .interval_override
        .unwrap_or_else(|| default_interval(problem.gains(), problem.actions()));
    let interval = (lo, hi);
    let feasible = |p: &Probe| p.summary.total_cost <= budget + epsilon;

    if config.interval_override.is_none() && hi == 0.0 {
        let probe = Probe::at(problem, 0.0);
        return Ok(finish(probe, budget, epsilon, 0, SolveRegime::NothingToServe, interval, vec![]));
    }

    let at_lo = Probe::at(problem, lo);
    if feasible(&at_lo) {
        return Ok(finish(at_lo, budget, epsilon, 0, SolveRegime::BudgetSlack, interval, vec![]));
    }
    let at_hi = Probe::at(problem, hi);
    if !feasible(&at_hi) {
        return Ok(finish(at_hi, budget, epsilon, 0, SolveRegime::NotBracketed, interval, vec![]));
    }
    if at_hi.gap(budget) <= epsilon {
        return Ok(finish(at_hi, budget, epsilon, 0, SolveRegime::Bisection, interval, vec![]));
    }

    let mut best = at_hi;
    let mut trace = Vec::with_capacity(config.max_iterations);
    for _ in 0..config.max_iterations {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        let probe = Probe::at(problem, mid);
        trace.push(TracePoint {
            lambda: mid,
            cost: probe.summary.total_cost,
        });
        if feasible(&probe) && probe.better_than(&best, budget) {
            best = probe;
        }
        if probe.gap(budget) <= epsilon {
            break;
        }
        // cost falls as lambda rises: under budget means lambda is too high
        if probe.summary.total_cost <= budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let iterations = trace.len();
    Ok(finish(best, budget, epsilon, iterations, SolveRegime::Bisection, interval, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub total_gain: f64,
    pub total_cost: f64,
    pub served_count: usize,
}

pub fn lambda_sweep<S: GainSource>(
    problem: &AllocationProblem<S>,
    grid: &[f64],
) -> Result<Vec<SweepPoint>> {
    grid.iter()
        .map(|&lambda| {
            if !(lambda.is_finite() && lambda >= 0.0) {
                return Err(invalid(format!("sweep lambda must be >= 0, got {lambda}")));
            }
            let s = problem.summarize(&ActionRule::new(lambda));
            Ok(SweepPoint {
                lambda,
                total_gain: s.total_gain,
                total_cost: s.total_cost,
                served_count: s.served_count,
            })
        })
        .collect()
}

/// `points` evenly spaced values covering `[lo, hi]` inclusive.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![lo],
        _ => (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Uniform sample with replacement, reproducible for a fixed seed.
pub fn sample_pool<T: Clone>(log: &[T], n: usize, seed: u64) -> Result<Vec<T>> {
    if log.is_empty() {
        return Err(invalid("cannot sample from an empty log"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| log[rng.random_range(0..log.len())].clone())
        .collect())
}
