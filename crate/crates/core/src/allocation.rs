//! Knapsack-side domain types and the per-request action rule.
//!
//! A request `i` may take at most one action `j`; action `j` costs `q_j` units of
//! evaluation quota and yields expected gain `Q_ij`. Given a shadow price `lambda`
//! for one unit of quota, each request independently picks the action with the
//! largest positive net gain `Q_ij - lambda * q_j`, or nothing at all.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, DcafError, Result};

/// Candidate actions, indexed in strictly increasing cost order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ActionSpace {
    costs: Vec<f64>,
}

impl ActionSpace {
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        if costs.is_empty() {
            return Err(invalid("action space needs at least one action"));
        }
        for (j, &q) in costs.iter().enumerate() {
            if !(q.is_finite() && q > 0.0) {
                return Err(invalid(format!("action {j} has non-positive cost {q}")));
            }
        }
        if let Some(j) = costs.windows(2).position(|w| w[1] <= w[0]) {
            return Err(invalid(format!(
                "action costs must be strictly increasing (action {} cost {} <= {})",
                j + 1,
                costs[j + 1],
                costs[j]
            )));
        }
        Ok(Self { costs })
    }

    /// Evenly spaced ladder `step, 2*step, ..., m*step`.
    pub fn ladder(m: usize, step: f64) -> Result<Self> {
        Self::new((1..=m).map(|j| j as f64 * step).collect())
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cost(&self, j: usize) -> f64 {
        self.costs[j]
    }

    pub fn min_cost(&self) -> f64 {
        self.costs[0]
    }

    pub fn max_cost(&self) -> f64 {
        self.costs[self.costs.len() - 1]
    }

    /// Index of the most expensive action whose cost does not exceed `cap`.
    pub fn largest_within(&self, cap: f64) -> Option<usize> {
        self.costs.iter().rposition(|&q| q <= cap)
    }

    /// Largest cost change a single request can make when it moves between
    /// adjacent options (NONE counts as cost 0).
    pub fn largest_step(&self) -> f64 {
        self.costs
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(self.costs[0], f64::max)
    }
}

impl TryFrom<Vec<f64>> for ActionSpace {
    type Error = DcafError;

    fn try_from(costs: Vec<f64>) -> Result<Self> {
        Self::new(costs)
    }
}

impl From<ActionSpace> for Vec<f64> {
    fn from(a: ActionSpace) -> Self {
        a.costs
    }
}

/// Expected gains of one request under every action.
#[derive(Debug, Clone, PartialEq)]
pub struct GainRow(Vec<f64>);

impl GainRow {
    pub fn new(gains: Vec<f64>) -> Result<Self> {
        if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(invalid(format!("gains must be finite and non-negative, got {g}")));
        }
        Ok(Self(gains))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for GainRow {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Anything that can stream per-request gain rows in request order.
///
/// Implementations must yield the same rows on every call.
pub trait GainSource {
    fn num_requests(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn for_each_row<F: FnMut(usize, &[f64])>(&self, f: F);
}

/// Row-major materialized gain table.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    actions: usize,
    data: Vec<f64>,
}

impl GainMatrix {
    pub fn new(actions: usize) -> Self {
        Self {
            actions,
            data: Vec::new(),
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(actions: usize, rows: &[R]) -> Result<Self> {
        let mut m = Self::new(actions);
        for row in rows {
            m.push_row(row.as_ref())?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.actions {
            return Err(DcafError::LengthMismatch {
                request: self.len(),
                expected: self.actions,
                found: row.len(),
            });
        }
        if let Some(g) = row.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(invalid(format!(
                "request {}: gains must be finite and non-negative, got {g}",
                self.len()
            )));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.actions).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.actions..(i + 1) * self.actions]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.actions.max(1))
    }
}

impl GainSource for GainMatrix {
    fn num_requests(&self) -> usize {
        self.len()
    }

    fn num_actions(&self) -> usize {
        self.actions
    }

    fn for_each_row<F: FnMut(usize, &[f64])>(&self, mut f: F) {
        for (i, row) in self.rows().enumerate() {
            f(i, row);
        }
    }
}

/// The multiple-choice knapsack instance: N requests, M actions, budget C.
#[derive(Debug, Clone)]
pub struct AllocationProblem<S = GainMatrix> {
    actions: ActionSpace,
    gains: S,
    budget: f64,
}

impl<S: GainSource> AllocationProblem<S> {
    pub fn new(actions: ActionSpace, gains: S, budget: f64) -> Result<Self> {
        if gains.num_requests() == 0 {
            return Err(invalid("allocation problem needs at least one request"));
        }
        if gains.num_actions() != actions.len() {
            return Err(DcafError::LengthMismatch {
                request: 0,
                expected: actions.len(),
                found: gains.num_actions(),
            });
        }
        if !(budget.is_finite() && budget >= 0.0) {
            return Err(invalid(format!("budget must be finite and >= 0, got {budget}")));
        }
        Ok(Self {
            actions,
            gains,
            budget,
        })
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn gains(&self) -> &S {
        &self.gains
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn num_requests(&self) -> usize {
        self.gains.num_requests()
    }

    pub fn with_budget(mut self, budget: f64) -> Result<Self> {
        if !(budget.is_finite() && budget >= 0.0) {
            return Err(invalid(format!("budget must be finite and >= 0, got {budget}")));
        }
        self.budget = budget;
        Ok(self)
    }

    /// Selected actions for every request under `rule`.
    pub fn assign(&self, rule: &ActionRule) -> Assignment {
        let mut choices = Vec::with_capacity(self.num_requests());
        self.gains
            .for_each_row(|_, row| choices.push(rule.choose(row, &self.actions)));
        Assignment { choices }
    }

    /// Totals of the assignment `rule` would produce, without materializing it.
    pub fn summarize(&self, rule: &ActionRule) -> AllocationSummary {
        let mut s = AllocationSummary::default();
        self.gains.for_each_row(|_, row| {
            if let Some(j) = rule.choose(row, &self.actions) {
                s.total_gain += row[j];
                s.total_cost += self.actions.cost(j);
                s.served_count += 1;
            }
        });
        s
    }

    /// Sum of each request's best gain and the matching cost (the `lambda = 0` end).
    pub fn unconstrained(&self) -> AllocationSummary {
        self.summarize(&ActionRule::new(0.0))
    }
}

/// One entry per request: `Some(j)` for action `j`, `None` for no action.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Assignment {
    pub choices: Vec<Option<usize>>,
}

impl Assignment {
    pub fn none(n: usize) -> Self {
        Self {
            choices: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AllocationSummary {
    pub total_gain: f64,
    pub total_cost: f64,
    pub served_count: usize,
}

/// Per-request decision rule: shadow price, optional MaxPower cap and optional floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionRule {
    pub lambda: f64,
    pub max_power: Option<f64>,
    /// Serve the cheapest action instead of returning `None`.
    pub floor_action: bool,
}

impl ActionRule {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            max_power: None,
            floor_action: false,
        }
    }

    pub fn with_max_power(mut self, cap: Option<f64>) -> Self {
        self.max_power = cap;
        self
    }

    pub fn with_floor(mut self, floor: bool) -> Self {
        self.floor_action = floor;
        self
    }

    /// Assumes `row.len() == actions.len()`; see [`select_action`] for the checked form.
    pub fn choose(&self, row: &[f64], actions: &ActionSpace) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (j, (&gain, &cost)) in row.iter().zip(actions.costs()).enumerate() {
            if self.max_power.is_some_and(|cap| cost > cap) {
                break;
            }
            let net = gain - self.lambda * cost;
            // strict comparisons: zero-net actions are skipped and ties keep the cheaper index
            if net > 0.0 && best.is_none_or(|(_, b)| net > b) {
                best = Some((j, net));
            }
        }
        match best {
            Some((j, _)) => Some(j),
            None if self.floor_action => Some(0),
            None => None,
        }
    }
}

fn check_row(row: &[f64], actions: &ActionSpace) -> Result<()> {
    if row.len() != actions.len() {
        return Err(DcafError::LengthMismatch {
            request: 0,
            expected: actions.len(),
            found: row.len(),
        });
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    Ok(())
}

/// `argmax_j (Q_ij - lambda q_j)` over actions within `max_power` with positive net gain.
pub fn select_action(
    row: &[f64],
    actions: &ActionSpace,
    lambda: f64,
    max_power: Option<f64>,
) -> Result<Option<usize>> {
    check_row(row, actions)?;
    check_lambda(lambda)?;
    Ok(ActionRule::new(lambda)
        .with_max_power(max_power)
        .choose(row, actions))
}

/// Per-request dual value `max(0, max_j (Q_ij - lambda q_j))`.
pub fn dual_mu(row: &[f64], actions: &ActionSpace, lambda: f64) -> Result<f64> {
    check_row(row, actions)?;
    check_lambda(lambda)?;
    Ok(mu_unchecked(row, actions, lambda))
}

pub(crate) fn mu_unchecked(row: &[f64], actions: &ActionSpace, lambda: f64) -> f64 {
    row.iter()
        .zip(actions.costs())
        .map(|(&g, &q)| g - lambda * q)
        .fold(0.0, f64::max)
}

/// Lagrangian dual bound `lambda C + sum_i mu_i`; never below the integral optimum.
pub fn dual_value<S: GainSource>(problem: &AllocationProblem<S>, lambda: f64) -> f64 {
    let mut total = lambda * problem.budget();
    problem
        .gains()
        .for_each_row(|_, row| total += mu_unchecked(row, problem.actions(), lambda));
    total
}

pub fn evaluate<S: GainSource>(
    assignment: &Assignment,
    problem: &AllocationProblem<S>,
) -> Result<AllocationSummary> {
    let n = problem.num_requests();
    if assignment.len() != n {
        return Err(invalid(format!(
            "assignment has {} entries for {n} requests",
            assignment.len()
        )));
    }
    let m = problem.actions().len();
    if let Some((request, index)) = assignment
        .choices
        .iter()
        .enumerate()
        .find_map(|(i, c)| c.filter(|&j| j >= m).map(|j| (i, j)))
    {
        return Err(DcafError::ActionOutOfRange {
            request,
            index,
            actions: m,
        });
    }
    let mut s = AllocationSummary::default();
    problem.gains().for_each_row(|i, row| {
        if let Some(j) = assignment.choices[i] {
            s.total_gain += row[j];
            s.total_cost += problem.actions().cost(j);
            s.served_count += 1;
        }
    });
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssumptionKind {
    /// `Q_i,j+1 < Q_i,j`: gain not monotonically increasing in cost.
    IncreasingGain,
    /// `Q_i,j+1 / q_j+1 > Q_i,j / q_j`: gain per unit cost not diminishing.
    DiminishingReturns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub request: usize,
    /// The later index of the offending adjacent pair.
    pub action: usize,
    pub kind: AssumptionKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssumptionReport {
    pub violations: Vec<Violation>,
}

impl AssumptionReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: AssumptionKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(DcafError::AssumptionsViolated {
                count: self.violations.len(),
                first_request: v.request,
                first_action: v.action,
            }),
        }
    }
}

pub(crate) fn check_row_assumptions(
    request: usize,
    row: &[f64],
    actions: &ActionSpace,
    out: &mut Vec<Violation>,
) {
    let q = actions.costs();
    for j in 1..row.len().min(q.len()) {
        if row[j] < row[j - 1] {
            out.push(Violation {
                request,
                action: j,
                kind: AssumptionKind::IncreasingGain,
            });
        }
        if row[j] / q[j] > row[j - 1] / q[j - 1] {
            out.push(Violation {
                request,
                action: j,
                kind: AssumptionKind::DiminishingReturns,
            });
        }
    }
}

/// Lists every adjacent action pair breaking increasing gains or diminishing
/// gain-per-cost.
pub fn verify_assumptions<S: GainSource>(gains: &S, actions: &ActionSpace) -> AssumptionReport {
    let mut violations = Vec::new();
    gains.for_each_row(|i, row| check_row_assumptions(i, row, actions, &mut violations));
    AssumptionReport { violations }
}
