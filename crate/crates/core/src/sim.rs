//! Discrete-time serving simulator.
//!
//! One tick is one second. Each tick draws Poisson arrivals, generates their gain
//! rows, picks actions under the active policy, pushes the evaluated work through
//! a capacity model that decides runtime and failures, and then lets the MaxPower
//! controller react. The multiplier is re-solved periodically on the most recent
//! window of requests with a load-adjusted budget.

use std::collections::VecDeque;

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::allocation::{ActionRule, ActionSpace, AllocationProblem, GainMatrix};
use crate::controller::{control_step, quantize_cap, ControllerState, PidGains, SystemStatus};
use crate::error::{invalid, Result};
use crate::experiments::{compare_with_baseline, cost_gain_curves, BaselineComparison, CurvePoint};
use crate::gain::{
    cap_ratio_growth, pool_gain_row, LinearEstimator, PoolModel, RequestWorld, SyntheticGainModel,
    ValueDistribution,
};
use crate::solver::{adjust_budget, sample_pool, solve_lambda, SolverConfig, SolverResult};

const TRAFFIC_STREAM: u64 = 1;
const POOL_STREAM: u64 = 2;
const WARMUP_STREAM: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Piecewise-constant arrival rate in requests per tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSchedule {
    segments: Vec<(u64, f64)>,
}

impl TrafficSchedule {
    /// Segments are `(start_tick, rate)`; the rate before the first start is zero.
    pub fn new(segments: Vec<(u64, f64)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(invalid("traffic schedule needs at least one segment"));
        }
        for w in segments.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(invalid(format!(
                    "segment starts must strictly increase, got {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some((t, r)) = segments.iter().find(|(_, r)| !(r.is_finite() && *r >= 0.0)) {
            return Err(invalid(format!("arrival rate at tick {t} must be >= 0, got {r}")));
        }
        Ok(Self { segments })
    }

    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(vec![(0, rate)])
    }

    pub fn segments(&self) -> &[(u64, f64)] {
        &self.segments
    }

    pub fn rate_at(&self, tick: u64) -> f64 {
        self.segments
            .iter()
            .take_while(|(start, _)| *start <= tick)
            .last()
            .map_or(0.0, |(_, r)| *r)
    }
}

/// Multiplies the prevailing rate from `tick` on.
pub fn inject_spike(schedule: &TrafficSchedule, tick: u64, multiplier: f64) -> Result<TrafficSchedule> {
    if !(multiplier.is_finite() && multiplier > 0.0) {
        return Err(invalid(format!("spike multiplier must be positive, got {multiplier}")));
    }
    let &(last_start, last_rate) = schedule.segments.last().expect("non-empty by construction");
    if tick < last_start {
        return Err(invalid(format!(
            "spike at tick {tick} precedes the last segment start {last_start}"
        )));
    }
    let mut segments = schedule.segments.clone();
    if tick == last_start {
        segments.last_mut().expect("non-empty").1 = last_rate * multiplier;
    } else {
        segments.push((tick, last_rate * multiplier));
    }
    TrafficSchedule::new(segments)
}

/// Scalar serving capacity with a utilization power-law latency surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacityModel {
    /// Cost units evaluable per tick.
    pub capacity: f64,
    /// Seconds at zero load.
    pub base_runtime: f64,
    pub timeout: f64,
    pub overload_curve: f64,
    /// Lower bound on `1 - utilization` in the latency formula.
    pub saturation_floor: f64,
}

impl Default for CapacityModel {
    fn default() -> Self {
        Self {
            capacity: 10_000.0,
            base_runtime: 0.05,
            timeout: 0.5,
            overload_curve: 1.0,
            saturation_floor: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickLoad {
    pub failed: Vec<bool>,
    pub failures: usize,
    /// Mean response time, capped at the timeout; zero without arrivals.
    pub runtime: f64,
    pub utilization: f64,
}

impl CapacityModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.capacity.is_finite() && self.capacity > 0.0) {
            return Err(invalid(format!("capacity must be positive, got {}", self.capacity)));
        }
        if !(self.base_runtime.is_finite() && self.base_runtime > 0.0) {
            return Err(invalid("base_runtime must be positive"));
        }
        if !(self.timeout.is_finite() && self.timeout > self.base_runtime) {
            return Err(invalid(format!(
                "timeout {} must exceed base_runtime {}",
                self.timeout, self.base_runtime
            )));
        }
        if !(self.overload_curve.is_finite() && self.overload_curve > 0.0) {
            return Err(invalid("overload_curve must be positive"));
        }
        if !(self.saturation_floor > 0.0 && self.saturation_floor < 1.0) {
            return Err(invalid("saturation_floor must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Uncapped latency at `utilization`.
    pub fn raw_runtime(&self, utilization: f64) -> f64 {
        self.base_runtime / (1.0 - utilization).max(self.saturation_floor).powf(self.overload_curve)
    }

    /// Admits requests in arrival order while their cost fits, then times out the
    /// tail of the admitted ones in proportion to how far latency overshoots.
    /// Zero-cost requests never fail.
    pub fn process(&self, costs: &[f64]) -> TickLoad {
        let mut failed = vec![false; costs.len()];
        if costs.is_empty() {
            return TickLoad { failed, failures: 0, runtime: 0.0, utilization: 0.0 };
        }
        let mut used = 0.0;
        let mut admitted = Vec::with_capacity(costs.len());
        for (i, &q) in costs.iter().enumerate() {
            if q == 0.0 {
                continue;
            }
            if used + q <= self.capacity {
                used += q;
                admitted.push(i);
            } else {
                failed[i] = true;
            }
        }
        let utilization = used / self.capacity;
        let raw = self.raw_runtime(utilization);
        if raw > self.timeout {
            let late = ((1.0 - self.timeout / raw) * admitted.len() as f64).ceil() as usize;
            for &i in &admitted[admitted.len() - late.min(admitted.len())..] {
                failed[i] = true;
            }
        }
        let failures = failed.iter().filter(|f| **f).count();
        TickLoad {
            failed,
            failures,
            runtime: raw.min(self.timeout),
            utilization,
        }
    }
}

/// Where per-request gain rows come from.
#[derive(Debug, Clone)]
pub enum GainSpec {
    /// `v * q^alpha` with `v` drawn per request.
    Synthetic { alpha: f64, values: ValueDistribution },
    /// Top-k eCPM over candidate pools; costs are candidate counts.
    Pool { model: PoolModel, values: ValueDistribution },
    /// Decisions use the estimator's predictions from request features; realized
    /// gains follow `v * q^alpha`.
    Estimator {
        estimator: LinearEstimator,
        world: RequestWorld,
        alpha: f64,
    },
}

impl Default for GainSpec {
    fn default() -> Self {
        GainSpec::Synthetic {
            alpha: 0.5,
            values: ValueDistribution::default(),
        }
    }
}

enum Generator<'a> {
    Synthetic(SyntheticGainModel, ValueDistribution),
    Pool(&'a PoolModel, ValueDistribution),
    Estimator(&'a LinearEstimator, &'a RequestWorld, SyntheticGainModel),
}

struct GeneratedRequest {
    truth: Vec<f64>,
    /// Row the policy sees, when it differs from the truth.
    predicted: Option<Vec<f64>>,
}

impl<'a> Generator<'a> {
    fn new(spec: &'a GainSpec, actions: &ActionSpace) -> Result<Self> {
        Ok(match spec {
            GainSpec::Synthetic { alpha, values } => {
                values.validate()?;
                Generator::Synthetic(SyntheticGainModel::new(actions.clone(), *alpha)?, *values)
            }
            GainSpec::Pool { model, values } => {
                values.validate()?;
                model.validate()?;
                if actions.costs().iter().any(|q| q.fract() != 0.0 || *q > model.pool_size as f64) {
                    return Err(invalid(format!(
                        "pool gains need integer action costs within the pool size {}",
                        model.pool_size
                    )));
                }
                Generator::Pool(model, *values)
            }
            GainSpec::Estimator { estimator, world, alpha } => {
                world.validate()?;
                if estimator.num_actions() != actions.len() || estimator.dims() != world.dims {
                    return Err(invalid("estimator shape does not match the actions and feature schema"));
                }
                Generator::Estimator(estimator, world, SyntheticGainModel::new(actions.clone(), *alpha)?)
            }
        })
    }

    fn generate<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        actions: &ActionSpace,
        utilization: f64,
    ) -> Result<GeneratedRequest> {
        Ok(match self {
            Generator::Synthetic(model, values) => GeneratedRequest {
                truth: model.row(values.sample(rng)),
                predicted: None,
            },
            Generator::Pool(model, values) => {
                let pool = model.generate(values.sample(rng), rng);
                let mut truth = pool_gain_row(&pool, actions)?;
                cap_ratio_growth(&mut truth, actions);
                GeneratedRequest { truth, predicted: None }
            }
            Generator::Estimator(estimator, world, model) => {
                let sample = world.sample(rng, utilization);
                GeneratedRequest {
                    truth: model.row(sample.value),
                    predicted: Some(estimator.predict_row(&sample.features)?),
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub gains: PidGains,
    pub gain_to_power: f64,
    /// Defaults to 1.2x the runtime at the regular operating point.
    pub setpoint: Option<f64>,
    /// Defaults to the cheapest and the most expensive action.
    pub bounds: Option<(f64, f64)>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            gains: PidGains::default(),
            gain_to_power: 100.0,
            setpoint: None,
            bounds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcafPolicy {
    /// Ticks between multiplier refreshes; also the window length.
    pub refresh_period: u64,
    /// Requests resampled from the window per refresh; zero uses the whole window.
    pub pool_size: usize,
    pub floor_action: bool,
    pub solver: SolverConfig,
    pub controller: Option<ControllerConfig>,
}

impl Default for DcafPolicy {
    fn default() -> Self {
        Self {
            refresh_period: 10,
            pool_size: 1000,
            floor_action: false,
            solver: SolverConfig::default(),
            controller: Some(ControllerConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyMode {
    /// Same action for every request.
    Baseline { action: usize },
    Dcaf(DcafPolicy),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub ticks: u64,
    pub schedule: TrafficSchedule,
    pub capacity: CapacityModel,
    pub policy: PolicyMode,
    pub gains: GainSpec,
    pub actions: ActionSpace,
    /// Cost budget per tick at the regular rate.
    pub budget: f64,
    pub qps_regular: f64,
    /// Offline requests used to solve the initial multiplier.
    pub warmup_requests: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let schedule = TrafficSchedule::constant(100.0).expect("valid");
        Self {
            ticks: 500,
            schedule: inject_spike(&schedule, 158, 8.0).expect("valid"),
            capacity: CapacityModel::default(),
            policy: PolicyMode::Dcaf(DcafPolicy::default()),
            gains: GainSpec::default(),
            actions: ActionSpace::ladder(10, 10.0).expect("valid"),
            budget: 5000.0,
            qps_regular: 100.0,
            warmup_requests: 1000,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.capacity.validate()?;
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return Err(invalid(format!("per-tick budget must be positive, got {}", self.budget)));
        }
        if !(self.qps_regular.is_finite() && self.qps_regular > 0.0) {
            return Err(invalid("regular QPS must be positive"));
        }
        Generator::new(&self.gains, &self.actions)?;
        match &self.policy {
            PolicyMode::Baseline { action } if *action >= self.actions.len() => Err(invalid(format!(
                "baseline action {action} outside 0..{}",
                self.actions.len()
            ))),
            PolicyMode::Baseline { .. } => Ok(()),
            PolicyMode::Dcaf(p) => {
                if p.refresh_period == 0 {
                    return Err(invalid("refresh_period must be at least 1"));
                }
                if self.warmup_requests == 0 {
                    return Err(invalid("warmup_requests must be at least 1"));
                }
                p.solver.validate()?;
                if let Some(c) = &p.controller {
                    c.gains.validate()?;
                    self.controller_state(c)?;
                }
                Ok(())
            }
        }
    }

    /// Runtime at the regular operating point, where the per-tick budget is spent.
    pub fn regular_runtime(&self) -> f64 {
        self.capacity
            .raw_runtime(self.budget / self.capacity.capacity)
            .min(self.capacity.timeout)
    }

    fn controller_state(&self, c: &ControllerConfig) -> Result<ControllerState> {
        let setpoint = c.setpoint.unwrap_or(1.2 * self.regular_runtime());
        ControllerState::for_actions(&self.actions, c.bounds, setpoint, c.gain_to_power)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TickMetrics {
    pub tick: u64,
    /// Arrivals in this tick (one tick is one second).
    pub qps: f64,
    pub arrivals: usize,
    pub served: usize,
    pub failed: usize,
    pub runtime: f64,
    pub fail_rate: f64,
    pub utilization: f64,
    /// Cost of every attempted evaluation, failed ones included.
    pub total_cost: f64,
    /// Gain of served requests only.
    pub total_gain: f64,
    /// Cap in force during the tick.
    pub max_power: f64,
    pub lambda: f64,
    pub error: f64,
    pub control: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestTrace {
    pub tick: u64,
    pub truth: Vec<f64>,
    pub action: Option<usize>,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub ticks: Vec<TickMetrics>,
    /// Filled only when requested.
    pub requests: Vec<RequestTrace>,
}

struct DcafState<'c> {
    policy: &'c DcafPolicy,
    lambda: f64,
    controller: Option<(ControllerState, PidGains)>,
    window: VecDeque<Vec<Vec<f64>>>,
    last_solve: Option<SolverResult>,
}

impl<'c> DcafState<'c> {
    fn new(policy: &'c DcafPolicy, config: &SimConfig, generator: &Generator<'_>) -> Result<Self> {
        let mut rng = stream(config.seed, WARMUP_STREAM);
        let mut rows = GainMatrix::new(config.actions.len());
        for _ in 0..config.warmup_requests {
            let r = generator.generate(&mut rng, &config.actions, 0.0)?;
            rows.push_row(r.predicted.as_ref().unwrap_or(&r.truth))?;
        }
        let budget = config.budget * config.warmup_requests as f64 / config.qps_regular;
        let problem = AllocationProblem::new(config.actions.clone(), rows, budget)?;
        let solved = solve_lambda(&problem, &policy.solver)?;
        let controller = match &policy.controller {
            Some(c) => Some((config.controller_state(c)?, c.gains)),
            None => None,
        };
        Ok(Self {
            policy,
            lambda: solved.lambda_star,
            controller,
            window: VecDeque::new(),
            last_solve: Some(solved),
        })
    }

    fn cap(&self, actions: &ActionSpace) -> Option<f64> {
        self.controller
            .as_ref()
            .map(|(s, _)| quantize_cap(actions, s.max_power))
    }

    fn refresh<R: Rng>(&mut self, config: &SimConfig, rng: &mut R) -> Result<()> {
        let window_ticks = self.window.len();
        let rows: Vec<&Vec<f64>> = self.window.iter().flatten().collect();
        if rows.is_empty() {
            return Ok(());
        }
        let qps_observed = rows.len() as f64 / window_ticks as f64;
        let pool = if self.policy.pool_size == 0 {
            rows
        } else {
            sample_pool(&rows, self.policy.pool_size, rng.next_u64())?
        };
        let pool_budget = config.budget * pool.len() as f64 / config.qps_regular;
        let budget = adjust_budget(pool_budget, config.qps_regular, qps_observed)?;
        let gains = GainMatrix::from_rows(config.actions.len(), &pool)?;
        let problem = AllocationProblem::new(config.actions.clone(), gains, budget)?;
        let solved = solve_lambda(&problem, &self.policy.solver)?;
        debug!(
            "refresh: qps {qps_observed:.1}, pool budget {budget:.1}, lambda {} -> {}",
            self.lambda, solved.lambda_star
        );
        self.lambda = solved.lambda_star;
        self.last_solve = Some(solved);
        Ok(())
    }
}

fn poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> usize {
    if rate == 0.0 {
        0
    } else {
        Poisson::new(rate).expect("validated rate").sample(rng) as usize
    }
}

pub fn run_simulation(config: &SimConfig) -> Result<Vec<TickMetrics>> {
    Ok(run_traced(config, false)?.ticks)
}

/// As [`run_simulation`], optionally recording every request.
pub fn run_traced(config: &SimConfig, record_requests: bool) -> Result<SimTrace> {
    config.validate()?;
    let actions = &config.actions;
    let generator = Generator::new(&config.gains, actions)?;
    let mut traffic = stream(config.seed, TRAFFIC_STREAM);
    let mut pool_rng = stream(config.seed, POOL_STREAM);
    let mut dcaf = match &config.policy {
        PolicyMode::Dcaf(p) => Some(DcafState::new(p, config, &generator)?),
        PolicyMode::Baseline { .. } => None,
    };
    let mut trace = SimTrace::default();
    let mut utilization = 0.0;

    for tick in 0..config.ticks {
        let arrivals = poisson(config.schedule.rate_at(tick), &mut traffic);
        if let Some(d) = dcaf.as_mut() {
            if tick > 0 && tick % d.policy.refresh_period == 0 {
                d.refresh(config, &mut pool_rng)?;
            }
        }
        let (rule, max_power, lambda) = match (&config.policy, &dcaf) {
            (PolicyMode::Baseline { action }, _) => (None, actions.cost(*action), 0.0),
            (PolicyMode::Dcaf(p), Some(d)) => {
                let cap = d.cap(actions);
                let rule = ActionRule::new(d.lambda)
                    .with_max_power(cap)
                    .with_floor(p.floor_action);
                (Some(rule), cap.unwrap_or(actions.max_cost()), d.lambda)
            }
            (PolicyMode::Dcaf(_), None) => unreachable!("state built for the dcaf policy"),
        };

        let mut truths = Vec::with_capacity(arrivals);
        let mut choices = Vec::with_capacity(arrivals);
        let mut seen = Vec::with_capacity(if dcaf.is_some() { arrivals } else { 0 });
        for _ in 0..arrivals {
            let r = generator.generate(&mut traffic, actions, utilization)?;
            let choice = match (&config.policy, &rule) {
                (PolicyMode::Baseline { action }, _) => Some(*action),
                (_, Some(rule)) => rule.choose(r.predicted.as_ref().unwrap_or(&r.truth), actions),
                (_, None) => unreachable!(),
            };
            choices.push(choice);
            if dcaf.is_some() {
                seen.push(r.predicted.unwrap_or_else(|| r.truth.clone()));
            }
            truths.push(r.truth);
        }
        let costs: Vec<f64> = choices.iter().map(|c| c.map_or(0.0, |j| actions.cost(j))).collect();
        let load = config.capacity.process(&costs);
        let total_gain = choices
            .iter()
            .zip(&truths)
            .zip(&load.failed)
            .filter_map(|((c, t), failed)| c.filter(|_| !failed).map(|j| t[j]))
            .fold(0.0, |a, g| a + g);
        let fail_rate = if arrivals == 0 { 0.0 } else { load.failures as f64 / arrivals as f64 };
        let mut metrics = TickMetrics {
            tick,
            qps: arrivals as f64,
            arrivals,
            served: arrivals - load.failures,
            failed: load.failures,
            runtime: load.runtime,
            fail_rate,
            utilization: load.utilization,
            total_cost: costs.iter().fold(0.0, |a, c| a + c),
            total_gain,
            max_power,
            lambda,
            error: 0.0,
            control: 0.0,
        };
        if let Some(d) = dcaf.as_mut() {
            if let Some((state, gains)) = d.controller.as_mut() {
                let status = SystemStatus {
                    runtime: load.runtime,
                    fail_rate,
                    qps: arrivals as f64,
                    utilization: load.utilization,
                };
                let out = control_step(state, gains, &status);
                metrics.error = out.error;
                metrics.control = out.control;
            }
            d.window.push_back(seen);
            while d.window.len() as u64 > d.policy.refresh_period {
                d.window.pop_front();
            }
        }
        utilization = load.utilization;
        if record_requests {
            for ((truth, action), failed) in truths.into_iter().zip(choices).zip(&load.failed) {
                trace.requests.push(RequestTrace { tick, truth, action, failed: *failed });
            }
        }
        trace.ticks.push(metrics);
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimTotals {
    pub arrivals: usize,
    pub failed: usize,
    pub total_cost: f64,
    pub total_gain: f64,
    pub mean_fail_rate: f64,
}

pub fn totals(ticks: &[TickMetrics]) -> SimTotals {
    let mut t = SimTotals::default();
    for m in ticks {
        t.arrivals += m.arrivals;
        t.failed += m.failed;
        t.total_cost += m.total_cost;
        t.total_gain += m.total_gain;
        t.mean_fail_rate += m.fail_rate;
    }
    if !ticks.is_empty() {
        t.mean_fail_rate /= ticks.len() as f64;
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyComparison {
    pub dcaf: Vec<TickMetrics>,
    pub baseline: Vec<TickMetrics>,
    pub dcaf_totals: SimTotals,
    pub baseline_totals: SimTotals,
    /// Offline gain-at-equal-cost and cost-at-equal-gain on the simulated
    /// arrivals; `None` without traffic.
    pub offline: Option<BaselineComparison>,
    /// Uniform and priced cost-gain curves on the same requests.
    pub offline_curves: Vec<CurvePoint>,
}

/// Runs the priced policy and the fixed-action baseline on identical arrivals.
/// The offline comparison uses at most `offline_sample` of the arrivals.
pub fn compare_policies(
    config: &SimConfig,
    baseline_action: usize,
    offline_sample: usize,
) -> Result<PolicyComparison> {
    let dcaf_policy = match &config.policy {
        PolicyMode::Dcaf(p) => p.clone(),
        PolicyMode::Baseline { .. } => DcafPolicy::default(),
    };
    let dcaf_config = SimConfig { policy: PolicyMode::Dcaf(dcaf_policy.clone()), ..config.clone() };
    let base_config = SimConfig { policy: PolicyMode::Baseline { action: baseline_action }, ..config.clone() };
    let dcaf = run_simulation(&dcaf_config)?;
    let base = run_traced(&base_config, true)?;

    let rows: Vec<Vec<f64>> = base.requests.into_iter().map(|r| r.truth).collect();
    let (offline, offline_curves) = if rows.is_empty() {
        (None, vec![])
    } else {
        let rows = if offline_sample > 0 && rows.len() > offline_sample {
            sample_pool(&rows, offline_sample, config.seed)?
        } else {
            rows
        };
        let gains = GainMatrix::from_rows(config.actions.len(), &rows)?;
        let problem = AllocationProblem::new(config.actions.clone(), gains, 0.0)?;
        (
            Some(compare_with_baseline(&problem, baseline_action, &dcaf_policy.solver, config.seed)?),
            cost_gain_curves(&problem, &dcaf_policy.solver)?,
        )
    };
    Ok(PolicyComparison {
        dcaf_totals: totals(&dcaf),
        baseline_totals: totals(&base.ticks),
        dcaf,
        baseline: base.ticks,
        offline,
        offline_curves,
    })
}
