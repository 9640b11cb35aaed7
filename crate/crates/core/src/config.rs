//! Sectioned TOML run configuration. Every key is optional; command-line flags
//! override file values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allocation::ActionSpace;
use crate::controller::PidGains;
use crate::error::{invalid, Result};
use crate::gain::{PoolModel, RequestWorld, SyntheticGainParams, ValueDistribution};
use crate::logio::{DatasetSource, DatasetSpec};
use crate::sim::{
    inject_spike, CapacityModel, ControllerConfig, DcafPolicy, GainSpec, PolicyMode, SimConfig,
    TrafficSchedule,
};
use crate::solver::{AssumptionPolicy, Epsilon, SolverConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub actions: ActionsSection,
    pub gain: GainSection,
    pub dataset: DatasetSection,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    pub sim: SimSection,
    pub controller: ControllerSection,
}

/// Explicit `costs`, or a ladder `step, 2*step, ..., count*step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionsSection {
    pub costs: Option<Vec<f64>>,
    pub count: usize,
    pub step: f64,
}

impl Default for ActionsSection {
    fn default() -> Self {
        Self { costs: None, count: 10, step: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Synthetic,
    Pool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainSection {
    pub source: SourceKind,
    pub alpha: f64,
    /// Log-normal location of request values.
    pub mu: f64,
    pub sigma: f64,
    pub pool: PoolModel,
}

impl Default for GainSection {
    fn default() -> Self {
        Self {
            source: SourceKind::Synthetic,
            alpha: 0.5,
            mu: 0.0,
            sigma: 1.0,
            pool: PoolModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub requests: usize,
    pub regularization: f64,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self { requests: 10_000, regularization: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonKind {
    Relative,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Absolute budget for the request pool; takes precedence over `budget_fraction`.
    pub budget: Option<f64>,
    /// Fraction of the pool's all-max-action cost.
    pub budget_fraction: f64,
    pub epsilon: f64,
    pub epsilon_kind: EpsilonKind,
    pub max_iterations: usize,
    /// Requests resampled from the log; zero uses every record.
    pub pool_size: usize,
    pub assumptions: AssumptionPolicy,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            budget: None,
            budget_fraction: 0.5,
            epsilon: 1e-3,
            epsilon_kind: EpsilonKind::Relative,
            max_iterations: 64,
            pool_size: 0,
            assumptions: AssumptionPolicy::Warn,
        }
    }
}

impl SolverSection {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            epsilon: match self.epsilon_kind {
                EpsilonKind::Relative => Epsilon::Relative(self.epsilon),
                EpsilonKind::Absolute => Epsilon::Absolute(self.epsilon),
            },
            max_iterations: self.max_iterations,
            interval_override: None,
            assumptions: self.assumptions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub lambda_min: f64,
    /// Defaults to the top of the solver's search interval.
    pub lambda_max: Option<f64>,
    pub points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { lambda_min: 0.0, lambda_max: None, points: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SimPolicy {
    /// Both policies on the same arrivals.
    Compare,
    Dcaf,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub policy: SimPolicy,
    pub ticks: u64,
    pub base_rate: f64,
    pub spike_tick: Option<u64>,
    pub spike_multiplier: f64,
    pub capacity: CapacityModel,
    /// Per-tick cost budget.
    pub budget: f64,
    /// Defaults to `base_rate`, or the simulator default when that is zero.
    pub qps_regular: Option<f64>,
    pub refresh_period: u64,
    pub pool_size: usize,
    pub warmup_requests: usize,
    pub baseline_action: usize,
    pub controller: bool,
    pub floor_action: bool,
    /// Arrivals used for the offline comparison; zero uses all.
    pub offline_sample: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        let policy = DcafPolicy::default();
        let sim = SimConfig::default();
        Self {
            policy: SimPolicy::Compare,
            ticks: sim.ticks,
            base_rate: 100.0,
            spike_tick: Some(158),
            spike_multiplier: 8.0,
            capacity: sim.capacity,
            budget: sim.budget,
            qps_regular: None,
            refresh_period: policy.refresh_period,
            pool_size: policy.pool_size,
            warmup_requests: sim.warmup_requests,
            baseline_action: 4,
            controller: true,
            floor_action: false,
            offline_sample: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub k_p: f64,
    pub k_i: f64,
    pub k_d: f64,
    pub theta: f64,
    pub gain_to_power: f64,
    pub setpoint: Option<f64>,
    pub mp_min: Option<f64>,
    pub mp_max: Option<f64>,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let g = PidGains::default();
        Self {
            k_p: g.k_p,
            k_i: g.k_i,
            k_d: g.k_d,
            theta: g.theta,
            gain_to_power: ControllerConfig::default().gain_to_power,
            setpoint: None,
            mp_min: None,
            mp_max: None,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| invalid(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| invalid(format!("config {}: {}", path.display(), e.message())))
    }

    pub fn action_space(&self) -> Result<ActionSpace> {
        match &self.actions.costs {
            Some(costs) => ActionSpace::new(costs.clone()),
            None => ActionSpace::ladder(self.actions.count, self.actions.step),
        }
    }

    pub fn values(&self) -> ValueDistribution {
        ValueDistribution::LogNormal { mu: self.gain.mu, sigma: self.gain.sigma }
    }

    pub fn dataset_spec(&self) -> Result<DatasetSpec> {
        Ok(DatasetSpec {
            params: SyntheticGainParams {
                value_distribution: self.values(),
                alpha: self.gain.alpha,
                seed: self.seed,
            },
            requests: self.dataset.requests,
            actions: self.action_space()?,
            source: match self.gain.source {
                SourceKind::Synthetic => DatasetSource::Synthetic,
                SourceKind::Pool => DatasetSource::Pool(self.gain.pool),
            },
            world: RequestWorld::default(),
        })
    }

    fn controller_config(&self) -> Result<ControllerConfig> {
        let c = &self.controller;
        let bounds = match (c.mp_min, c.mp_max) {
            (None, None) => None,
            (lo, hi) => {
                let actions = self.action_space()?;
                Some((lo.unwrap_or(actions.min_cost()), hi.unwrap_or(actions.max_cost())))
            }
        };
        Ok(ControllerConfig {
            gains: PidGains { k_p: c.k_p, k_i: c.k_i, k_d: c.k_d, theta: c.theta },
            gain_to_power: c.gain_to_power,
            setpoint: c.setpoint,
            bounds,
        })
    }

    /// Simulator setup; for `compare` the policy is the priced one.
    pub fn sim_config(&self) -> Result<SimConfig> {
        let s = &self.sim;
        let mut schedule = TrafficSchedule::constant(s.base_rate)?;
        if let Some(tick) = s.spike_tick {
            schedule = inject_spike(&schedule, tick, s.spike_multiplier)?;
        }
        let policy = match s.policy {
            SimPolicy::Baseline => PolicyMode::Baseline { action: s.baseline_action },
            SimPolicy::Dcaf | SimPolicy::Compare => PolicyMode::Dcaf(DcafPolicy {
                refresh_period: s.refresh_period,
                pool_size: s.pool_size,
                floor_action: s.floor_action,
                solver: self.solver.solver_config(),
                controller: if s.controller { Some(self.controller_config()?) } else { None },
            }),
        };
        let gains = match self.gain.source {
            SourceKind::Synthetic => GainSpec::Synthetic { alpha: self.gain.alpha, values: self.values() },
            SourceKind::Pool => GainSpec::Pool { model: self.gain.pool, values: self.values() },
        };
        let config = SimConfig {
            ticks: s.ticks,
            schedule,
            capacity: s.capacity,
            policy,
            gains,
            actions: self.action_space()?,
            budget: s.budget,
            qps_regular: s.qps_regular.unwrap_or(if s.base_rate > 0.0 {
                s.base_rate
            } else {
                SimConfig::default().qps_regular
            }),
            warmup_requests: s.warmup_requests,
            seed: self.seed,
        };
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = Config::from_toml("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.action_space().unwrap().costs().len(), 10);
        let sim = c.sim_config().unwrap();
        assert_eq!(sim.schedule.segments(), &[(0, 100.0), (158, 800.0)]);
        assert_eq!(sim.qps_regular, 100.0);
        sim.validate().unwrap();
    }

    #[test]
    fn sections_parse() {
        let c = Config::from_toml(
            r#"
seed = 7
[actions]
costs = [1.0, 2.0]
[solver]
budget = 3.0
epsilon = 0.01
epsilon_kind = "absolute"
assumptions = "strict"
[sim]
policy = "baseline"
baseline_action = 1
spike_tick = 10
[sim.capacity]
capacity = 500.0
base_runtime = 0.05
timeout = 0.5
overload_curve = 2.0
saturation_floor = 0.01
[controller]
k_p = 0.5
mp_min = 1.0
[gain.pool]
k = 2
"#,
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.action_space().unwrap().costs(), &[1.0, 2.0]);
        assert_eq!(c.solver.solver_config().epsilon, Epsilon::Absolute(0.01));
        assert_eq!(c.gain.pool.k, 2);
        let sim = c.sim_config().unwrap();
        assert_eq!(sim.policy, PolicyMode::Baseline { action: 1 });
        assert_eq!(sim.capacity.overload_curve, 2.0);
        assert_eq!(c.controller_config().unwrap().bounds, Some((1.0, 2.0)));
    }

    #[test]
    fn typos_are_rejected() {
        let err = Config::from_toml("[solver]\nbudgett = 3\n").unwrap_err().to_string();
        assert!(err.contains("budgett"), "{err}");
        assert!(Config::from_toml("[sim]\npolicy = \"fast\"\n").is_err());
    }
}
