//! PID loop that turns observed runtime and fail rate into the MaxPower cap.
//!
//! Instability is `e(t) = rt + theta * fr - setpoint`. The control action
//! `u(t) = k_p e(t) + k_i sum e + k_d (e(t) - e(t-1))` lowers the cap linearly
//! from its ceiling: `max_power = clamp(ceiling - gain_to_power * u, floor, ceiling)`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::allocation::ActionSpace;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub k_p: f64,
    pub k_i: f64,
    pub k_d: f64,
    /// Weight of the fail rate relative to runtime.
    pub theta: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            k_p: 1.0,
            k_i: 0.2,
            k_d: 0.0,
            theta: 1.0,
        }
    }
}

impl PidGains {
    pub fn validate(&self) -> Result<()> {
        if [self.k_p, self.k_i, self.k_d, self.theta].iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(invalid("PID gains must be finite"))
        }
    }
}

/// Aggregated monitoring window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SystemStatus {
    /// Average response time, seconds.
    pub runtime: f64,
    /// Failed fraction of requests in `[0, 1]`.
    pub fail_rate: f64,
    pub qps: f64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub integral: f64,
    pub prev_error: Option<f64>,
    pub max_power: f64,
    pub floor: f64,
    pub ceiling: f64,
    pub setpoint: f64,
    /// Cost units of cap removed per unit of control action.
    pub gain_to_power: f64,
}

impl ControllerState {
    /// Starts uncapped, at the ceiling.
    pub fn new(floor: f64, ceiling: f64, setpoint: f64, gain_to_power: f64) -> Result<Self> {
        if !(floor.is_finite() && ceiling.is_finite() && floor > 0.0 && floor <= ceiling) {
            return Err(invalid(format!("invalid MaxPower bounds ({floor}, {ceiling})")));
        }
        if !(gain_to_power.is_finite() && gain_to_power > 0.0) {
            return Err(invalid(format!("gain_to_power must be positive, got {gain_to_power}")));
        }
        if !setpoint.is_finite() {
            return Err(invalid("setpoint must be finite"));
        }
        Ok(Self {
            integral: 0.0,
            prev_error: None,
            max_power: ceiling,
            floor,
            ceiling,
            setpoint,
            gain_to_power,
        })
    }

    /// Bounds default to the cheapest and the most expensive action.
    pub fn for_actions(
        actions: &ActionSpace,
        bounds: Option<(f64, f64)>,
        setpoint: f64,
        gain_to_power: f64,
    ) -> Result<Self> {
        let (floor, ceiling) = bounds.unwrap_or((actions.min_cost(), actions.max_cost()));
        if floor < actions.min_cost() {
            return Err(invalid(format!(
                "MaxPower floor {floor} is below the cheapest action cost {}",
                actions.min_cost()
            )));
        }
        Self::new(floor, ceiling, setpoint, gain_to_power)
    }

    /// Upper clamp on the accumulated error so `k_i * integral` alone never pushes
    /// the cap past its floor.
    pub fn integral_limit(&self, gains: &PidGains) -> f64 {
        if gains.k_i > 0.0 {
            (self.ceiling - self.floor) / (self.gain_to_power * gains.k_i)
        } else {
            0.0
        }
    }
}

pub fn compute_error(status: &SystemStatus, gains: &PidGains, setpoint: f64) -> f64 {
    status.runtime + gains.theta * status.fail_rate - setpoint
}

/// Advances the integral and derivative memory and returns `u(t)`.
pub fn pid_update(state: &mut ControllerState, gains: &PidGains, error: f64) -> f64 {
    let limit = state.integral_limit(gains);
    state.integral = (state.integral + error).clamp(0.0, limit);
    let derivative = state.prev_error.map_or(0.0, |p| error - p);
    state.prev_error = Some(error);
    gains.k_p * error + gains.k_i * state.integral + gains.k_d * derivative
}

/// Non-increasing in `u`; always within `[floor, ceiling]`.
pub fn apply_maxpower(state: &mut ControllerState, u: f64) -> f64 {
    let target = state.ceiling - state.gain_to_power * u;
    state.max_power = if target.is_nan() {
        state.floor
    } else {
        target.clamp(state.floor, state.ceiling)
    };
    state.max_power
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlOutput {
    pub error: f64,
    pub control: f64,
    pub max_power: f64,
}

/// One pass of the monitoring loop: error, PID update, actuation.
pub fn control_step(
    state: &mut ControllerState,
    gains: &PidGains,
    status: &SystemStatus,
) -> ControlOutput {
    let error = compute_error(status, gains, state.setpoint);
    let control = pid_update(state, gains, error);
    let max_power = apply_maxpower(state, control);
    ControlOutput {
        error,
        control,
        max_power,
    }
}

/// Rounds a cap down to the largest action cost it admits (at least the cheapest).
pub fn quantize_cap(actions: &ActionSpace, max_power: f64) -> f64 {
    actions
        .largest_within(max_power)
        .map_or(actions.min_cost(), |j| actions.cost(j))
}

/// Latest published cap, readable from any thread while one control loop writes.
#[derive(Debug, Clone)]
pub struct MaxPowerCell(Arc<AtomicU64>);

impl MaxPowerCell {
    pub fn new(max_power: f64) -> Self {
        Self(Arc::new(AtomicU64::new(max_power.to_bits())))
    }

    pub fn publish(&self, max_power: f64) {
        self.0.store(max_power.to_bits(), Ordering::Release);
    }

    pub fn load(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Acquire))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gains(k_p: f64, k_i: f64, k_d: f64) -> PidGains {
        PidGains { k_p, k_i, k_d, theta: 2.0 }
    }

    fn state() -> ControllerState {
        ControllerState::new(10.0, 100.0, 0.0, 5.0).unwrap()
    }

    fn status(rt: f64, fr: f64) -> SystemStatus {
        SystemStatus { runtime: rt, fail_rate: fr, ..Default::default() }
    }

    #[test]
    fn error_examples() {
        let g = gains(1.0, 0.0, 0.0);
        assert!((compute_error(&status(0.1, 0.05), &g, 0.0) - 0.2).abs() < 1e-15);
        assert_eq!(compute_error(&status(0.3, 0.0), &g, 0.3), 0.0);
        assert!((compute_error(&status(0.05, 0.0), &g, 0.1) + 0.05).abs() < 1e-15);
    }

    #[test]
    fn pid_examples() {
        let mut s = state();
        assert_eq!(pid_update(&mut s, &gains(1.0, 0.0, 0.0), 0.5), 0.5);

        let mut s = state();
        let g = gains(1.0, 1.0, 0.0);
        pid_update(&mut s, &g, 0.5);
        assert_eq!(pid_update(&mut s, &g, 0.5), 1.5);

        let mut s = state();
        let g = gains(0.0, 0.0, 1.0);
        pid_update(&mut s, &g, 0.2);
        assert!((pid_update(&mut s, &g, 0.5) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn maxpower_examples() {
        let mut s = state();
        assert_eq!(apply_maxpower(&mut s, 0.0), 100.0);
        assert_eq!(apply_maxpower(&mut s, 1e9), 10.0);
        assert_eq!(apply_maxpower(&mut s, 10.0), 50.0);
        assert_eq!(apply_maxpower(&mut s, -3.0), 100.0);
        assert_eq!(apply_maxpower(&mut s, f64::NAN), 10.0);
    }

    #[test]
    fn steady_status_keeps_ceiling() {
        let mut s = ControllerState::new(10.0, 100.0, 0.12, 100.0).unwrap();
        let g = PidGains::default();
        for _ in 0..20 {
            let out = control_step(&mut s, &g, &status(0.12, 0.0));
            assert_eq!(out.max_power, 100.0);
        }
    }

    #[test]
    fn fail_rate_step_lowers_cap_at_once() {
        // e = 0.1 + 1.0 * 0.2 - 0.1 = 0.2; u = 1.0*0.2 + 0.2*0.2 = 0.24; cap = 100 - 100*0.24 = 76
        let mut s = ControllerState::new(10.0, 100.0, 0.1, 100.0).unwrap();
        let g = PidGains::default();
        assert_eq!(control_step(&mut s, &g, &status(0.1, 0.0)).max_power, 100.0);
        let out = control_step(&mut s, &g, &status(0.1, 0.2));
        assert!((out.error - 0.2).abs() < 1e-15);
        assert!((out.control - 0.24).abs() < 1e-15);
        assert!((out.max_power - 76.0).abs() < 1e-9);
    }

    #[test]
    fn recovers_after_disturbance() {
        let mut s = ControllerState::new(10.0, 100.0, 0.1, 100.0).unwrap();
        let g = PidGains::default();
        for _ in 0..50 {
            control_step(&mut s, &g, &status(0.5, 0.5));
        }
        assert_eq!(s.max_power, 10.0);
        assert!(s.integral <= s.integral_limit(&g));
        let mut steps = 0;
        while s.max_power < 100.0 {
            control_step(&mut s, &g, &status(0.05, 0.0));
            steps += 1;
            assert!(steps < 1000);
        }
    }

    #[test]
    fn quantize_rounds_down_to_an_action() {
        let a = ActionSpace::ladder(10, 10.0).unwrap();
        assert_eq!(quantize_cap(&a, 57.0), 50.0);
        assert_eq!(quantize_cap(&a, 100.0), 100.0);
        assert_eq!(quantize_cap(&a, 3.0), 10.0);
    }

    #[test]
    fn bounds_validation() {
        let a = ActionSpace::ladder(3, 10.0).unwrap();
        assert!(ControllerState::for_actions(&a, Some((5.0, 30.0)), 0.1, 1.0).is_err());
        let s = ControllerState::for_actions(&a, None, 0.1, 1.0).unwrap();
        assert_eq!((s.floor, s.ceiling, s.max_power), (10.0, 30.0, 30.0));
        assert!(ControllerState::new(20.0, 10.0, 0.1, 1.0).is_err());
        assert!(ControllerState::new(1.0, 10.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn cell_publishes_snapshots() {
        let cell = MaxPowerCell::new(100.0);
        let reader = cell.clone();
        std::thread::spawn(move || cell.publish(42.5)).join().unwrap();
        assert_eq!(reader.load(), 42.5);
    }

    proptest! {
        #[test]
        fn cap_stays_in_bounds_and_state_finite(
            errors in prop::collection::vec(-5.0f64..5.0, 1..200),
            k_p in 0.0f64..10.0, k_i in 0.0f64..10.0, k_d in 0.0f64..10.0,
        ) {
            let g = PidGains { k_p, k_i, k_d, theta: 1.0 };
            let mut s = ControllerState::new(10.0, 100.0, 0.0, 7.0).unwrap();
            for e in errors {
                let u = pid_update(&mut s, &g, e);
                let mp = apply_maxpower(&mut s, u);
                prop_assert!((10.0..=100.0).contains(&mp));
                prop_assert!(s.integral >= 0.0 && s.integral <= s.integral_limit(&g));
                prop_assert!(u.is_finite());
            }
        }

        #[test]
        fn p_only_is_memoryless(e1 in -5.0f64..5.0, e2 in -5.0f64..5.0, k_p in 0.0f64..10.0) {
            let g = PidGains { k_p, k_i: 0.0, k_d: 0.0, theta: 1.0 };
            let mut s = ControllerState::new(10.0, 100.0, 0.0, 7.0).unwrap();
            pid_update(&mut s, &g, e1);
            prop_assert_eq!(pid_update(&mut s, &g, e2), k_p * e2);
        }

        #[test]
        fn maxpower_non_increasing_in_u(u1 in -50.0f64..50.0, du in 0.0f64..50.0) {
            let mut s = ControllerState::new(10.0, 100.0, 0.0, 3.0).unwrap();
            let a = apply_maxpower(&mut s, u1);
            let b = apply_maxpower(&mut s, u1 + du);
            prop_assert!(b <= a);
        }
    }
}
