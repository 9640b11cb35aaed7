//! Sources of per-request expected gains `Q_ij`.

mod linear;
mod synthetic;
mod topk;
mod world;

pub use linear::{fit_linear, LinearEstimator, TrainingRecord};
pub use synthetic::{synthetic_gain, SyntheticGainModel, SyntheticGainParams, SyntheticRows, ValueDistribution};
pub use topk::{cap_ratio_growth, pool_gain_row, topk_pool_gain, AdScorePool, PoolModel};
pub use world::{RequestSample, RequestWorld};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Request features grouped the way the estimator consumes them. No per-ad
/// features: the estimate is conditioned on the action, not on a target ad.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub user_profile: Vec<f64>,
    pub user_behavior: Vec<f64>,
    /// Includes scores produced by earlier cascade stages.
    pub context: Vec<f64>,
    pub system_status: Vec<f64>,
}

/// Group widths of a [`FeatureVector`] schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureDims {
    pub user_profile: usize,
    pub user_behavior: usize,
    pub context: usize,
    pub system_status: usize,
}

impl FeatureDims {
    pub fn total(&self) -> usize {
        self.user_profile + self.user_behavior + self.context + self.system_status
    }
}

impl FeatureVector {
    pub fn dims(&self) -> FeatureDims {
        FeatureDims {
            user_profile: self.user_profile.len(),
            user_behavior: self.user_behavior.len(),
            context: self.context.len(),
            system_status: self.system_status.len(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.user_profile
            .iter()
            .chain(&self.user_behavior)
            .chain(&self.context)
            .chain(&self.system_status)
            .copied()
    }

    pub fn concat(&self) -> Vec<f64> {
        self.iter().collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.iter().all(f64::is_finite) {
            Ok(())
        } else {
            Err(invalid("feature values must be finite"))
        }
    }
}

/// Running-maximum pass over actions: never lowers a value, and the result is
/// non-decreasing in the action index.
pub fn monotonize(row: &mut [f64]) {
    let mut running = f64::NEG_INFINITY;
    for g in row.iter_mut() {
        running = running.max(*g);
        *g = running;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotonize_example() {
        let mut row = [3.0, 2.0, 5.0];
        monotonize(&mut row);
        assert_eq!(row, [3.0, 3.0, 5.0]);
    }

    #[test]
    fn feature_concat_order() {
        let f = FeatureVector {
            user_profile: vec![1.0],
            user_behavior: vec![2.0, 3.0],
            context: vec![4.0],
            system_status: vec![5.0],
        };
        assert_eq!(f.concat(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(f.dims().total(), 5);
    }
}
