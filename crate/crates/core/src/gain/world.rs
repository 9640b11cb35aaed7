use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{FeatureDims, FeatureVector, ValueDistribution};
use crate::error::{invalid, Result};

/// Synthetic request population: a latent standard-normal score drives both the
/// request value and noisy observable features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestWorld {
    pub value_distribution: ValueDistribution,
    pub dims: FeatureDims,
    /// Standard deviation of the noise added to each informative feature.
    pub feature_noise: f64,
}

impl Default for RequestWorld {
    fn default() -> Self {
        Self {
            value_distribution: ValueDistribution::default(),
            dims: FeatureDims {
                user_profile: 4,
                user_behavior: 4,
                context: 2,
                system_status: 1,
            },
            feature_noise: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestSample {
    pub features: FeatureVector,
    pub value: f64,
}

impl RequestWorld {
    pub fn with_value_distribution(value_distribution: ValueDistribution) -> Self {
        Self {
            value_distribution,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.value_distribution.validate()?;
        if !(self.feature_noise.is_finite() && self.feature_noise >= 0.0) {
            return Err(invalid("feature_noise must be >= 0"));
        }
        Ok(())
    }

    /// `utilization` fills the system-status group.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, utilization: f64) -> RequestSample {
        let z: f64 = StandardNormal.sample(rng);
        let noise = self.feature_noise;
        let informative = |n: usize, rng: &mut R| -> Vec<f64> {
            (0..n)
                .map(|k| {
                    let loading = 1.0 - k as f64 / (n as f64 + 1.0);
                    let e: f64 = StandardNormal.sample(rng);
                    loading * z + noise * e
                })
                .collect()
        };
        let user_profile = informative(self.dims.user_profile, rng);
        let user_behavior = informative(self.dims.user_behavior, rng);
        let context = (0..self.dims.context)
            .map(|k| {
                let e: f64 = StandardNormal.sample(rng);
                // the first context slot carries an upstream-stage score
                if k == 0 {
                    z + 0.3 * noise * e
                } else {
                    e
                }
            })
            .collect();
        let system_status = vec![utilization; self.dims.system_status];
        RequestSample {
            features: FeatureVector {
                user_profile,
                user_behavior,
                context,
                system_status,
            },
            value: self.value_distribution.from_standard_normal(z),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_are_seeded_and_shaped() {
        let w = RequestWorld::default();
        let mut a = ChaCha8Rng::seed_from_u64(4);
        let mut b = ChaCha8Rng::seed_from_u64(4);
        let s1 = w.sample(&mut a, 0.3);
        let s2 = w.sample(&mut b, 0.3);
        assert_eq!(s1, s2);
        assert_eq!(s1.features.dims(), w.dims);
        assert_eq!(s1.features.system_status, vec![0.3]);
        assert!(s1.value > 0.0);
    }

    #[test]
    fn upstream_score_tracks_value() {
        let w = RequestWorld::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for _ in 0..2000 {
            let s = w.sample(&mut rng, 0.0);
            let x = s.features.context[0];
            let y = s.value.ln();
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        assert!(sxy / (sxx * syy).sqrt() > 0.9);
    }
}
