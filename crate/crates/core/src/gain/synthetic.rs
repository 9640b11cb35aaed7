use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::allocation::{ActionSpace, GainSource};
use crate::error::{invalid, Result};

/// `v * q^alpha`. With `0 < alpha < 1` the gain rises with cost while gain per
/// unit cost `v * q^(alpha - 1)` falls.
pub fn synthetic_gain(v: f64, q: f64, alpha: f64) -> Result<f64> {
    if !(v.is_finite() && v > 0.0) {
        return Err(invalid(format!("request value must be positive, got {v}")));
    }
    if !(q.is_finite() && q > 0.0) {
        return Err(invalid(format!("action cost must be positive, got {q}")));
    }
    check_alpha(alpha)?;
    Ok(v * q.powf(alpha))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueDistribution {
    LogNormal { mu: f64, sigma: f64 },
}

impl Default for ValueDistribution {
    fn default() -> Self {
        ValueDistribution::LogNormal { mu: 0.0, sigma: 1.0 }
    }
}

impl ValueDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ValueDistribution::LogNormal { mu, sigma } => {
                if !(mu.is_finite() && sigma.is_finite() && sigma >= 0.0) {
                    return Err(invalid(format!("invalid log-normal parameters mu={mu} sigma={sigma}")));
                }
            }
        }
        Ok(())
    }

    /// Maps a standard-normal draw to a request value.
    pub fn from_standard_normal(&self, z: f64) -> f64 {
        match *self {
            ValueDistribution::LogNormal { mu, sigma } => (mu + sigma * z).exp(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ValueDistribution::LogNormal { mu, sigma: 0.0 } => mu.exp(),
            ValueDistribution::LogNormal { mu, sigma } => {
                LogNormal::new(mu, sigma).expect("validated parameters").sample(rng)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGainParams {
    #[serde(default)]
    pub value_distribution: ValueDistribution,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for SyntheticGainParams {
    fn default() -> Self {
        Self {
            value_distribution: ValueDistribution::default(),
            alpha: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticGainParams {
    pub fn validate(&self) -> Result<()> {
        self.value_distribution.validate()?;
        check_alpha(self.alpha)
    }
}

/// Precomputed `q_j^alpha` for one action space.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticGainModel {
    actions: ActionSpace,
    alpha: f64,
    powered: Vec<f64>,
}

impl SyntheticGainModel {
    pub fn new(actions: ActionSpace, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let powered = actions.costs().iter().map(|q| q.powf(alpha)).collect();
        Ok(Self {
            actions,
            alpha,
            powered,
        })
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn fill_row(&self, v: f64, out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.powered) {
            *o = v * p;
        }
    }

    pub fn row(&self, v: f64) -> Vec<f64> {
        self.powered.iter().map(|p| v * p).collect()
    }
}

/// Lazily generated rows: stores one value per request instead of `N * M` gains.
#[derive(Debug, Clone)]
pub struct SyntheticRows {
    model: SyntheticGainModel,
    values: Vec<f64>,
}

impl SyntheticRows {
    pub fn new(model: SyntheticGainModel, values: Vec<f64>) -> Self {
        Self { model, values }
    }

    pub fn sample<R: Rng + ?Sized>(
        model: SyntheticGainModel,
        dist: &ValueDistribution,
        n: usize,
        rng: &mut R,
    ) -> Self {
        let values = (0..n).map(|_| dist.sample(rng)).collect();
        Self { model, values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn model(&self) -> &SyntheticGainModel {
        &self.model
    }
}

impl GainSource for SyntheticRows {
    fn num_requests(&self) -> usize {
        self.values.len()
    }

    fn num_actions(&self) -> usize {
        self.model.actions.len()
    }

    fn for_each_row<F: FnMut(usize, &[f64])>(&self, mut f: F) {
        let mut buf = vec![0.0; self.model.actions.len()];
        for (i, &v) in self.values.iter().enumerate() {
            self.model.fill_row(v, &mut buf);
            f(i, &buf);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{verify_assumptions, GainMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn synthetic_gain_examples() {
        assert_eq!(synthetic_gain(2.0, 4.0, 0.5).unwrap(), 4.0);
        for alpha in [0.1, 0.5, 0.9] {
            assert_eq!(synthetic_gain(3.5, 1.0, alpha).unwrap(), 3.5);
        }
        assert!(synthetic_gain(0.0, 1.0, 0.5).is_err());
        assert!(synthetic_gain(1.0, 0.0, 0.5).is_err());
        assert!(synthetic_gain(1.0, 1.0, 1.0).is_err());
        assert!(synthetic_gain(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn row_over_costs_passes_assumptions() {
        let actions = ActionSpace::new(vec![1.0, 2.0, 4.0]).unwrap();
        let model = SyntheticGainModel::new(actions.clone(), 0.5).unwrap();
        let row = model.row(1.0);
        assert_eq!(row[0], 1.0);
        assert!((row[1] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(row[2], 2.0);
        let m = GainMatrix::from_rows(3, &[row]).unwrap();
        assert!(verify_assumptions(&m, &actions).holds());
    }

    #[test]
    fn lazy_rows_match_materialized() {
        let actions = ActionSpace::ladder(5, 10.0).unwrap();
        let model = SyntheticGainModel::new(actions, 0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows = SyntheticRows::sample(model.clone(), &ValueDistribution::default(), 20, &mut rng);
        let mut seen = 0;
        rows.for_each_row(|i, r| {
            assert_eq!(r, model.row(rows.values()[i]).as_slice());
            seen += 1;
        });
        assert_eq!(seen, 20);
    }

    #[test]
    fn zero_sigma_is_homogeneous() {
        let d = ValueDistribution::LogNormal { mu: 0.5, sigma: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..10).all(|_| d.sample(&mut rng) == 0.5f64.exp()));
    }
}
