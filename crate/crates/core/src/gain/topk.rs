use rand::Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::allocation::ActionSpace;
use crate::error::{invalid, Result};

/// Candidate eCPMs for one request, in retrieval order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdScorePool {
    pub scores: Vec<f64>,
    pub k: usize,
}

impl AdScorePool {
    pub fn new(scores: Vec<f64>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("top-k parameter must be at least 1"));
        }
        if let Some(s) = scores.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(invalid(format!("pool scores must be finite and >= 0, got {s}")));
        }
        Ok(Self { scores, k })
    }
}

/// Scores the first `evaluated` candidates and sums the best `min(k, evaluated)`.
pub fn topk_pool_gain(pool: &AdScorePool, evaluated: usize) -> Result<f64> {
    if evaluated == 0 || evaluated > pool.scores.len() {
        return Err(invalid(format!(
            "evaluated count {evaluated} outside 1..={}",
            pool.scores.len()
        )));
    }
    let mut head = pool.scores[..evaluated].to_vec();
    head.sort_by(|a, b| b.total_cmp(a));
    Ok(head.iter().take(pool.k).sum())
}

/// Gain row for an action space whose costs are candidate counts.
pub fn pool_gain_row(pool: &AdScorePool, actions: &ActionSpace) -> Result<Vec<f64>> {
    actions
        .costs()
        .iter()
        .map(|&q| {
            if q.fract() != 0.0 {
                return Err(invalid(format!("pool gains need integer action costs, got {q}")));
            }
            topk_pool_gain(pool, q as usize)
        })
        .collect()
}

/// Lowers gains where gain per unit cost would rise, so the row has diminishing
/// returns; a non-decreasing input stays non-decreasing.
pub fn cap_ratio_growth(row: &mut [f64], actions: &ActionSpace) {
    let q = actions.costs();
    for j in 1..row.len() {
        let prev_ratio = row[j - 1] / q[j - 1];
        if row[j] / q[j] > prev_ratio {
            let mut cap = prev_ratio * q[j];
            while cap / q[j] > prev_ratio {
                cap = cap.next_down();
            }
            row[j] = cap;
        }
    }
}

/// Generates retrieval-ordered candidate pools whose eCPM decomposes as ctr x bid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolModel {
    pub k: usize,
    pub pool_size: usize,
    pub bid_sigma: f64,
    pub ctr_sigma: f64,
    pub base_ctr: f64,
    /// Log-scale noise of the upstream (pre-ranking) score that fixes the order.
    pub prerank_noise: f64,
}

impl Default for PoolModel {
    fn default() -> Self {
        Self {
            k: 3,
            pool_size: 100,
            bid_sigma: 0.5,
            ctr_sigma: 0.5,
            base_ctr: 0.02,
            prerank_noise: 0.5,
        }
    }
}

impl PoolModel {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.pool_size == 0 {
            return Err(invalid("pool model needs k >= 1 and a non-empty pool"));
        }
        for (name, s) in [
            ("bid_sigma", self.bid_sigma),
            ("ctr_sigma", self.ctr_sigma),
            ("prerank_noise", self.prerank_noise),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(invalid(format!("{name} must be >= 0, got {s}")));
            }
        }
        if !(self.base_ctr > 0.0 && self.base_ctr <= 1.0) {
            return Err(invalid(format!("base_ctr must lie in (0, 1], got {}", self.base_ctr)));
        }
        Ok(())
    }

    /// `value` scales every candidate's click propensity for this request.
    pub fn generate<R: Rng + ?Sized>(&self, value: f64, rng: &mut R) -> AdScorePool {
        let bid = LogNormal::new(0.0, self.bid_sigma).expect("validated");
        let ctr = LogNormal::new(0.0, self.ctr_sigma).expect("validated");
        let mut cands: Vec<(f64, f64)> = (0..self.pool_size)
            .map(|_| {
                let p = (self.base_ctr * value * ctr.sample(rng)).min(1.0);
                let ecpm = 1000.0 * p * bid.sample(rng);
                let z: f64 = StandardNormal.sample(rng);
                (ecpm * (self.prerank_noise * z).exp(), ecpm)
            })
            .collect();
        cands.sort_by(|a, b| b.0.total_cmp(&a.0));
        AdScorePool {
            scores: cands.into_iter().map(|(_, e)| e).collect(),
            k: self.k,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{verify_assumptions, GainMatrix};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn topk_examples() {
        let one = AdScorePool::new(vec![5.0, 1.0, 3.0], 1).unwrap();
        assert_eq!(topk_pool_gain(&one, 2).unwrap(), 5.0);
        let two = AdScorePool::new(vec![5.0, 1.0, 3.0], 2).unwrap();
        assert_eq!(topk_pool_gain(&two, 3).unwrap(), 8.0);
        assert!(topk_pool_gain(&two, 0).is_err());
        assert!(topk_pool_gain(&two, 4).is_err());
        assert!(AdScorePool::new(vec![1.0], 0).is_err());
    }

    fn binom(n: usize, k: usize) -> f64 {
        if k > n {
            return 0.0;
        }
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    /// Exact E[top-k sum of a uniformly random j-subset]: the r-th largest score
    /// counts when it is drawn and fewer than k of the r-1 larger ones are.
    fn exact_expectation(scores: &[f64], k: usize, j: usize) -> f64 {
        let mut s = scores.to_vec();
        s.sort_by(|a, b| b.total_cmp(a));
        let n = s.len();
        let total = binom(n, j);
        let mut e = 0.0;
        for (r, &x) in s.iter().enumerate() {
            // r larger items, n-1-r smaller ones; choose the other j-1 members
            let mut p = 0.0;
            for larger in 0..k.min(j) {
                p += binom(r, larger) * binom(n - 1 - r, j - 1 - larger);
            }
            e += x * p / total;
        }
        e
    }

    #[test]
    fn shuffled_expectation_is_concave_and_increasing() {
        let scores = vec![9.0, 7.5, 6.0, 4.0, 3.5, 2.0, 1.0, 0.5, 0.25, 0.1];
        let k = 3;
        let exact: Vec<f64> = (1..=scores.len()).map(|j| exact_expectation(&scores, k, j)).collect();
        assert!((exact[scores.len() - 1] - 22.5).abs() < 1e-12);
        for w in exact.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        for w in exact.windows(3) {
            assert!(w[2] - w[1] <= w[1] - w[0] + 1e-12);
        }

        let trials = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut sums = vec![0.0; scores.len()];
        let mut sq = vec![0.0; scores.len()];
        let mut pool = AdScorePool::new(scores.clone(), k).unwrap();
        for _ in 0..trials {
            pool.scores.shuffle(&mut rng);
            for j in 1..=scores.len() {
                let g = topk_pool_gain(&pool, j).unwrap();
                sums[j - 1] += g;
                sq[j - 1] += g * g;
            }
        }
        for j in 0..scores.len() {
            let mean = sums[j] / trials as f64;
            let var = (sq[j] / trials as f64 - mean * mean).max(0.0);
            let se = (var / trials as f64).sqrt();
            assert!((mean - exact[j]).abs() <= 5.0 * se + 1e-9, "j={} mc={mean} exact={}", j + 1, exact[j]);
        }
    }

    #[test]
    fn fixed_order_gain_is_non_decreasing() {
        let model = PoolModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let pool = model.generate(1.0, &mut rng);
            let g: Vec<f64> = (1..=pool.scores.len()).map(|j| topk_pool_gain(&pool, j).unwrap()).collect();
            assert!(g.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn ratio_cap_restores_both_assumptions() {
        let actions = ActionSpace::new(vec![1.0, 2.0, 3.0, 5.0]).unwrap();
        let pool = AdScorePool::new(vec![0.0, 0.0, 5.0, 1.0, 9.0], 2).unwrap();
        let mut row = pool_gain_row(&pool, &actions).unwrap();
        assert_eq!(row, vec![0.0, 0.0, 5.0, 14.0]);
        cap_ratio_growth(&mut row, &actions);
        let m = GainMatrix::from_rows(4, &[row]).unwrap();
        assert!(verify_assumptions(&m, &actions).holds());

        let model = PoolModel::default();
        let ladder = ActionSpace::ladder(10, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let pool = model.generate(1.0, &mut rng);
            let mut row = pool_gain_row(&pool, &ladder).unwrap();
            let before = row.clone();
            cap_ratio_growth(&mut row, &ladder);
            assert!(row.iter().zip(&before).all(|(a, b)| a <= b));
            let m = GainMatrix::from_rows(10, &[row]).unwrap();
            assert!(verify_assumptions(&m, &ladder).holds());
        }
    }

    #[test]
    fn pool_row_needs_integer_costs() {
        let pool = AdScorePool::new(vec![1.0, 2.0], 1).unwrap();
        let a = ActionSpace::new(vec![1.5]).unwrap();
        assert!(pool_gain_row(&pool, &a).is_err());
    }
}
