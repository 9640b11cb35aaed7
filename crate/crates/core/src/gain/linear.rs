//! Per-action ridge regression of realized gain on request features.

use std::fmt::Write as _;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{monotonize, FeatureDims, FeatureVector};
use crate::error::{invalid, DcafError, Result};

const FORMAT_HEADER: &str = "dcaf-linear-estimator v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub features: FeatureVector,
    pub action: usize,
    pub gain: f64,
}

/// One linear model per action over the concatenated feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEstimator {
    dims: FeatureDims,
    regularization: f64,
    intercepts: Vec<f64>,
    /// `weights[j]` has `dims.total()` entries.
    weights: Vec<Vec<f64>>,
}

impl LinearEstimator {
    pub fn from_parts(
        dims: FeatureDims,
        regularization: f64,
        intercepts: Vec<f64>,
        weights: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if intercepts.is_empty() || intercepts.len() != weights.len() {
            return Err(invalid("estimator needs one intercept and one weight vector per action"));
        }
        if weights.iter().any(|w| w.len() != dims.total()) {
            return Err(invalid("weight vector length does not match feature dimensions"));
        }
        Ok(Self {
            dims,
            regularization,
            intercepts,
            weights,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.intercepts.len()
    }

    pub fn dims(&self) -> FeatureDims {
        self.dims
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub fn weights(&self, action: usize) -> &[f64] {
        &self.weights[action]
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    fn check_dims(&self, features: &FeatureVector) -> Result<()> {
        if features.dims() != self.dims {
            return Err(invalid(format!(
                "feature dimensions {:?} do not match estimator {:?}",
                features.dims(),
                self.dims
            )));
        }
        Ok(())
    }

    fn raw(&self, x: &[f64], action: usize) -> f64 {
        let dot: f64 = self.weights[action].iter().zip(x).map(|(w, v)| w * v).sum();
        self.intercepts[action] + dot
    }

    /// Linear score for one action, clamped at zero.
    pub fn predict(&self, features: &FeatureVector, action: usize) -> Result<f64> {
        self.check_dims(features)?;
        if action >= self.num_actions() {
            return Err(invalid(format!(
                "action {action} out of range for {} actions",
                self.num_actions()
            )));
        }
        Ok(self.raw(&features.concat(), action).max(0.0))
    }

    /// Clamped predictions for every action, made non-decreasing across actions.
    pub fn predict_row(&self, features: &FeatureVector) -> Result<Vec<f64>> {
        self.check_dims(features)?;
        let x = features.concat();
        let mut row: Vec<f64> = (0..self.num_actions())
            .map(|j| self.raw(&x, j).max(0.0))
            .collect();
        monotonize(&mut row);
        Ok(row)
    }

    /// Versioned plain-text form: header, sizes, then row-major weights.
    pub fn to_text(&self) -> String {
        let d = self.dims;
        let mut out = String::new();
        let _ = writeln!(out, "{FORMAT_HEADER}");
        let _ = writeln!(out, "actions {}", self.num_actions());
        let _ = writeln!(
            out,
            "dims {} {} {} {}",
            d.user_profile, d.user_behavior, d.context, d.system_status
        );
        let _ = writeln!(out, "regularization {:e}", self.regularization);
        let _ = writeln!(out, "intercepts {}", join(&self.intercepts));
        for w in &self.weights {
            let _ = writeln!(out, "weights {}", join(w));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let parse_err = |line: usize, message: String| DcafError::Parse { line, message };
        match lines.next() {
            Some((_, FORMAT_HEADER)) => {}
            Some((_, other)) => {
                return Err(DcafError::Schema(format!("unknown estimator header {other:?}")))
            }
            None => return Err(parse_err(1, "empty estimator file".into())),
        }
        let mut field = |name: &str| -> Result<(usize, Vec<f64>)> {
            let (line, text) = lines
                .next()
                .ok_or_else(|| parse_err(0, format!("missing `{name}` line")))?;
            let mut parts = text.split_whitespace();
            if parts.next() != Some(name) {
                return Err(parse_err(line, format!("expected `{name}`")));
            }
            let vals = parts
                .map(|p| p.parse::<f64>().map_err(|e| parse_err(line, format!("{name}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            Ok((line, vals))
        };
        let (line, a) = field("actions")?;
        let actions = match a.as_slice() {
            [n] if *n >= 1.0 && n.fract() == 0.0 => *n as usize,
            _ => return Err(parse_err(line, "actions takes one positive integer".into())),
        };
        let (line, d) = field("dims")?;
        let dims = match d.as_slice() {
            [a, b, c, e] if d.iter().all(|v| *v >= 0.0 && v.fract() == 0.0) => FeatureDims {
                user_profile: *a as usize,
                user_behavior: *b as usize,
                context: *c as usize,
                system_status: *e as usize,
            },
            _ => return Err(parse_err(line, "dims takes four non-negative integers".into())),
        };
        let (line, r) = field("regularization")?;
        let regularization = match r.as_slice() {
            [v] => *v,
            _ => return Err(parse_err(line, "regularization takes one value".into())),
        };
        let (line, intercepts) = field("intercepts")?;
        if intercepts.len() != actions {
            return Err(parse_err(line, format!("expected {actions} intercepts")));
        }
        let mut weights = Vec::with_capacity(actions);
        for _ in 0..actions {
            let (line, w) = field("weights")?;
            if w.len() != dims.total() {
                return Err(parse_err(line, format!("expected {} weights", dims.total())));
            }
            weights.push(w);
        }
        Self::from_parts(dims, regularization, intercepts, weights)
    }
}

fn join(vals: &[f64]) -> String {
    vals.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ")
}

/// Ridge least squares per action with an unpenalized intercept.
///
/// Actions without records get zero weights and a zero intercept.
pub fn fit_linear(
    records: &[TrainingRecord],
    num_actions: usize,
    regularization: f64,
) -> Result<LinearEstimator> {
    if num_actions == 0 {
        return Err(invalid("estimator needs at least one action"));
    }
    if !(regularization.is_finite() && regularization >= 0.0) {
        return Err(invalid(format!("regularization must be >= 0, got {regularization}")));
    }
    let dims = records.first().map(|r| r.features.dims()).unwrap_or_default();
    for (i, r) in records.iter().enumerate() {
        if r.features.dims() != dims {
            return Err(invalid(format!("record {i} has feature dimensions {:?}, expected {dims:?}", r.features.dims())));
        }
        if r.action >= num_actions {
            return Err(invalid(format!("record {i} has action {} out of range", r.action)));
        }
        if !r.gain.is_finite() {
            return Err(invalid(format!("record {i} has non-finite gain")));
        }
        r.features.validate()?;
    }
    let d = dims.total();
    let mut intercepts = vec![0.0; num_actions];
    let mut weights = vec![vec![0.0; d]; num_actions];
    for j in 0..num_actions {
        let rows: Vec<&TrainingRecord> = records.iter().filter(|r| r.action == j).collect();
        if rows.is_empty() {
            warn!("no training records for action {j}; its weights default to zero");
            continue;
        }
        let (b, w) = ridge(&rows, d, regularization);
        intercepts[j] = b;
        weights[j] = w;
    }
    LinearEstimator::from_parts(dims, regularization, intercepts, weights)
}

fn ridge(rows: &[&TrainingRecord], d: usize, regularization: f64) -> (f64, Vec<f64>) {
    let n = rows.len() as f64;
    let y_mean = rows.iter().map(|r| r.gain).sum::<f64>() / n;
    if d == 0 {
        return (y_mean, vec![]);
    }
    let xs: Vec<Vec<f64>> = rows.iter().map(|r| r.features.concat()).collect();
    let mut x_mean = vec![0.0; d];
    for x in &xs {
        for (m, v) in x_mean.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    let mut centered = vec![0.0; d];
    for (x, r) in xs.iter().zip(rows) {
        for k in 0..d {
            centered[k] = x[k] - x_mean[k];
        }
        let yc = r.gain - y_mean;
        for a in 0..d {
            rhs[a] += centered[a] * yc;
            for b in 0..d {
                gram[(a, b)] += centered[a] * centered[b];
            }
        }
    }
    for a in 0..d {
        gram[(a, a)] += regularization;
    }
    let w = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        // singular design (e.g. constant features): minimum-norm solution
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(d)),
    };
    let intercept = y_mean - w.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    (intercept, w.iter().copied().collect())
}
