//! Gradient boosting with squared-error loss.
//!
//! With squared error the negative gradient is the plain residual, and the
//! optimal leaf value is the mean residual of the leaf.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::tree::{grow, ColumnData, GrowParams, RegressionTree};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoostParams {
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Fraction of features sampled per tree.
    pub colsample: f64,
    /// Fraction of training rows sampled per tree.
    pub subsample: f64,
    pub num_rounds: usize,
    /// Rounds without validation improvement before training stops.
    pub early_stop_patience: usize,
    pub min_samples_leaf: usize,
    /// Share of each station's training rows held out for early stopping.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            max_depth: 6,
            learning_rate: 0.1,
            colsample: 1.0,
            subsample: 1.0,
            num_rounds: 100,
            early_stop_patience: 10,
            min_samples_leaf: 2,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::Config("max_depth must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config("learning_rate must be in (0, 1]".into()));
        }
        if !(self.colsample > 0.0 && self.colsample <= 1.0) {
            return Err(Error::Config("colsample must be in (0, 1]".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::Config("subsample must be in (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config("validation_fraction must be in [0, 1)".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::Config("min_samples_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-round RMSE, recorded during training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    /// Training RMSE after each round; entry 0 is the base prediction alone.
    pub train_rmse: Vec<f64>,
    /// Validation RMSE after each round, when a validation set was given.
    pub valid_rmse: Vec<f64>,
    /// Number of trees kept (after early-stopping truncation).
    pub kept_rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub base_prediction: f64,
    pub trees: Vec<RegressionTree>,
    pub params: BoostParams,
    pub feature_schema: Vec<String>,
    #[serde(default)]
    pub history: TrainingHistory,
}

impl BoostedModel {
    /// `base_prediction + learning_rate * sum of tree outputs`.
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.feature_schema.len() {
            return Err(Error::Prediction(format!(
                "expected {} features ({}), got {}",
                self.feature_schema.len(),
                self.feature_schema.join(","),
                features.len()
            )));
        }
        Ok(self.predict_unchecked(features))
    }

    pub(crate) fn predict_unchecked(&self, features: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(features)).sum();
        self.base_prediction + self.params.learning_rate * sum
    }
}

/// Mean that is exact for constant input (`x0 + mean(x - x0)`).
fn stable_mean(v: &[f64]) -> f64 {
    let x0 = v[0];
    x0 + v.iter().map(|x| x - x0).sum::<f64>() / v.len() as f64
}

fn rmse(pred: &[f64], target: &[f64]) -> f64 {
    let sse: f64 = pred.iter().zip(target).map(|(p, t)| (t - p) * (t - p)).sum();
    (sse / target.len() as f64).sqrt()
}

/// A row-major feature matrix with its targets.
#[derive(Debug, Clone, Copy)]
pub struct Samples<'a> {
    pub features: &'a [Vec<f64>],
    pub targets: &'a [f64],
}

/// Fits a boosted ensemble. `validation`, when non-empty, drives early
/// stopping with `params.early_stop_patience`; the ensemble is truncated to
/// the round with the best validation RMSE.
pub fn fit(
    train: Samples<'_>,
    validation: Option<Samples<'_>>,
    feature_schema: &[String],
    params: &BoostParams,
) -> Result<BoostedModel> {
    params.validate()?;
    let n = train.targets.len();
    if n == 0 || train.features.len() != n {
        return Err(Error::Training("empty training set".into()));
    }
    let n_features = feature_schema.len();
    if train.features.iter().any(|r| r.len() != n_features) {
        return Err(Error::Training("feature rows do not match the schema".into()));
    }
    if let Some(v) = &validation {
        if v.features.len() != v.targets.len() || v.features.iter().any(|r| r.len() != n_features) {
            return Err(Error::Training("validation rows do not match the schema".into()));
        }
    }
    let validation = validation.filter(|v| !v.targets.is_empty());

    let base = stable_mean(train.targets);
    let data = ColumnData::new(train.features, n_features);
    let mut pred = vec![base; n];
    let mut residual: Vec<f64> = train.targets.iter().map(|t| t - base).collect();
    let mut valid_pred = validation.map(|v| vec![base; v.targets.len()]);

    let mut history = TrainingHistory {
        train_rmse: vec![rmse(&pred, train.targets)],
        valid_rmse: Vec::new(),
        kept_rounds: 0,
    };
    if let (Some(v), Some(vp)) = (&validation, &valid_pred) {
        history.valid_rmse.push(rmse(vp, v.targets));
    }

    let grow_params = GrowParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
    };
    let n_cols = ((params.colsample * n_features as f64).round() as usize).clamp(1, n_features.max(1));
    let n_sub = ((params.subsample * n as f64).round() as usize).clamp(1, n);

    let mut trees: Vec<RegressionTree> = Vec::new();
    let mut best = (f64::INFINITY, 0usize);
    let mut in_sample = vec![true; n];

    for round in 0..params.num_rounds {
        let mut rng = seed::rng(seed::derive(params.seed, round as u64));
        let features: Vec<usize> = if n_cols < n_features {
            let mut f = index::sample(&mut rng, n_features, n_cols).into_vec();
            f.sort_unstable();
            f
        } else {
            (0..n_features).collect()
        };
        if n_sub < n {
            in_sample.iter_mut().for_each(|s| *s = false);
            for r in index::sample(&mut rng, n, n_sub) {
                in_sample[r] = true;
            }
        }

        let tree = grow(&data, &residual, &in_sample, &features, &grow_params);
        for (r, (p, res)) in pred.iter_mut().zip(residual.iter_mut()).enumerate() {
            *p += params.learning_rate * tree.predict(&train.features[r]);
            *res = train.targets[r] - *p;
        }
        history.train_rmse.push(rmse(&pred, train.targets));

        if let (Some(v), Some(vp)) = (&validation, valid_pred.as_mut()) {
            for (p, row) in vp.iter_mut().zip(v.features) {
                *p += params.learning_rate * tree.predict(row);
            }
            let score = rmse(vp, v.targets);
            history.valid_rmse.push(score);
            trees.push(tree);
            if score < best.0 {
                best = (score, trees.len());
            } else if trees.len() - best.1 >= params.early_stop_patience.max(1) {
                break;
            }
        } else {
            trees.push(tree);
        }
    }

    if validation.is_some() {
        trees.truncate(best.1);
    }
    history.kept_rounds = trees.len();
    Ok(BoostedModel {
        base_prediction: base,
        trees,
        params: params.clone(),
        feature_schema: feature_schema.to_vec(),
        history,
    })
}
