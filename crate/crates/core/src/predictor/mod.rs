//! Position prediction with gradient-boosted regression trees.
//!
//! One ensemble per coordinate. By default each ensemble is fitted to the
//! displacement from the last observed position and the prediction adds that
//! position back ([`TargetEncoding::Displacement`]). Trees are piecewise
//! constant, and an absolute coordinate would cost most of their capacity on
//! reproducing the identity map.

mod boost;
mod dataset;
mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use boost::{fit, BoostParams, BoostedModel, Samples, TrainingHistory};
pub use dataset::{build_dataset, Coordinate, DatasetRow, SupervisedDataset, WindowSpec, TRAIN_FRACTION};
pub use tree::RegressionTree;

use crate::error::{Error, Result};
use crate::io::{read_json, write_atomic, write_json};
use crate::mobility::{ArenaConfig, Trace};
use crate::par::Execution;
use crate::Point;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetEncoding {
    /// Fit the coordinate itself.
    Absolute,
    /// Fit the offset from the last observed position.
    #[default]
    Displacement,
}

/// A boosted ensemble for one coordinate plus its target encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateModel {
    pub coordinate: Coordinate,
    /// Feature whose value is added to the ensemble output, if any.
    pub anchor_feature: Option<usize>,
    pub model: BoostedModel,
}

impl CoordinateModel {
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        let raw = self.model.predict(features)?;
        Ok(match self.anchor_feature {
            Some(a) => raw + features[a],
            None => raw,
        })
    }
}

/// Both coordinate models and the window they were trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionPredictor {
    pub window: WindowSpec,
    pub encoding: TargetEncoding,
    pub x: CoordinateModel,
    pub y: CoordinateModel,
}

impl PositionPredictor {
    pub fn predict(&self, features: &[f64]) -> Result<Point> {
        Ok(Point::new(self.x.predict(features)?, self.y.predict(features)?))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

/// Splits the training indices of `dataset` into (fit, validation), holding
/// out the last `fraction` of each station's training rows.
fn validation_split(dataset: &SupervisedDataset, fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let mut fit_idx = Vec::new();
    let mut valid_idx = Vec::new();
    let mut start = 0;
    let train = &dataset.train;
    while start < train.len() {
        let station = dataset.rows[train[start]].station_id;
        let mut end = start;
        while end < train.len() && dataset.rows[train[end]].station_id == station {
            end += 1;
        }
        let n = end - start;
        let n_valid = (n as f64 * fraction).floor() as usize;
        let n_fit = (n - n_valid).max(1);
        fit_idx.extend_from_slice(&train[start..start + n_fit]);
        valid_idx.extend_from_slice(&train[start + n_fit..end]);
        start = end;
    }
    (fit_idx, valid_idx)
}

/// Trains one coordinate model on the training split of `dataset`.
pub fn train(
    dataset: &SupervisedDataset,
    coordinate: Coordinate,
    params: &BoostParams,
    encoding: TargetEncoding,
) -> Result<CoordinateModel> {
    if dataset.train.is_empty() {
        return Err(Error::Training("dataset has no training rows".into()));
    }
    let anchor = match encoding {
        TargetEncoding::Absolute => None,
        TargetEncoding::Displacement => Some(dataset.window.last_position_index(coordinate)),
    };
    let target = |i: usize| {
        let row = &dataset.rows[i];
        row.target(coordinate) - anchor.map_or(0.0, |a| row.features[a])
    };
    let (fit_idx, valid_idx) = validation_split(dataset, params.validation_fraction);
    let gather = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            idx.iter().map(|&i| dataset.rows[i].features.clone()).collect(),
            idx.iter().map(|&i| target(i)).collect(),
        )
    };
    let (fx, fy) = gather(&fit_idx);
    let (vx, vy) = gather(&valid_idx);
    let model = fit(
        Samples {
            features: &fx,
            targets: &fy,
        },
        Some(Samples {
            features: &vx,
            targets: &vy,
        }),
        &dataset.feature_names,
        params,
    )?;
    Ok(CoordinateModel {
        coordinate,
        anchor_feature: anchor,
        model,
    })
}

/// Trains the x and y models, concurrently when `exec` allows.
pub fn train_predictor(
    exec: Execution,
    dataset: &SupervisedDataset,
    params: &BoostParams,
    encoding: TargetEncoding,
) -> Result<PositionPredictor> {
    let mut models = exec
        .try_map(&[Coordinate::X, Coordinate::Y], |&c| {
            train(dataset, c, params, encoding)
        })?
        .into_iter();
    let (Some(x), Some(y)) = (models.next(), models.next()) else {
        unreachable!("two coordinates in, two models out");
    };
    Ok(PositionPredictor {
        window: dataset.window,
        encoding,
        x,
        y,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub rows: usize,
    pub model_x: f64,
    pub model_y: f64,
    /// Baseline that predicts the last observed position.
    pub persistence_x: f64,
    pub persistence_y: f64,
}

impl RmseReport {
    pub fn model_combined(&self) -> f64 {
        ((self.model_x * self.model_x + self.model_y * self.model_y) / 2.0).sqrt()
    }

    pub fn persistence_combined(&self) -> f64 {
        ((self.persistence_x.powi(2) + self.persistence_y.powi(2)) / 2.0).sqrt()
    }
}

pub fn rmse(pairs: impl Iterator<Item = (f64, f64)>) -> Result<f64> {
    let (mut sse, mut n) = (0.0, 0usize);
    for (pred, truth) in pairs {
        sse += (pred - truth) * (pred - truth);
        n += 1;
    }
    if n == 0 {
        return Err(Error::Evaluation("empty split".into()));
    }
    Ok((sse / n as f64).sqrt())
}

/// RMSE of the model and of the persistence baseline on `rows`.
pub fn evaluate_rmse(predictor: &PositionPredictor, dataset: &SupervisedDataset, rows: &[usize]) -> Result<RmseReport> {
    if rows.is_empty() {
        return Err(Error::Evaluation("empty test split".into()));
    }
    let preds: Vec<Point> = rows
        .iter()
        .map(|&i| predictor.predict(&dataset.rows[i].features))
        .collect::<Result<_>>()?;
    let w = dataset.window;
    let pick = |c: Coordinate| {
        let li = w.last_position_index(c);
        let model = rmse(rows.iter().zip(&preds).map(|(&i, p)| {
            let v = if c == Coordinate::X { p.x } else { p.y };
            (v, dataset.rows[i].target(c))
        }));
        let persistence = rmse(
            rows.iter()
                .map(|&i| (dataset.rows[i].features[li], dataset.rows[i].target(c))),
        );
        (model, persistence)
    };
    let (mx, px) = pick(Coordinate::X);
    let (my, py) = pick(Coordinate::Y);
    Ok(RmseReport {
        rows: rows.len(),
        model_x: mx?,
        model_y: my?,
        persistence_x: px?,
        persistence_y: py?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedPosition {
    pub station_id: usize,
    pub x: f64,
    pub y: f64,
}

impl PredictedPosition {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Predicts every station's position at `at_time`, using the window that
/// ends `horizon` samples earlier. Predictions are clamped into the arena.
pub fn predict_positions(predictor: &PositionPredictor, trace: &Trace, at_time: f64) -> Result<Vec<PredictedPosition>> {
    let cfg = &trace.config;
    let w = predictor.window;
    let idx = (at_time / cfg.sample_interval).round();
    if idx < 0.0 || (idx * cfg.sample_interval - at_time).abs() > 1e-9 * cfg.sample_interval.max(1.0) {
        return Err(Error::Prediction(format!("time {at_time} is not on the sampling grid")));
    }
    let target = idx as usize;
    let Some(obs) = target.checked_sub(w.horizon).filter(|&o| o >= w.history) else {
        return Err(Error::Prediction(format!(
            "insufficient history to predict t={at_time}: need {} samples before it",
            w.history + w.horizon
        )));
    };
    if obs >= trace.samples_per_station() {
        return Err(Error::Prediction(format!(
            "trace ends before the observation window for t={at_time}"
        )));
    }
    trace
        .stations()
        .map(|samples| {
            let p = predictor.predict(&w.features_at(samples, obs))?;
            let p = clamp_to_arena(cfg, p);
            Ok(PredictedPosition {
                station_id: samples[0].station_id,
                x: p.x,
                y: p.y,
            })
        })
        .collect()
}

pub fn clamp_to_arena(cfg: &ArenaConfig, p: Point) -> Point {
    cfg.clamp(p)
}

/// Writes `station_id,pred_x,pred_y` with shortest round-trip decimals.
pub fn write_predictions(preds: &[PredictedPosition], path: &Path) -> Result<()> {
    let mut out = String::from("station_id,pred_x,pred_y\n");
    for p in preds {
        out.push_str(&format!("{},{},{}\n", p.station_id, p.x, p.y));
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictedPosition>> {
    let text = crate::io::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "station_id,pred_x,pred_y")) => {}
        _ => return Err(Error::parse(path, 1, "expected header station_id,pred_x,pred_y")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line_no = i as u64 + 1;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 3 columns, found {}", cols.len()),
            ));
        }
        let station_id: usize = cols[0]
            .parse()
            .map_err(|_| Error::parse(path, line_no, "bad station_id"))?;
        if station_id != out.len() {
            return Err(Error::parse(path, line_no, "station ids must be 0..n in order"));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, line_no, format!("bad coordinate {s:?}")))
        };
        out.push(PredictedPosition {
            station_id,
            x: num(cols[1])?,
            y: num(cols[2])?,
        });
    }
    Ok(out)
}
