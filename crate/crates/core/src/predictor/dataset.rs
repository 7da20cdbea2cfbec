//! Sliding-window supervised dataset built from a mobility trace.
//!
//! For an observation index `o` of one station the feature vector is
//!
//! ```text
//! x[o], x[o-1], ..., x[o-h+1], y[o], ..., y[o-h+1], x[o]-x[o-1], y[o]-y[o-1]
//! ```
//!
//! and the targets are the position at `o + horizon`. Observation indices
//! run over `h..=len-1-horizon`, so each station contributes
//! `len - h - horizon` rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobility::{Trace, TraceSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSpec {
    /// Past positions per coordinate in each feature vector.
    pub history: usize,
    /// Samples between the last observation and the target.
    pub horizon: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { history: 5, horizon: 1 }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if self.history < 1 || self.horizon < 1 {
            return Err(Error::Config("history and horizon must be >= 1".into()));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        2 * self.history + 2
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_features());
        for axis in ["x", "y"] {
            for lag in 0..self.history {
                names.push(format!("{axis}_lag{lag}"));
            }
        }
        names.push("vx".into());
        names.push("vy".into());
        names
    }

    /// Feature index holding the last observed x (or y) position.
    pub fn last_position_index(&self, coordinate: Coordinate) -> usize {
        match coordinate {
            Coordinate::X => 0,
            Coordinate::Y => self.history,
        }
    }

    /// Minimum samples per station for at least one row.
    pub fn min_samples(&self) -> usize {
        self.history + self.horizon + 1
    }

    /// Features for observation index `o` of one station's samples.
    pub fn features_at(&self, samples: &[TraceSample], o: usize) -> Vec<f64> {
        let mut f = Vec::with_capacity(self.n_features());
        for lag in 0..self.history {
            f.push(samples[o - lag].x);
        }
        for lag in 0..self.history {
            f.push(samples[o - lag].y);
        }
        f.push(samples[o].x - samples[o - 1].x);
        f.push(samples[o].y - samples[o - 1].y);
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coordinate {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub station_id: usize,
    /// Time of the target sample.
    pub time: f64,
    pub features: Vec<f64>,
    pub target_x: f64,
    pub target_y: f64,
}

impl DatasetRow {
    pub fn target(&self, c: Coordinate) -> f64 {
        match c {
            Coordinate::X => self.target_x,
            Coordinate::Y => self.target_y,
        }
    }
}

/// Rows plus a chronological per-station train/test split.
#[derive(Debug, Clone)]
pub struct SupervisedDataset {
    pub window: WindowSpec,
    pub feature_names: Vec<String>,
    pub rows: Vec<DatasetRow>,
    /// Row indices of the training split (earlier rows of each station).
    pub train: Vec<usize>,
    /// Row indices of the test split (later rows of each station).
    pub test: Vec<usize>,
}

pub const TRAIN_FRACTION: f64 = 0.8;

pub fn build_dataset(trace: &Trace, window: WindowSpec) -> Result<SupervisedDataset> {
    window.validate()?;
    let per_station = trace.samples_per_station();
    if trace.num_stations() == 0 {
        return Err(Error::Dataset("trace has no stations".into()));
    }
    if per_station < window.min_samples() {
        return Err(Error::Dataset(format!(
            "each station needs at least {} samples (history {} + horizon {} + 1), trace has {}",
            window.min_samples(),
            window.history,
            window.horizon,
            per_station
        )));
    }
    let rows_per_station = per_station - window.history - window.horizon;
    let n_train = ((rows_per_station as f64 * TRAIN_FRACTION).floor() as usize).max(1);

    let mut rows = Vec::with_capacity(rows_per_station * trace.num_stations());
    let mut train = Vec::new();
    let mut test = Vec::new();
    for samples in trace.stations() {
        for (k, o) in (window.history..per_station - window.horizon).enumerate() {
            let target = &samples[o + window.horizon];
            if k < n_train {
                train.push(rows.len());
            } else {
                test.push(rows.len());
            }
            rows.push(DatasetRow {
                station_id: target.station_id,
                time: target.time,
                features: window.features_at(samples, o),
                target_x: target.x,
                target_y: target.y,
            });
        }
    }
    Ok(SupervisedDataset {
        window,
        feature_names: window.feature_names(),
        rows,
        train,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::{simulate_random_waypoint, ArenaConfig};

    fn linear_trace(v: f64, n: usize) -> Trace {
        let config = ArenaConfig {
            num_stations: 1,
            duration: (n - 1) as f64,
            min_speed: 0.0,
            max_speed: v.abs(),
            ..ArenaConfig::default()
        };
        let samples = (0..n)
            .map(|k| TraceSample {
                time: k as f64,
                station_id: 0,
                x: 10.0 + v * k as f64,
                y: 42.0,
            })
            .collect();
        Trace { config, samples }
    }

    #[test]
    fn stationary_station_has_equal_features_and_target() {
        let t = linear_trace(0.0, 20);
        let d = build_dataset(&t, WindowSpec::default()).unwrap();
        for r in &d.rows {
            assert!(r.features[..5].iter().all(|&x| x == 10.0));
            assert!(r.features[5..10].iter().all(|&y| y == 42.0));
            assert_eq!(r.features[10], 0.0);
            assert_eq!(r.target_x, 10.0);
            assert_eq!(r.target_y, 42.0);
        }
    }

    #[test]
    fn constant_velocity_target_is_linear_extrapolation() {
        let t = linear_trace(2.0, 30);
        for horizon in 1..=3 {
            let w = WindowSpec { history: 4, horizon };
            let d = build_dataset(&t, w).unwrap();
            for r in &d.rows {
                let last_x = r.features[0];
                assert_eq!(r.target_x, last_x + horizon as f64 * 1.0 * 2.0);
                assert_eq!(r.features[2 * 4], 2.0);
            }
        }
    }

    #[test]
    fn row_count_matches_formula() {
        let t = simulate_random_waypoint(&ArenaConfig::default()).unwrap();
        let d = build_dataset(&t, WindowSpec::default()).unwrap();
        assert_eq!(d.rows.len(), 25 * (3601 - 6));
        assert_eq!(d.train.len() + d.test.len(), d.rows.len());
    }

    #[test]
    fn split_is_chronological_per_station() {
        let t = simulate_random_waypoint(&ArenaConfig {
            num_stations: 3,
            duration: 99.0,
            ..ArenaConfig::default()
        })
        .unwrap();
        let d = build_dataset(&t, WindowSpec::default()).unwrap();
        for s in 0..3 {
            let last_train = d
                .train
                .iter()
                .filter(|&&i| d.rows[i].station_id == s)
                .map(|&i| d.rows[i].time)
                .fold(f64::NEG_INFINITY, f64::max);
            let first_test = d
                .test
                .iter()
                .filter(|&&i| d.rows[i].station_id == s)
                .map(|&i| d.rows[i].time)
                .fold(f64::INFINITY, f64::min);
            assert!(last_train < first_test);
        }
    }

    #[test]
    fn short_trace_is_rejected() {
        let t = linear_trace(1.0, 6);
        assert!(matches!(
            build_dataset(&t, WindowSpec::default()),
            Err(Error::Dataset(_))
        ));
        assert!(build_dataset(&t, WindowSpec { history: 4, horizon: 1 }).is_ok());
    }
}
