//! Random-waypoint pre-deployment traces.
//!
//! Each station starts uniformly in the arena, then repeatedly picks a
//! uniform waypoint and a uniform leg speed, flies there in a straight line,
//! pauses, and repeats. Motion is integrated exactly (piecewise linear), so a
//! leg that ends mid-step continues on the next leg within the same step.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_sig, read_json, write_atomic, write_json};
use crate::par::Execution;
use crate::{seed, Point};

/// Speed substituted for a zero-speed leg so a station never stalls forever.
pub const MIN_LEG_SPEED: f64 = 0.01;

const POSITION_DIGITS: usize = 9;

/// Arena and fleet parameters for a pre-deployment run.
///
/// `pause_time` and `sample_interval` are not pinned by any published
/// scenario; they default to continuous motion sampled once per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArenaConfig {
    pub width: f64,
    pub height: f64,
    pub num_stations: usize,
    pub min_speed: f64,
    pub max_speed: f64,
    pub pause_time: f64,
    pub sample_interval: f64,
    pub duration: f64,
    pub seed: u64,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        Self {
            width: 500.0,
            height: 500.0,
            num_stations: 25,
            min_speed: 0.0,
            max_speed: 15.0,
            pause_time: 0.0,
            sample_interval: 1.0,
            duration: 3600.0,
            seed: 0,
        }
    }
}

impl ArenaConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.width,
            self.height,
            self.min_speed,
            self.max_speed,
            self.pause_time,
            self.sample_interval,
            self.duration,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("arena parameters must be finite".into()));
        }
        if self.width <= 0.0 || self.height <= 0.0 {
            return Err(Error::Config(format!(
                "arena must have positive extent, got {}x{}",
                self.width, self.height
            )));
        }
        if self.min_speed < 0.0 || self.min_speed > self.max_speed {
            return Err(Error::Config(format!(
                "need 0 <= min_speed <= max_speed, got {} and {}",
                self.min_speed, self.max_speed
            )));
        }
        if self.pause_time < 0.0 {
            return Err(Error::Config("pause_time must be >= 0".into()));
        }
        if self.sample_interval <= 0.0 {
            return Err(Error::Config("sample_interval must be > 0".into()));
        }
        if self.duration < self.sample_interval {
            return Err(Error::Config(format!(
                "duration {} is shorter than sample_interval {}",
                self.duration, self.sample_interval
            )));
        }
        Ok(())
    }

    /// `floor(duration / sample_interval) + 1`.
    pub fn samples_per_station(&self) -> usize {
        ((self.duration / self.sample_interval) + 1e-9).floor() as usize + 1
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height))
    }

    pub fn center(&self) -> Point {
        Point::new(self.width / 2.0, self.height / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub time: f64,
    pub station_id: usize,
    pub x: f64,
    pub y: f64,
}

impl TraceSample {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// A recorded fleet trace; samples are sorted by `(station_id, time)` and
/// every station has the same number of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub config: ArenaConfig,
    pub samples: Vec<TraceSample>,
}

impl Trace {
    pub fn num_stations(&self) -> usize {
        self.config.num_stations
    }

    pub fn samples_per_station(&self) -> usize {
        self.samples.len().checked_div(self.config.num_stations).unwrap_or(0)
    }

    /// Samples of one station in time order.
    pub fn station(&self, station_id: usize) -> &[TraceSample] {
        let n = self.samples_per_station();
        &self.samples[station_id * n..(station_id + 1) * n]
    }

    pub fn stations(&self) -> impl Iterator<Item = &[TraceSample]> {
        let n = self.samples_per_station().max(1);
        self.samples.chunks(n)
    }
}

struct Flight {
    pos: Point,
    waypoint: Point,
    speed: f64,
    pause_left: f64,
}

impl Flight {
    fn new_leg<R: Rng>(&mut self, cfg: &ArenaConfig, rng: &mut R) {
        self.waypoint = uniform_point(cfg, rng);
        let drawn = if cfg.max_speed > cfg.min_speed {
            rng.random_range(cfg.min_speed..=cfg.max_speed)
        } else {
            cfg.max_speed
        };
        self.speed = drawn.max(MIN_LEG_SPEED.min(cfg.max_speed));
    }

    /// Advances exactly `dt` seconds of piecewise-linear motion.
    fn advance<R: Rng>(&mut self, dt: f64, cfg: &ArenaConfig, rng: &mut R) {
        let mut left = dt;
        // A fully stationary fleet never moves; skip leg bookkeeping.
        if cfg.max_speed == 0.0 {
            return;
        }
        while left > 0.0 {
            if self.pause_left > 0.0 {
                let used = self.pause_left.min(left);
                self.pause_left -= used;
                left -= used;
                if self.pause_left <= 0.0 {
                    self.pause_left = 0.0;
                    self.new_leg(cfg, rng);
                }
                continue;
            }
            let remaining = self.pos.distance(&self.waypoint);
            let reach = self.speed * left;
            if remaining <= reach {
                left -= if self.speed > 0.0 { remaining / self.speed } else { left };
                self.pos = self.waypoint;
                if cfg.pause_time > 0.0 {
                    self.pause_left = cfg.pause_time;
                } else {
                    self.new_leg(cfg, rng);
                }
            } else {
                let f = reach / remaining;
                self.pos = cfg.clamp(Point::new(
                    self.pos.x + (self.waypoint.x - self.pos.x) * f,
                    self.pos.y + (self.waypoint.y - self.pos.y) * f,
                ));
                left = 0.0;
            }
        }
    }
}

fn uniform_point<R: Rng>(cfg: &ArenaConfig, rng: &mut R) -> Point {
    Point::new(rng.random_range(0.0..=cfg.width), rng.random_range(0.0..=cfg.height))
}

fn simulate_station(cfg: &ArenaConfig, station_id: usize) -> Vec<TraceSample> {
    let mut rng = seed::rng(seed::derive(cfg.seed, station_id as u64));
    let start = uniform_point(cfg, &mut rng);
    let mut flight = Flight {
        pos: start,
        waypoint: start,
        speed: 0.0,
        pause_left: 0.0,
    };
    flight.new_leg(cfg, &mut rng);

    let n = cfg.samples_per_station();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        if k > 0 {
            flight.advance(cfg.sample_interval, cfg, &mut rng);
        }
        out.push(TraceSample {
            time: k as f64 * cfg.sample_interval,
            station_id,
            x: flight.pos.x,
            y: flight.pos.y,
        });
    }
    out
}

/// Generates a random-waypoint trace; fully determined by `config.seed`.
pub fn simulate_random_waypoint(config: &ArenaConfig) -> Result<Trace> {
    simulate_random_waypoint_with(Execution::default(), config)
}

pub fn simulate_random_waypoint_with(exec: Execution, config: &ArenaConfig) -> Result<Trace> {
    config.validate()?;
    let per_station = exec.map_range(config.num_stations, |i| simulate_station(config, i));
    Ok(Trace {
        config: config.clone(),
        samples: per_station
            .into_iter()
            .flatten()
            .map(|s| TraceSample {
                x: quantize(s.x),
                y: quantize(s.y),
                ..s
            })
            .collect(),
    })
}

/// Snaps a coordinate to its CSV representation, so a fresh trace already
/// equals its own round trip.
fn quantize(v: f64) -> f64 {
    fmt_sig(v, POSITION_DIGITS).parse().expect("fmt_sig emits a decimal")
}

/// Sidecar holding the arena configuration of a trace CSV.
pub fn trace_meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// Writes the CSV (`time,station_id,x,y`) and its configuration sidecar.
pub fn write_trace(trace: &Trace, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(trace.samples.len() * 40 + 32);
    out.push_str("time,station_id,x,y\n");
    for s in &trace.samples {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.time,
            s.station_id,
            fmt_sig(s.x, POSITION_DIGITS),
            fmt_sig(s.y, POSITION_DIGITS)
        ));
    }
    write_json(&trace_meta_path(path), &trace.config)?;
    write_atomic(path, out.as_bytes())
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    let config: ArenaConfig = read_json(&trace_meta_path(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["time", "station_id", "x", "y"] {
        return Err(Error::parse(path, 1, "expected header time,station_id,x,y"));
    }

    let mut samples: Vec<TraceSample> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 4 columns, found {}", record.len()),
            ));
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            record[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(path, line, format!("bad {name} value {:?}", &record[i])))
        };
        let station_id: usize = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad station_id {:?}", &record[1])))?;
        let sample = TraceSample {
            time: num(0, "time")?,
            station_id,
            x: num(2, "x")?,
            y: num(3, "y")?,
        };
        if let Some(prev) = samples.last() {
            if sample.station_id < prev.station_id {
                return Err(Error::parse(path, line, "rows not sorted by station_id"));
            }
            if sample.station_id == prev.station_id && sample.time <= prev.time {
                return Err(Error::parse(
                    path,
                    line,
                    format!("time {} does not increase (previous {})", sample.time, prev.time),
                ));
            }
        }
        if !config.contains(sample.position()) {
            return Err(Error::parse(path, line, "position outside the arena"));
        }
        samples.push(sample);
    }

    let n = config.samples_per_station();
    let expected = config.num_stations * n;
    if samples.len() != expected {
        return Err(Error::format(
            path,
            format!(
                "expected {} stations x {} samples = {expected} rows, found {}",
                config.num_stations,
                n,
                samples.len()
            ),
        ));
    }
    for (i, s) in samples.iter().enumerate() {
        if s.station_id != i / n {
            return Err(Error::format(
                path,
                format!("station {} has the wrong number of samples", s.station_id),
            ));
        }
    }
    Ok(Trace { config, samples })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> ArenaConfig {
        ArenaConfig {
            num_stations: 4,
            duration: 200.0,
            seed,
            ..ArenaConfig::default()
        }
    }

    #[test]
    fn zero_speed_is_a_fixed_point() {
        let cfg = ArenaConfig {
            min_speed: 0.0,
            max_speed: 0.0,
            ..small(3)
        };
        let t = simulate_random_waypoint(&cfg).unwrap();
        for st in t.stations() {
            assert!(st.iter().all(|s| s.x == st[0].x && s.y == st[0].y));
        }
    }

    #[test]
    fn table_scenario_sample_count() {
        let cfg = ArenaConfig::default();
        let t = simulate_random_waypoint(&cfg).unwrap();
        assert_eq!(t.samples.len(), 25 * 3601);
        assert!(t.samples.iter().all(|s| cfg.contains(s.position())));
        assert_eq!(t.station(24).len(), 3601);
        assert_eq!(t.station(24)[3600].time, 3600.0);
    }

    #[test]
    fn same_seed_same_trace() {
        let a = simulate_random_waypoint(&small(11)).unwrap();
        let b = simulate_random_waypoint(&small(11)).unwrap();
        assert_eq!(a, b);
        let c = simulate_random_waypoint_with(Execution::Sequential, &small(11)).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn pauses_hold_position() {
        let cfg = ArenaConfig {
            pause_time: 1e6,
            min_speed: 5.0,
            max_speed: 5.0,
            ..small(2)
        };
        let t = simulate_random_waypoint(&cfg).unwrap();
        for st in t.stations() {
            let last = st.last().unwrap();
            let prev = &st[st.len() - 2];
            // Either still flying the first leg or parked at its waypoint.
            let moved = last.position().distance(&prev.position());
            assert!(moved <= 5.0 + 1e-9);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            ArenaConfig { width: 0.0, ..small(0) },
            ArenaConfig {
                min_speed: 5.0,
                max_speed: 1.0,
                ..small(0)
            },
            ArenaConfig {
                sample_interval: 0.0,
                ..small(0)
            },
            ArenaConfig {
                duration: 0.5,
                ..small(0)
            },
        ];
        for cfg in bad {
            assert!(matches!(simulate_random_waypoint(&cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn fresh_trace_survives_a_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        let t = simulate_random_waypoint(&small(5)).unwrap();
        write_trace(&t, &p).unwrap();
        assert_eq!(read_trace(&p).unwrap(), t);
    }

    #[test]
    fn empty_fleet_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        let cfg = ArenaConfig {
            num_stations: 0,
            ..small(0)
        };
        let t = simulate_random_waypoint(&cfg).unwrap();
        write_trace(&t, &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "time,station_id,x,y\n");
        assert_eq!(read_trace(&p).unwrap(), t);
    }

    #[test]
    fn decreasing_time_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        let cfg = ArenaConfig {
            num_stations: 1,
            duration: 2.0,
            ..small(0)
        };
        write_json(&trace_meta_path(&p), &cfg).unwrap();
        std::fs::write(&p, "time,station_id,x,y\n0,0,1,1\n2,0,1,1\n1,0,1,1\n").unwrap();
        match read_trace(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_column_count_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        let cfg = ArenaConfig {
            num_stations: 1,
            duration: 1.0,
            ..small(0)
        };
        write_json(&trace_meta_path(&p), &cfg).unwrap();
        std::fs::write(&p, "time,station_id,x,y\n0,0,1,1\n1,0,1\n").unwrap();
        match read_trace(&p) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("columns"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_sidecar_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        std::fs::write(&p, "time,station_id,x,y\n").unwrap();
        assert!(matches!(read_trace(&p), Err(Error::Io { .. })));
    }
}
