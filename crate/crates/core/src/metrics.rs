//! Delay, jitter and throughput per station, plus scenario comparisons.
//!
//! Jitter is the mean absolute difference between consecutive delays of a
//! station's delivered packets, taken in delivery order, with no smoothing.
//! Dropped packets are excluded from delay and jitter and counted apart.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, write_atomic, write_json};
use crate::netsim::{DeliveryRecord, Scenario};

/// Denominator of the throughput figure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThroughputWindow {
    /// The same duration (seconds) for every station.
    Fixed(f64),
    /// From a station's first send to its last delivery.
    FlowLifetime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationMetrics {
    pub station_id: usize,
    pub delivered: usize,
    pub dropped: usize,
    /// `None` when nothing was delivered.
    pub mean_delay_ms: Option<f64>,
    pub jitter_ms: Option<f64>,
    /// Bytes per second.
    pub throughput: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Population standard deviation across stations.
    pub std: f64,
    /// Stations with a value.
    pub count: usize,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub scenario: Option<Scenario>,
    pub window: ThroughputWindow,
    pub stations: Vec<StationMetrics>,
    pub delay_ms: Option<Aggregate>,
    pub jitter_ms: Option<Aggregate>,
    pub throughput: Option<Aggregate>,
    pub total_dropped: usize,
}

/// Mean absolute consecutive difference; 0 for fewer than two values.
pub fn jitter(delays: &[f64]) -> f64 {
    if delays.len() < 2 {
        return 0.0;
    }
    delays.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (delays.len() - 1) as f64
}

pub fn compute_report(
    label: impl Into<String>,
    scenario: Option<Scenario>,
    records: &[DeliveryRecord],
    window: ThroughputWindow,
) -> Result<RunReport> {
    if let ThroughputWindow::Fixed(d) = window {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Parameter("throughput window must be > 0".into()));
        }
    }
    let mut ids: Vec<usize> = records.iter().map(|r| r.src).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut stations = Vec::with_capacity(ids.len());
    for &s in &ids {
        let mine: Vec<&DeliveryRecord> = records.iter().filter(|r| r.src == s).collect();
        let mut done: Vec<&DeliveryRecord> = mine.iter().copied().filter(|r| r.delivery_time.is_some()).collect();
        done.sort_by(|a, b| {
            a.delivery_time
                .unwrap()
                .total_cmp(&b.delivery_time.unwrap())
                .then(a.packet_id.cmp(&b.packet_id))
        });
        let dropped = mine.len() - done.len();
        let delays: Vec<f64> = done.iter().map(|r| r.delay().unwrap() * 1e3).collect();
        let m = if done.is_empty() {
            StationMetrics {
                station_id: s,
                delivered: 0,
                dropped,
                mean_delay_ms: None,
                jitter_ms: None,
                throughput: None,
            }
        } else {
            let bytes: f64 = done.iter().map(|r| f64::from(r.size)).sum();
            let span = match window {
                ThroughputWindow::Fixed(d) => d,
                ThroughputWindow::FlowLifetime => {
                    let first = mine.iter().map(|r| r.send_time).fold(f64::INFINITY, f64::min);
                    let last = done
                        .iter()
                        .map(|r| r.delivery_time.unwrap())
                        .fold(f64::NEG_INFINITY, f64::max);
                    last - first
                }
            };
            StationMetrics {
                station_id: s,
                delivered: done.len(),
                dropped,
                mean_delay_ms: Some(delays.iter().sum::<f64>() / delays.len() as f64),
                jitter_ms: Some(jitter(&delays)),
                throughput: (span > 0.0).then(|| bytes / span),
            }
        };
        stations.push(m);
    }
    let collect = |f: fn(&StationMetrics) -> Option<f64>| -> Vec<f64> { stations.iter().filter_map(f).collect() };
    Ok(RunReport {
        label: label.into(),
        scenario,
        window,
        delay_ms: Aggregate::of(&collect(|m| m.mean_delay_ms)),
        jitter_ms: Aggregate::of(&collect(|m| m.jitter_ms)),
        throughput: Aggregate::of(&collect(|m| m.throughput)),
        total_dropped: stations.iter().map(|m| m.dropped).sum(),
        stations,
    })
}

impl RunReport {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:?}")).unwrap_or_default();
        let mut s = String::from("station_id,delivered,dropped,mean_delay_ms,jitter_ms,throughput_bytes_per_s\n");
        for m in &self.stations {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                m.station_id,
                m.delivered,
                m.dropped,
                opt(m.mean_delay_ms),
                opt(m.jitter_ms),
                opt(m.throughput)
            ));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

/// Signed percentage `100 (b - a) / a`; `None` when `a` is zero or either
/// side is absent.
pub fn pct_change(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if a != 0.0 => Some(100.0 * (b - a) / a),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub base: Option<f64>,
    pub other: Option<f64>,
    /// `other - base`.
    pub diff: Option<f64>,
    pub pct: Option<f64>,
}

impl Delta {
    pub fn new(base: Option<f64>, other: Option<f64>) -> Self {
        Self {
            base,
            other,
            diff: base.zip(other).map(|(a, b)| b - a),
            pct: pct_change(base, other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationDelta {
    pub station_id: usize,
    pub delay_ms: Delta,
    pub jitter_ms: Delta,
    pub throughput: Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub base: String,
    pub other: String,
    pub delay_ms: Delta,
    pub jitter_ms: Delta,
    pub throughput: Delta,
    pub stations: Vec<StationDelta>,
}

pub fn compare(a: &RunReport, b: &RunReport) -> Result<Comparison> {
    let ia: Vec<usize> = a.stations.iter().map(|m| m.station_id).collect();
    let ib: Vec<usize> = b.stations.iter().map(|m| m.station_id).collect();
    if ia != ib {
        return Err(Error::Comparison(format!(
            "station sets differ between `{}` and `{}`",
            a.label, b.label
        )));
    }
    let mean = |x: &Option<Aggregate>| x.map(|g| g.mean);
    Ok(Comparison {
        base: a.label.clone(),
        other: b.label.clone(),
        delay_ms: Delta::new(mean(&a.delay_ms), mean(&b.delay_ms)),
        jitter_ms: Delta::new(mean(&a.jitter_ms), mean(&b.jitter_ms)),
        throughput: Delta::new(mean(&a.throughput), mean(&b.throughput)),
        stations: a
            .stations
            .iter()
            .zip(&b.stations)
            .map(|(x, y)| StationDelta {
                station_id: x.station_id,
                delay_ms: Delta::new(x.mean_delay_ms, y.mean_delay_ms),
                jitter_ms: Delta::new(x.jitter_ms, y.jitter_ms),
                throughput: Delta::new(x.throughput, y.throughput),
            })
            .collect(),
    })
}

/// All `C(n, 2)` comparisons, earlier report as the base.
pub fn pairwise(reports: &[RunReport]) -> Result<Vec<Comparison>> {
    let mut out = Vec::new();
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            out.push(compare(&reports[i], &reports[j])?);
        }
    }
    Ok(out)
}

/// A percentage change quoted by the original study, for side-by-side
/// display only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportedChange {
    pub setting: &'static str,
    pub metric: &'static str,
    pub pct: f64,
    pub source: &'static str,
}

/// The study quotes two sets of numbers for the decentralized case that do
/// not agree with each other (text vs. summary table); both are listed.
pub const REPORTED_CHANGES: [ReportedChange; 7] = [
    ReportedChange {
        setting: "decentralized",
        metric: "delay",
        pct: -16.3,
        source: "text",
    },
    ReportedChange {
        setting: "decentralized",
        metric: "jitter",
        pct: -51.0,
        source: "text",
    },
    ReportedChange {
        setting: "decentralized",
        metric: "throughput",
        pct: 15.5,
        source: "text",
    },
    ReportedChange {
        setting: "decentralized",
        metric: "delay",
        pct: -18.4,
        source: "table",
    },
    ReportedChange {
        setting: "decentralized",
        metric: "throughput",
        pct: 11.7,
        source: "table",
    },
    ReportedChange {
        setting: "centralized",
        metric: "delay",
        pct: -11.5,
        source: "table",
    },
    ReportedChange {
        setting: "centralized",
        metric: "throughput",
        pct: 9.8,
        source: "table",
    },
];
