//! Mobility-aware clustering for UAV ad hoc networks.
//!
//! The crate covers the whole workflow: random-waypoint pre-deployment
//! traces, gradient-boosted position prediction, k-means clustering with
//! knee-point selection of `k`, cluster-head election, and a discrete-event
//! relay simulator that measures delay, jitter and throughput for
//! centralized and decentralized topologies.
//!
//! Data-parallel loops (k-means restarts, per-cluster scoring, per-station
//! traffic, scenario sweeps) go through [`par::Execution`]. With the
//! `parallel` feature (on by default) they run on rayon; without it, or with
//! [`par::Execution::Sequential`], they run in order on the calling thread.
//! Results are identical either way.

pub mod clustering;
pub mod config;
pub mod error;
pub mod headselect;
pub mod io;
pub mod metrics;
pub mod mobility;
pub mod netsim;
pub mod par;
pub mod pipeline;
pub mod predictor;
pub mod seed;
pub mod traffic;

pub use error::{Error, Result};

/// A point in the arena plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}
