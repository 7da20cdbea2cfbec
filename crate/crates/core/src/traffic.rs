//! Video-like UDP workload: Normal packet sizes, exponential inter-arrivals.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_to_string, write_atomic};
use crate::par::Execution;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficParams {
    /// Bytes.
    pub mean_size: f64,
    /// Standard deviation of the size, bytes.
    pub size_sigma: f64,
    pub min_size: u32,
    pub max_size: u32,
    /// Seconds.
    pub mean_interarrival: f64,
    pub packets_per_station: usize,
    pub seed: u64,
}

impl Default for TrafficParams {
    fn default() -> Self {
        Self {
            mean_size: 1024.0,
            size_sigma: 256.0,
            min_size: 256,
            max_size: 2048,
            mean_interarrival: 0.030,
            packets_per_station: 100,
            seed: 0,
        }
    }
}

impl TrafficParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_size > 0.0 && self.mean_size.is_finite()) {
            return Err(Error::Config("mean_size must be > 0".into()));
        }
        if !(self.size_sigma >= 0.0 && self.size_sigma.is_finite()) {
            return Err(Error::Config("size_sigma must be >= 0".into()));
        }
        if !(self.min_size > 0
            && f64::from(self.min_size) <= self.mean_size
            && self.mean_size <= f64::from(self.max_size))
        {
            return Err(Error::Config("need 0 < min_size <= mean_size <= max_size".into()));
        }
        if !(self.mean_interarrival > 0.0 && self.mean_interarrival.is_finite()) {
            return Err(Error::Config("mean_interarrival must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub packet_id: u64,
    pub src: usize,
    /// Bytes.
    pub size: u32,
    /// Seconds.
    pub creation_time: f64,
}

/// One station's flow. Ids are `station_id * packets_per_station + i`.
pub fn generate_flow(station_id: usize, params: &TrafficParams, seed: u64) -> Result<Vec<Packet>> {
    params.validate()?;
    let mut rng = seed::rng(seed::derive(seed, station_id as u64));
    let size_dist = Normal::new(params.mean_size, params.size_sigma)
        .map_err(|e| Error::Config(format!("size distribution: {e}")))?;
    let gap_dist = Exp::new(1.0 / params.mean_interarrival)
        .map_err(|e| Error::Config(format!("inter-arrival distribution: {e}")))?;
    let (lo, hi) = (f64::from(params.min_size), f64::from(params.max_size));
    let base = station_id as u64 * params.packets_per_station as u64;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(params.packets_per_station);
    for i in 0..params.packets_per_station {
        let size = loop {
            let s = size_dist.sample(&mut rng).round();
            if (lo..=hi).contains(&s) {
                break s as u32;
            }
        };
        let next = loop {
            let n = t + gap_dist.sample(&mut rng);
            if n > t {
                break n;
            }
        };
        t = next;
        out.push(Packet {
            packet_id: base + i as u64,
            src: station_id,
            size,
            creation_time: t,
        });
    }
    Ok(out)
}

/// Flows for stations `0..num_stations`, concatenated in station order.
pub fn generate_workload(exec: Execution, num_stations: usize, params: &TrafficParams) -> Result<Vec<Packet>> {
    params.validate()?;
    let flows = exec.try_map(&(0..num_stations).collect::<Vec<_>>(), |&s| {
        generate_flow(s, params, params.seed)
    })?;
    Ok(flows.into_iter().flatten().collect())
}

/// Random draws from the configured size law only, for statistics checks.
pub fn sample_sizes<R: Rng>(params: &TrafficParams, n: usize, rng: &mut R) -> Result<Vec<u32>> {
    params.validate()?;
    let d = Normal::new(params.mean_size, params.size_sigma)
        .map_err(|e| Error::Config(format!("size distribution: {e}")))?;
    let (lo, hi) = (f64::from(params.min_size), f64::from(params.max_size));
    Ok((0..n)
        .map(|_| loop {
            let s = d.sample(rng).round();
            if (lo..=hi).contains(&s) {
                break s as u32;
            }
        })
        .collect())
}

pub const WORKLOAD_HEADER: &str = "packet_id,src,size,creation_time";

pub fn write_workload(path: &Path, packets: &[Packet]) -> Result<()> {
    let mut s = String::with_capacity(32 * packets.len() + 40);
    s.push_str(WORKLOAD_HEADER);
    s.push('\n');
    for p in packets {
        s.push_str(&format!("{},{},{},{:?}\n", p.packet_id, p.src, p.size, p.creation_time));
    }
    write_atomic(path, s.as_bytes())
}

pub fn read_workload(path: &Path) -> Result<Vec<Packet>> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == WORKLOAD_HEADER => {}
        _ => return Err(Error::parse(path, 1, format!("expected header `{WORKLOAD_HEADER}`"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line_no = (i + 1) as u64;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 4 fields, got {}", f.len()),
            ));
        }
        let bad = |what: &str| Error::parse(path, line_no, format!("invalid {what}"));
        out.push(Packet {
            packet_id: f[0].parse().map_err(|_| bad("packet_id"))?,
            src: f[1].parse().map_err(|_| bad("src"))?,
            size: f[2].parse().map_err(|_| bad("size"))?,
            creation_time: f[3].parse().map_err(|_| bad("creation_time"))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_gives_exact_sizes() {
        let p = TrafficParams {
            size_sigma: 0.0,
            ..TrafficParams::default()
        };
        let f = generate_flow(3, &p, 9).unwrap();
        assert_eq!(f.len(), 100);
        assert!(f.iter().all(|p| p.size == 1024));
        assert_eq!(f[0].packet_id, 300);
    }

    #[test]
    fn zero_packets_is_empty() {
        let p = TrafficParams {
            packets_per_station: 0,
            ..TrafficParams::default()
        };
        assert!(generate_flow(0, &p, 1).unwrap().is_empty());
    }

    #[test]
    fn flows_are_ordered_bounded_and_distinct() {
        let p = TrafficParams::default();
        let a = generate_flow(0, &p, 7).unwrap();
        let b = generate_flow(1, &p, 7).unwrap();
        assert!(a.windows(2).all(|w| w[0].creation_time < w[1].creation_time));
        assert!(a.iter().all(|p| (256..=2048).contains(&p.size)));
        assert_ne!(
            a.iter().map(|p| p.size).collect::<Vec<_>>(),
            b.iter().map(|p| p.size).collect::<Vec<_>>()
        );
        assert_eq!(a, generate_flow(0, &p, 7).unwrap());
    }

    #[test]
    fn invalid_params_rejected() {
        for p in [
            TrafficParams {
                mean_size: 0.0,
                ..Default::default()
            },
            TrafficParams {
                size_sigma: -1.0,
                ..Default::default()
            },
            TrafficParams {
                min_size: 2000,
                ..Default::default()
            },
            TrafficParams {
                mean_interarrival: 0.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(generate_flow(0, &p, 0), Err(Error::Config(_))));
        }
    }

    #[test]
    fn workload_round_trip() {
        let p = TrafficParams {
            packets_per_station: 5,
            ..Default::default()
        };
        let w = generate_workload(Execution::Sequential, 3, &p).unwrap();
        assert_eq!(w, generate_workload(Execution::default(), 3, &p).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        write_workload(&path, &w).unwrap();
        assert_eq!(read_workload(&path).unwrap(), w);
    }
}
