//! Scaling benchmark for per-cluster head selection.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{assign_radios, heuristic_head_streaming, knn_head, PathLoss, StationRadio};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::{seed, Point};
use rand::Rng;

/// Population and generation counts behind the metaheuristic reference
/// curve. Analytic only; no such search is implemented.
pub const META_POPULATION: f64 = 50.0;
pub const META_GENERATIONS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMethod {
    Pairwise,
    Knn,
}

impl BenchMethod {
    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Pairwise => "pairwise",
            BenchMethod::Knn => "knn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: BenchMethod,
    pub m: usize,
    pub median_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub series: String,
    pub m: usize,
    pub log10_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub k: usize,
    pub repetitions: usize,
    pub rows: Vec<BenchRow>,
    pub pairwise_slope: f64,
    pub knn_slope: f64,
    pub reference: Vec<ReferenceRow>,
    pub total_seconds: f64,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,M,median_ns\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{}\n", r.method.name(), r.m, r.median_ns));
        }
        s
    }

    pub fn reference_csv(&self) -> String {
        let mut s = String::from("series,M,log10_ns\n");
        for r in &self.reference {
            s.push_str(&format!("{},{},{}\n", r.series, r.m, r.log10_ns));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn write_reference_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.reference_csv().as_bytes())
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn instance(m: usize, seed: u64) -> Vec<StationRadio> {
    let mut rng = seed::rng(seed::derive_label(seed, "bench-positions") ^ m as u64);
    let positions: Vec<Point> = (0..m)
        .map(|_| Point::new(rng.random_range(0.0..500.0), rng.random_range(0.0..500.0)))
        .collect();
    assign_radios(&positions, (60.0, 80.0), seed::derive(seed, m as u64))
}

fn time_ns<F: FnMut() -> usize>(repetitions: usize, mut f: F) -> f64 {
    std::hint::black_box(f());
    let samples = (0..repetitions)
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(f());
            t.elapsed().as_nanos() as f64
        })
        .collect();
    median(samples)
}

/// Times pairwise and kNN selection on one random cluster per `M` on the
/// calling thread, fits log-log slopes, and derives analytic reference
/// curves calibrated to the measurements.
pub fn bench_ch(m_values: &[usize], repetitions: usize, k: usize, seed: u64) -> Result<BenchReport> {
    let mut ms = m_values.to_vec();
    ms.sort_unstable();
    ms.dedup();
    if ms.len() < 3 {
        return Err(Error::Benchmark("need at least 3 distinct M values".into()));
    }
    if ms[0] < 64 {
        return Err(Error::Benchmark("every M must be at least 64".into()));
    }
    if repetitions == 0 {
        return Err(Error::Benchmark("repetitions must be >= 1".into()));
    }
    if k < 1 || k >= ms[0] {
        return Err(Error::Benchmark(format!("k = {k} must be in 1..{}", ms[0])));
    }
    let start = Instant::now();
    let pl = PathLoss::default();
    let mut rows = Vec::with_capacity(ms.len() * 2);
    for &m in &ms {
        let members = instance(m, seed);
        let pair = time_ns(repetitions, || heuristic_head_streaming(&members, &pl).0);
        let knn = time_ns(repetitions, || knn_head(&members, k, &pl).expect("k checked above"));
        rows.push(BenchRow {
            method: BenchMethod::Pairwise,
            m,
            median_ns: pair,
        });
        rows.push(BenchRow {
            method: BenchMethod::Knn,
            m,
            median_ns: knn,
        });
    }
    let series = |method: BenchMethod| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.method == method)
            .map(|r| r.median_ns)
            .collect()
    };
    let xs: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
    let pair_t = series(BenchMethod::Pairwise);
    let knn_t = series(BenchMethod::Knn);
    let reference = reference_curves(&ms, k, &pair_t, &knn_t);
    Ok(BenchReport {
        k,
        repetitions,
        pairwise_slope: loglog_slope(&xs, &pair_t),
        knn_slope: loglog_slope(&xs, &knn_t),
        rows,
        reference,
        total_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Geometric-mean fit of `c` in `t = c f(M)`, in log10.
fn log10_scale(measured: &[f64], shape_log10: &[f64]) -> f64 {
    measured
        .iter()
        .zip(shape_log10)
        .map(|(t, f)| t.log10() - f)
        .sum::<f64>()
        / measured.len() as f64
}

fn reference_curves(ms: &[usize], k: usize, pair_t: &[f64], knn_t: &[f64]) -> Vec<ReferenceRow> {
    let lg = |m: usize| (m as f64).log10();
    let quad: Vec<f64> = ms.iter().map(|&m| 2.0 * lg(m)).collect();
    let mlogm: Vec<f64> = ms
        .iter()
        .map(|&m| {
            let m = m as f64;
            (m * m.log2() + k as f64 * m).log10()
        })
        .collect();
    let c2 = log10_scale(pair_t, &quad);
    let ck = log10_scale(knn_t, &mlogm);
    // One fitness evaluation of a candidate head costs M pair terms.
    let per_term = c2;
    let mut out = Vec::new();
    for (i, &m) in ms.iter().enumerate() {
        out.push(ReferenceRow {
            series: "c*M^2".into(),
            m,
            log10_ns: c2 + quad[i],
        });
        out.push(ReferenceRow {
            series: format!("c*(M*log2(M)+{k}*M)"),
            m,
            log10_ns: ck + mlogm[i],
        });
        out.push(ReferenceRow {
            series: format!("metaheuristic P={} G={} (P*G*M)", META_POPULATION, META_GENERATIONS),
            m,
            log10_ns: per_term + (META_POPULATION * META_GENERATIONS).log10() + lg(m),
        });
        out.push(ReferenceRow {
            series: "exhaustive one-hot (2^M*M)".into(),
            m,
            log10_ns: per_term + m as f64 * 2.0_f64.log10() + lg(m),
        });
    }
    out
}
