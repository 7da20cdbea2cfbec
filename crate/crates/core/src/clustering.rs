//! k-means with k-means++ seeding, an elbow curve over candidate `k`, and
//! knee-point selection of `k` by maximum distance below the chord.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, write_json};
use crate::par::Execution;
use crate::{seed, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringParams {
    /// Largest `k` on the elbow curve; `None` means `min(10, n - 1)`.
    pub k_max: Option<usize>,
    /// k-means restarts per candidate `k`; the lowest WCSS wins.
    pub restarts: usize,
    pub max_iters: usize,
    /// Centroid movement (meters) below which Lloyd iterations stop.
    pub tol: f64,
    /// Skip knee detection and use this `k`.
    pub fixed_k: Option<usize>,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        Self {
            k_max: None,
            restarts: 10,
            max_iters: 100,
            tol: 1e-6,
            fixed_k: None,
        }
    }
}

impl ClusteringParams {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 || self.max_iters < 1 {
            return Err(Error::Config("restarts and max_iters must be >= 1".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::Config("tol must be >= 0".into()));
        }
        if self.fixed_k == Some(0) || self.k_max.is_some_and(|k| k < 1) {
            return Err(Error::Config("k must be >= 1".into()));
        }
        Ok(())
    }

    pub fn effective_k_max(&self, n: usize) -> usize {
        self.k_max.unwrap_or_else(|| 10.min(n.saturating_sub(1)).max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KneeInfo {
    pub k: usize,
    /// True when the curve was (numerically) linear and `k = 1` is a fallback.
    pub no_knee: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    /// Cluster index of each station, indexed by station id.
    pub assignment: Vec<usize>,
    pub centroids: Vec<Point>,
    pub wcss: f64,
    /// Best WCSS for `k = 1..=wcss_curve.len()`; empty when `k` was fixed.
    pub wcss_curve: Vec<f64>,
    pub knee: Option<KneeInfo>,
    /// Lloyd iterations of the final run.
    pub iterations: usize,
}

impl ClusterAssignment {
    /// Station ids of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (station, &c) in self.assignment.iter().enumerate() {
            out[c].push(station);
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = read_json(path)?;
        if c.centroids.len() != c.k || c.assignment.iter().any(|&a| a >= c.k) {
            return Err(Error::format(path, "assignment does not match k"));
        }
        Ok(c)
    }
}

pub fn wcss(points: &[Point], centroids: &[Point], assignment: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &c)| p.distance_sq(&centroids[c]))
        .sum()
}

fn nearest(p: &Point, centroids: &[Point]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, q) in centroids.iter().enumerate() {
        let d = p.distance_sq(q);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn distinct_count(points: &[Point]) -> usize {
    let mut keys: Vec<(u64, u64)> = points.iter().map(|p| (p.x.to_bits(), p.y.to_bits())).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

fn kmeans_pp<R: Rng>(points: &[Point], k: usize, rng: &mut R) -> Vec<Point> {
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| p.distance_sq(&centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[next];
        centroids.push(c);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(p.distance_sq(&c));
        }
    }
    centroids
}

/// One k-means run plus the WCSS after every assignment step.
#[derive(Debug, Clone)]
pub struct KmeansRun {
    pub assignment: ClusterAssignment,
    pub wcss_history: Vec<f64>,
}

/// Lloyd's algorithm from a k-means++ start. Ties in the assignment step go
/// to the lowest cluster index; an emptied cluster is reseeded with the
/// point farthest from its current centroid.
pub fn kmeans(points: &[Point], k: usize, seed: u64, max_iters: usize, tol: f64) -> Result<KmeansRun> {
    if k < 1 {
        return Err(Error::Clustering("k must be >= 1".into()));
    }
    let distinct = distinct_count(points);
    if distinct < k {
        return Err(Error::Clustering(format!(
            "{distinct} distinct points cannot form {k} clusters"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut centroids = kmeans_pp(points, k, &mut rng);
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    let mut history = Vec::new();
    let mut iterations = 0;

    loop {
        repair_empty(points, &mut centroids, &mut assignment);
        history.push(wcss(points, &centroids, &assignment));
        if iterations >= max_iters {
            break;
        }
        iterations += 1;

        let mut sums = vec![(0.0, 0.0, 0usize); k];
        for (p, &c) in points.iter().zip(&assignment) {
            sums[c].0 += p.x;
            sums[c].1 += p.y;
            sums[c].2 += 1;
        }
        let mut shift: f64 = 0.0;
        for (c, (sx, sy, n)) in sums.into_iter().enumerate() {
            let m = Point::new(sx / n as f64, sy / n as f64);
            shift = shift.max(m.distance(&centroids[c]));
            centroids[c] = m;
        }
        let reassigned: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        let changed = reassigned != assignment;
        assignment = reassigned;
        if shift < tol && !changed {
            repair_empty(points, &mut centroids, &mut assignment);
            history.push(wcss(points, &centroids, &assignment));
            break;
        }
    }

    hartigan_refine(points, &mut centroids, &mut assignment, &mut history, max_iters);
    let total = wcss(points, &centroids, &assignment);
    Ok(KmeansRun {
        assignment: ClusterAssignment {
            k,
            assignment,
            centroids,
            wcss: total,
            wcss_curve: Vec::new(),
            knee: None,
            iterations,
        },
        wcss_history: history,
    })
}

fn member_means(points: &[Point], assignment: &[usize], k: usize) -> Vec<(Point, usize)> {
    let mut sums = vec![(0.0, 0.0, 0usize); k];
    for (p, &c) in points.iter().zip(assignment) {
        sums[c].0 += p.x;
        sums[c].1 += p.y;
        sums[c].2 += 1;
    }
    sums.into_iter()
        .map(|(sx, sy, n)| (Point::new(sx / n as f64, sy / n as f64), n))
        .collect()
}

/// Single-point moves on a Lloyd fixed point: a point leaves its cluster
/// when the exact WCSS change `n_b/(n_b+1) |x-c_b|^2 - n_a/(n_a-1) |x-c_a|^2`
/// is negative. Any partition stable under these moves is also stable under
/// nearest-centroid reassignment.
fn hartigan_refine(
    points: &[Point],
    centroids: &mut [Point],
    assignment: &mut [usize],
    history: &mut Vec<f64>,
    max_passes: usize,
) {
    let k = centroids.len();
    if k < 2 {
        return;
    }
    for _ in 0..max_passes {
        let mut stats = member_means(points, assignment, k);
        let mut moved = false;
        for (i, p) in points.iter().enumerate() {
            let a = assignment[i];
            let na = stats[a].1 as f64;
            if stats[a].1 < 2 {
                continue;
            }
            let leave = na / (na - 1.0) * p.distance_sq(&stats[a].0);
            let mut best = (a, 0.0);
            for (b, &(cb, nb)) in stats.iter().enumerate() {
                if b != a {
                    let nb = nb as f64;
                    let delta = nb / (nb + 1.0) * p.distance_sq(&cb) - leave;
                    if delta < best.1 {
                        best = (b, delta);
                    }
                }
            }
            let (b, delta) = best;
            if b != a && delta < -1e-12 * leave.max(1.0) {
                let nb = stats[b].1 as f64;
                let ca = stats[a].0;
                let cb = stats[b].0;
                stats[a] = (
                    Point::new((ca.x * na - p.x) / (na - 1.0), (ca.y * na - p.y) / (na - 1.0)),
                    stats[a].1 - 1,
                );
                stats[b] = (
                    Point::new((cb.x * nb + p.x) / (nb + 1.0), (cb.y * nb + p.y) / (nb + 1.0)),
                    stats[b].1 + 1,
                );
                assignment[i] = b;
                moved = true;
            }
        }
        if !moved {
            break;
        }
        for (c, (m, _)) in centroids.iter_mut().zip(member_means(points, assignment, k)) {
            *c = m;
        }
        history.push(wcss(points, centroids, assignment));
    }
}

fn repair_empty(points: &[Point], centroids: &mut [Point], assignment: &mut [usize]) {
    let k = centroids.len();
    loop {
        let mut counts = vec![0usize; k];
        for &c in assignment.iter() {
            counts[c] += 1;
        }
        let Some(empty) = counts.iter().position(|&n| n == 0) else {
            return;
        };
        // Farthest point from its own centroid, among clusters that can spare one.
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            let c = assignment[i];
            if counts[c] < 2 {
                continue;
            }
            let d = p.distance_sq(&centroids[c]);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let Some((i, _)) = best else { return };
        centroids[empty] = points[i];
        assignment[i] = empty;
    }
}

/// Best of `restarts` k-means runs for a single `k`.
pub fn best_kmeans(
    points: &[Point],
    k: usize,
    restarts: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<ClusterAssignment> {
    best_kmeans_with(Execution::Sequential, points, k, restarts, seed, max_iters, tol)
}

fn restart_seed(seed: u64, k: usize, restart: usize) -> u64 {
    seed::derive(seed::derive(seed, k as u64), restart as u64)
}

fn best_kmeans_with(
    exec: Execution,
    points: &[Point],
    k: usize,
    restarts: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<ClusterAssignment> {
    let runs = exec.map_range(restarts.max(1), |r| {
        kmeans(points, k, restart_seed(seed, k, r), max_iters, tol)
    });
    let mut best: Option<ClusterAssignment> = None;
    for run in runs {
        let a = run?.assignment;
        if best.as_ref().is_none_or(|b| a.wcss < b.wcss) {
            best = Some(a);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// WCSS of the best of `restarts` runs for each `k` in `1..=k_max`. Runs are
/// independent and merged by `(k, restart)`, so the curve does not depend
/// on the execution strategy.
pub fn elbow_curve(exec: Execution, points: &[Point], k_max: usize, restarts: usize, seed: u64) -> Result<Vec<f64>> {
    let params = ClusteringParams::default();
    elbow_curve_params(exec, points, k_max, restarts, seed, params.max_iters, params.tol)
}

fn elbow_curve_params(
    exec: Execution,
    points: &[Point],
    k_max: usize,
    restarts: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    let distinct = distinct_count(points);
    if k_max < 1 || k_max > distinct {
        return Err(Error::Clustering(format!(
            "k_max {k_max} must be in 1..={distinct} (distinct points)"
        )));
    }
    let restarts = restarts.max(1);
    let jobs: Vec<(usize, usize)> = (1..=k_max).flat_map(|k| (0..restarts).map(move |r| (k, r))).collect();
    let results = exec.map(&jobs, |&(k, r)| {
        kmeans(points, k, restart_seed(seed, k, r), max_iters, tol).map(|run| run.assignment.wcss)
    });
    let mut curve = vec![f64::INFINITY; k_max];
    for (&(k, _), w) in jobs.iter().zip(results) {
        curve[k - 1] = curve[k - 1].min(w?);
    }
    Ok(curve)
}

/// Curve values replaced by running minima, which are non-increasing.
pub fn prefix_minima(curve: &[f64]) -> Vec<f64> {
    let mut m = f64::INFINITY;
    curve
        .iter()
        .map(|&w| {
            m = m.min(w);
            m
        })
        .collect()
}

/// Below this normalized chord distance a curve counts as linear.
pub const KNEE_LINEAR_TOL: f64 = 1e-6;

/// Chooses `k` at the maximum distance below the chord joining the first
/// and last points of the normalized curve (k and WCSS both scaled to
/// [0, 1]). Ties resolve to the smallest `k`.
pub fn knee_point(curve: &[f64]) -> Result<KneeInfo> {
    if curve.len() < 3 {
        return Err(Error::Selection(format!(
            "knee detection needs at least 3 curve points, got {}",
            curve.len()
        )));
    }
    if curve.iter().any(|w| !w.is_finite()) {
        return Err(Error::Selection("curve contains non-finite values".into()));
    }
    let n = curve.len();
    let (lo, hi) = curve.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| {
        (lo.min(w), hi.max(w))
    });
    let span = hi - lo;
    if span <= 0.0 {
        return Ok(KneeInfo { k: 1, no_knee: true });
    }
    let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = curve.iter().map(|w| (w - lo) / span).collect();
    let (x0, y0, x1, y1) = (xs[0], ys[0], xs[n - 1], ys[n - 1]);
    let norm = (x1 - x0).hypot(y1 - y0);
    let mut best = (0.0, 0usize);
    for i in 0..n {
        // Signed distance, positive for points below the chord.
        let chord = y0 + (y1 - y0) * (xs[i] - x0) / (x1 - x0);
        let d = (chord - ys[i]) * (x1 - x0) / norm;
        if d > best.0 {
            best = (d, i);
        }
    }
    if best.0 < KNEE_LINEAR_TOL {
        return Ok(KneeInfo { k: 1, no_knee: true });
    }
    Ok(KneeInfo {
        k: best.1 + 1,
        no_knee: false,
    })
}

/// Elbow curve, knee selection and a final k-means at the chosen `k`
/// (or at `params.fixed_k`).
pub fn create_clusters(
    exec: Execution,
    points: &[Point],
    params: &ClusteringParams,
    seed: u64,
) -> Result<ClusterAssignment> {
    params.validate()?;
    if points.is_empty() {
        return Err(Error::Clustering("no points to cluster".into()));
    }
    let (k, curve, knee) = match params.fixed_k {
        Some(k) => (k, Vec::new(), None),
        None => {
            let k_max = params.effective_k_max(points.len()).min(distinct_count(points));
            let curve = elbow_curve_params(exec, points, k_max, params.restarts, seed, params.max_iters, params.tol)?;
            if curve.len() < 3 {
                (1, curve, Some(KneeInfo { k: 1, no_knee: true }))
            } else {
                let knee = knee_point(&prefix_minima(&curve))?;
                (knee.k, curve, Some(knee))
            }
        }
    };
    let mut result = best_kmeans_with(exec, points, k, params.restarts, seed, params.max_iters, params.tol)?;
    result.wcss_curve = curve;
    result.knee = knee;
    Ok(result)
}
