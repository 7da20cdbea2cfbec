//! Cluster-head election.
//!
//! Every cluster elects exactly one head. The default rule scores each
//! candidate by its mean received power to the other members minus its mean
//! distance to them, and takes the best score. The same family of
//! objectives is also available as an exact enumeration over candidates
//! (with a weight on the power term), as a normalized weight sweep, and as
//! a k-nearest-neighbour approximation backed by a k-d tree.

pub mod bench;
pub mod kdtree;
mod sweep;

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use sweep::{lower_envelope, weight_sweep, EnvelopeSegment, Objective, WeightSweep};

use crate::error::{Error, Result};
use crate::io::{read_json, write_json};
use crate::par::Execution;
use crate::{seed, Point};

/// Log-distance path loss: `p = P_tx - 10 n log10(max(d, d0) / d0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathLoss {
    pub exponent: f64,
    pub reference_distance: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        Self {
            exponent: 2.0,
            reference_distance: 1.0,
        }
    }
}

impl PathLoss {
    pub fn received(&self, tx_power_dbm: f64, distance: f64) -> f64 {
        let d0 = self.reference_distance;
        tx_power_dbm - 10.0 * self.exponent * (distance.max(d0) / d0).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationRadio {
    pub station_id: usize,
    pub position: Point,
    /// Transmit power in dBm.
    pub base_power: f64,
}

/// Received power (dBm) at `rx` of a transmission from `tx`.
pub fn received_power(tx: &StationRadio, rx: &StationRadio, model: &PathLoss) -> f64 {
    model.received(tx.base_power, tx.position.distance(&rx.position))
}

/// Assigns each station a uniform transmit power in `[min, max]` dBm.
pub fn assign_radios(positions: &[Point], power_range: (f64, f64), seed: u64) -> Vec<StationRadio> {
    let mut rng = seed::rng(seed);
    positions
        .iter()
        .enumerate()
        .map(|(station_id, &position)| StationRadio {
            station_id,
            position,
            base_power: if power_range.1 > power_range.0 {
                rng.random_range(power_range.0..=power_range.1)
            } else {
                power_range.0
            },
        })
        .collect()
}

/// Dense `M x M` distance and received-power tables of one cluster.
/// `p[i][j]` is the power of `i`'s transmission received at `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseTables {
    pub ids: Vec<usize>,
    pub d: Vec<f64>,
    pub p: Vec<f64>,
}

impl PairwiseTables {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.len() + j]
    }

    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.len() + j]
    }

    /// `(sum_j d_ij, sum_j p_ij)` over `j != i`, summed in ascending `j`.
    pub fn row_sums(&self, i: usize) -> (f64, f64) {
        let m = self.len();
        let (mut sd, mut sp) = (0.0, 0.0);
        for j in (0..m).filter(|&j| j != i) {
            sd += self.d(i, j);
            sp += self.p(i, j);
        }
        (sd, sp)
    }
}

pub fn build_pairwise(members: &[StationRadio], model: &PathLoss) -> PairwiseTables {
    let m = members.len();
    let mut d = vec![0.0; m * m];
    let mut p = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let dist = members[i].position.distance(&members[j].position);
                d[i * m + j] = dist;
                p[i * m + j] = model.received(members[i].base_power, dist);
            }
        }
    }
    PairwiseTables {
        ids: members.iter().map(|r| r.station_id).collect(),
        d,
        p,
    }
}

/// `Score_i = mean_j p_ij - mean_j d_ij` (dBm minus meters, as written).
/// A singleton cluster scores 0.
pub fn heuristic_score(tables: &PairwiseTables) -> Vec<f64> {
    let m = tables.len();
    if m < 2 {
        return vec![0.0; m];
    }
    let denom = (m - 1) as f64;
    (0..m)
        .map(|i| {
            let (sd, sp) = tables.row_sums(i);
            (sp - sd) / denom
        })
        .collect()
}

/// Index of the maximum; earliest index wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Exact minimizer of `sum_j d_ij - w sum_j p_ij` on raw tables. With one
/// head per cluster the feasible assignments are the `M` one-hot vectors, so
/// enumerating candidates solves the integer program exactly.
pub fn exact_head(tables: &PairwiseTables, w: f64) -> usize {
    let values: Vec<f64> = exact_objective(tables, w);
    tables.ids[argmin(&values)]
}

pub fn exact_objective(tables: &PairwiseTables, w: f64) -> Vec<f64> {
    (0..tables.len())
        .map(|i| {
            let (sd, sp) = tables.row_sums(i);
            sd - w * sp
        })
        .collect()
}

/// Heuristic head of one cluster computed on the fly, without tables:
/// O(M^2) time, O(1) extra space. Returns `(station_id, score)`.
pub fn heuristic_head_streaming(members: &[StationRadio], model: &PathLoss) -> (usize, f64) {
    let m = members.len();
    if m == 1 {
        return (members[0].station_id, 0.0);
    }
    let denom = (m - 1) as f64;
    let mut best = (members[0].station_id, f64::NEG_INFINITY);
    for (i, a) in members.iter().enumerate() {
        let (mut sd, mut sp) = (0.0, 0.0);
        for (j, b) in members.iter().enumerate() {
            if i != j {
                let dist = a.position.distance(&b.position);
                sd += dist;
                sp += model.received(a.base_power, dist);
            }
        }
        let score = (sp - sd) / denom;
        if score > best.1 {
            best = (a.station_id, score);
        }
    }
    best
}

/// kNN approximation: each candidate is scored on its `k` nearest members
/// only. Neighbours are summed in ascending member order, so `k = M - 1`
/// reproduces the all-pairs scores bit for bit.
pub fn knn_scores(members: &[StationRadio], k: usize, model: &PathLoss) -> Result<Vec<f64>> {
    let m = members.len();
    if k < 1 || k + 1 > m {
        return Err(Error::Parameter(format!(
            "neighbour count {k} must be in 1..={} for a cluster of {m}",
            m.saturating_sub(1)
        )));
    }
    let points: Vec<Point> = members.iter().map(|r| r.position).collect();
    let tree = kdtree::KdTree::build(&points);
    let mut scores = Vec::with_capacity(m);
    for (i, a) in members.iter().enumerate() {
        let mut nbrs: Vec<usize> = tree
            .nearest(&a.position, k, Some(i))
            .into_iter()
            .map(|n| n.index)
            .collect();
        nbrs.sort_unstable();
        let (mut sd, mut sp) = (0.0, 0.0);
        for j in nbrs {
            let dist = a.position.distance(&members[j].position);
            sd += dist;
            sp += model.received(a.base_power, dist);
        }
        scores.push((sp - sd) / k as f64);
    }
    Ok(scores)
}

pub fn knn_head(members: &[StationRadio], k: usize, model: &PathLoss) -> Result<usize> {
    let scores = knn_scores(members, k, model)?;
    Ok(members[argmax(&scores)].station_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Mean power minus mean distance; highest score wins.
    #[default]
    Heuristic,
    /// Raw-table enumeration of `sum d - w sum p`.
    Exact,
    /// Min-max normalized objective at the configured `w`.
    Weighted,
    /// Heuristic score over the `knn_k` nearest members only.
    Knn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadParams {
    pub method: Method,
    /// Power weight for the `exact` and `weighted` methods.
    pub w: f64,
    pub objective: Objective,
    pub knn_k: usize,
    pub power_min_dbm: f64,
    pub power_max_dbm: f64,
    pub path_loss: PathLoss,
    /// Grid points of the weight sweep written with every head selection.
    pub sweep_grid: usize,
}

impl Default for HeadParams {
    fn default() -> Self {
        Self {
            method: Method::Heuristic,
            w: 0.5,
            objective: Objective::Literal,
            knn_k: 16,
            power_min_dbm: 60.0,
            power_max_dbm: 80.0,
            path_loss: PathLoss::default(),
            sweep_grid: 11,
        }
    }
}

impl HeadParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.w >= 0.0 && self.w.is_finite()) {
            return Err(Error::Config("w must be a finite value >= 0".into()));
        }
        if self.power_min_dbm > self.power_max_dbm {
            return Err(Error::Config("power_min_dbm exceeds power_max_dbm".into()));
        }
        if self.knn_k < 1 {
            return Err(Error::Config("knn_k must be >= 1".into()));
        }
        if self.sweep_grid < 2 {
            return Err(Error::Config("sweep_grid must be >= 2".into()));
        }
        if self.path_loss.reference_distance.is_nan() || self.path_loss.reference_distance <= 0.0 {
            return Err(Error::Config("reference_distance must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterHead {
    pub cluster: usize,
    pub head_id: usize,
    pub members: Vec<usize>,
    /// Per-member score in `members` order; higher is better for every
    /// method (minimization objectives are negated).
    pub scores: Vec<f64>,
    pub method: Method,
    pub w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSelection {
    pub heads: Vec<ClusterHead>,
    pub radios: Vec<StationRadio>,
}

impl HeadSelection {
    pub fn head_ids(&self) -> Vec<usize> {
        self.heads.iter().map(|h| h.head_id).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let h: Self = read_json(path)?;
        for c in &h.heads {
            if !c.members.contains(&c.head_id) {
                return Err(Error::format(
                    path,
                    format!("head {} is not a member of cluster {}", c.head_id, c.cluster),
                ));
            }
        }
        Ok(h)
    }
}

fn select_one(cluster: usize, members: &[StationRadio], params: &HeadParams) -> Result<ClusterHead> {
    if members.is_empty() {
        return Err(Error::Selection(format!("cluster {cluster} is empty")));
    }
    let ids: Vec<usize> = members.iter().map(|r| r.station_id).collect();
    let m = members.len();
    let (scores, w) = if m == 1 {
        (vec![0.0], None)
    } else {
        match params.method {
            Method::Heuristic => (heuristic_score(&build_pairwise(members, &params.path_loss)), None),
            Method::Exact => {
                let t = build_pairwise(members, &params.path_loss);
                let obj = exact_objective(&t, params.w);
                (obj.iter().map(|v| -v).collect(), Some(params.w))
            }
            Method::Weighted => {
                let t = build_pairwise(members, &params.path_loss);
                let s = weight_sweep(&t, 2, params.objective)?;
                let obj = s.objective_at(params.w);
                (obj.iter().map(|v| -v).collect(), Some(params.w))
            }
            Method::Knn => (knn_scores(members, params.knn_k.min(m - 1), &params.path_loss)?, None),
        }
    };
    Ok(ClusterHead {
        cluster,
        head_id: ids[argmax(&scores)],
        members: ids,
        scores,
        method: params.method,
        w,
    })
}

/// Elects one head per cluster. `clusters` lists member station ids
/// (ascending); `radios` is indexed by station id. Ties go to the lowest
/// station id.
pub fn select_heads(
    exec: Execution,
    clusters: &[Vec<usize>],
    radios: &[StationRadio],
    params: &HeadParams,
) -> Result<HeadSelection> {
    params.validate()?;
    let mut indexed: Vec<(usize, Vec<StationRadio>)> = Vec::with_capacity(clusters.len());
    for (c, ids) in clusters.iter().enumerate() {
        let mut ids = ids.clone();
        ids.sort_unstable();
        let members = ids
            .iter()
            .map(|&id| {
                radios
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::Selection(format!("no radio for station {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        indexed.push((c, members));
    }
    let heads = exec.try_map(&indexed, |(c, members)| select_one(*c, members, params))?;
    Ok(HeadSelection {
        heads,
        radios: radios.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radio(id: usize, x: f64, y: f64, p: f64) -> StationRadio {
        StationRadio {
            station_id: id,
            position: Point::new(x, y),
            base_power: p,
        }
    }

    #[test]
    fn path_loss_reference_points() {
        let pl = PathLoss::default();
        let a = radio(0, 0.0, 0.0, 70.0);
        assert_eq!(received_power(&a, &radio(1, 1.0, 0.0, 60.0), &pl), 70.0);
        assert!((received_power(&a, &radio(1, 100.0, 0.0, 60.0), &pl) - 30.0).abs() < 1e-12);
        // Clamped below the reference distance.
        assert_eq!(received_power(&a, &radio(1, 0.2, 0.0, 60.0), &pl), 70.0);
        let mut last = f64::INFINITY;
        for d in [1.0, 2.0, 5.0, 50.0, 400.0] {
            let p = received_power(&a, &radio(1, d, 0.0, 60.0), &pl);
            assert!(p < last || d == 1.0);
            last = p;
        }
    }

    #[test]
    fn pairwise_tables_basic_shape() {
        let pl = PathLoss::default();
        let one = build_pairwise(&[radio(4, 1.0, 1.0, 70.0)], &pl);
        assert_eq!(one.d, vec![0.0]);
        let t = build_pairwise(
            &[
                radio(0, 0.0, 0.0, 60.0),
                radio(1, 3.0, 4.0, 70.0),
                radio(2, 6.0, 0.0, 80.0),
            ],
            &pl,
        );
        for i in 0..3 {
            assert_eq!(t.d(i, i), 0.0);
            for j in 0..3 {
                assert_eq!(t.d(i, j), t.d(j, i));
            }
        }
        assert_eq!(t.d(0, 1), 5.0);
        assert!((t.p(1, 0) - (70.0 - 20.0 * 5.0_f64.log10())).abs() < 1e-12);
        assert!((t.p(0, 1) - (60.0 - 20.0 * 5.0_f64.log10())).abs() < 1e-12);
    }

    #[test]
    fn colinear_middle_station_wins() {
        let pl = PathLoss::default();
        let members = [
            radio(0, 0.0, 0.0, 70.0),
            radio(1, 1.0, 0.0, 70.0),
            radio(2, 2.0, 0.0, 70.0),
        ];
        let t = build_pairwise(&members, &pl);
        let s = heuristic_score(&t);
        // Hand values: middle (70 + 70)/2 - (1 + 1)/2 = 69;
        // ends (70 + 63.979..)/2 - (1 + 2)/2 = 65.489...
        let end = (70.0 + 70.0 - 20.0 * 2.0_f64.log10()) / 2.0 - 1.5;
        assert!((s[1] - 69.0).abs() < 1e-12);
        assert!((s[0] - end).abs() < 1e-12 && (s[2] - end).abs() < 1e-12);
        assert_eq!(argmax(&s), 1);
    }

    #[test]
    fn colocated_equal_power_ties_to_lowest_id() {
        let members = [
            radio(3, 5.0, 5.0, 70.0),
            radio(7, 5.0, 5.0, 70.0),
            radio(9, 5.0, 5.0, 70.0),
        ];
        let sel = select_heads(
            Execution::Sequential,
            &[vec![3, 7, 9]],
            &{
                let mut r = vec![radio(0, 0.0, 0.0, 60.0); 10];
                for m in members {
                    r[m.station_id] = m;
                }
                r
            },
            &HeadParams::default(),
        )
        .unwrap();
        assert_eq!(sel.heads[0].head_id, 3);
        assert!(sel.heads[0].scores.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn singleton_cluster_elects_its_member() {
        let radios = vec![radio(0, 1.0, 2.0, 61.0), radio(1, 9.0, 9.0, 79.0)];
        for method in [Method::Heuristic, Method::Exact, Method::Weighted, Method::Knn] {
            let params = HeadParams {
                method,
                ..HeadParams::default()
            };
            let s = select_heads(Execution::Sequential, &[vec![1], vec![0]], &radios, &params).unwrap();
            assert_eq!(s.head_ids(), vec![1, 0]);
        }
    }

    #[test]
    fn empty_cluster_is_an_error() {
        let radios = vec![radio(0, 1.0, 2.0, 61.0)];
        let r = select_heads(
            Execution::Sequential,
            &[vec![0], vec![]],
            &radios,
            &HeadParams::default(),
        );
        assert!(matches!(r, Err(Error::Selection(_))));
    }

    #[test]
    fn exact_with_zero_weight_is_distance_medoid() {
        let pl = PathLoss::default();
        let members = [
            radio(0, 0.0, 0.0, 80.0),
            radio(1, 10.0, 0.0, 60.0),
            radio(2, 11.0, 1.0, 60.0),
            radio(3, 30.0, 0.0, 80.0),
        ];
        let t = build_pairwise(&members, &pl);
        let sums: Vec<f64> = (0..4).map(|i| t.row_sums(i).0).collect();
        assert_eq!(exact_head(&t, 0.0), members[argmin(&sums)].station_id);
    }

    #[test]
    fn knn_range_is_checked() {
        let pl = PathLoss::default();
        let members = [radio(0, 0.0, 0.0, 70.0), radio(1, 1.0, 0.0, 70.0)];
        assert!(matches!(knn_head(&members, 0, &pl), Err(Error::Parameter(_))));
        assert!(matches!(knn_head(&members, 2, &pl), Err(Error::Parameter(_))));
        assert!(knn_head(&members, 1, &pl).is_ok());
    }

    #[test]
    fn streaming_matches_table_heuristic() {
        let pl = PathLoss::default();
        let positions: Vec<Point> = (0..30)
            .map(|i| Point::new(((i * 41) % 113) as f64 * 3.7, ((i * 29) % 97) as f64 * 4.1))
            .collect();
        let radios = assign_radios(&positions, (60.0, 80.0), 5);
        let t = build_pairwise(&radios, &pl);
        let s = heuristic_score(&t);
        let (head, score) = heuristic_head_streaming(&radios, &pl);
        assert_eq!(head, argmax(&s));
        assert_eq!(score, s[head]);
    }
}
