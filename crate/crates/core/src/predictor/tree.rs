//! Regression trees grown by exact greedy search over presorted columns.
//!
//! Trees are grown level by level. For each level, every candidate feature's
//! presorted row order is scanned once, and split statistics are accumulated
//! for all open nodes at the same time. One level therefore costs
//! O(rows x features) regardless of how many nodes it contains.

use serde::{Deserialize, Serialize};

const LEAF: i32 = -1;
const NONE: u32 = u32::MAX;

/// Flat node arrays; node 0 is the root. A node is a leaf iff
/// `feature[n] == -1`, in which case only `value[n]` is meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        Self {
            feature: vec![LEAF],
            threshold: vec![0.0],
            left: vec![0],
            right: vec![0],
            value: vec![value],
        }
    }

    pub fn len(&self) -> usize {
        self.feature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.feature.is_empty()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.feature[node] == LEAF
    }

    /// Index of the leaf reached by `row`. Rows go left when
    /// `row[feature] < threshold`.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut n = 0usize;
        while self.feature[n] != LEAF {
            let f = self.feature[n] as usize;
            n = if row[f] < self.threshold[n] {
                self.left[n] as usize
            } else {
                self.right[n] as usize
            };
        }
        n
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.value[self.leaf_index(row)]
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &RegressionTree, n: usize) -> usize {
            if t.is_leaf(n) {
                0
            } else {
                1 + walk(t, t.left[n] as usize).max(walk(t, t.right[n] as usize))
            }
        }
        if self.is_empty() {
            0
        } else {
            walk(self, 0)
        }
    }

    /// Checks structural invariants: children in range, finite leaves, no cycles.
    pub fn is_well_formed(&self) -> bool {
        let n = self.len();
        if n == 0
            || [
                self.threshold.len(),
                self.left.len(),
                self.right.len(),
                self.value.len(),
            ]
            .iter()
            .any(|&l| l != n)
        {
            return false;
        }
        (0..n).all(|i| {
            if self.is_leaf(i) {
                self.value[i].is_finite()
            } else {
                let (l, r) = (self.left[i] as usize, self.right[i] as usize);
                l > i && r > i && l < n && r < n && self.threshold[i].is_finite()
            }
        })
    }
}

/// Column-major training features with a per-feature presorted row order.
pub struct ColumnData {
    pub columns: Vec<Vec<f64>>,
    pub order: Vec<Vec<u32>>,
}

impl ColumnData {
    /// `rows` are row-major feature vectors of identical length.
    pub fn new(rows: &[Vec<f64>], n_features: usize) -> Self {
        let columns: Vec<Vec<f64>> = (0..n_features).map(|f| rows.iter().map(|r| r[f]).collect()).collect();
        let order = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { columns, order }
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

pub struct GrowParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

#[derive(Clone)]
struct BuildNode {
    depth: usize,
    count: usize,
    sum: f64,
    sum_sq: f64,
    split: Option<(usize, f64, u32, u32)>,
}

#[derive(Clone, Copy)]
struct Scan {
    count: usize,
    sum: f64,
    last: f64,
    best_gain: f64,
    best_feature: usize,
    best_threshold: f64,
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    // Adjacent floats: the midpoint may round down onto `lo`, which would
    // send `lo` right. `hi` itself still separates the two values.
    if mid <= lo {
        hi
    } else {
        mid
    }
}

/// Grows one tree on `residual` restricted to rows with `in_sample[r]`,
/// considering only `features` (ascending). Ties in gain resolve to the
/// lowest feature index, then the lowest threshold.
pub fn grow(
    data: &ColumnData,
    residual: &[f64],
    in_sample: &[bool],
    features: &[usize],
    params: &GrowParams,
) -> RegressionTree {
    let n_rows = data.n_rows();
    let min_leaf = params.min_samples_leaf.max(1);
    let mut row_node = vec![NONE; n_rows];
    let mut root = BuildNode {
        depth: 0,
        count: 0,
        sum: 0.0,
        sum_sq: 0.0,
        split: None,
    };
    for r in 0..n_rows {
        if in_sample[r] {
            row_node[r] = 0;
            root.count += 1;
            root.sum += residual[r];
            root.sum_sq += residual[r] * residual[r];
        }
    }
    let mut nodes = vec![root];
    let splittable = |n: &BuildNode| n.depth < params.max_depth && n.count >= 2 * min_leaf;
    let mut frontier: Vec<u32> = if splittable(&nodes[0]) { vec![0] } else { vec![] };

    while !frontier.is_empty() {
        let mut slot_of = vec![NONE; nodes.len()];
        for (s, &n) in frontier.iter().enumerate() {
            slot_of[n as usize] = s as u32;
        }
        let fresh = Scan {
            count: 0,
            sum: 0.0,
            last: f64::NAN,
            best_gain: 0.0,
            best_feature: usize::MAX,
            best_threshold: 0.0,
        };
        let mut scans = vec![fresh; frontier.len()];

        for &f in features {
            for sc in scans.iter_mut() {
                sc.count = 0;
                sc.sum = 0.0;
                sc.last = f64::NAN;
            }
            let col = &data.columns[f];
            for &r in &data.order[f] {
                let r = r as usize;
                let node = row_node[r];
                if node == NONE {
                    continue;
                }
                let slot = slot_of[node as usize];
                if slot == NONE {
                    continue;
                }
                let total = &nodes[node as usize];
                let sc = &mut scans[slot as usize];
                let v = col[r];
                if sc.count >= min_leaf && v != sc.last && total.count - sc.count >= min_leaf {
                    let n_left = sc.count as f64;
                    let n_right = (total.count - sc.count) as f64;
                    let s_right = total.sum - sc.sum;
                    let gain = sc.sum * sc.sum / n_left + s_right * s_right / n_right
                        - total.sum * total.sum / total.count as f64;
                    if gain > sc.best_gain {
                        sc.best_gain = gain;
                        sc.best_feature = f;
                        sc.best_threshold = midpoint(sc.last, v);
                    }
                }
                sc.count += 1;
                sc.sum += residual[r];
                sc.last = v;
            }
        }

        let mut next = Vec::new();
        for (s, &n) in frontier.iter().enumerate() {
            let sc = scans[s];
            let node = &nodes[n as usize];
            // Gains below this fraction of the node's sum of squares are
            // rounding noise (e.g. a constant residual).
            if sc.best_feature == usize::MAX || sc.best_gain <= 1e-12 * node.sum_sq {
                continue;
            }
            let depth = node.depth + 1;
            let l = nodes.len() as u32;
            let child = BuildNode {
                depth,
                count: 0,
                sum: 0.0,
                sum_sq: 0.0,
                split: None,
            };
            nodes.push(child.clone());
            nodes.push(child);
            nodes[n as usize].split = Some((sc.best_feature, sc.best_threshold, l, l + 1));
        }
        for r in 0..n_rows {
            let node = row_node[r];
            if node == NONE {
                continue;
            }
            if let Some((f, thr, l, rt)) = nodes[node as usize].split {
                let child = if data.columns[f][r] < thr { l } else { rt };
                row_node[r] = child;
                let c = &mut nodes[child as usize];
                c.count += 1;
                c.sum += residual[r];
                c.sum_sq += residual[r] * residual[r];
            }
        }
        for &n in &frontier {
            if let Some((_, _, l, rt)) = nodes[n as usize].split {
                for c in [l, rt] {
                    if splittable(&nodes[c as usize]) {
                        next.push(c);
                    }
                }
            }
        }
        frontier = next;
    }

    let mut tree = RegressionTree {
        feature: Vec::with_capacity(nodes.len()),
        threshold: Vec::with_capacity(nodes.len()),
        left: Vec::with_capacity(nodes.len()),
        right: Vec::with_capacity(nodes.len()),
        value: Vec::with_capacity(nodes.len()),
    };
    for n in &nodes {
        match n.split {
            Some((f, thr, l, r)) => {
                tree.feature.push(f as i32);
                tree.threshold.push(thr);
                tree.left.push(l);
                tree.right.push(r);
                tree.value.push(0.0);
            }
            None => {
                tree.feature.push(LEAF);
                tree.threshold.push(0.0);
                tree.left.push(0);
                tree.right.push(0);
                tree.value.push(if n.count > 0 { n.sum / n.count as f64 } else { 0.0 });
            }
        }
    }
    tree
}
