//! Normalized distance/power trade-off as a function of the weight `w`.
//!
//! Distances and powers are min-max normalized over the off-diagonal
//! entries of the whole cluster table. Each candidate's objective is then
//! affine in `w`: `J_i(w) = A_i - w B_i` with `A_i = sum_j d~_ij` and
//! `B_i = sum_j p~_ij` (literal form), or `(1 - w) A_i - w B_i` for the
//! convex-combination form, where `w = 1` drops the distance term.

use serde::{Deserialize, Serialize};

use super::{argmin, PairwiseTables};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `sum (d~ - w p~)`; the distance term is present at every `w`.
    #[default]
    Literal,
    /// `(1 - w) sum d~ - w sum p~`.
    ConvexCombination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSweep {
    pub objective: Objective,
    pub ids: Vec<usize>,
    pub grid: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `values[g][i]` is `J_i(grid[g])`.
    pub values: Vec<Vec<f64>>,
    /// Station id minimizing `J` at each grid point.
    pub argmin: Vec<usize>,
    pub d_norm: Vec<f64>,
    pub p_norm: Vec<f64>,
}

impl WeightSweep {
    pub fn objective_at(&self, w: f64) -> Vec<f64> {
        objective_values(self.objective, &self.a, &self.b, w)
    }
}

fn objective_values(objective: Objective, a: &[f64], b: &[f64], w: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(&a, &b)| match objective {
            Objective::Literal => a - w * b,
            Objective::ConvexCombination => (1.0 - w) * a - w * b,
        })
        .collect()
}

fn normalize_off_diagonal(values: &[f64], m: usize) -> Vec<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                lo = lo.min(values[i * m + j]);
                hi = hi.max(values[i * m + j]);
            }
        }
    }
    let span = hi - lo;
    let mut out = vec![0.0; m * m];
    if span > 0.0 {
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    out[i * m + j] = (values[i * m + j] - lo) / span;
                }
            }
        }
    }
    out
}

pub fn weight_sweep(tables: &PairwiseTables, grid_size: usize, objective: Objective) -> Result<WeightSweep> {
    let m = tables.len();
    if m < 2 {
        return Err(Error::Parameter("weight sweep needs at least 2 stations".into()));
    }
    if grid_size < 2 {
        return Err(Error::Parameter("weight grid needs at least 2 points".into()));
    }
    let d_norm = normalize_off_diagonal(&tables.d, m);
    let p_norm = normalize_off_diagonal(&tables.p, m);
    let sums = |t: &[f64], i: usize| -> f64 { (0..m).filter(|&j| j != i).map(|j| t[i * m + j]).sum() };
    let a: Vec<f64> = (0..m).map(|i| sums(&d_norm, i)).collect();
    let b: Vec<f64> = (0..m).map(|i| sums(&p_norm, i)).collect();
    let grid: Vec<f64> = (0..grid_size).map(|g| g as f64 / (grid_size - 1) as f64).collect();
    let values: Vec<Vec<f64>> = grid.iter().map(|&w| objective_values(objective, &a, &b, w)).collect();
    let argmin = values.iter().map(|v| tables.ids[argmin(v)]).collect();
    Ok(WeightSweep {
        objective,
        ids: tables.ids.clone(),
        grid,
        a,
        b,
        values,
        argmin,
        d_norm,
        p_norm,
    })
}

/// One piece of the lower envelope: candidate `index` attains the minimum
/// on `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSegment {
    pub start: f64,
    pub end: f64,
    pub index: usize,
}

/// Lower envelope of the affine objectives over `w` in `[0, 1]`. The argmin
/// can only change where two lines intersect, so it is constant between
/// consecutive pairwise intersection points.
pub fn lower_envelope(sweep: &WeightSweep) -> Vec<EnvelopeSegment> {
    // Line i: J_i(w) = c_i + s_i w.
    let lines: Vec<(f64, f64)> = sweep
        .a
        .iter()
        .zip(&sweep.b)
        .map(|(&a, &b)| match sweep.objective {
            Objective::Literal => (a, -b),
            Objective::ConvexCombination => (a, -a - b),
        })
        .collect();
    let mut cuts = vec![0.0, 1.0];
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let ds = lines[i].1 - lines[j].1;
            if ds != 0.0 {
                let w = (lines[j].0 - lines[i].0) / ds;
                if w > 0.0 && w < 1.0 {
                    cuts.push(w);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out: Vec<EnvelopeSegment> = Vec::new();
    for win in cuts.windows(2) {
        let mid = (win[0] + win[1]) / 2.0;
        let vals: Vec<f64> = lines.iter().map(|(c, s)| c + s * mid).collect();
        let index = argmin(&vals);
        match out.last_mut() {
            Some(last) if last.index == index => last.end = win[1],
            _ => out.push(EnvelopeSegment {
                start: win[0],
                end: win[1],
                index,
            }),
        }
    }
    out
}
