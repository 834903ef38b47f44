//! Decile and summary statistics shared by reports.

use serde::{Deserialize, Serialize};

use crate::{Market, Side};

pub const DECILES: usize = 10;

/// Decile (0 = top 10%) of a 0-based public rank among `n` agents. Decile
/// sizes differ by at most one.
#[inline]
pub fn decile_of_rank(rank: usize, n: usize) -> usize {
    rank * DECILES / n.max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecileStat {
    pub decile: usize,
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub sum: f64,
}

impl DecileStat {
    fn empty(decile: usize) -> Self {
        DecileStat { decile, count: 0, mean: f64::NAN, min: f64::INFINITY, max: f64::NEG_INFINITY, sum: 0.0 }
    }

    fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    fn finish(&mut self) {
        self.mean = if self.count == 0 { f64::NAN } else { self.sum / self.count as f64 };
    }
}

/// Per-decile statistics of per-agent `values` (indexed by agent). NaN
/// entries are skipped.
pub fn decile_stats(market: &Market, side: Side, values: &[f64]) -> Vec<DecileStat> {
    let n = market.size(side);
    let mut out: Vec<DecileStat> = (0..DECILES).map(DecileStat::empty).collect();
    for (agent, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        out[decile_of_rank(market.rank_of(side, agent), n)].push(v);
    }
    out.iter_mut().for_each(DecileStat::finish);
    out
}

/// Merges per-run decile tables: counts and sums add, extrema combine. Order
/// of runs does not matter.
pub fn merge_deciles(tables: &[Vec<DecileStat>]) -> Vec<DecileStat> {
    let mut out: Vec<DecileStat> = (0..DECILES).map(DecileStat::empty).collect();
    for table in tables {
        for (acc, d) in out.iter_mut().zip(table) {
            acc.count += d.count;
            acc.sum += d.sum;
            acc.min = acc.min.min(d.min);
            acc.max = acc.max.max(d.max);
        }
    }
    out.iter_mut().for_each(DecileStat::finish);
    out
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Median (average of the middle pair for even lengths).
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (mx, my) = (mean(&lx), mean(&ly));
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}
