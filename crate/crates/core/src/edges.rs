//! Explicit subsets of the complete bipartite edge set.

use std::io::Write;

use bitvec::prelude::*;
use serde::Serialize;

use crate::Side;

/// Edge `(i, j)` joins left agent `i` and right agent `j`.
#[derive(Clone, PartialEq, Eq)]
pub struct EdgeSet {
    n_left: usize,
    n_right: usize,
    bits: BitVec<u64, Lsb0>,
    count: usize,
}

impl std::fmt::Debug for EdgeSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "EdgeSet({}x{}, {} edges)", self.n_left, self.n_right, self.count)
    }
}

impl EdgeSet {
    pub fn empty(n_left: usize, n_right: usize) -> Self {
        EdgeSet { n_left, n_right, bits: bitvec![u64, Lsb0; 0; n_left * n_right], count: 0 }
    }

    pub fn complete(n_left: usize, n_right: usize) -> Self {
        EdgeSet {
            n_left,
            n_right,
            bits: bitvec![u64, Lsb0; 1; n_left * n_right],
            count: n_left * n_right,
        }
    }

    pub fn from_fn(n_left: usize, n_right: usize, mut keep: impl FnMut(usize, usize) -> bool) -> Self {
        let mut set = Self::empty(n_left, n_right);
        for i in 0..n_left {
            for j in 0..n_right {
                if keep(i, j) {
                    set.bits.set(i * n_right + j, true);
                    set.count += 1;
                }
            }
        }
        set
    }

    pub fn from_pairs(n_left: usize, n_right: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut set = Self::empty(n_left, n_right);
        for (i, j) in pairs {
            set.insert(i, j);
        }
        set
    }

    pub fn n_left(&self) -> usize {
        self.n_left
    }

    pub fn n_right(&self) -> usize {
        self.n_right
    }

    #[inline]
    pub fn contains(&self, left: usize, right: usize) -> bool {
        self.bits[left * self.n_right + right]
    }

    /// Membership with the endpoints given from `side`'s point of view.
    #[inline]
    pub fn contains_from(&self, side: Side, agent: usize, partner: usize) -> bool {
        match side {
            Side::Left => self.contains(agent, partner),
            Side::Right => self.contains(partner, agent),
        }
    }

    pub fn insert(&mut self, left: usize, right: usize) -> bool {
        let k = left * self.n_right + right;
        let fresh = !self.bits[k];
        if fresh {
            self.bits.set(k, true);
            self.count += 1;
        }
        fresh
    }

    pub fn remove(&mut self, left: usize, right: usize) -> bool {
        let k = left * self.n_right + right;
        let present = self.bits[k];
        if present {
            self.bits.set(k, false);
            self.count -= 1;
        }
        present
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn is_complete(&self) -> bool {
        self.count == self.n_left * self.n_right
    }

    pub fn is_subset(&self, other: &EdgeSet) -> bool {
        debug_assert_eq!((self.n_left, self.n_right), (other.n_left, other.n_right));
        self.bits.iter_ones().all(|k| other.bits[k])
    }

    pub fn intersection(&self, other: &EdgeSet) -> EdgeSet {
        let bits = self.bits.clone() & other.bits.clone();
        let count = bits.count_ones();
        EdgeSet { n_left: self.n_left, n_right: self.n_right, bits, count }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits.iter_ones().map(move |k| (k / self.n_right, k % self.n_right))
    }

    /// Number of edges at `agent` on `side`.
    pub fn degree(&self, side: Side, agent: usize) -> usize {
        match side {
            Side::Left => self.bits[agent * self.n_right..(agent + 1) * self.n_right].count_ones(),
            Side::Right => (0..self.n_left).filter(|&i| self.contains(i, agent)).count(),
        }
    }

    pub fn degrees(&self, side: Side) -> Vec<usize> {
        match side {
            Side::Left => (0..self.n_left).map(|i| self.degree(Side::Left, i)).collect(),
            Side::Right => {
                let mut deg = vec![0; self.n_right];
                for (_, j) in self.iter() {
                    deg[j] += 1;
                }
                deg
            }
        }
    }

    /// Partners of `agent` on `side`, in index order.
    pub fn neighbors(&self, side: Side, agent: usize) -> Vec<usize> {
        match side {
            Side::Left => self.bits[agent * self.n_right..(agent + 1) * self.n_right].iter_ones().collect(),
            Side::Right => (0..self.n_left).filter(|&i| self.contains(i, agent)).collect(),
        }
    }

    /// Edge-list CSV with header `left_index,right_index`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "left_index,right_index")?;
        for (i, j) in self.iter() {
            writeln!(out, "{i},{j}")?;
        }
        Ok(())
    }

    /// Degree summary by public-rank decile for both sides.
    pub fn summary(&self, market: &crate::Market) -> EdgeSummary {
        let side_summary = |side: Side| {
            let degrees = self.degrees(side);
            let values: Vec<f64> = degrees.iter().map(|&d| d as f64).collect();
            SideDegrees {
                degrees,
                by_decile: crate::stats::decile_stats(market, side, &values),
            }
        };
        EdgeSummary { edge_count: self.count, left: side_summary(Side::Left), right: side_summary(Side::Right) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SideDegrees {
    pub degrees: Vec<usize>,
    pub by_decile: Vec<crate::stats::DecileStat>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeSummary {
    pub edge_count: usize,
    pub left: SideDegrees,
    pub right: SideDegrees,
}
