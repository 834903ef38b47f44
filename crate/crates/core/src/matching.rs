//! Capacitated matchings.

use std::io::Write;

use serde::Serialize;

use crate::{Market, Side};

/// Partner sets on both sides plus proposals issued per proposer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Matching {
    pub matches_left: Vec<Vec<usize>>,
    pub matches_right: Vec<Vec<usize>>,
    /// Proposals issued by each agent of the proposing side (zeros on the
    /// other side and for matchings not produced by DA).
    pub proposals_left: Vec<usize>,
    pub proposals_right: Vec<usize>,
}

impl Matching {
    pub fn empty(n_left: usize, n_right: usize) -> Self {
        Matching {
            matches_left: vec![Vec::new(); n_left],
            matches_right: vec![Vec::new(); n_right],
            proposals_left: vec![0; n_left],
            proposals_right: vec![0; n_right],
        }
    }

    pub fn from_pairs(n_left: usize, n_right: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut m = Self::empty(n_left, n_right);
        for (i, j) in pairs {
            m.matches_left[i].push(j);
            m.matches_right[j].push(i);
        }
        m.normalize();
        m
    }

    /// Sorts partner lists so equal matchings compare equal.
    pub fn normalize(&mut self) {
        self.matches_left.iter_mut().for_each(|v| v.sort_unstable());
        self.matches_right.iter_mut().for_each(|v| v.sort_unstable());
    }

    pub fn partners(&self, side: Side, agent: usize) -> &[usize] {
        match side {
            Side::Left => &self.matches_left[agent],
            Side::Right => &self.matches_right[agent],
        }
    }

    pub fn proposals(&self, side: Side) -> &[usize] {
        match side {
            Side::Left => &self.proposals_left,
            Side::Right => &self.proposals_right,
        }
    }

    pub fn is_matched(&self, side: Side, agent: usize) -> bool {
        !self.partners(side, agent).is_empty()
    }

    /// Single partner in a one-to-one matching.
    pub fn partner(&self, side: Side, agent: usize) -> Option<usize> {
        self.partners(side, agent).first().copied()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.matches_left.iter().enumerate().flat_map(|(i, js)| js.iter().map(move |&j| (i, j)))
    }

    pub fn size(&self) -> usize {
        self.matches_left.iter().map(Vec::len).sum()
    }

    pub fn unmatched(&self, side: Side) -> Vec<usize> {
        let n = match side {
            Side::Left => self.matches_left.len(),
            Side::Right => self.matches_right.len(),
        };
        (0..n).filter(|&a| !self.is_matched(side, a)).collect()
    }

    /// Same pairs, ignoring proposal counts.
    pub fn same_pairs(&self, other: &Matching) -> bool {
        self.matches_left == other.matches_left && self.matches_right == other.matches_right
    }

    /// Symmetry and capacity feasibility.
    pub fn is_feasible(&self, market: &Market) -> bool {
        let cap_ok = |side: Side| (0..market.size(side)).all(|a| self.partners(side, a).len() <= market.cap(side));
        let symmetric = self.pairs().all(|(i, j)| self.matches_right[j].contains(&i))
            && self.matches_right.iter().map(Vec::len).sum::<usize>() == self.size();
        cap_ok(Side::Left) && cap_ok(Side::Right) && symmetric
    }

    /// Utility `agent` gets from its least preferred partner, if matched.
    pub fn worst_utility(&self, market: &Market, side: Side, agent: usize) -> Option<f64> {
        self.partners(side, agent)
            .iter()
            .map(|&p| market.utility(side, agent, p))
            .min_by(f64::total_cmp)
    }

    /// CSV with columns
    /// `side,agent_index,public_rank,partner_indices,proposals_made,matched_flag`.
    /// Ranks are 1-based; partner indices are `;`-separated.
    pub fn write_csv<W: Write>(&self, market: &Market, mut out: W) -> std::io::Result<()> {
        writeln!(out, "side,agent_index,public_rank,partner_indices,proposals_made,matched_flag")?;
        for side in [Side::Left, Side::Right] {
            for agent in 0..market.size(side) {
                let partners: Vec<String> = self.partners(side, agent).iter().map(usize::to_string).collect();
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    side.name(),
                    agent,
                    market.rank_of(side, agent) + 1,
                    partners.join(";"),
                    self.proposals(side)[agent],
                    u8::from(self.is_matched(side, agent))
                )?;
            }
        }
        Ok(())
    }
}
