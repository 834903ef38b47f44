//! Deferred acceptance and its variants.
//!
//! Proposers walk their candidate lists (allowed edges sorted by descending
//! utility, ties to the lower partner index) and receivers hold their `cap`
//! best proposals so far. Lists are sorted lazily in growing chunks, so a
//! proposer who stops after a handful of proposals never pays for a full
//! sort of a long list.

use std::cmp::Ordering;
use std::collections::VecDeque;

use rand::Rng;

use crate::edges::EdgeSet;
use crate::error::{Error, Result};
use crate::matching::Matching;
use crate::rng::{stream, StreamLabel};
use crate::{Market, Side};

/// Order in which free proposers are processed. The outcome does not depend
/// on it; the variants exist to check exactly that.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProposalOrder {
    #[default]
    Stack,
    Queue,
    Shuffled(u64),
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    utility: f64,
    partner: u32,
}

#[inline]
fn better_first(a: &Candidate, b: &Candidate) -> Ordering {
    b.utility.total_cmp(&a.utility).then(a.partner.cmp(&b.partner))
}

struct PrefCursor {
    cands: Vec<Candidate>,
    sorted: usize,
    next: usize,
}

impl PrefCursor {
    fn new(cands: Vec<Candidate>) -> Self {
        PrefCursor { cands, sorted: 0, next: 0 }
    }

    fn next(&mut self) -> Option<usize> {
        if self.next == self.sorted {
            let rest = &mut self.cands[self.sorted..];
            if rest.is_empty() {
                return None;
            }
            let chunk = self.sorted.max(16).min(rest.len());
            if chunk < rest.len() {
                rest.select_nth_unstable_by(chunk - 1, better_first);
            }
            rest[..chunk].sort_unstable_by(better_first);
            self.sorted += chunk;
        }
        let c = self.cands[self.next];
        self.next += 1;
        Some(c.partner as usize)
    }
}

fn candidates(market: &Market, side: Side, agent: usize, edges: &EdgeSet) -> Vec<Candidate> {
    let n_other = market.size(side.other());
    let mut out = Vec::with_capacity(if edges.is_complete() { n_other } else { 16 });
    for partner in 0..n_other {
        if edges.contains_from(side, agent, partner) {
            out.push(Candidate { utility: market.utility(side, agent, partner), partner: partner as u32 });
        }
    }
    out
}

enum Pool {
    Stack(Vec<usize>),
    Queue(VecDeque<usize>),
    Shuffled(Vec<usize>, rand_chacha::ChaCha8Rng),
}

impl Pool {
    fn new(order: ProposalOrder, n: usize) -> Self {
        match order {
            ProposalOrder::Stack => Pool::Stack((0..n).rev().collect()),
            ProposalOrder::Queue => Pool::Queue((0..n).collect()),
            ProposalOrder::Shuffled(seed) => Pool::Shuffled((0..n).collect(), stream(seed, StreamLabel::ProposalOrder, 0)),
        }
    }

    fn push(&mut self, p: usize) {
        match self {
            Pool::Stack(v) => v.push(p),
            Pool::Queue(q) => q.push_back(p),
            Pool::Shuffled(v, _) => v.push(p),
        }
    }

    fn pop(&mut self) -> Option<usize> {
        match self {
            Pool::Stack(v) => v.pop(),
            Pool::Queue(q) => q.pop_front(),
            Pool::Shuffled(v, rng) => {
                if v.is_empty() {
                    None
                } else {
                    let k = rng.gen_range(0..v.len());
                    Some(v.swap_remove(k))
                }
            }
        }
    }
}

/// Proposer-optimal stable matching of the sub-market induced by `edges`,
/// with `proposing` agents proposing.
pub fn run_da(market: &Market, proposing: Side, edges: &EdgeSet) -> Matching {
    run_da_with_order(market, proposing, edges, ProposalOrder::Stack)
}

pub fn run_da_with_order(market: &Market, proposing: Side, edges: &EdgeSet, order: ProposalOrder) -> Matching {
    let receiving = proposing.other();
    let (n_prop, n_recv) = (market.size(proposing), market.size(receiving));
    let (cap_prop, cap_recv) = (market.cap(proposing), market.cap(receiving));

    let mut cursors: Vec<Option<PrefCursor>> = (0..n_prop).map(|_| None).collect();
    let mut held: Vec<Vec<usize>> = vec![Vec::new(); n_recv];
    let mut held_count = vec![0usize; n_prop];
    let mut proposals = vec![0usize; n_prop];
    let mut pool = Pool::new(order, n_prop);

    let recv_prefers = |r: usize, a: usize, b: usize| market.prefers(receiving, r, a, b);

    while let Some(p) = pool.pop() {
        let cursor = cursors[p].get_or_insert_with(|| PrefCursor::new(candidates(market, proposing, p, edges)));
        while held_count[p] < cap_prop {
            let Some(r) = cursor.next() else { break };
            proposals[p] += 1;
            let slot = &mut held[r];
            if slot.len() < cap_recv {
                slot.push(p);
                held_count[p] += 1;
                continue;
            }
            let (worst_pos, &worst) = slot
                .iter()
                .enumerate()
                .reduce(|acc, cur| if recv_prefers(r, *acc.1, *cur.1) { cur } else { acc })
                .expect("receiver at capacity holds someone");
            if recv_prefers(r, p, worst) {
                slot[worst_pos] = p;
                held_count[p] += 1;
                held_count[worst] -= 1;
                if worst != p {
                    pool.push(worst);
                }
            }
        }
    }

    let mut matching = Matching::empty(market.size(Side::Left), market.size(Side::Right));
    for (r, ps) in held.into_iter().enumerate() {
        for p in ps {
            let (i, j) = match proposing {
                Side::Left => (p, r),
                Side::Right => (r, p),
            };
            matching.matches_left[i].push(j);
            matching.matches_right[j].push(i);
        }
    }
    match proposing {
        Side::Left => matching.proposals_left = proposals,
        Side::Right => matching.proposals_right = proposals,
    }
    matching.normalize();
    matching
}

/// Cut applied to every proposer's list: stop at the edge to `target`
/// (inclusive) or at utility below `U(rating_floor, 1)`, whichever comes
/// first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutSpec {
    target: Option<usize>,
    rating_floor: Option<f64>,
}

impl CutSpec {
    /// A negative floor is clamped to 0.
    pub fn new(target: Option<usize>, rating_floor: Option<f64>) -> Result<Self> {
        if target.is_none() && rating_floor.is_none() {
            return Err(crate::error::invalid("cut", "needs a target, a rating floor, or both"));
        }
        if rating_floor.is_some_and(f64::is_nan) {
            return Err(crate::error::invalid("rating_floor", "NaN"));
        }
        Ok(CutSpec { target, rating_floor: rating_floor.map(|r| r.max(0.0)) })
    }

    pub fn target(&self) -> Option<usize> {
        self.target
    }

    pub fn rating_floor(&self) -> Option<f64> {
        self.rating_floor
    }
}

/// The edge set each proposer is left with after applying `cut` to `base`.
pub fn double_cut_edges(market: &Market, proposing: Side, base: &EdgeSet, cut: &CutSpec) -> Result<EdgeSet> {
    let n_recv = market.size(proposing.other());
    if let Some(t) = cut.target {
        if t >= n_recv {
            return Err(Error::IndexOutOfRange { index: t, size: n_recv });
        }
    }
    let floor = cut.rating_floor.map(|r| market.model().utility(proposing, r, 1.0));
    let mut out = EdgeSet::empty(base.n_left(), base.n_right());
    for p in 0..market.size(proposing) {
        let survives_floor = |partner: usize| floor.map_or(true, |f| market.utility(proposing, p, partner) >= f);
        // the target stop only bites if her edge to the target survives the floor
        let stop_at = cut
            .target
            .filter(|&t| base.contains_from(proposing, p, t) && survives_floor(t));
        for partner in 0..n_recv {
            if !base.contains_from(proposing, p, partner) || !survives_floor(partner) {
                continue;
            }
            if let Some(t) = stop_at {
                if partner != t && !market.prefers(proposing, p, partner, t) {
                    continue;
                }
            }
            match proposing {
                Side::Left => out.insert(p, partner),
                Side::Right => out.insert(partner, p),
            };
        }
    }
    Ok(out)
}

/// DA with every proposer double-cut on the complete edge set.
pub fn run_double_cut_da(market: &Market, proposing: Side, cut: &CutSpec) -> Result<Matching> {
    let full = EdgeSet::complete(market.size(Side::Left), market.size(Side::Right));
    let edges = double_cut_edges(market, proposing, &full, cut)?;
    Ok(run_da(market, proposing, &edges))
}

/// (left-optimal, right-optimal) stable matchings.
pub fn extreme_matchings(market: &Market, edges: &EdgeSet) -> (Matching, Matching) {
    (run_da(market, Side::Left, edges), run_da(market, Side::Right, edges))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, serde::Serialize)]
pub struct MultiStable {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

/// Agents whose partners differ between the two extreme matchings, i.e. who
/// have more than one stable partner.
pub fn multi_stable_agents(market: &Market, edges: &EdgeSet) -> MultiStable {
    let (lo, ro) = extreme_matchings(market, edges);
    multi_stable_from(&lo, &ro)
}

pub fn multi_stable_from(left_opt: &Matching, right_opt: &Matching) -> MultiStable {
    let differ = |side: Side, n: usize| (0..n).filter(|&a| left_opt.partners(side, a) != right_opt.partners(side, a)).collect();
    MultiStable {
        left: differ(Side::Left, left_opt.matches_left.len()),
        right: differ(Side::Right, left_opt.matches_right.len()),
    }
}

/// Every edge in `edges` that blocks `matching`: both endpoints would rather
/// have each other than (one of) their current partners. An agent under
/// capacity wants any edge. Empty iff stable.
pub fn verify_stability(market: &Market, edges: &EdgeSet, matching: &Matching) -> Vec<(usize, usize)> {
    let worst = |side: Side| -> Vec<Option<usize>> {
        (0..market.size(side))
            .map(|a| {
                let ps = matching.partners(side, a);
                if ps.len() < market.cap(side) {
                    return None;
                }
                ps.iter().copied().reduce(|w, p| if market.prefers(side, a, w, p) { p } else { w })
            })
            .collect()
    };
    let (worst_left, worst_right) = (worst(Side::Left), worst(Side::Right));
    let wants = |side: Side, a: usize, b: usize, w: Option<usize>| w.map_or(true, |w| market.prefers(side, a, b, w));
    edges
        .iter()
        .filter(|&(i, j)| {
            !matching.matches_left[i].contains(&j)
                && wants(Side::Left, i, j, worst_left[i])
                && wants(Side::Right, j, i, worst_right[j])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{generate_market, MarketParams, ScoreMatrix};
    use crate::model::UtilityModel;

    fn market(n: usize, lambda: f64, seed: u64) -> Market {
        generate_market(&MarketParams::one_to_one(n, UtilityModel::linear(lambda).unwrap(), seed)).unwrap()
    }

    fn full(m: &Market) -> EdgeSet {
        EdgeSet::complete(m.size(Side::Left), m.size(Side::Right))
    }

    #[test]
    fn single_pair() {
        let m = market(1, 0.5, 1);
        let out = run_da(&m, Side::Left, &full(&m));
        assert_eq!(out.matches_left, vec![vec![0]]);
        assert_eq!(out.proposals_left, vec![1]);
    }

    #[test]
    fn empty_edges_give_empty_matching() {
        let m = market(5, 0.5, 1);
        let out = run_da(&m, Side::Left, &EdgeSet::empty(5, 5));
        assert_eq!(out.size(), 0);
        assert_eq!(out.unmatched(Side::Right).len(), 5);
    }

    #[test]
    fn outputs_are_stable_and_feasible() {
        for seed in 0..10 {
            let m = market(60, 0.5 + 0.03 * seed as f64, seed);
            for side in [Side::Left, Side::Right] {
                let out = run_da(&m, side, &full(&m));
                assert!(out.is_feasible(&m));
                assert_eq!(out.size(), 60);
                assert!(verify_stability(&m, &full(&m), &out).is_empty());
            }
        }
    }

    #[test]
    fn processing_order_does_not_matter() {
        let m = market(80, 0.7, 5);
        let sparse = EdgeSet::from_fn(80, 80, |i, j| (i * 7 + j * 3) % 5 != 0);
        for edges in [full(&m), sparse] {
            let base = run_da(&m, Side::Left, &edges);
            for order in [ProposalOrder::Queue, ProposalOrder::Shuffled(1), ProposalOrder::Shuffled(2)] {
                assert_eq!(run_da_with_order(&m, Side::Left, &edges, order), base);
            }
        }
    }

    #[test]
    fn empty_matching_is_blocked_by_every_edge() {
        let m = market(4, 0.5, 2);
        let edges = EdgeSet::from_pairs(4, 4, [(0, 0), (1, 3), (2, 2)]);
        let blocks = verify_stability(&m, &edges, &Matching::empty(4, 4));
        assert_eq!(blocks, vec![(0, 0), (1, 3), (2, 2)]);
    }

    #[test]
    fn swapping_pairs_creates_a_blocking_pair() {
        // search a seeded instance for two matched pairs whose left agents
        // each prefer the other's partner; swapping then leaves a blocker
        let m = market(40, 0.5, 9);
        let e = full(&m);
        let out = run_da(&m, Side::Left, &e);
        let mut found = false;
        'outer: for a in 0..40 {
            for b in (a + 1)..40 {
                let (pa, pb) = (out.partner(Side::Left, a).unwrap(), out.partner(Side::Left, b).unwrap());
                let swapped = Matching::from_pairs(
                    40,
                    40,
                    out.pairs().map(|(i, j)| if i == a { (a, pb) } else if i == b { (b, pa) } else { (i, j) }),
                );
                if !verify_stability(&m, &e, &swapped).is_empty() {
                    found = true;
                    break 'outer;
                }
            }
        }
        assert!(found);
    }

    #[test]
    fn capacitated_da_is_stable() {
        let p = MarketParams::many_to_one(120, 6, UtilityModel::linear(0.8).unwrap(), 4);
        let m = generate_market(&p).unwrap();
        let e = EdgeSet::complete(120, 20);
        for side in [Side::Left, Side::Right] {
            let out = run_da(&m, side, &e);
            assert!(out.is_feasible(&m));
            assert_eq!(out.size(), 120);
            assert!(verify_stability(&m, &e, &out).is_empty());
            assert_eq!(run_da_with_order(&m, side, &e, ProposalOrder::Shuffled(3)), out);
        }
    }

    #[test]
    fn many_to_many_is_stable() {
        let p = MarketParams::new(30, 20, 2, 3, UtilityModel::linear(0.6).unwrap(), 8);
        let m = generate_market(&p).unwrap();
        let e = EdgeSet::from_fn(30, 20, |i, j| (i + 2 * j) % 4 != 1);
        for side in [Side::Left, Side::Right] {
            let out = run_da(&m, side, &e);
            assert!(out.is_feasible(&m));
            assert!(verify_stability(&m, &e, &out).is_empty());
        }
    }

    #[test]
    fn vacuous_cut_matches_plain_da() {
        let m = market(50, 0.6, 3);
        let cut = CutSpec::new(None, Some(0.0)).unwrap();
        let e = double_cut_edges(&m, Side::Left, &full(&m), &cut).unwrap();
        // U(0, 1) = 1 - λ can exceed a few utilities, so compare against the
        // same floor on the plain run instead of assuming the full set
        let floor = m.model().left_utility(0.0, 1.0);
        let expected = EdgeSet::from_fn(50, 50, |i, j| m.utility(Side::Left, i, j) >= floor);
        assert_eq!(e, expected);
        let cut_run = run_double_cut_da(&m, Side::Left, &cut).unwrap();
        assert_eq!(cut_run, run_da(&m, Side::Left, &expected));
    }

    #[test]
    fn zero_floor_is_vacuous_with_perfect_scores() {
        // with every private score 1 no utility falls below V(0, 1)
        let n = 40;
        let base = market(n, 0.6, 11);
        let ones = || ScoreMatrix::from_vec(n, n, vec![1.0; n * n]).unwrap();
        let m = Market::from_parts(
            &base.params(),
            base.ratings(Side::Left).to_vec(),
            base.ratings(Side::Right).to_vec(),
            ones(),
            ones(),
        )
        .unwrap();
        let cut = run_double_cut_da(&m, Side::Left, &CutSpec::new(None, Some(0.0)).unwrap()).unwrap();
        assert_eq!(cut, run_da(&m, Side::Left, &full(&m)));
    }

    #[test]
    fn top_floor_empties_lists() {
        let m = market(30, 0.5, 4);
        let cut = CutSpec::new(Some(3), Some(1.0)).unwrap();
        let out = run_double_cut_da(&m, Side::Left, &cut).unwrap();
        assert!(out.pairs().all(|(_, j)| j == 3));
    }

    #[test]
    fn cut_keeps_prefix_through_target() {
        let m = market(20, 0.5, 6);
        let cut = CutSpec::new(Some(5), None).unwrap();
        let e = double_cut_edges(&m, Side::Left, &full(&m), &cut).unwrap();
        for i in 0..20 {
            assert!(e.contains(i, 5));
            for j in 0..20 {
                assert_eq!(e.contains(i, j), j == 5 || m.prefers(Side::Left, i, j, 5));
            }
        }
    }

    #[test]
    fn cut_validation() {
        assert!(CutSpec::new(None, None).is_err());
        assert_eq!(CutSpec::new(None, Some(-0.3)).unwrap().rating_floor(), Some(0.0));
        let m = market(3, 0.5, 1);
        let cut = CutSpec::new(Some(3), None).unwrap();
        assert!(matches!(run_double_cut_da(&m, Side::Left, &cut), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn cyclic_instance_has_everyone_multi_stable() {
        // equal ratings make preferences follow the scores: a Latin-square
        // cycle with three stable matchings
        let params = MarketParams::one_to_one(3, UtilityModel::linear(0.5).unwrap(), 0);
        let left = [[0.9, 0.5, 0.1], [0.1, 0.9, 0.5], [0.5, 0.1, 0.9]];
        let right = [[0.1, 0.9, 0.5], [0.5, 0.1, 0.9], [0.9, 0.5, 0.1]];
        let m = Market::from_parts(
            &params,
            vec![0.5; 3],
            vec![0.5; 3],
            ScoreMatrix::from_vec(3, 3, left.concat()).unwrap(),
            ScoreMatrix::from_vec(3, 3, right.concat()).unwrap(),
        )
        .unwrap();
        let ms = multi_stable_agents(&m, &full(&m));
        assert_eq!(ms.left, vec![0, 1, 2]);
        assert_eq!(ms.right, vec![0, 1, 2]);
        assert_eq!(crate::oracle::brute_force_stable_set(&m, &full(&m)).unwrap().len(), 3);
    }

    #[test]
    fn aligned_preferences_have_unique_stable_matching() {
        let params = MarketParams::one_to_one(2, UtilityModel::linear(0.9).unwrap(), 0);
        let m = Market::from_parts(
            &params,
            vec![0.9, 0.2],
            vec![0.8, 0.1],
            ScoreMatrix::from_vec(2, 2, vec![0.5; 4]).unwrap(),
            ScoreMatrix::from_vec(2, 2, vec![0.5; 4]).unwrap(),
        )
        .unwrap();
        assert_eq!(multi_stable_agents(&m, &full(&m)), MultiStable::default());
    }
}
