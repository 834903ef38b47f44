//! Exact oracles: exhaustive stable-set enumeration for tiny markets and
//! maximum-cardinality bipartite matching.

use std::collections::VecDeque;

use crate::da::verify_stability;
use crate::edges::EdgeSet;
use crate::error::{Error, Result};
use crate::matching::Matching;
use crate::{Market, Side};

pub const BRUTE_FORCE_MAX: usize = 8;

/// Every stable matching (perfect or partial) of a one-to-one market with at
/// most [`BRUTE_FORCE_MAX`] agents per side, found by enumerating all
/// matchings within `edges`.
pub fn brute_force_stable_set(market: &Market, edges: &EdgeSet) -> Result<Vec<Matching>> {
    let (nl, nr) = (market.size(Side::Left), market.size(Side::Right));
    if !market.is_one_to_one() || nl > BRUTE_FORCE_MAX || nr > BRUTE_FORCE_MAX {
        return Err(Error::OracleTooLarge { max: BRUTE_FORCE_MAX });
    }
    let mut found = Vec::new();
    let mut assign: Vec<Option<usize>> = vec![None; nl];
    let mut used = vec![false; nr];
    enumerate(market, edges, 0, &mut assign, &mut used, &mut found);
    Ok(found)
}

fn enumerate(
    market: &Market,
    edges: &EdgeSet,
    i: usize,
    assign: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    found: &mut Vec<Matching>,
) {
    let (nl, nr) = (market.size(Side::Left), market.size(Side::Right));
    if i == nl {
        let m = Matching::from_pairs(nl, nr, assign.iter().enumerate().filter_map(|(i, j)| j.map(|j| (i, j))));
        if verify_stability(market, edges, &m).is_empty() {
            found.push(m);
        }
        return;
    }
    assign[i] = None;
    enumerate(market, edges, i + 1, assign, used, found);
    for j in 0..nr {
        if !used[j] && edges.contains(i, j) {
            used[j] = true;
            assign[i] = Some(j);
            enumerate(market, edges, i + 1, assign, used, found);
            used[j] = false;
        }
    }
    assign[i] = None;
}

/// The element of `set` that every agent on `side` weakly prefers to every
/// other element, if one exists (unmatched ranks below any partner).
pub fn side_optimal<'a>(market: &Market, side: Side, set: &'a [Matching]) -> Option<&'a Matching> {
    let weakly_better = |a: &Matching, b: &Matching| {
        (0..market.size(side)).all(|x| match (a.partner(side, x), b.partner(side, x)) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(p), Some(q)) => p == q || market.prefers(side, x, p, q),
        })
    };
    set.iter().find(|a| set.iter().all(|b| weakly_better(a, b)))
}

/// Size of a maximum-cardinality matching in the bipartite graph `edges`
/// (Hopcroft–Karp).
pub fn max_bipartite_matching(edges: &EdgeSet) -> usize {
    let (nl, nr) = (edges.n_left(), edges.n_right());
    let adj: Vec<Vec<usize>> = (0..nl).map(|i| edges.neighbors(Side::Left, i)).collect();
    const FREE: usize = usize::MAX;
    let mut match_l = vec![FREE; nl];
    let mut match_r = vec![FREE; nr];
    let mut dist = vec![0usize; nl];
    let mut size = 0;

    loop {
        // layer free left vertices
        let mut queue = VecDeque::new();
        for i in 0..nl {
            if match_l[i] == FREE {
                dist[i] = 0;
                queue.push_back(i);
            } else {
                dist[i] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                let k = match_r[j];
                if k == FREE {
                    found = true;
                } else if dist[k] == usize::MAX {
                    dist[k] = dist[i] + 1;
                    queue.push_back(k);
                }
            }
        }
        if !found {
            break;
        }
        let mut next_edge = vec![0usize; nl];
        for i in 0..nl {
            if match_l[i] == FREE && augment(i, &adj, &mut match_l, &mut match_r, &mut dist, &mut next_edge) {
                size += 1;
            }
        }
    }
    size
}

fn augment(
    root: usize,
    adj: &[Vec<usize>],
    match_l: &mut [usize],
    match_r: &mut [usize],
    dist: &mut [usize],
    next_edge: &mut [usize],
) -> bool {
    // iterative DFS along the layered graph
    let mut path: Vec<usize> = vec![root];
    while let Some(&i) = path.last() {
        if next_edge[i] == adj[i].len() {
            dist[i] = usize::MAX;
            path.pop();
            continue;
        }
        let j = adj[i][next_edge[i]];
        next_edge[i] += 1;
        let k = match_r[j];
        if k == usize::MAX {
            // flip the path: each left vertex takes the right vertex it was exploring
            for &l in path.iter().rev() {
                let jj = adj[l][next_edge[l] - 1];
                match_l[l] = jj;
                match_r[jj] = l;
            }
            return true;
        }
        if dist[k] == dist[i] + 1 {
            path.push(k);
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::da::run_da;
    use crate::market::{generate_market, MarketParams};
    use crate::model::UtilityModel;
    use proptest::prelude::*;

    fn brute_max(edges: &EdgeSet) -> usize {
        fn go(i: usize, edges: &EdgeSet, used: &mut Vec<bool>) -> usize {
            if i == edges.n_left() {
                return 0;
            }
            let mut best = go(i + 1, edges, used);
            for j in 0..edges.n_right() {
                if !used[j] && edges.contains(i, j) {
                    used[j] = true;
                    best = best.max(1 + go(i + 1, edges, used));
                    used[j] = false;
                }
            }
            best
        }
        go(0, edges, &mut vec![false; edges.n_right()])
    }

    #[test]
    fn trivial_graphs() {
        assert_eq!(max_bipartite_matching(&EdgeSet::complete(7, 7)), 7);
        assert_eq!(max_bipartite_matching(&EdgeSet::complete(3, 9)), 3);
        assert_eq!(max_bipartite_matching(&EdgeSet::empty(5, 5)), 0);
    }

    proptest! {
        #[test]
        fn hopcroft_karp_matches_exhaustive_search(
            nl in 1usize..=8, nr in 1usize..=8, bits in proptest::collection::vec(any::<bool>(), 64)
        ) {
            let edges = EdgeSet::from_fn(nl, nr, |i, j| bits[i * 8 + j]);
            prop_assert_eq!(max_bipartite_matching(&edges), brute_max(&edges));
        }
    }

    #[test]
    fn single_agent_market() {
        let m = generate_market(&MarketParams::one_to_one(1, UtilityModel::linear(0.5).unwrap(), 1)).unwrap();
        let set = brute_force_stable_set(&m, &EdgeSet::complete(1, 1)).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set[0].pairs().collect::<Vec<_>>(), vec![(0, 0)]);
    }

    #[test]
    fn stable_set_contains_both_da_outputs() {
        for seed in 0..20 {
            let m = generate_market(&MarketParams::one_to_one(3, UtilityModel::linear(0.5).unwrap(), seed)).unwrap();
            let e = EdgeSet::complete(3, 3);
            let set = brute_force_stable_set(&m, &e).unwrap();
            for side in [Side::Left, Side::Right] {
                let da = run_da(&m, side, &e);
                assert!(set.iter().any(|s| s.same_pairs(&da)));
                assert!(side_optimal(&m, side, &set).unwrap().same_pairs(&da));
            }
        }
    }

    #[test]
    fn size_guard() {
        let m = generate_market(&MarketParams::one_to_one(9, UtilityModel::linear(0.5).unwrap(), 1)).unwrap();
        assert!(matches!(brute_force_stable_set(&m, &EdgeSet::complete(9, 9)), Err(Error::OracleTooLarge { .. })));
        let cap = generate_market(&MarketParams::many_to_one(4, 2, UtilityModel::linear(0.5).unwrap(), 1)).unwrap();
        assert!(brute_force_stable_set(&cap, &EdgeSet::complete(4, 2)).is_err());
    }

    #[test]
    fn unmatched_sets_agree_across_stable_matchings() {
        for seed in 0..50 {
            let m = generate_market(&MarketParams::one_to_one(7, UtilityModel::linear(0.6).unwrap(), seed)).unwrap();
            // sparse random edges so that some agents stay single
            let e = EdgeSet::from_fn(7, 7, |i, j| crate::rng::mix64(seed * 100 + (i * 7 + j) as u64) % 3 == 0);
            let set = brute_force_stable_set(&m, &e).unwrap();
            assert!(!set.is_empty());
            for s in &set {
                assert_eq!(s.unmatched(Side::Left), set[0].unmatched(Side::Left));
                assert_eq!(s.unmatched(Side::Right), set[0].unmatched(Side::Right));
            }
        }
    }
}
