use serde::{Deserialize, Serialize};

use super::loss::{benchmark, LossParams};
use crate::da::extreme_matchings;
use crate::edges::EdgeSet;
use crate::error::{invalid, Result};
use crate::model::UtilityModel;
use crate::{Market, Side};

/// Edges `(i, j)` where both endpoints accept: `left(i, u)` with `u` the
/// utility left agent `i` gets from right agent `j`, and symmetrically.
pub fn threshold_edges(
    market: &Market,
    left: impl Fn(usize, f64) -> bool,
    right: impl Fn(usize, f64) -> bool,
) -> EdgeSet {
    EdgeSet::from_fn(market.size(Side::Left), market.size(Side::Right), |i, j| {
        left(i, market.utility(Side::Left, i, j)) && right(j, market.utility(Side::Right, j, i))
    })
}

/// Loss thresholds and bottom cutoffs for acceptable edges, per side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptableParams {
    pub l_left: f64,
    pub l_right: f64,
    pub sigma_left: f64,
    pub sigma_right: f64,
}

impl AcceptableParams {
    pub fn symmetric(l: f64, sigma: f64) -> Self {
        AcceptableParams { l_left: l, l_right: l, sigma_left: sigma, sigma_right: sigma }
    }
}

/// Per-agent benchmark, or `None` for agents that accept everything
/// (own rating below `sigma`, or no aligned partner).
fn benchmarks_above(market: &Market, side: Side, sigma: f64) -> Vec<Option<f64>> {
    (0..market.size(side))
        .map(|a| if market.rating(side, a) < sigma { None } else { benchmark(market, side, a) })
        .collect()
}

/// Edges acceptable to both endpoints. An agent accepts a partner when
/// `benchmark − utility ≤ L`, or unconditionally when its own rating is below
/// `σ` or it has no aligned partner.
pub fn acceptable_edges(market: &Market, params: &AcceptableParams) -> EdgeSet {
    let bl = benchmarks_above(market, Side::Left, params.sigma_left);
    let br = benchmarks_above(market, Side::Right, params.sigma_right);
    threshold_edges(
        market,
        |i, u| bl[i].map_or(true, |b| b - u <= params.l_left),
        |j, u| br[j].map_or(true, |b| b - u <= params.l_right),
    )
}

/// Smallest symmetric loss threshold at which each edge becomes acceptable,
/// for fixed bottom cutoffs: edge `(i, j)` is in
/// `acceptable_edges(L, L, σ_left, σ_right)` iff `level(i, j) ≤ L`.
pub struct AcceptanceLevels<'a> {
    market: &'a Market,
    left: Vec<Option<f64>>,
    right: Vec<Option<f64>>,
}

impl<'a> AcceptanceLevels<'a> {
    pub fn new(market: &'a Market, sigma_left: f64, sigma_right: f64) -> Self {
        AcceptanceLevels {
            market,
            left: benchmarks_above(market, Side::Left, sigma_left),
            right: benchmarks_above(market, Side::Right, sigma_right),
        }
    }

    /// `−∞` when both endpoints accept unconditionally.
    pub fn level(&self, i: usize, j: usize) -> f64 {
        let l = self.left[i].map_or(f64::NEG_INFINITY, |b| b - self.market.utility(Side::Left, i, j));
        let r = self.right[j].map_or(f64::NEG_INFINITY, |b| b - self.market.utility(Side::Right, j, i));
        l.max(r)
    }

    /// Smallest threshold whose acceptable set contains all of `edges`.
    pub fn covering(&self, edges: &EdgeSet) -> f64 {
        edges.iter().map(|(i, j)| self.level(i, j)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Edges of `edges` that both endpoints weakly prefer to their pessimal
/// stable partner. Agents unmatched or below capacity in their pessimal
/// matching accept every edge.
pub fn viable_edges(market: &Market, edges: &EdgeSet) -> EdgeSet {
    let (left_opt, right_opt) = extreme_matchings(market, edges);
    // left agents' pessimal matching is the right-optimal one, and vice versa
    let floor = |side: Side, pessimal: &crate::Matching| -> Vec<Option<f64>> {
        (0..market.size(side))
            .map(|a| {
                if pessimal.partners(side, a).len() < market.cap(side) {
                    None
                } else {
                    pessimal.worst_utility(market, side, a)
                }
            })
            .collect()
    };
    let fl = floor(Side::Left, &right_opt);
    let fr = floor(Side::Right, &left_opt);
    let mut out = EdgeSet::empty(edges.n_left(), edges.n_right());
    for (i, j) in edges.iter() {
        let ok_left = fl[i].map_or(true, |f| market.utility(Side::Left, i, j) >= f);
        let ok_right = fr[j].map_or(true, |f| market.utility(Side::Right, j, i) >= f);
        if ok_left && ok_right {
            out.insert(i, j);
        }
    }
    out
}

/// Interview edges: public ratings within `p` and both private scores
/// strictly above the side's cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterviewParams {
    pub p: f64,
    pub q_left: f64,
    pub q_right: f64,
}

impl InterviewParams {
    pub fn symmetric(p: f64, q: f64) -> Self {
        InterviewParams { p, q_left: q, q_right: q }
    }
}

pub fn interview_edges(market: &Market, params: &InterviewParams) -> EdgeSet {
    let sl = market.scores(Side::Left);
    let sr = market.scores(Side::Right);
    EdgeSet::from_fn(market.size(Side::Left), market.size(Side::Right), |i, j| {
        (market.rating(Side::Left, i) - market.rating(Side::Right, j)).abs() <= params.p
            && sl.get(i, j) > params.q_left
            && sr.get(j, i) > params.q_right
    })
}

/// Interview selection where each agent requests partners with ratings
/// within `σ = ½(k/n)^{1/3}` and an edge survives with a rating-dependent
/// probability `p_xy`, realized through both private scores clearing
/// `1 − √p_xy`. Mid-rating agents get `k` interviews in expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectedSetParams {
    pub k: f64,
    pub n: usize,
    pub sigma: f64,
}

impl SelectedSetParams {
    pub fn new(k: f64, n: usize) -> Result<Self> {
        if !(k >= 1.0) || !k.is_finite() {
            return Err(invalid("k", format!("{k} must be at least 1")));
        }
        if n == 0 {
            return Err(invalid("n", "must be positive"));
        }
        let sigma = 0.5 * (k / n as f64).cbrt();
        let p = SelectedSetParams { k, n, sigma };
        let peak = p.survival(0.0, 0.0);
        if peak > 1.0 {
            return Err(invalid("k", format!("survival probability {peak:.3} exceeds 1; k/n is too large")));
        }
        Ok(p)
    }

    /// Unnormalized interview weight `p_xy`: `k/(4σ²)` in the middle, raised
    /// near either end by `k(a)(b)/(2σ⁴)` where `a`, `b` are the distances
    /// into the end zone, so end agents keep `k` expected interviews despite
    /// their one-sided cone. Zero for `|x − y| > 2σ` or ratings outside [0, 1].
    pub fn pxy(&self, x: f64, y: f64) -> f64 {
        let (x, y) = (x.min(y), x.max(y));
        let s = self.sigma;
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) || (x - y).abs() > 2.0 * s {
            return 0.0;
        }
        let base = self.k / (4.0 * s * s);
        let corr = self.k / (2.0 * s.powi(4));
        if x < s && y < s {
            base + corr * (s - x) * (s - y)
        } else if x > 1.0 - s && y > 1.0 - s {
            base + corr * (x + s - 1.0) * (y + s - 1.0)
        } else {
            base
        }
    }

    /// `p_xy` scaled to a probability: `4σ²` in the middle, so that
    /// `n · 2σ · 4σ² = k`.
    pub fn survival(&self, x: f64, y: f64) -> f64 {
        self.pxy(x, y) * 16.0 * self.sigma.powi(4) / self.k
    }

    pub fn in_cone(&self, x: f64, y: f64) -> bool {
        (x - y).abs() <= self.sigma
    }

    /// Largest ratio `p_xy / p_xz` over grid points with `y` and `z` both
    /// within `2σ` of `x`.
    pub fn max_ratio_on_grid(&self, steps: usize) -> f64 {
        let pts: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
        let mut worst = 1.0f64;
        for &x in &pts {
            let vals: Vec<f64> =
                pts.iter().filter(|&&y| (x - y).abs() <= 2.0 * self.sigma).map(|&y| self.pxy(x, y)).collect();
            let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            if lo > 0.0 {
                worst = worst.max(hi / lo);
            }
        }
        worst
    }
}

/// Realized selected interview set: in-cone edges whose private scores both
/// reach `1 − √survival`.
pub fn selected_edges(market: &Market, params: &SelectedSetParams) -> EdgeSet {
    let sl = market.scores(Side::Left);
    let sr = market.scores(Side::Right);
    EdgeSet::from_fn(market.size(Side::Left), market.size(Side::Right), |i, j| {
        let (x, y) = (market.rating(Side::Left, i), market.rating(Side::Right, j));
        if !params.in_cone(x, y) {
            return false;
        }
        let cut = 1.0 - params.survival(x, y).sqrt();
        sl.get(i, j) >= cut && sr.get(j, i) >= cut
    })
}

/// Loss threshold `U(r, 1) − U(r − shift·t², 1)` for an agent whose aligned
/// partner has rating `r`, with `U` extended linearly below rating 0.
pub fn truncation_threshold(model: &UtilityModel, side: Side, aligned_rating: f64, shift: f64, t: f64) -> f64 {
    model.utility(side, aligned_rating, 1.0) - model.extended_top_utility(side, aligned_rating - shift * t * t)
}

fn truncation_edges_with(market: &Market, params: &LossParams, t_of: impl Fn(Side, f64) -> f64) -> EdgeSet {
    let shift = params.truncation_shift();
    let floors = |side: Side| -> Vec<Option<f64>> {
        (0..market.size(side))
            .map(|a| {
                let p = market.aligned_partner(side, a)?;
                let r = market.rating(side.other(), p);
                let l = truncation_threshold(market.model(), side, r, shift, t_of(side, r));
                Some(market.model().utility(side, r, 1.0) - l)
            })
            .collect()
    };
    let fl = floors(Side::Left);
    let fr = floors(Side::Right);
    threshold_edges(market, |i, u| fl[i].map_or(true, |f| u >= f), |j, u| fr[j].map_or(true, |f| u >= f))
}

/// Truncated edge set with one relaxation factor per side; `t = 1` applies
/// the plain `L̄` threshold in the linear model.
pub fn truncated_edges(market: &Market, params: &LossParams, t_left: f64, t_right: f64) -> Result<EdgeSet> {
    for (name, t) in [("t_left", t_left), ("t_right", t_right)] {
        if !(t >= 1.0) {
            return Err(invalid(name, format!("{t} must be at least 1")));
        }
    }
    Ok(truncation_edges_with(market, params, |side, _| if side == Side::Left { t_left } else { t_right }))
}

/// Rank-dependent truncation: an agent aligned with rating `r` uses
/// `t = clamp(shift / r, 1, t_max)`, so low-rated agents relax their
/// threshold down to the bottom of the market.
pub fn reservation_edges(market: &Market, params: &LossParams, t_max_left: f64, t_max_right: f64) -> Result<EdgeSet> {
    for (name, t) in [("t_max_left", t_max_left), ("t_max_right", t_max_right)] {
        if !(t >= 1.0) {
            return Err(invalid(name, format!("{t} must be at least 1")));
        }
    }
    let shift = params.truncation_shift();
    Ok(truncation_edges_with(market, params, |side, r| {
        let t_max = if side == Side::Left { t_max_left } else { t_max_right };
        if r <= 0.0 { t_max } else { (shift / r).clamp(1.0, t_max) }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::da::{multi_stable_agents, run_da};
    use crate::market::{generate_market, MarketParams, ScoreMatrix};
    use crate::oracle::brute_force_stable_set;

    fn lin(l: f64) -> UtilityModel {
        UtilityModel::linear(l).unwrap()
    }

    fn market(n: usize, seed: u64) -> Market {
        generate_market(&MarketParams::one_to_one(n, lin(0.5), seed)).unwrap()
    }

    #[test]
    fn acceptable_edges_monotone_in_l() {
        let m = market(200, 4);
        let mut prev = EdgeSet::empty(200, 200);
        for l in [0.0, 0.05, 0.1, 0.2, 0.4, 1.0] {
            let e = acceptable_edges(&m, &AcceptableParams::symmetric(l, 0.0));
            assert!(prev.is_subset(&e));
            prev = e;
        }
        assert!(prev.is_complete());
    }

    #[test]
    fn acceptable_edges_monotone_in_sigma() {
        let m = market(150, 5);
        let a = acceptable_edges(&m, &AcceptableParams::symmetric(0.05, 0.1));
        let b = acceptable_edges(&m, &AcceptableParams::symmetric(0.05, 0.3));
        assert!(a.is_subset(&b));
        assert!(acceptable_edges(&m, &AcceptableParams::symmetric(0.0, 1.01)).is_complete());
    }

    #[test]
    fn acceptable_edge_definition() {
        let m = market(60, 6);
        let p = AcceptableParams { l_left: 0.08, l_right: 0.12, sigma_left: 0.2, sigma_right: 0.1 };
        let e = acceptable_edges(&m, &p);
        let accepts = |side: Side, a: usize, b: usize, l: f64, s: f64| {
            m.rating(side, a) < s || benchmark(&m, side, a).unwrap() - m.utility(side, a, b) <= l
        };
        for i in 0..60 {
            for j in 0..60 {
                let want = accepts(Side::Left, i, j, 0.08, 0.2) && accepts(Side::Right, j, i, 0.12, 0.1);
                assert_eq!(e.contains(i, j), want);
            }
        }
    }

    #[test]
    fn levels_agree_with_acceptable_edges() {
        let m = market(80, 16);
        let levels = AcceptanceLevels::new(&m, 0.15, 0.05);
        for l in [0.0, 0.03, 0.1, 0.25] {
            let p = AcceptableParams { l_left: l, l_right: l, sigma_left: 0.15, sigma_right: 0.05 };
            let e = acceptable_edges(&m, &p);
            assert_eq!(e, EdgeSet::from_fn(80, 80, |i, j| levels.level(i, j) <= l));
        }
        let v = viable_edges(&m, &EdgeSet::complete(80, 80));
        let cover = levels.covering(&v);
        assert!(v.is_subset(&acceptable_edges(&m, &AcceptableParams { l_left: cover, l_right: cover, sigma_left: 0.15, sigma_right: 0.05 })));
    }

    #[test]
    fn viable_edges_subset_and_contain_stable_pairs() {
        for seed in 0..10 {
            let m = market(7, seed);
            let base = acceptable_edges(&m, &AcceptableParams::symmetric(0.3, 0.2));
            let v = viable_edges(&m, &base);
            assert!(v.is_subset(&base));
            for s in brute_force_stable_set(&m, &base).unwrap() {
                assert!(s.pairs().all(|(i, j)| v.contains(i, j)));
            }
        }
    }

    #[test]
    fn viable_edges_complete_when_nobody_matches() {
        let m = market(5, 1);
        let v = viable_edges(&m, &EdgeSet::empty(5, 5));
        assert!(v.is_empty());
        let full = EdgeSet::complete(5, 5);
        let v = viable_edges(&m, &full);
        let out = run_da(&m, Side::Left, &v);
        assert!(out.same_pairs(&run_da(&m, Side::Left, &full)));
    }

    #[test]
    fn viable_edges_preserve_stable_outcomes() {
        let m = market(300, 9);
        let full = EdgeSet::complete(300, 300);
        let v = viable_edges(&m, &full);
        assert!(run_da(&m, Side::Left, &v).same_pairs(&run_da(&m, Side::Left, &full)));
        assert!(run_da(&m, Side::Right, &v).same_pairs(&run_da(&m, Side::Right, &full)));
        assert_eq!(multi_stable_agents(&m, &v), multi_stable_agents(&m, &full));
    }

    #[test]
    fn interview_edge_definition() {
        let p = MarketParams::one_to_one(2, lin(0.5), 0);
        let m = Market::from_parts(
            &p,
            vec![0.5, 0.9],
            vec![0.55, 0.2],
            ScoreMatrix::from_vec(2, 2, vec![0.95, 0.99, 0.9, 0.99]).unwrap(),
            ScoreMatrix::from_vec(2, 2, vec![0.92, 0.99, 0.99, 0.99]).unwrap(),
        )
        .unwrap();
        let e = interview_edges(&m, &InterviewParams::symmetric(0.1, 0.9));
        assert_eq!(e.iter().collect::<Vec<_>>(), vec![(0, 0)]);
        // strict inequality on scores
        let e = interview_edges(&m, &InterviewParams { p: 0.1, q_left: 0.95, q_right: 0.5 });
        assert!(e.is_empty());
    }

    #[test]
    fn selected_params_mid_survival_and_ratio() {
        let p = SelectedSetParams::new(20.0, 20_000).unwrap();
        assert!((p.sigma - 0.05).abs() < 1e-12);
        assert!((p.survival(0.5, 0.5) - 4.0 * p.sigma * p.sigma).abs() < 1e-15);
        // n · 2σ · 4σ² = k
        assert!((20_000.0 * 2.0 * p.sigma * p.survival(0.5, 0.52) - 20.0).abs() < 1e-9);
        let r = p.max_ratio_on_grid(2000);
        assert!(r <= 3.0 + 1e-9, "ratio {r}");
        assert!(r > 2.5);
        assert_eq!(p.pxy(0.5, 0.5 + 2.5 * p.sigma), 0.0);
        assert_eq!(p.pxy(-0.01, 0.0), 0.0);
    }

    #[test]
    fn selected_params_end_agents_keep_k() {
        let p = SelectedSetParams::new(10.0, 10_000).unwrap();
        // expected interviews for an agent at rating x: n ∫ survival(x, y) over the cone
        let expected = |x: f64| {
            let steps = 20_000;
            let (lo, hi) = ((x - p.sigma).max(0.0), (x + p.sigma).min(1.0));
            let h = (hi - lo) / steps as f64;
            (0..steps).map(|i| p.survival(x, lo + (i as f64 + 0.5) * h) * h).sum::<f64>() * p.n as f64
        };
        for x in [0.0, 1.0, 0.5] {
            assert!((expected(x) - 10.0).abs() < 1e-3, "x={x}: {}", expected(x));
        }
    }

    #[test]
    fn selected_params_reject_bad_inputs() {
        assert!(SelectedSetParams::new(0.5, 100).is_err());
        assert!(SelectedSetParams::new(50.0, 100).is_err());
        assert!(SelectedSetParams::new(f64::NAN, 100).is_err());
    }

    #[test]
    fn selected_edges_in_cone_and_deterministic() {
        let m = market(400, 12);
        let p = SelectedSetParams::new(8.0, 400).unwrap();
        let e = selected_edges(&m, &p);
        assert!(e.iter().all(|(i, j)| p.in_cone(m.rating(Side::Left, i), m.rating(Side::Right, j))));
        assert_eq!(e, selected_edges(&m, &p));
    }

    #[test]
    fn truncation_t1_matches_l_bar() {
        let m = market(300, 13);
        let params = LossParams::from_l_bar(0.15, 1.0, m.model()).with_sigma_bar(0.0);
        for r in [0.0, 0.2, 0.9] {
            let l = truncation_threshold(m.model(), Side::Left, r, params.truncation_shift(), 1.0);
            assert!((l - 0.15).abs() < 1e-12);
        }
        let t1 = truncated_edges(&m, &params, 1.0, 1.0).unwrap();
        let plain = acceptable_edges(&m, &AcceptableParams::symmetric(0.15, 0.0));
        // same thresholds up to rounding in the comparison form
        let diff = t1.len().abs_diff(plain.len());
        assert!(diff <= 2, "{} vs {}", t1.len(), plain.len());
    }

    #[test]
    fn truncation_grows_with_t() {
        let m = market(200, 14);
        let params = LossParams::from_l_bar(0.1, 1.0, m.model());
        let a = truncated_edges(&m, &params, 1.0, 1.0).unwrap();
        let b = truncated_edges(&m, &params, 2.0, 1.0).unwrap();
        let c = truncated_edges(&m, &params, 2.0, 3.0).unwrap();
        assert!(a.is_subset(&b) && b.is_subset(&c));
        assert!(truncated_edges(&m, &params, 0.5, 1.0).is_err());
    }

    #[test]
    fn reservation_between_uniform_bounds() {
        let m = market(200, 15);
        let params = LossParams::from_l_bar(0.1, 1.0, m.model());
        let lo = truncated_edges(&m, &params, 1.0, 1.0).unwrap();
        let hi = truncated_edges(&m, &params, 4.0, 4.0).unwrap();
        let res = reservation_edges(&m, &params, 4.0, 4.0).unwrap();
        assert!(lo.is_subset(&res) && res.is_subset(&hi));
    }
}
