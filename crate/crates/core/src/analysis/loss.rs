use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::matching::Matching;
use crate::model::UtilityModel;
use crate::{Market, Side};

/// Loss-bound parameters for a market size and utility model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossParams {
    /// Failure-probability exponent.
    pub c: f64,
    /// Loss bound `L̄`.
    pub l_bar: f64,
    /// Bottom-zone threshold on the aligned partner's rating.
    pub sigma_bar: f64,
    /// Low-rating relaxation factor (≥ 1).
    pub t: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub rho: f64,
    pub mu: f64,
}

/// `L̄ = [128(c+2)μ³ ln n / (ρ² n)]^{1/3}` with `α = L̄/(4μ)`,
/// `β = γ = αρ` and `σ̄ = 3L̄/(4μ)`.
///
/// For the linear model with λ = ½ (μ = ½, ρ = 1) this is
/// `L̄ = (16(c+2) ln n / n)^{1/3}`, `α = β = γ = L̄/2` and `σ̄ = 3L̄/2`.
pub fn theoretical_l(n: usize, c: f64, model: &UtilityModel) -> Result<LossParams> {
    if n < 2 {
        return Err(invalid("n", "needs at least 2 agents"));
    }
    if !(c > 0.0) {
        return Err(invalid("c", format!("{c} must be positive")));
    }
    let b = model.derivative_bounds();
    let nf = n as f64;
    let l_bar = (128.0 * (c + 2.0) * b.mu.powi(3) * nf.ln() / (b.rho * b.rho * nf)).cbrt();
    Ok(LossParams::from_l_bar(l_bar, c, model))
}

/// `(1/8)(ln n / n)^{1/3}`: the loss level at which acceptable edges stop
/// supporting a perfect matching with noticeable probability.
pub fn lower_bound_l(n: usize) -> f64 {
    let nf = n as f64;
    (nf.ln() / nf).cbrt() / 8.0
}

impl LossParams {
    /// Derived parameters for a given `L̄`.
    pub fn from_l_bar(l_bar: f64, c: f64, model: &UtilityModel) -> Self {
        let b = model.derivative_bounds();
        let alpha = l_bar / (4.0 * b.mu);
        LossParams {
            c,
            l_bar,
            sigma_bar: 3.0 * l_bar / (4.0 * b.mu),
            t: 1.0,
            alpha,
            beta: alpha * b.rho,
            gamma: alpha * b.rho,
            rho: b.rho,
            mu: b.mu,
        }
    }

    pub fn with_sigma_bar(mut self, sigma_bar: f64) -> Self {
        self.sigma_bar = sigma_bar;
        self
    }

    /// Rating shift `L̄/μ` (= 4α) used by truncation thresholds, so that
    /// `t = 1` gives a threshold of `L̄` in the linear model.
    pub fn truncation_shift(&self) -> f64 {
        self.l_bar / self.mu
    }
}

/// `U(r_aligned, 1)` for `agent` on `side`; `None` when no aligned partner
/// exists (overflow ranks in unbalanced markets).
pub fn benchmark(market: &Market, side: Side, agent: usize) -> Option<f64> {
    let aligned = market.aligned_partner(side, agent)?;
    Some(market.model().utility(side, market.rating(side.other(), aligned), 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum LossValue {
    /// Benchmark minus achieved utility; negative values are gains.
    Loss(f64),
    Unmatched,
    NoBenchmark,
}

impl LossValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            LossValue::Loss(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentLoss {
    pub agent: usize,
    pub rank: usize,
    pub benchmark: Option<f64>,
    /// Utility from the least preferred partner held.
    pub achieved: Option<f64>,
    pub loss: LossValue,
    pub aligned_rating: Option<f64>,
    /// Aligned partner's rating below `σ̄`, or no aligned partner.
    pub bottom: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub sigma_bar: f64,
    pub left: Vec<AgentLoss>,
    pub right: Vec<AgentLoss>,
}

impl LossReport {
    pub fn side(&self, side: Side) -> &[AgentLoss] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    /// Numeric losses on `side`, optionally only for non-bottom agents.
    pub fn losses(&self, side: Side, non_bottom_only: bool) -> Vec<f64> {
        self.side(side)
            .iter()
            .filter(|a| !(non_bottom_only && a.bottom))
            .filter_map(|a| a.loss.value())
            .collect()
    }

    pub fn max_loss(&self, side: Side, non_bottom_only: bool) -> Option<f64> {
        self.losses(side, non_bottom_only).into_iter().reduce(f64::max)
    }

    pub fn unmatched_count(&self, side: Side) -> usize {
        self.side(side).iter().filter(|a| a.loss == LossValue::Unmatched).count()
    }

    /// CSV with one row per agent. `loss` holds the magnitude and `sign` says
    /// whether it is a loss or a gain; both are empty for unmatched agents and
    /// agents without a benchmark, whose `status` says which.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "side,agent_index,public_rank,benchmark,achieved,loss,sign,status,aligned_rating,bottom")?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for side in [Side::Left, Side::Right] {
            for a in self.side(side) {
                let (magnitude, sign, status) = match a.loss {
                    LossValue::Loss(v) if v < 0.0 => ((-v).to_string(), "gain", "matched"),
                    LossValue::Loss(v) => (v.to_string(), "loss", "matched"),
                    LossValue::Unmatched => (String::new(), "", "unmatched"),
                    LossValue::NoBenchmark => (String::new(), "", "no-benchmark"),
                };
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    side.name(),
                    a.agent,
                    a.rank + 1,
                    opt(a.benchmark),
                    opt(a.achieved),
                    magnitude,
                    sign,
                    status,
                    opt(a.aligned_rating),
                    a.bottom
                )?;
            }
        }
        Ok(())
    }
}

/// Per-agent losses of `matching` against the rank-aligned benchmarks.
pub fn loss_report(market: &Market, matching: &Matching, params: &LossParams) -> LossReport {
    let side_report = |side: Side| -> Vec<AgentLoss> {
        (0..market.size(side))
            .map(|agent| {
                let aligned_rating = market
                    .aligned_partner(side, agent)
                    .map(|p| market.rating(side.other(), p));
                let bench = benchmark(market, side, agent);
                let achieved = matching.worst_utility(market, side, agent);
                let loss = match (bench, achieved) {
                    (None, _) => LossValue::NoBenchmark,
                    (Some(_), None) => LossValue::Unmatched,
                    (Some(b), Some(u)) => LossValue::Loss(b - u),
                };
                AgentLoss {
                    agent,
                    rank: market.rank_of(side, agent),
                    benchmark: bench,
                    achieved,
                    loss,
                    aligned_rating,
                    bottom: aligned_rating.map_or(true, |r| r < params.sigma_bar),
                }
            })
            .collect()
    };
    LossReport { sigma_bar: params.sigma_bar, left: side_report(Side::Left), right: side_report(Side::Right) }
}

/// Rating interval `[r − 4α, r + 5α]` around the aligned partner's rating
/// `r`, which should contain every acceptable partner of a non-bottom agent.
pub fn cone_bounds(market: &Market, params: &LossParams, side: Side, agent: usize) -> Option<(f64, f64)> {
    let aligned = market.aligned_partner(side, agent)?;
    let r = market.rating(side.other(), aligned);
    Some((r - 4.0 * params.alpha, r + 5.0 * params.alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::da::run_da;
    use crate::edges::EdgeSet;
    use crate::market::{generate_market, MarketParams, ScoreMatrix};

    fn lin(l: f64) -> UtilityModel {
        UtilityModel::linear(l).unwrap()
    }

    #[test]
    fn half_lambda_closed_form() {
        // pick c so that 16(c+2) ln n / n = 0.001 exactly
        let n = 1_000_000usize;
        let c = 0.001 * n as f64 / (16.0 * (n as f64).ln()) - 2.0;
        let p = theoretical_l(n, c, &lin(0.5)).unwrap();
        assert!((p.l_bar - 0.1).abs() < 1e-12);
        assert!((p.sigma_bar - 0.15).abs() < 1e-12);
        assert!((p.alpha - 0.05).abs() < 1e-12);
        assert!((p.beta - p.alpha).abs() < 1e-15 && (p.gamma - p.alpha).abs() < 1e-15);
    }

    #[test]
    fn bounded_derivative_ratio() {
        let n = 2000;
        let half = theoretical_l(n, 1.0, &lin(0.5)).unwrap();
        let eight = theoretical_l(n, 1.0, &lin(0.8)).unwrap();
        let (mu, rho) = (0.8f64, 4.0f64);
        let expected = (128.0 * mu.powi(3) / (rho * rho) / 16.0).cbrt();
        assert!((eight.l_bar / half.l_bar - expected).abs() < 1e-12);
        assert!((eight.alpha - eight.l_bar / 3.2).abs() < 1e-12);
        assert!((eight.beta - 4.0 * eight.alpha).abs() < 1e-12);
        assert!((eight.sigma_bar - 3.0 * eight.l_bar / 3.2).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_value() {
        let n = 32000f64;
        assert!((lower_bound_l(32000) - 0.125 * (n.ln() / n).cbrt()).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        assert!(theoretical_l(1, 1.0, &lin(0.5)).is_err());
        assert!(theoretical_l(10, 0.0, &lin(0.5)).is_err());
    }

    fn two_by_two(scores_left: [f64; 4]) -> Market {
        let p = MarketParams::one_to_one(2, lin(0.5), 0);
        Market::from_parts(
            &p,
            vec![0.9, 0.4],
            vec![0.6, 0.2],
            ScoreMatrix::from_vec(2, 2, scores_left.to_vec()).unwrap(),
            ScoreMatrix::from_vec(2, 2, vec![0.5; 4]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn benchmark_formula() {
        let m = two_by_two([1.0, 0.3, 0.3, 0.8]);
        // left agent 0 is rank 1, aligned with right agent 0 (rating 0.6)
        assert!((benchmark(&m, Side::Left, 0).unwrap() - 0.8).abs() < 1e-12);
        // rank-1 agent's benchmark is λ r* + (1 − λ)
        let top = m.order(Side::Right)[0];
        assert!((benchmark(&m, Side::Right, top).unwrap() - (0.5 * 0.9 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn loss_of_exact_benchmark_and_shortfall() {
        let m = two_by_two([1.0, 0.3, 0.3, 0.8]);
        let params = LossParams::from_l_bar(0.1, 1.0, m.model());
        let matching = Matching::from_pairs(2, 2, [(0, 0), (1, 1)]);
        let r = loss_report(&m, &matching, &params);
        assert_eq!(r.left[0].loss, LossValue::Loss(0.0));
        // agent 1: benchmark U(0.2, 1) = 0.6, achieved 0.5·0.2 + 0.5·0.8 = 0.5
        assert!((r.left[1].loss.value().unwrap() - 0.1).abs() < 1e-12);
        let empty = loss_report(&m, &Matching::empty(2, 2), &params);
        assert_eq!(empty.unmatched_count(Side::Left), 2);
    }

    #[test]
    fn csv_marks_gains_and_unmatched() {
        let m = two_by_two([1.0, 0.3, 0.3, 0.8]);
        let params = LossParams::from_l_bar(0.1, 1.0, m.model());
        // left 1 matched to right 0: 0.5·0.6 + 0.5·0.3 = 0.45 against 0.6
        let r = loss_report(&m, &Matching::from_pairs(2, 2, [(1, 0)]), &params);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("left,0,1,0.8,,,,unmatched,0.6,false"));
        assert!(lines[2].contains(",loss,matched,"));
        // right 0 (rank 1) is aligned with left 0 (0.9) but holds left 1 (0.4)
        assert!(lines[3].starts_with("right,0,1,"));
        let neg = LossReport { sigma_bar: 0.0, left: vec![AgentLoss { loss: LossValue::Loss(-0.25), ..r.left[1].clone() }], right: vec![] };
        let mut buf = Vec::new();
        neg.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains(",0.25,gain,matched,"));
    }

    #[test]
    fn bottom_flags_follow_sigma_bar() {
        let m = two_by_two([1.0, 0.3, 0.3, 0.8]);
        let params = LossParams::from_l_bar(0.1, 1.0, m.model()).with_sigma_bar(0.5);
        let r = loss_report(&m, &Matching::empty(2, 2), &params);
        assert!(!r.left[0].bottom); // aligned rating 0.6
        assert!(r.left[1].bottom); // aligned rating 0.2
    }

    #[test]
    fn no_benchmark_beyond_short_side() {
        let m = generate_market(&MarketParams::new(5, 3, 1, 1, lin(0.5), 2)).unwrap();
        let params = LossParams::from_l_bar(0.2, 1.0, m.model());
        let r = loss_report(&m, &Matching::empty(5, 3), &params);
        let without: Vec<_> = r.left.iter().filter(|a| a.loss == LossValue::NoBenchmark).collect();
        assert_eq!(without.len(), 2);
        assert!(without.iter().all(|a| a.bottom && a.rank >= 3));
    }

    #[test]
    fn non_bottom_max_is_bounded_by_overall_max() {
        let m = generate_market(&MarketParams::one_to_one(500, lin(0.5), 21)).unwrap();
        let out = run_da(&m, Side::Left, &EdgeSet::complete(500, 500));
        let params = theoretical_l(500, 1.0, m.model()).unwrap().with_sigma_bar(0.2);
        let r = loss_report(&m, &out, &params);
        for side in [Side::Left, Side::Right] {
            assert!(r.max_loss(side, true).unwrap() <= r.max_loss(side, false).unwrap());
            assert_eq!(r.losses(side, false).len(), 500);
        }
    }

    #[test]
    fn benchmark_non_increasing_in_rank() {
        let m = generate_market(&MarketParams::one_to_one(300, lin(0.7), 8)).unwrap();
        for side in [Side::Left, Side::Right] {
            let b: Vec<f64> = m.order(side).iter().map(|&a| benchmark(&m, side, a).unwrap()).collect();
            assert!(b.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn many_to_one_benchmark_uses_capacity_alignment() {
        let m = generate_market(&MarketParams::many_to_one(2000, 8, lin(0.8), 3)).unwrap();
        let company = m.order(Side::Right)[2];
        let worker = m.order(Side::Left)[23];
        let expected = 0.8 * m.rating(Side::Left, worker) + 0.2;
        assert!((benchmark(&m, Side::Right, company).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn cone_interval() {
        let m = two_by_two([1.0, 0.3, 0.3, 0.8]);
        let zero = LossParams { alpha: 0.0, ..LossParams::from_l_bar(0.1, 1.0, m.model()) };
        assert_eq!(cone_bounds(&m, &zero, Side::Left, 0), Some((0.6, 0.6)));
        // λ = ½: [r − 2L̄, r + 5/2 L̄]
        let p = LossParams::from_l_bar(0.1, 1.0, m.model());
        let (lo, hi) = cone_bounds(&m, &p, Side::Left, 0).unwrap();
        assert!((lo - (0.6 - 0.2)).abs() < 1e-12 && (hi - (0.6 + 0.25)).abs() < 1e-12);
    }
}
