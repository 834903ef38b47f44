//! Random market instances.

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{ModelDescriptor, UtilityModel};
use crate::rng::{stream, StreamLabel};
use crate::Side;

/// Closed interval of public ratings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingRange {
    pub lo: f64,
    pub hi: f64,
}

impl RatingRange {
    pub const UNIT: RatingRange = RatingRange { lo: 0.0, hi: 1.0 };

    pub fn contains(&self, r: f64) -> bool {
        r >= self.lo && r <= self.hi
    }
}

/// How public rating ranges are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatingScale {
    /// Both sides on [0, 1].
    Unit,
    /// With `p ≥ n` agents on the long and short side: long side on
    /// [0, p/n], short side on [p/n − 1, p/n].
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    pub n_left: usize,
    pub n_right: usize,
    pub cap_left: usize,
    pub cap_right: usize,
    pub model: UtilityModel,
    pub seed: u64,
    pub scale: RatingScale,
}

impl MarketParams {
    /// One-to-one market with `n` agents per side.
    pub fn one_to_one(n: usize, model: UtilityModel, seed: u64) -> Self {
        Self::new(n, n, 1, 1, model, seed)
    }

    /// `n_workers` unit-capacity agents on the left, `n_workers / d`
    /// capacity-`d` companies on the right.
    pub fn many_to_one(n_workers: usize, d: usize, model: UtilityModel, seed: u64) -> Self {
        Self::new(n_workers, n_workers / d.max(1), 1, d, model, seed)
    }

    /// Unbalanced one-to-one markets default to the shifted rating scale;
    /// everything else (including many-to-one) defaults to [0, 1].
    pub fn new(
        n_left: usize,
        n_right: usize,
        cap_left: usize,
        cap_right: usize,
        model: UtilityModel,
        seed: u64,
    ) -> Self {
        let scale = if cap_left == 1 && cap_right == 1 && n_left != n_right {
            RatingScale::Shifted
        } else {
            RatingScale::Unit
        };
        MarketParams { n_left, n_right, cap_left, cap_right, model, seed, scale }
    }

    pub fn with_scale(mut self, scale: RatingScale) -> Self {
        self.scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_left == 0 || self.n_right == 0 {
            return Err(Error::InvalidMarket("both sides need at least one agent".into()));
        }
        if self.cap_left == 0 || self.cap_right == 0 {
            return Err(Error::InvalidMarket("capacities must be at least 1".into()));
        }
        if let UtilityModel::Linear { lambda } = self.model {
            if !(lambda > 0.0 && lambda < 1.0) {
                return Err(invalid("lambda", format!("{lambda} is outside (0, 1)")));
            }
        }
        Ok(())
    }

    pub fn ranges(&self) -> (RatingRange, RatingRange) {
        match self.scale {
            RatingScale::Unit => (RatingRange::UNIT, RatingRange::UNIT),
            RatingScale::Shifted => {
                let (p, n) = (self.n_left.max(self.n_right) as f64, self.n_left.min(self.n_right) as f64);
                let long = RatingRange { lo: 0.0, hi: p / n };
                let short = RatingRange { lo: p / n - 1.0, hi: p / n };
                if self.n_left >= self.n_right {
                    (long, short)
                } else {
                    (short, long)
                }
            }
        }
    }
}

/// Dense row-major matrix of private scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidMarket(format!(
                "score matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(ScoreMatrix { rows, cols, data })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// An immutable two-sided market.
///
/// `scores_left` is `n_left × n_right` (left agent's score for each right
/// agent); `scores_right` is `n_right × n_left`.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    n_left: usize,
    n_right: usize,
    cap_left: usize,
    cap_right: usize,
    model: UtilityModel,
    seed: u64,
    scale: RatingScale,
    range_left: RatingRange,
    range_right: RatingRange,
    ratings_left: Vec<f64>,
    ratings_right: Vec<f64>,
    scores_left: ScoreMatrix,
    scores_right: ScoreMatrix,
    order_left: Vec<usize>,
    order_right: Vec<usize>,
    rank_left: Vec<usize>,
    rank_right: Vec<usize>,
}

fn draw_uniform_vec(seed: u64, label: StreamLabel, index: u64, len: usize, range: RatingRange) -> Vec<f64> {
    let mut rng = stream(seed, label, index);
    let width = range.hi - range.lo;
    (0..len).map(|_| range.lo + width * rng.gen::<f64>()).collect()
}

/// Generates a market: ratings uniform on their ranges, scores uniform on
/// [0, 1], every row drawn from its own `(seed, side, agent)` stream.
pub fn generate_market(params: &MarketParams) -> Result<Market> {
    params.validate()?;
    let (range_left, range_right) = params.ranges();
    let seed = params.seed;
    let ratings_left = draw_uniform_vec(seed, StreamLabel::RatingsLeft, 0, params.n_left, range_left);
    let ratings_right = draw_uniform_vec(seed, StreamLabel::RatingsRight, 0, params.n_right, range_right);
    let scores = |label, rows: usize, cols: usize| {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            data.extend(draw_uniform_vec(seed, label, i as u64, cols, RatingRange::UNIT));
        }
        ScoreMatrix { rows, cols, data }
    };
    let scores_left = scores(StreamLabel::ScoresLeft, params.n_left, params.n_right);
    let scores_right = scores(StreamLabel::ScoresRight, params.n_right, params.n_left);
    Ok(Market::assemble(
        params,
        range_left,
        range_right,
        ratings_left,
        ratings_right,
        scores_left,
        scores_right,
    ))
}

/// Indices sorted by descending rating; ties go to the lower index.
pub fn rank_order(ratings: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..ratings.len()).collect();
    idx.sort_by(|&a, &b| ratings[b].total_cmp(&ratings[a]).then(a.cmp(&b)));
    idx
}

/// Rank (0-based) on the other side aligned with `rank` (0-based) on `side`.
///
/// In 1-based terms a left agent of rank `j` is aligned with right rank
/// `⌈cap_left·j / cap_right⌉` and a right agent of rank `i` with left rank
/// `⌈cap_right·i / cap_left⌉`; one-to-one is the identity. `None` when the
/// result falls beyond `other_size`.
pub fn aligned_rank(side: Side, rank: usize, cap_left: usize, cap_right: usize, other_size: usize) -> Option<usize> {
    let (own, other) = match side {
        Side::Left => (cap_left, cap_right),
        Side::Right => (cap_right, cap_left),
    };
    let one_based = (own * (rank + 1)).div_ceil(other);
    (one_based <= other_size).then(|| one_based - 1)
}

fn inverse(order: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; order.len()];
    for (rank, &agent) in order.iter().enumerate() {
        inv[agent] = rank;
    }
    inv
}

impl Market {
    fn assemble(
        params: &MarketParams,
        range_left: RatingRange,
        range_right: RatingRange,
        ratings_left: Vec<f64>,
        ratings_right: Vec<f64>,
        scores_left: ScoreMatrix,
        scores_right: ScoreMatrix,
    ) -> Market {
        let order_left = rank_order(&ratings_left);
        let order_right = rank_order(&ratings_right);
        Market {
            n_left: params.n_left,
            n_right: params.n_right,
            cap_left: params.cap_left,
            cap_right: params.cap_right,
            model: params.model,
            seed: params.seed,
            scale: params.scale,
            range_left,
            range_right,
            rank_left: inverse(&order_left),
            rank_right: inverse(&order_right),
            order_left,
            order_right,
            ratings_left,
            ratings_right,
            scores_left,
            scores_right,
        }
    }

    /// Builds a market from explicit values (hand-made instances, loading).
    pub fn from_parts(
        params: &MarketParams,
        ratings_left: Vec<f64>,
        ratings_right: Vec<f64>,
        scores_left: ScoreMatrix,
        scores_right: ScoreMatrix,
    ) -> Result<Market> {
        params.validate()?;
        let (range_left, range_right) = params.ranges();
        if ratings_left.len() != params.n_left || ratings_right.len() != params.n_right {
            return Err(Error::InvalidMarket("rating vector length does not match side size".into()));
        }
        if (scores_left.rows, scores_left.cols) != (params.n_left, params.n_right)
            || (scores_right.rows, scores_right.cols) != (params.n_right, params.n_left)
        {
            return Err(Error::InvalidMarket("score matrix shape does not match side sizes".into()));
        }
        if let Some(r) = ratings_left.iter().find(|r| !range_left.contains(**r)) {
            return Err(Error::InvalidMarket(format!("left rating {r} outside [{}, {}]", range_left.lo, range_left.hi)));
        }
        if let Some(r) = ratings_right.iter().find(|r| !range_right.contains(**r)) {
            return Err(Error::InvalidMarket(format!("right rating {r} outside [{}, {}]", range_right.lo, range_right.hi)));
        }
        let in_unit = |m: &ScoreMatrix| m.data.iter().all(|s| (0.0..=1.0).contains(s));
        if !in_unit(&scores_left) || !in_unit(&scores_right) {
            return Err(Error::InvalidMarket("scores must lie in [0, 1]".into()));
        }
        Ok(Market::assemble(
            params,
            range_left,
            range_right,
            ratings_left,
            ratings_right,
            scores_left,
            scores_right,
        ))
    }

    pub fn params(&self) -> MarketParams {
        MarketParams {
            n_left: self.n_left,
            n_right: self.n_right,
            cap_left: self.cap_left,
            cap_right: self.cap_right,
            model: self.model,
            seed: self.seed,
            scale: self.scale,
        }
    }

    pub fn size(&self, side: Side) -> usize {
        match side {
            Side::Left => self.n_left,
            Side::Right => self.n_right,
        }
    }

    pub fn cap(&self, side: Side) -> usize {
        match side {
            Side::Left => self.cap_left,
            Side::Right => self.cap_right,
        }
    }

    pub fn model(&self) -> &UtilityModel {
        &self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn range(&self, side: Side) -> RatingRange {
        match side {
            Side::Left => self.range_left,
            Side::Right => self.range_right,
        }
    }

    pub fn is_one_to_one(&self) -> bool {
        self.cap_left == 1 && self.cap_right == 1
    }

    /// Whether total capacities agree (`n_left·cap_left = n_right·cap_right`).
    /// Mismatches are allowed but worth reporting.
    pub fn capacity_balanced(&self) -> bool {
        self.n_left * self.cap_left == self.n_right * self.cap_right
    }

    pub fn ratings(&self, side: Side) -> &[f64] {
        match side {
            Side::Left => &self.ratings_left,
            Side::Right => &self.ratings_right,
        }
    }

    #[inline]
    pub fn rating(&self, side: Side, agent: usize) -> f64 {
        self.ratings(side)[agent]
    }

    /// Scores held by agents on `side` (rows) for the other side (columns).
    pub fn scores(&self, side: Side) -> &ScoreMatrix {
        match side {
            Side::Left => &self.scores_left,
            Side::Right => &self.scores_right,
        }
    }

    /// Agents of `side` in rank order (index 0 is the top-rated agent).
    pub fn order(&self, side: Side) -> &[usize] {
        match side {
            Side::Left => &self.order_left,
            Side::Right => &self.order_right,
        }
    }

    /// 0-based public rank of `agent`.
    #[inline]
    pub fn rank_of(&self, side: Side, agent: usize) -> usize {
        match side {
            Side::Left => self.rank_left[agent],
            Side::Right => self.rank_right[agent],
        }
    }

    /// Utility of `agent` on `side` for `partner` on the other side.
    #[inline]
    pub fn utility(&self, side: Side, agent: usize, partner: usize) -> f64 {
        match side {
            Side::Left => self.model.left_utility(self.ratings_right[partner], self.scores_left.get(agent, partner)),
            Side::Right => self.model.right_utility(self.ratings_left[partner], self.scores_right.get(agent, partner)),
        }
    }

    /// Strict preference of `agent` for partner `a` over `b`; exact utility
    /// ties go to the lower partner index.
    #[inline]
    pub fn prefers(&self, side: Side, agent: usize, a: usize, b: usize) -> bool {
        let (ua, ub) = (self.utility(side, agent, a), self.utility(side, agent, b));
        ua > ub || (ua == ub && a < b)
    }

    /// The agent on the other side aligned with `agent`, if any.
    pub fn aligned_partner(&self, side: Side, agent: usize) -> Option<usize> {
        let other = side.other();
        aligned_rank(side, self.rank_of(side, agent), self.cap_left, self.cap_right, self.size(other))
            .map(|rank| self.order(other)[rank])
    }

    // Serialization ---------------------------------------------------------

    const MAGIC: &'static str = "matchlab-market v1";

    /// Writes a self-describing dump: a magic line, a JSON header line, then
    /// little-endian `f64` payload (left ratings, right ratings, left scores
    /// row-major, right scores row-major). Round-trips bit-exactly.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let header = DumpHeader {
            n_left: self.n_left,
            n_right: self.n_right,
            cap_left: self.cap_left,
            cap_right: self.cap_right,
            model: self.model.to_descriptor(),
            seed: self.seed,
            scale: self.scale,
            range_left: self.range_left,
            range_right: self.range_right,
        };
        writeln!(out, "{}", Self::MAGIC)?;
        writeln!(out, "{}", serde_json::to_string(&header)?)?;
        let mut buf = Vec::with_capacity(8 * (self.n_left + self.n_right) * (1 + self.n_left.max(self.n_right)));
        for v in self
            .ratings_left
            .iter()
            .chain(&self.ratings_right)
            .chain(&self.scores_left.data)
            .chain(&self.scores_right.data)
        {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut input: R) -> Result<Market> {
        let mut line = String::new();
        input.read_line(&mut line)?;
        if line.trim_end() != Self::MAGIC {
            return Err(Error::Format("missing magic line".into()));
        }
        line.clear();
        input.read_line(&mut line)?;
        let h: DumpHeader = serde_json::from_str(line.trim_end())?;
        let model = h.model.resolve()?;
        let params = MarketParams {
            n_left: h.n_left,
            n_right: h.n_right,
            cap_left: h.cap_left,
            cap_right: h.cap_right,
            model,
            seed: h.seed,
            scale: h.scale,
        };
        params.validate()?;
        let mut read_vec = |len: usize| -> Result<Vec<f64>> {
            let mut bytes = vec![0u8; len * 8];
            input
                .read_exact(&mut bytes)
                .map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
            Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let ratings_left = read_vec(h.n_left)?;
        let ratings_right = read_vec(h.n_right)?;
        let scores_left = ScoreMatrix::from_vec(h.n_left, h.n_right, read_vec(h.n_left * h.n_right)?)?;
        let scores_right = ScoreMatrix::from_vec(h.n_right, h.n_left, read_vec(h.n_left * h.n_right)?)?;
        let mut market = Market::from_parts(&params, ratings_left, ratings_right, scores_left, scores_right)?;
        // keep the ranges that were recorded, in case the scale rule changes
        market.range_left = h.range_left;
        market.range_right = h.range_right;
        Ok(market)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DumpHeader {
    n_left: usize,
    n_right: usize,
    cap_left: usize,
    cap_right: usize,
    model: ModelDescriptor,
    seed: u64,
    scale: RatingScale,
    range_left: RatingRange,
    range_right: RatingRange,
}
