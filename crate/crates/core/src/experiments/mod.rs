//! Monte Carlo harness: seeded runs over generated markets, aggregated into
//! decile tables, histograms and scalar summaries.
//!
//! Every run draws its market from `derive_seed(config.seed, RunSeed, run)`,
//! runs are independent and may execute on a rayon pool, and aggregation
//! happens after all runs finish in run order, so a config and seed always
//! produce the same report bytes.

mod report;
mod suites;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{Audit, DecileTable, ExperimentReport, HistBin, Histogram, RunRecord};
pub use suites::{
    exp_edge_counts, exp_interview, exp_lower_bound, exp_loss_scaling, exp_min_l, exp_truncation,
    exp_unique_partners, run_experiment,
};

use crate::error::{invalid, Error, Result};
use crate::market::MarketParams;
use crate::model::UtilityModel;
use crate::rng::{derive_seed, StreamLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    #[serde(rename = "edge-counts")]
    EdgeCounts,
    #[serde(rename = "min-L")]
    MinL,
    #[serde(rename = "unique-partners")]
    UniquePartners,
    #[serde(rename = "interview")]
    Interview,
    #[serde(rename = "loss-scaling")]
    LossScaling,
    #[serde(rename = "lower-bound")]
    LowerBound,
    #[serde(rename = "truncation")]
    Truncation,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        ExperimentId::EdgeCounts,
        ExperimentId::MinL,
        ExperimentId::UniquePartners,
        ExperimentId::Interview,
        ExperimentId::LossScaling,
        ExperimentId::LowerBound,
        ExperimentId::Truncation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::EdgeCounts => "edge-counts",
            ExperimentId::MinL => "min-L",
            ExperimentId::UniquePartners => "unique-partners",
            ExperimentId::Interview => "interview",
            ExperimentId::LossScaling => "loss-scaling",
            ExperimentId::LowerBound => "lower-bound",
            ExperimentId::Truncation => "truncation",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid("experiment", format!("unknown id {s:?}")))
    }
}

/// Grid of loss thresholds scanned by the minimal-L search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { min: 0.01, max: 0.5, step: 0.01 }
    }
}

impl Grid {
    /// Grid points, rounded to the step's decimals so that 0.12 prints as 0.12.
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| round_to_step(self.min + i as f64 * self.step, self.step)).collect()
    }
}

fn round_to_step(x: f64, step: f64) -> f64 {
    let digits = (-step.log10()).ceil().max(0.0) as i32 + 2;
    let scale = 10f64.powi(digits);
    (x * scale).round() / scale
}

/// Everything an experiment reads. Fields an experiment does not use are
/// ignored by it but still echoed into its report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub runs: usize,
    pub seed: u64,
    /// Agents per side, or workers when `d` is set.
    pub n: usize,
    /// Company capacity; turns the market many-to-one with `n / d` companies.
    pub d: Option<usize>,
    pub model: String,
    pub lambda: f64,
    /// Acceptable-edge loss threshold for both sides.
    pub l: f64,
    /// Per-side overrides (left = women or workers, right = men or companies).
    pub l_left: Option<f64>,
    pub l_right: Option<f64>,
    /// Bottom-zone rating cutoff for acceptable edges; agents rated below it
    /// accept every edge.
    pub sigma: f64,
    /// Share of agents treated as the bottom of the market in summaries.
    pub bottom_fraction: f64,
    pub grid: Grid,
    pub p: f64,
    pub q: f64,
    pub q_right: Option<f64>,
    /// Market sizes for loss scaling.
    pub n_values: Vec<usize>,
    /// Size at which loss exceedance counts are swept over `h`.
    pub h_n: usize,
    pub h_max: u32,
    pub c: f64,
    /// Aligned-rating cutoff separating bottom agents in loss statistics.
    pub loss_cutoff: f64,
    /// Loss threshold for the lower-bound probe; defaults to `(1/8)(ln n/n)^{1/3}`.
    pub probe_l: Option<f64>,
    /// Overrides the theoretical `L̄` in truncation runs.
    pub l_bar: Option<f64>,
    pub nu: f64,
    pub eta: f64,
    /// Expected interviews per agent for the selected edge set.
    pub k: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            runs: 20,
            seed: 0,
            n: 2000,
            d: None,
            model: "linear".into(),
            lambda: 0.8,
            l: 0.12,
            l_left: None,
            l_right: None,
            sigma: 0.0,
            bottom_fraction: 0.2,
            grid: Grid::default(),
            p: 0.19,
            q: 0.60,
            q_right: None,
            n_values: vec![500, 4000],
            h_n: 2000,
            h_max: 4,
            c: 1.0,
            loss_cutoff: 0.2,
            probe_l: None,
            l_bar: None,
            nu: 0.5,
            eta: 2.0,
            k: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(invalid(name, format!("{v} outside [0, 1]")))
            }
        };
        if self.runs == 0 {
            return Err(invalid("runs", "must be at least 1"));
        }
        if self.n == 0 {
            return Err(invalid("n", "must be positive"));
        }
        if let Some(d) = self.d {
            if d == 0 || self.n % d != 0 {
                return Err(invalid("d", format!("{d} must be positive and divide n = {}", self.n)));
            }
        }
        self.utility_model()?;
        for (name, v) in [("l", Some(self.l)), ("l_left", self.l_left), ("l_right", self.l_right)] {
            if let Some(v) = v {
                unit(name, v)?;
            }
        }
        unit("sigma", self.sigma)?;
        unit("bottom_fraction", self.bottom_fraction)?;
        unit("p", self.p)?;
        unit("q", self.q)?;
        if let Some(q) = self.q_right {
            unit("q_right", q)?;
        }
        unit("loss_cutoff", self.loss_cutoff)?;
        if let Some(l) = self.probe_l {
            unit("probe_l", l)?;
        }
        let g = self.grid;
        if !(g.step > 0.0 && g.min >= 0.0 && g.min <= g.max && g.max <= 1.0) {
            return Err(invalid("grid", format!("need 0 ≤ min ≤ max ≤ 1 and step > 0, got {g:?}")));
        }
        if self.n_values.iter().any(|&n| n < 2) || self.h_n < 2 {
            return Err(invalid("n_values", "sizes must be at least 2"));
        }
        if !(self.c > 0.0) {
            return Err(invalid("c", "must be positive"));
        }
        if let Some(l) = self.l_bar {
            if !(l > 0.0) {
                return Err(invalid("l_bar", "must be positive"));
            }
        }
        if !(self.nu > 0.0 && self.eta > 0.0) {
            return Err(invalid("nu/eta", "must be positive"));
        }
        if let Some(k) = self.k {
            if !(k >= 1.0) {
                return Err(invalid("k", "must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn utility_model(&self) -> Result<UtilityModel> {
        UtilityModel::builtin(&self.model, self.lambda)
    }

    pub fn l_left(&self) -> f64 {
        self.l_left.unwrap_or(self.l)
    }

    pub fn l_right(&self) -> f64 {
        self.l_right.unwrap_or(self.l)
    }

    /// Market parameters for a run of size `n` with the given seed.
    pub fn market_params(&self, n: usize, seed: u64) -> Result<MarketParams> {
        let model = self.utility_model()?;
        Ok(match self.d {
            Some(d) => MarketParams::many_to_one(n, d, model, seed),
            None => MarketParams::one_to_one(n, model, seed),
        })
    }

    /// Per-run market seeds, distinct and fixed by `seed`.
    pub fn run_seeds(&self) -> Vec<u64> {
        (0..self.runs as u64).map(|i| derive_seed(self.seed, StreamLabel::RunSeed, i)).collect()
    }
}

/// Runs `f(run, seed)` for every run, in parallel on the current rayon
/// pool, returning results in run order.
pub(crate) fn per_run<T: Send>(seeds: &[u64], f: impl Fn(usize, u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    seeds.par_iter().enumerate().map(|(run, &seed)| f(run, seed)).collect()
}
