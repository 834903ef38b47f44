use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use matchlab::analysis::AcceptableParams;
use matchlab::experiments::{ExperimentConfig, ExperimentId};
use matchlab::market::RatingScale;
use matchlab::{MarketParams, Side, UtilityModel};

#[derive(Debug, Parser)]
#[command(name = "matchlab", version, about = "Stable-matching market laboratory")]
pub struct Cli {
    /// Worker threads for experiment runs [≥ 1; default: all cores]
    #[arg(long, global = true, value_parser = count)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a market and write a round-trippable dump
    Generate {
        #[command(flatten)]
        market: MarketArgs,
        /// Output file
        #[arg(long, default_value = "market.mlm")]
        out: PathBuf,
    },
    /// Run deferred acceptance on a market and report matching, losses and audit
    Run(RunArgs),
    /// Build an edge set and export it
    Edges {
        #[command(flatten)]
        market: MarketArgs,
        #[command(flatten)]
        edges: EdgeArgs,
        /// Output file
        #[arg(long, default_value = "edges.csv")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run a named experiment suite
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProposeSide {
    Left,
    Right,
}

impl ProposeSide {
    pub fn side(self) -> Side {
        match self {
            ProposeSide::Left => Side::Left,
            ProposeSide::Right => Side::Right,
        }
    }
}

fn count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn size(s: &str) -> Result<usize, String> {
    match count(s)? {
        1 => Err("must be at least 2".into()),
        v => Ok(v),
    }
}

fn unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn open_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1)"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

fn at_least_one(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 1.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be at least 1"))
    }
}

#[derive(Debug, Clone, Args)]
pub struct MarketArgs {
    /// Load a market dump instead of generating one
    #[arg(long, conflicts_with_all = ["n", "nw", "nc", "n_right", "d"])]
    pub market: Option<PathBuf>,
    /// Agents per side in a one-to-one market [≥ 1]
    #[arg(long, value_parser = count)]
    pub n: Option<usize>,
    /// Right-side size for unbalanced one-to-one markets [≥ 1]
    #[arg(long = "n-right", value_parser = count)]
    pub n_right: Option<usize>,
    /// Workers in a many-to-one market [≥ 1]
    #[arg(long, value_parser = count)]
    pub nw: Option<usize>,
    /// Companies in a many-to-one market [≥ 1; default nw / d]
    #[arg(long, value_parser = count)]
    pub nc: Option<usize>,
    /// Company capacity [≥ 1]
    #[arg(long, value_parser = count)]
    pub d: Option<usize>,
    /// Utility model [linear | product]
    #[arg(long, default_value = "linear")]
    pub model: String,
    /// Weight on the partner's public rating in the linear model [(0, 1)]
    #[arg(long, default_value_t = 0.8, value_parser = open_unit)]
    pub lambda: f64,
    /// Put both sides of an unbalanced market on [0, 1]
    #[arg(long)]
    pub unit_scale: bool,
    /// Market seed [u64; env MATCHLAB_SEED; drawn at random and echoed if absent]
    #[arg(long, env = "MATCHLAB_SEED")]
    pub seed: Option<u64>,
}

impl MarketArgs {
    pub fn params(&self, seed: u64) -> Result<MarketParams> {
        let model = UtilityModel::builtin(&self.model, self.lambda)?;
        let params = match (self.n, self.nw) {
            (Some(_), Some(_)) => bail!("give either --n or --nw, not both"),
            (None, None) => bail!("give --n (one-to-one) or --nw with --d (many-to-one), or --market"),
            (Some(n), None) => {
                if self.d.is_some() || self.nc.is_some() {
                    bail!("--d and --nc go with --nw");
                }
                MarketParams::new(n, self.n_right.unwrap_or(n), 1, 1, model, seed)
            }
            (None, Some(nw)) => {
                let d = self.d.unwrap_or(1);
                let nc = self.nc.unwrap_or(nw / d);
                if nc * d != nw {
                    bail!("capacity mismatch: {nc} companies × capacity {d} ≠ {nw} workers");
                }
                if self.n_right.is_some() {
                    bail!("--n-right goes with --n");
                }
                MarketParams::new(nw, nc, 1, d, model, seed)
            }
        };
        let params = if self.unit_scale { params.with_scale(RatingScale::Unit) } else { params };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    Full,
    Acceptable,
    Viable,
    Interview,
    Selected,
    Truncated,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EdgeArgs {
    /// Edge set to use
    #[arg(long, value_enum, default_value_t = EdgeKind::Full)]
    pub edges: EdgeKind,
    /// Acceptable-edge loss threshold, both sides [0, 1]
    #[arg(long = "L", alias = "l", default_value_t = 0.12, value_parser = unit)]
    pub l: f64,
    /// Left-side (women / workers) loss threshold override [0, 1]
    #[arg(long = "L-left", alias = "L-w", value_parser = unit)]
    pub l_left: Option<f64>,
    /// Right-side (men / companies) loss threshold override [0, 1]
    #[arg(long = "L-right", alias = "L-c", value_parser = unit)]
    pub l_right: Option<f64>,
    /// Bottom-zone rating cutoff for acceptable edges [0, 1]
    #[arg(long, default_value_t = 0.0, value_parser = unit)]
    pub sigma: f64,
    /// Interview rating window half-width [0, 1]
    #[arg(long, default_value_t = 0.19, value_parser = unit)]
    pub p: f64,
    /// Interview private-score cutoff [0, 1]
    #[arg(long, default_value_t = 0.60, value_parser = unit)]
    pub q: f64,
    /// Right-side interview cutoff override [0, 1]
    #[arg(long = "q-right", value_parser = unit)]
    pub q_right: Option<f64>,
    /// Expected interviews per agent for the selected set [≥ 1]
    #[arg(long, default_value_t = 15.0, value_parser = at_least_one)]
    pub k: f64,
    /// Failure exponent in the theoretical loss bound [> 0]
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub c: f64,
    /// Override the theoretical loss bound L̄ [> 0]
    #[arg(long = "l-bar", value_parser = positive)]
    pub l_bar: Option<f64>,
    /// Left truncation factor [≥ 1]
    #[arg(long = "t-left", default_value_t = 1.0, value_parser = at_least_one)]
    pub t_left: f64,
    /// Right truncation factor [≥ 1]
    #[arg(long = "t-right", default_value_t = 1.0, value_parser = at_least_one)]
    pub t_right: f64,
}

impl EdgeArgs {
    pub fn acceptable(&self) -> AcceptableParams {
        AcceptableParams {
            l_left: self.l_left.unwrap_or(self.l),
            l_right: self.l_right.unwrap_or(self.l),
            sigma_left: self.sigma,
            sigma_right: self.sigma,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub market: MarketArgs,
    #[command(flatten)]
    pub edges: EdgeArgs,
    /// Proposing side
    #[arg(long = "propose-side", value_enum, default_value_t = ProposeSide::Left)]
    pub propose_side: ProposeSide,
    /// Aligned-rating cutoff for bottom flags in the loss report [0, 1; default theoretical]
    #[arg(long = "sigma-bar", value_parser = unit)]
    pub sigma_bar: Option<f64>,
    /// Output directory
    #[arg(long, default_value = "matchlab-run")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

fn parse_id(s: &str) -> Result<ExperimentId, String> {
    s.parse().map_err(|e: matchlab::Error| e.to_string())
}

/// Every flag overrides the config file, which overrides the defaults.
#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// edge-counts | min-L | unique-partners | interview | loss-scaling | lower-bound | truncation
    #[arg(value_parser = parse_id)]
    pub id: ExperimentId,
    /// TOML config file with experiment fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "matchlab-out")]
    pub out: PathBuf,
    /// csv writes run, decile and histogram tables next to the JSON report
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Base seed [u64; env MATCHLAB_SEED; drawn at random and echoed if absent]
    #[arg(long, env = "MATCHLAB_SEED")]
    pub seed: Option<u64>,
    /// Markets per configuration [≥ 1; default 20]
    #[arg(long, value_parser = count)]
    pub runs: Option<usize>,
    /// Agents per side, or workers with --d [≥ 1; default 2000]
    #[arg(long, alias = "nw", value_parser = count)]
    pub n: Option<usize>,
    /// Company capacity; makes the market many-to-one [≥ 1, divides n]
    #[arg(long, value_parser = count)]
    pub d: Option<usize>,
    /// Utility model [linear | product]
    #[arg(long)]
    pub model: Option<String>,
    /// Linear-model weight on public ratings [(0, 1); default 0.8]
    #[arg(long, value_parser = open_unit)]
    pub lambda: Option<f64>,
    /// Acceptable-edge loss threshold [0, 1; default 0.12]
    #[arg(long = "L", alias = "l", value_parser = unit)]
    pub l: Option<f64>,
    /// Left (women / workers) loss threshold [0, 1]
    #[arg(long = "L-left", alias = "L-w", value_parser = unit)]
    pub l_left: Option<f64>,
    /// Right (men / companies) loss threshold [0, 1]
    #[arg(long = "L-right", alias = "L-c", value_parser = unit)]
    pub l_right: Option<f64>,
    /// Bottom-zone rating cutoff for acceptable edges [0, 1; default 0]
    #[arg(long, value_parser = unit)]
    pub sigma: Option<f64>,
    /// Share of agents treated as the bottom in summaries [0, 1; default 0.2]
    #[arg(long = "bottom-fraction", value_parser = unit)]
    pub bottom_fraction: Option<f64>,
    /// Minimal-L grid start [0, 1; default 0.01]
    #[arg(long = "grid-min", value_parser = unit)]
    pub grid_min: Option<f64>,
    /// Minimal-L grid end [0, 1; default 0.5]
    #[arg(long = "grid-max", value_parser = unit)]
    pub grid_max: Option<f64>,
    /// Minimal-L grid step [> 0; default 0.01]
    #[arg(long = "grid-step", value_parser = positive)]
    pub grid_step: Option<f64>,
    /// Interview rating window [0, 1; default 0.19]
    #[arg(long, value_parser = unit)]
    pub p: Option<f64>,
    /// Interview score cutoff [0, 1; default 0.60]
    #[arg(long, value_parser = unit)]
    pub q: Option<f64>,
    /// Right-side interview score cutoff [0, 1; default q]
    #[arg(long = "q-right", value_parser = unit)]
    pub q_right: Option<f64>,
    /// Market sizes for loss scaling, comma-separated [each ≥ 2; default 500,4000]
    #[arg(long = "n-values", value_delimiter = ',', value_parser = size)]
    pub n_values: Option<Vec<usize>>,
    /// Size for the loss exceedance sweep [≥ 2; default 2000]
    #[arg(long = "h-n", value_parser = size)]
    pub h_n: Option<usize>,
    /// Largest h in the exceedance sweep over L̄/2^h [≥ 0; default 4]
    #[arg(long = "h-max")]
    pub h_max: Option<u32>,
    /// Failure exponent in the loss bound [> 0; default 1]
    #[arg(long, value_parser = positive)]
    pub c: Option<f64>,
    /// Aligned-rating cutoff for non-bottom loss statistics [0, 1; default 0.2]
    #[arg(long = "loss-cutoff", value_parser = unit)]
    pub loss_cutoff: Option<f64>,
    /// Lower-bound probe threshold [0, 1; default (1/8)(ln n/n)^(1/3)]
    #[arg(long = "probe-L", alias = "probe-l", value_parser = unit)]
    pub probe_l: Option<f64>,
    /// Truncation loss bound override [> 0; default theoretical]
    #[arg(long = "l-bar", value_parser = positive)]
    pub l_bar: Option<f64>,
    /// Right-side truncation constant, σ_m = ν n^(-1/3) [> 0; default 0.5]
    #[arg(long, value_parser = positive)]
    pub nu: Option<f64>,
    /// Left-side truncation constant, σ_w = η n^(-1/3) [> 0; default 2]
    #[arg(long, value_parser = positive)]
    pub eta: Option<f64>,
    /// Expected interviews for the selected edge set in truncation runs [≥ 1]
    #[arg(long, value_parser = at_least_one)]
    pub k: Option<f64>,
}

impl ExperimentArgs {
    pub fn apply(&self, c: &mut ExperimentConfig) {
        fn set<T: Clone>(target: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *target = v.clone();
            }
        }
        fn set_opt<T: Clone>(target: &mut Option<T>, v: &Option<T>) {
            if v.is_some() {
                *target = v.clone();
            }
        }
        set(&mut c.seed, &self.seed);
        set(&mut c.runs, &self.runs);
        set(&mut c.n, &self.n);
        set_opt(&mut c.d, &self.d);
        set(&mut c.model, &self.model);
        set(&mut c.lambda, &self.lambda);
        set(&mut c.l, &self.l);
        set_opt(&mut c.l_left, &self.l_left);
        set_opt(&mut c.l_right, &self.l_right);
        set(&mut c.sigma, &self.sigma);
        set(&mut c.bottom_fraction, &self.bottom_fraction);
        set(&mut c.grid.min, &self.grid_min);
        set(&mut c.grid.max, &self.grid_max);
        set(&mut c.grid.step, &self.grid_step);
        set(&mut c.p, &self.p);
        set(&mut c.q, &self.q);
        set_opt(&mut c.q_right, &self.q_right);
        set(&mut c.n_values, &self.n_values);
        set(&mut c.h_n, &self.h_n);
        set(&mut c.h_max, &self.h_max);
        set(&mut c.c, &self.c);
        set(&mut c.loss_cutoff, &self.loss_cutoff);
        set_opt(&mut c.probe_l, &self.probe_l);
        set_opt(&mut c.l_bar, &self.l_bar);
        set(&mut c.nu, &self.nu);
        set(&mut c.eta, &self.eta);
        set_opt(&mut c.k, &self.k);
    }
}
