//! Two-sided matching markets with public ratings and private scores.
//!
//! Agents on each side have a public rating; every agent also draws a
//! private score for every potential partner. Utility is increasing in both.
//! The crate generates such markets, runs deferred acceptance on restricted
//! edge sets, measures losses against rank-aligned benchmarks, and drives
//! Monte Carlo experiments over many seeded markets.

pub mod analysis;
pub mod experiments;
pub mod da;
pub mod edges;
pub mod error;
pub mod market;
pub mod matching;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod stats;

use serde::{Deserialize, Serialize};

pub use edges::EdgeSet;
pub use error::{Error, Result};
pub use market::{generate_market, Market, MarketParams};
pub use matching::Matching;
pub use model::UtilityModel;

/// Side of the market. Left agents are women in one-to-one markets and
/// workers in many-to-one markets; right agents are men or companies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}
