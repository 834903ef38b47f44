use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;

use super::{ExperimentConfig, ExperimentId};
use crate::error::Result;
use crate::stats::{merge_deciles, DecileStat};
use crate::Side;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecileTable {
    pub name: String,
    pub side: Side,
    pub stats: Vec<DecileStat>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistBin {
    pub label: String,
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub name: String,
    pub bins: Vec<HistBin>,
}

impl Histogram {
    /// Equal-width bins over `[lo, hi)`; values outside are clamped into the
    /// end bins and NaN is skipped.
    pub fn uniform(name: &str, lo: f64, hi: f64, bins: usize, values: impl IntoIterator<Item = f64>) -> Self {
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        for v in values.into_iter().filter(|v| !v.is_nan()) {
            let b = ((v - lo) / width).floor().clamp(0.0, (bins - 1) as f64) as usize;
            counts[b] += 1;
        }
        Histogram {
            name: name.into(),
            bins: counts
                .into_iter()
                .enumerate()
                .map(|(i, count)| {
                    let lower = lo + i as f64 * width;
                    HistBin { label: format!("[{lower:.4},{:.4})", lower + width), lower, upper: lower + width, count }
                })
                .collect(),
        }
    }
}

/// Blocking-pair audit totals over every matching an experiment produced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Audit {
    pub matchings_checked: usize,
    pub blocking_pairs: usize,
}

impl Audit {
    pub fn record(&mut self, blocking_pairs: usize) {
        self.matchings_checked += 1;
        self.blocking_pairs += blocking_pairs;
    }

    pub fn merge(&mut self, other: Audit) {
        self.matchings_checked += other.matchings_checked;
        self.blocking_pairs += other.blocking_pairs;
    }

    pub fn passed(&self) -> bool {
        self.blocking_pairs == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub deciles: Vec<DecileTable>,
}

impl RunRecord {
    pub fn new(run: usize, seed: u64) -> Self {
        RunRecord { run, seed, metrics: BTreeMap::new(), deciles: Vec::new() }
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    pub(crate) fn set(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    pub(crate) fn table(&mut self, name: &str, side: Side, stats: Vec<DecileStat>) {
        self.deciles.push(DecileTable { name: name.into(), side, stats });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentId,
    pub config: ExperimentConfig,
    pub run_seeds: Vec<u64>,
    pub runs: Vec<RunRecord>,
    /// Per-decile statistics pooled over all runs.
    pub deciles: Vec<DecileTable>,
    pub histograms: Vec<Histogram>,
    pub summary: BTreeMap<String, f64>,
    pub audit: Audit,
}

impl ExperimentReport {
    pub(crate) fn new(experiment: ExperimentId, config: &ExperimentConfig, runs: Vec<RunRecord>) -> Self {
        let run_seeds = runs.iter().map(|r| r.seed).collect();
        let mut report = ExperimentReport {
            experiment,
            config: config.clone(),
            run_seeds,
            runs,
            deciles: Vec::new(),
            histograms: Vec::new(),
            summary: BTreeMap::new(),
            audit: Audit::default(),
        };
        report.pool_deciles();
        report
    }

    /// Pools same-named per-run decile tables, keeping first-seen order.
    fn pool_deciles(&mut self) {
        let mut order: Vec<(String, Side)> = Vec::new();
        let mut groups: BTreeMap<(String, Side), Vec<Vec<DecileStat>>> = BTreeMap::new();
        for t in self.runs.iter().flat_map(|r| &r.deciles) {
            let key = (t.name.clone(), t.side);
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            groups.entry(key).or_default().push(t.stats.clone());
        }
        self.deciles = order
            .into_iter()
            .map(|key| {
                let stats = merge_deciles(&groups[&key]);
                DecileTable { name: key.0, side: key.1, stats }
            })
            .collect();
    }

    pub fn summary_value(&self, key: &str) -> Option<f64> {
        self.summary.get(key).copied()
    }

    pub fn table(&self, name: &str) -> Option<&DecileTable> {
        self.deciles.iter().find(|t| t.name == name)
    }

    pub(crate) fn set(&mut self, key: &str, value: f64) {
        self.summary.insert(key.to_string(), value);
    }

    /// Run-level metric values in run order, skipping runs without it.
    pub fn metric_values(&self, key: &str) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.metric(key)).collect()
    }

    /// One row per (run, table, decile) plus pooled rows with run `all`.
    pub fn write_deciles_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "table,side,run,decile,count,mean,min,max")?;
        let mut row = |t: &DecileTable, run: &str| -> std::io::Result<()> {
            for s in &t.stats {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    t.name,
                    t.side.name(),
                    run,
                    s.decile,
                    s.count,
                    fmt_f64(s.mean),
                    fmt_f64(s.min),
                    fmt_f64(s.max)
                )?;
            }
            Ok(())
        };
        for r in &self.runs {
            for t in &r.deciles {
                row(t, &r.run.to_string())?;
            }
        }
        for t in &self.deciles {
            row(t, "all")?;
        }
        Ok(())
    }

    /// One row per run with a column per metric (union over runs).
    pub fn write_runs_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let keys: BTreeSet<&str> = self.runs.iter().flat_map(|r| r.metrics.keys().map(String::as_str)).collect();
        write!(out, "run,seed")?;
        for k in &keys {
            write!(out, ",{k}")?;
        }
        writeln!(out)?;
        for r in &self.runs {
            write!(out, "{},{}", r.run, r.seed)?;
            for k in &keys {
                match r.metrics.get(*k) {
                    Some(v) => write!(out, ",{}", fmt_f64(*v))?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn write_histograms_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "histogram,bin,lower,upper,count")?;
        for h in &self.histograms {
            for b in &h.bins {
                writeln!(out, "{},\"{}\",{},{},{}", h.name, b.label, fmt_f64(b.lower), fmt_f64(b.upper), b.count)?;
            }
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

/// Shortest round-trip decimal; NaN and infinities as empty-safe tokens.
pub(crate) fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_bins() {
        let h = Histogram::uniform("x", 0.0, 1.0, 4, [0.1, 0.3, 0.3, 0.99, 1.5, -2.0, f64::NAN]);
        let counts: Vec<u64> = h.bins.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![2, 2, 0, 2]);
    }

    #[test]
    fn audit_accumulates() {
        let mut a = Audit::default();
        a.record(0);
        a.record(0);
        assert!(a.passed());
        let mut b = Audit::default();
        b.record(3);
        a.merge(b);
        assert_eq!(a, Audit { matchings_checked: 3, blocking_pairs: 3 });
        assert!(!a.passed());
    }

    #[test]
    fn runs_csv_unions_columns() {
        let mut r0 = RunRecord::new(0, 11);
        r0.set("a", 1.5);
        let mut r1 = RunRecord::new(1, 12);
        r1.set("b", 2.0);
        let rep = ExperimentReport::new(ExperimentId::MinL, &ExperimentConfig::default(), vec![r0, r1]);
        let mut buf = Vec::new();
        rep.write_runs_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "run,seed,a,b\n0,11,1.5,\n1,12,,2\n");
    }
}
