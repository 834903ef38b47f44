use std::collections::BTreeSet;

use super::report::{Audit, ExperimentReport, Histogram, RunRecord};
use super::{per_run, ExperimentConfig, ExperimentId};
use crate::analysis::{
    acceptable_edges, benchmark, interview_edges, loss_report, lower_bound_l, selected_edges, theoretical_l,
    truncated_edges, truncation_threshold, viable_edges, AcceptableParams, AcceptanceLevels, InterviewParams, LossParams, SelectedSetParams,
};
use crate::da::{extreme_matchings, multi_stable_from, run_da, verify_stability};
use crate::edges::EdgeSet;
use crate::error::{invalid, Result};
use crate::market::generate_market;
use crate::oracle::max_bipartite_matching;
use crate::rng::{derive_seed, StreamLabel};
use crate::stats::{decile_of_rank, decile_stats, mean, median, log_log_slope};
use crate::{Market, Matching, Side};

/// Dispatches on the experiment id.
pub fn run_experiment(id: ExperimentId, config: &ExperimentConfig) -> Result<ExperimentReport> {
    match id {
        ExperimentId::EdgeCounts => exp_edge_counts(config),
        ExperimentId::MinL => exp_min_l(config),
        ExperimentId::UniquePartners => exp_unique_partners(config),
        ExperimentId::Interview => exp_interview(config),
        ExperimentId::LossScaling => exp_loss_scaling(config),
        ExperimentId::LowerBound => exp_lower_bound(config),
        ExperimentId::Truncation => exp_truncation(config),
    }
}

fn market_for(config: &ExperimentConfig, n: usize, seed: u64) -> Result<Market> {
    generate_market(&config.market_params(n, seed)?)
}

fn full_edges(market: &Market) -> EdgeSet {
    EdgeSet::complete(market.size(Side::Left), market.size(Side::Right))
}

/// Every agent on both sides filled to capacity.
fn everyone_matched(market: &Market, m: &Matching) -> bool {
    [Side::Left, Side::Right]
        .into_iter()
        .all(|side| (0..market.size(side)).all(|a| m.partners(side, a).len() == market.cap(side)))
}

/// Agents below capacity on `side`.
fn short_count(market: &Market, m: &Matching, side: Side) -> usize {
    (0..market.size(side)).filter(|&a| m.partners(side, a).len() < market.cap(side)).count()
}

fn audit(market: &Market, edges: &EdgeSet, m: &Matching) -> Audit {
    let mut a = Audit::default();
    a.record(verify_stability(market, edges, m).len());
    a
}

/// Agents whose public rank lies above the bottom `fraction` of the side.
fn is_top(market: &Market, side: Side, agent: usize, fraction: f64) -> bool {
    let n = market.size(side);
    let top = n - (fraction * n as f64).round() as usize;
    market.rank_of(side, agent) < top
}

fn top_mean(market: &Market, side: Side, values: &[f64], fraction: f64) -> f64 {
    let xs: Vec<f64> = values
        .iter()
        .enumerate()
        .filter(|&(a, v)| !v.is_nan() && is_top(market, side, a, fraction))
        .map(|(_, &v)| v)
        .collect();
    mean(&xs)
}

fn as_f64(xs: &[usize]) -> Vec<f64> {
    xs.iter().map(|&x| x as f64).collect()
}

fn finish(id: ExperimentId, config: &ExperimentConfig, runs: Vec<(RunRecord, Audit)>) -> ExperimentReport {
    let mut total = Audit::default();
    let records = runs
        .into_iter()
        .map(|(r, a)| {
            total.merge(a);
            r
        })
        .collect();
    let mut report = ExperimentReport::new(id, config, records);
    report.audit = total;
    report
}

fn summarize_mean(report: &mut ExperimentReport, keys: &[&str]) {
    for key in keys {
        let vals = report.metric_values(key);
        if !vals.is_empty() {
            report.set(key, mean(&vals));
        }
    }
}

fn acceptable_params(config: &ExperimentConfig) -> AcceptableParams {
    AcceptableParams {
        l_left: config.l_left(),
        l_right: config.l_right(),
        sigma_left: config.sigma,
        sigma_right: config.sigma,
    }
}

/// Acceptable-edge list lengths and proposals made in left-proposing DA on
/// the acceptable set, by decile of the proposers' public rank.
pub fn exp_edge_counts(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let params = acceptable_params(config);
    let runs = per_run(&config.run_seeds(), |run, seed| {
        let m = market_for(config, config.n, seed)?;
        let edges = acceptable_edges(&m, &params);
        let out = run_da(&m, Side::Left, &edges);
        let lists = as_f64(&edges.degrees(Side::Left));
        let proposals = as_f64(out.proposals(Side::Left));
        let right_lists = as_f64(&edges.degrees(Side::Right));
        let mut r = RunRecord::new(run, seed);
        r.set("edge_count", edges.len() as f64);
        r.set("top_mean_list_length", top_mean(&m, Side::Left, &lists, config.bottom_fraction));
        r.set("top_mean_proposals", top_mean(&m, Side::Left, &proposals, config.bottom_fraction));
        r.set("mean_list_length", mean(&lists));
        r.set("mean_proposals", mean(&proposals));
        r.set("right_mean_list_length", mean(&right_lists));
        r.set("all_matched", everyone_matched(&m, &out) as u8 as f64);
        r.set("unmatched_left", short_count(&m, &out, Side::Left) as f64);
        r.set("unmatched_right", short_count(&m, &out, Side::Right) as f64);
        r.table("list_length", Side::Left, decile_stats(&m, Side::Left, &lists));
        r.table("proposals", Side::Left, decile_stats(&m, Side::Left, &proposals));
        r.table("list_length", Side::Right, decile_stats(&m, Side::Right, &right_lists));
        Ok((r, audit(&m, &edges, &out)))
    })?;
    let mut report = finish(ExperimentId::EdgeCounts, config, runs);
    summarize_mean(
        &mut report,
        &[
            "edge_count",
            "top_mean_list_length",
            "top_mean_proposals",
            "mean_list_length",
            "mean_proposals",
            "right_mean_list_length",
            "all_matched",
            "unmatched_left",
            "unmatched_right",
        ],
    );
    Ok(report)
}

/// Smallest grid `L` at which left-proposing DA on the `(L, σ)`-acceptable
/// edges fills every agent in every run. The summary carries `min_l`, set to
/// the grid maximum with `min_l_found = 0` when no grid point works.
///
/// Whether DA matches everyone need not be monotone in `L`, so each run
/// checks grid points individually. Once the acceptable set contains every
/// viable edge, DA on it reproduces DA on the full edge set, so points at or
/// above that level take the full-set outcome without another run.
pub fn exp_min_l(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let grid = config.grid.points();
    let runs = per_run(&config.run_seeds(), |run, seed| {
        let m = market_for(config, config.n, seed)?;
        let full = full_edges(&m);
        let levels = AcceptanceLevels::new(&m, config.sigma, config.sigma);
        let cover = levels.covering(&viable_edges(&m, &full));
        let full_out = run_da(&m, Side::Left, &full);
        let mut a = audit(&m, &full, &full_out);
        let full_ok = everyone_matched(&m, &full_out);
        let mut r = RunRecord::new(run, seed);
        r.set("viable_cover_l", cover);
        let mut first = None;
        for &l in &grid {
            let ok = if l >= cover {
                full_ok
            } else {
                let edges = acceptable_edges(&m, &AcceptableParams::symmetric(l, config.sigma));
                let out = run_da(&m, Side::Left, &edges);
                a.merge(audit(&m, &edges, &out));
                everyone_matched(&m, &out)
            };
            r.set(&format!("all_matched@{l}"), ok as u8 as f64);
            if ok && first.is_none() {
                first = Some(l);
            }
        }
        r.set("first_all_matched_l", first.unwrap_or(f64::NAN));
        Ok((r, a))
    })?;
    let mut report = finish(ExperimentId::MinL, config, runs);
    let passing: Vec<u64> = grid
        .iter()
        .map(|l| report.metric_values(&format!("all_matched@{l}")).iter().filter(|&&v| v == 1.0).count() as u64)
        .collect();
    let found = grid.iter().zip(&passing).find(|(_, &p)| p == config.runs as u64).map(|(&l, _)| l);
    report.set("min_l", found.unwrap_or(config.grid.max));
    report.set("min_l_found", found.is_some() as u8 as f64);
    report.histograms.push(super::Histogram {
        name: "runs_all_matched".into(),
        bins: grid
            .iter()
            .zip(&passing)
            .map(|(&l, &count)| super::HistBin { label: format!("L={l}"), lower: l, upper: l, count })
            .collect(),
    });
    Ok(report)
}

/// Multi-stable agents from the two extreme stable matchings on the full
/// edge set, by decile.
pub fn exp_unique_partners(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if config.d.is_some() {
        return Err(invalid("d", "unique-partners needs a one-to-one market"));
    }
    let runs = per_run(&config.run_seeds(), |run, seed| {
        let m = market_for(config, config.n, seed)?;
        let full = full_edges(&m);
        let (left_opt, right_opt) = extreme_matchings(&m, &full);
        let mut a = audit(&m, &full, &left_opt);
        a.merge(audit(&m, &full, &right_opt));
        let multi = multi_stable_from(&left_opt, &right_opt);
        let mut r = RunRecord::new(run, seed);
        for (side, set) in [(Side::Left, &multi.left), (Side::Right, &multi.right)] {
            let n = m.size(side);
            let flags: Vec<f64> = (0..n).map(|x| set.contains(&x) as u8 as f64).collect();
            let bottom_decile = |x: usize| decile_of_rank(m.rank_of(side, x), n) == 9;
            let top_n = (0..n).filter(|&x| !bottom_decile(x)).count();
            let top_multi = set.iter().filter(|&&x| !bottom_decile(x)).count();
            let bottom_multi = set.len() - top_multi;
            r.set(&format!("{}_multi", side.name()), set.len() as f64);
            r.set(&format!("{}_top90_multi", side.name()), top_multi as f64);
            r.set(&format!("{}_bottom_decile_multi", side.name()), bottom_multi as f64);
            r.set(&format!("{}_top90_fraction", side.name()), top_multi as f64 / top_n.max(1) as f64);
            r.set(&format!("{}_bottom_decile_fraction", side.name()), bottom_multi as f64 / (n - top_n).max(1) as f64);
            r.table("multi_stable", side, decile_stats(&m, side, &flags));
        }
        Ok((r, a))
    })?;
    let mut report = finish(ExperimentId::UniquePartners, config, runs);
    for side in ["left", "right"] {
        let keys = ["multi", "top90_multi", "bottom_decile_multi", "top90_fraction", "bottom_decile_fraction"]
            .map(|k| format!("{side}_{k}"));
        summarize_mean(&mut report, &keys.iter().map(String::as_str).collect::<Vec<_>>());
    }
    Ok(report)
}

/// Worker-proposing DA on interview edges: unmatched workers by decile, and
/// each matched worker's utility shortfall against worker-optimal DA on the
/// full edge set.
pub fn exp_interview(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let params = InterviewParams { p: config.p, q_left: config.q, q_right: config.q_right.unwrap_or(config.q) };
    let runs = per_run(&config.run_seeds(), |run, seed| {
        let m = market_for(config, config.n, seed)?;
        let edges = interview_edges(&m, &params);
        let out = run_da(&m, Side::Left, &edges);
        let full = full_edges(&m);
        let best = run_da(&m, Side::Left, &full);
        let mut a = audit(&m, &edges, &out);
        a.merge(audit(&m, &full, &best));
        let n = m.size(Side::Left);
        let unmatched: Vec<f64> = (0..n).map(|w| (!out.is_matched(Side::Left, w)) as u8 as f64).collect();
        let diff: Vec<f64> = (0..n)
            .map(|w| match (best.worst_utility(&m, Side::Left, w), out.worst_utility(&m, Side::Left, w)) {
                (Some(b), Some(u)) => b - u,
                _ => f64::NAN,
            })
            .collect();
        let bottom_two = (0..n)
            .filter(|&w| unmatched[w] == 1.0 && decile_of_rank(m.rank_of(Side::Left, w), n) >= 8)
            .count();
        let total_unmatched = unmatched.iter().sum::<f64>();
        let mut r = RunRecord::new(run, seed);
        r.set("unmatched_workers", total_unmatched);
        r.set("unmatched_fraction", total_unmatched / n as f64);
        r.set("unmatched_bottom_two_deciles", bottom_two as f64);
        r.set("mean_edges_per_worker", edges.len() as f64 / n as f64);
        r.set("mean_edges_per_agent", 2.0 * edges.len() as f64 / (n + m.size(Side::Right)) as f64);
        r.set("mean_utility_shortfall", mean(&diff.iter().copied().filter(|v| !v.is_nan()).collect::<Vec<_>>()));
        r.set("empty_company_slots", (0..m.size(Side::Right)).map(|c| m.cap(Side::Right) - out.partners(Side::Right, c).len()).sum::<usize>() as f64);
        r.table("unmatched", Side::Left, decile_stats(&m, Side::Left, &unmatched));
        r.table("utility_shortfall", Side::Left, decile_stats(&m, Side::Left, &diff));
        Ok((r, a, diff))
    })?;
    let diffs: Vec<f64> = runs.iter().flat_map(|(_, _, d)| d.iter().copied()).collect();
    let mut report = finish(ExperimentId::Interview, config, runs.into_iter().map(|(r, a, _)| (r, a)).collect());
    summarize_mean(
        &mut report,
        &[
            "unmatched_workers",
            "unmatched_fraction",
            "mean_edges_per_worker",
            "mean_edges_per_agent",
            "mean_utility_shortfall",
            "empty_company_slots",
        ],
    );
    let total: f64 = report.metric_values("unmatched_workers").iter().sum();
    let bottom: f64 = report.metric_values("unmatched_bottom_two_deciles").iter().sum();
    report.set("bottom_two_decile_share", if total > 0.0 { bottom / total } else { f64::NAN });
    report.histograms.push(Histogram::uniform("utility_shortfall", -0.2, 0.4, 30, diffs));
    Ok(report)
}

/// Largest loss among non-bottom agents (aligned rating at least the
/// configured cutoff), over both sides and both extreme stable matchings,
/// for each market size; plus exceedance counts over `L̄/2^h` at `h_n`.
pub fn exp_loss_scaling(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if config.d.is_some() {
        return Err(invalid("d", "loss-scaling needs a one-to-one market"));
    }
    let model = config.utility_model()?;
    let sizes: BTreeSet<usize> = config.n_values.iter().copied().chain([config.h_n]).collect();
    let mut all_runs = Vec::new();
    let mut exceed_totals = vec![0u64; config.h_max as usize + 1];
    let mut report_rows = Vec::new();
    for (size_index, &n) in sizes.iter().enumerate() {
        let params = theoretical_l(n, config.c, &model)?.with_sigma_bar(config.loss_cutoff);
        let seeds: Vec<u64> =
            config.run_seeds().iter().map(|&s| derive_seed(s, StreamLabel::Auxiliary, size_index as u64)).collect();
        let runs = per_run(&seeds, |run, seed| {
            let m = market_for(config, n, seed)?;
            let full = full_edges(&m);
            let (left_opt, right_opt) = extreme_matchings(&m, &full);
            let mut a = audit(&m, &full, &left_opt);
            a.merge(audit(&m, &full, &right_opt));
            let mut r = RunRecord::new(run, seed);
            r.set("n", n as f64);
            let mut overall = f64::NEG_INFINITY;
            let mut losses_left_opt = Vec::new();
            for (tag, matching) in [("left_proposing", &left_opt), ("right_proposing", &right_opt)] {
                let rep = loss_report(&m, matching, &params);
                let worst = [Side::Left, Side::Right]
                    .into_iter()
                    .filter_map(|s| rep.max_loss(s, true))
                    .fold(f64::NEG_INFINITY, f64::max);
                overall = overall.max(worst);
                r.set(&format!("max_loss_{tag}"), worst);
                if tag == "left_proposing" {
                    losses_left_opt = [Side::Left, Side::Right].into_iter().flat_map(|s| rep.losses(s, true)).collect();
                    let all: Vec<f64> =
                        [Side::Left, Side::Right].into_iter().flat_map(|s| rep.losses(s, false)).collect();
                    r.set("median_loss", median(&all));
                }
            }
            r.set("max_loss", overall);
            let mut exceed = Vec::new();
            for h in 0..=config.h_max {
                let threshold = params.l_bar / 2f64.powi(h as i32);
                let count = losses_left_opt.iter().filter(|&&l| l > threshold).count();
                r.set(&format!("exceed_h{h}"), count as f64);
                exceed.push(count as u64);
            }
            Ok((r, a, exceed))
        })?;
        let max_losses: Vec<f64> = runs.iter().filter_map(|(r, _, _)| r.metric("max_loss")).collect();
        report_rows.push((n, median(&max_losses), params.l_bar));
        if n == config.h_n {
            for (_, _, ex) in &runs {
                for (t, c) in exceed_totals.iter_mut().zip(ex) {
                    *t += c;
                }
            }
        }
        all_runs.extend(runs.into_iter().map(|(mut r, a, _)| {
            r.run += size_index * config.runs;
            (r, a)
        }));
    }
    let mut report = finish(ExperimentId::LossScaling, config, all_runs);
    for &(n, med, l_bar) in &report_rows {
        report.set(&format!("median_max_loss@{n}"), med);
        report.set(&format!("l_bar@{n}"), l_bar);
    }
    let scaling: Vec<&(usize, f64, f64)> = report_rows.iter().filter(|(n, _, _)| config.n_values.contains(n)).collect();
    if scaling.len() >= 2 {
        let (first, last) = (scaling[0], scaling[scaling.len() - 1]);
        report.set("scaling_ratio", first.1 / last.1);
        let xs: Vec<f64> = scaling.iter().map(|r| r.0 as f64).collect();
        let ys: Vec<f64> = scaling.iter().map(|r| r.1).collect();
        report.set("scaling_exponent", log_log_slope(&xs, &ys));
    }
    let h_params = theoretical_l(config.h_n, config.c, &model)?;
    let nf = config.h_n as f64;
    let bins = exceed_totals
        .iter()
        .enumerate()
        .map(|(h, &count)| {
            let threshold = h_params.l_bar / 2f64.powi(h as i32);
            let bound = 2.0 * nf * (-(config.c + 2.0) * nf.ln() / 2f64.powi(3 * h as i32)).exp();
            report.set(&format!("exceed_bound_h{h}"), bound);
            report.set(&format!("exceed_mean_h{h}"), count as f64 / config.runs as f64);
            super::HistBin { label: format!("h={h}"), lower: threshold, upper: h_params.l_bar, count }
        })
        .collect::<Vec<_>>();
    // thresholds shrink as h grows, so counts can only grow
    let monotone = exceed_totals.windows(2).all(|w| w[0] <= w[1]);
    report.set("exceedance_nondecreasing_in_h", monotone as u8 as f64);
    report.histograms.push(super::Histogram { name: "loss_exceedance".into(), bins });
    Ok(report)
}

/// Whether the `(L, 3L/2)`-acceptable edges admit a perfect matching, with
/// `L = (1/8)(ln n/n)^{1/3}` unless overridden.
pub fn exp_lower_bound(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if config.d.is_some() {
        return Err(invalid("d", "lower-bound needs a one-to-one market"));
    }
    let l = config.probe_l.unwrap_or_else(|| lower_bound_l(config.n));
    let params = AcceptableParams::symmetric(l, 1.5 * l);
    let runs = per_run(&config.run_seeds(), |run, seed| {
        let m = market_for(config, config.n, seed)?;
        let edges = acceptable_edges(&m, &params);
        let size = max_bipartite_matching(&edges);
        let mut r = RunRecord::new(run, seed);
        r.set("edge_count", edges.len() as f64);
        r.set("max_matching", size as f64);
        r.set("perfect", (size == config.n) as u8 as f64);
        Ok((r, Audit::default()))
    })?;
    let mut report = finish(ExperimentId::LowerBound, config, runs);
    let perfect = report.metric_values("perfect");
    report.set("probe_l", l);
    report.set("no_perfect_fraction", 1.0 - mean(&perfect));
    report.set("theorem_floor", 0.25 * (config.n as f64).powf(-0.125));
    summarize_mean(&mut report, &["edge_count", "max_matching"]);
    Ok(report)
}

/// Left-proposing DA on truncated edges with `t_left = shift/σ_w`,
/// `t_right = shift/σ_m`, `σ_m = ν n^{-1/3}`, `σ_w = η n^{-1/3}`, and
/// optionally the selected interview set for `k` expected interviews.
pub fn exp_truncation(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if config.d.is_some() {
        return Err(invalid("d", "truncation needs a one-to-one market"));
    }
    let model = config.utility_model()?;
    let n = config.n;
    let theory = theoretical_l(n, config.c, &model)?;
    let params = match config.l_bar {
        Some(l) => LossParams::from_l_bar(l, config.c, &model),
        None => theory,
    };
    let shift = params.truncation_shift();
    let scale = (n as f64).cbrt();
    let (sigma_m, sigma_w) = (config.nu / scale, config.eta / scale);
    let t_right = (shift / sigma_m).max(1.0);
    let t_left = (shift / sigma_w).max(1.0);
    let selected = config.k.map(|k| SelectedSetParams::new(k, n)).transpose()?;
    let runs = per_run(&config.run_seeds(), |run, seed| {
        let m = market_for(config, n, seed)?;
        let edges = truncated_edges(&m, &params, t_left, t_right)?;
        let out = run_da(&m, Side::Left, &edges);
        let mut a = audit(&m, &edges, &out);
        let mut r = RunRecord::new(run, seed);
        let matched = (0..n).filter(|&x| out.is_matched(Side::Left, x)).count();
        r.set("match_rate", matched as f64 / n as f64);
        r.set("edge_count", edges.len() as f64);
        let proposals = as_f64(out.proposals(Side::Left));
        let (mut low, mut high) = (Vec::new(), Vec::new());
        for w in 0..n {
            if m.rating(Side::Left, w) < config.bottom_fraction {
                low.push(proposals[w]);
            } else {
                high.push(proposals[w]);
            }
        }
        r.set("bottom_mean_proposals", mean(&low));
        r.set("non_bottom_mean_proposals", mean(&high));
        r.set("max_proposals", proposals.iter().copied().fold(0.0, f64::max));
        // realized losses against each agent's own truncation threshold
        for (side, t) in [(Side::Left, t_left), (Side::Right, t_right)] {
            let mut worst_excess = f64::NEG_INFINITY;
            for x in 0..n {
                let (Some(b), Some(u)) = (benchmark(&m, side, x), out.worst_utility(&m, side, x)) else { continue };
                let r_al = m.rating(side.other(), m.aligned_partner(side, x).expect("one-to-one"));
                let threshold = truncation_threshold(m.model(), side, r_al, shift, t);
                worst_excess = worst_excess.max(b - u - threshold);
            }
            r.set(&format!("{}_max_loss_over_threshold", side.name()), worst_excess);
        }
        r.table("proposals", Side::Left, decile_stats(&m, Side::Left, &proposals));
        if let Some(sel) = &selected {
            let sel_edges = selected_edges(&m, sel);
            let sel_out = run_da(&m, Side::Left, &sel_edges);
            a.merge(audit(&m, &sel_edges, &sel_out));
            for side in [Side::Left, Side::Right] {
                let degrees = as_f64(&sel_edges.degrees(side));
                let mid: Vec<f64> = (0..n)
                    .filter(|&x| (sel.sigma..=1.0 - sel.sigma).contains(&m.rating(side, x)))
                    .map(|x| degrees[x])
                    .collect();
                r.set(&format!("selected_mid_mean_{}", side.name()), mean(&mid));
                r.table("selected_interviews", side, decile_stats(&m, side, &degrees));
            }
            let sel_matched = (0..n).filter(|&x| sel_out.is_matched(Side::Left, x)).count();
            r.set("selected_match_rate", sel_matched as f64 / n as f64);
        }
        Ok((r, a))
    })?;
    let mut report = finish(ExperimentId::Truncation, config, runs);
    report.set("l_bar", params.l_bar);
    report.set("theoretical_l_bar", theory.l_bar);
    report.set("shift", shift);
    report.set("t_left", t_left);
    report.set("t_right", t_right);
    report.set("threshold_left_mid", truncation_threshold(&model, Side::Left, 0.5, shift, t_left));
    report.set("threshold_right_mid", truncation_threshold(&model, Side::Right, 0.5, shift, t_right));
    summarize_mean(
        &mut report,
        &[
            "match_rate",
            "edge_count",
            "bottom_mean_proposals",
            "non_bottom_mean_proposals",
            "max_proposals",
            "left_max_loss_over_threshold",
            "right_max_loss_over_threshold",
            "selected_mid_mean_left",
            "selected_mid_mean_right",
            "selected_match_rate",
        ],
    );
    if let Some(sel) = selected {
        report.set("selected_sigma", sel.sigma);
        report.set("selected_k", sel.k);
    }
    Ok(report)
}
