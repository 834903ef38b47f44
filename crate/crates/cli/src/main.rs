//! `matchlab`: generate markets, run deferred acceptance, export edge sets
//! and run the Monte Carlo experiments.

mod args;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use serde_json::json;

use matchlab::analysis::{
    acceptable_edges, interview_edges, loss_report, selected_edges, theoretical_l, truncated_edges, viable_edges,
    InterviewParams, LossParams, SelectedSetParams,
};
use matchlab::da::{multi_stable_agents, run_da, verify_stability};
use matchlab::experiments::{run_experiment, ExperimentConfig};
use matchlab::{generate_market, EdgeSet, Market, Side};

use args::{Cli, Command, EdgeArgs, EdgeKind, ExperimentArgs, Format, MarketArgs, RunArgs};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .context("building the worker pool")
        .and_then(|pool| pool.install(|| dispatch(cli.command)));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("audit failed: blocking pairs found");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Returns whether every audit passed.
fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Generate { market, out } => cmd_generate(&market, &out).map(|_| true),
        Command::Run(args) => cmd_run(&args),
        Command::Edges { market, edges, out, format } => cmd_edges(&market, &edges, &out, format).map(|_| true),
        Command::Experiment(args) => cmd_experiment(&args),
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let seed = rand::random::<u64>();
        eprintln!("no seed given; using {seed}");
        seed
    })
}

fn build_market(args: &MarketArgs) -> Result<Market> {
    if let Some(path) = &args.market {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        return Market::read_from(BufReader::new(file)).with_context(|| format!("reading {}", path.display()));
    }
    let params = args.params(resolve_seed(args.seed))?;
    Ok(generate_market(&params)?)
}

fn market_meta(market: &Market) -> serde_json::Value {
    let p = market.params();
    json!({
        "seed": p.seed,
        "n_left": p.n_left,
        "n_right": p.n_right,
        "cap_left": p.cap_left,
        "cap_right": p.cap_right,
        "model": market.model().id(),
        "lambda": market.model().lambda(),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn cmd_generate(args: &MarketArgs, out: &Path) -> Result<()> {
    if args.market.is_some() {
        bail!("generate takes market parameters, not --market");
    }
    let market = build_market(args)?;
    let mut w = create(out)?;
    market.write_to(&mut w)?;
    w.flush()?;
    println!("{}", json!({ "market": market_meta(&market), "out": out }));
    Ok(())
}

fn build_edges(market: &Market, args: &EdgeArgs) -> Result<EdgeSet> {
    let n = market.size(Side::Left);
    let full = || EdgeSet::complete(n, market.size(Side::Right));
    Ok(match args.edges {
        EdgeKind::Full => full(),
        EdgeKind::Acceptable => acceptable_edges(market, &args.acceptable()),
        EdgeKind::Viable => viable_edges(market, &full()),
        EdgeKind::Interview => interview_edges(
            market,
            &InterviewParams { p: args.p, q_left: args.q, q_right: args.q_right.unwrap_or(args.q) },
        ),
        EdgeKind::Selected => selected_edges(market, &SelectedSetParams::new(args.k, n)?),
        EdgeKind::Truncated => truncated_edges(market, &loss_params(market, args)?, args.t_left, args.t_right)?,
    })
}

fn loss_params(market: &Market, args: &EdgeArgs) -> Result<LossParams> {
    let n = market.size(Side::Left).min(market.size(Side::Right)).max(2);
    let theory = theoretical_l(n, args.c, market.model())?;
    Ok(match args.l_bar {
        Some(l) => LossParams::from_l_bar(l, args.c, market.model()),
        None => theory,
    })
}

fn cmd_edges(market_args: &MarketArgs, args: &EdgeArgs, out: &Path, format: Format) -> Result<()> {
    let market = build_market(market_args)?;
    let edges = build_edges(&market, args)?;
    let mut w = create(out)?;
    match format {
        Format::Csv => edges.write_csv(&mut w)?,
        Format::Json => serde_json::to_writer_pretty(
            &mut w,
            &json!({ "market": market_meta(&market), "edges": args, "summary": edges.summary(&market) }),
        )?,
    }
    w.flush()?;
    println!("{}", json!({ "edge_count": edges.len(), "out": out }));
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<bool> {
    let market = build_market(&args.market)?;
    let edges = build_edges(&market, &args.edges)?;
    let side = args.propose_side.side();
    let matching = run_da(&market, side, &edges);
    let blocking = verify_stability(&market, &edges, &matching);
    let params = loss_params(&market, &args.edges)?;
    let params = match args.sigma_bar {
        Some(s) => params.with_sigma_bar(s),
        None => params,
    };
    let losses = loss_report(&market, &matching, &params);
    let multi = market.is_one_to_one().then(|| multi_stable_agents(&market, &edges));
    let summary = json!({
        "market": market_meta(&market),
        "edges": args.edges,
        "edge_count": edges.len(),
        "proposing_side": side,
        "matched_pairs": matching.size(),
        "unmatched_left": matching.unmatched(Side::Left).len(),
        "unmatched_right": matching.unmatched(Side::Right).len(),
        "blocking_pairs": blocking.len(),
        "multi_stable_left": multi.as_ref().map(|m| m.left.len()),
        "multi_stable_right": multi.as_ref().map(|m| m.right.len()),
        "loss_params": params,
    });
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    match args.format {
        Format::Csv => {
            let mut w = create(&args.out.join("matching.csv"))?;
            matching.write_csv(&market, &mut w)?;
            w.flush()?;
            let mut w = create(&args.out.join("losses.csv"))?;
            losses.write_csv(&mut w)?;
            w.flush()?;
            write_json(&args.out.join("summary.json"), &summary)?;
        }
        Format::Json => write_json(
            &args.out.join("run.json"),
            &json!({ "summary": summary, "matching": matching, "losses": losses }),
        )?,
    }
    println!("{summary}");
    println!("audit: {} blocking pairs", blocking.len());
    Ok(blocking.is_empty())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Config file contents and whether the file pins a seed.
fn load_config(path: Option<&PathBuf>) -> Result<(ExperimentConfig, bool)> {
    let Some(path) = path else { return Ok((ExperimentConfig::default(), false)) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
    let has_seed = table.contains_key("seed");
    let config = table.try_into().with_context(|| format!("parsing {}", path.display()))?;
    Ok((config, has_seed))
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<bool> {
    let (mut config, file_seed) = load_config(args.config.as_ref())?;
    args.apply(&mut config);
    if args.seed.is_none() && !file_seed {
        config.seed = resolve_seed(None);
    }
    config.validate()?;
    let report = run_experiment(args.id, &config)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let stem = args.id.as_str();
    let json_path = args.out.join(format!("{stem}.json"));
    let mut w = create(&json_path)?;
    report.write_json(&mut w)?;
    w.flush()?;
    if args.format == Format::Csv {
        let mut w = create(&args.out.join(format!("{stem}.runs.csv")))?;
        report.write_runs_csv(&mut w)?;
        w.flush()?;
        if !report.deciles.is_empty() {
            let mut w = create(&args.out.join(format!("{stem}.deciles.csv")))?;
            report.write_deciles_csv(&mut w)?;
            w.flush()?;
        }
        if !report.histograms.is_empty() {
            let mut w = create(&args.out.join(format!("{stem}.histograms.csv")))?;
            report.write_histograms_csv(&mut w)?;
            w.flush()?;
        }
    }
    println!("{}", json!({ "experiment": stem, "seed": config.seed, "summary": report.summary, "audit": report.audit }));
    Ok(report.audit.passed())
}
