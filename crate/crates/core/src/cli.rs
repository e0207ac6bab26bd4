//! `pricelab` command line.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfigFile;
use crate::env::reward_histogram;
use crate::error::Result;
use crate::harness::{self, compare_totals, run_factorial, run_illustrative, Comparison, RunResult, TrackedEvent};
use crate::oracle::{benchmark_closed_form, benchmark_monte_carlo, expected_reward_table, optimal_discount_continuous, BenchmarkReport};
use crate::output::Artifacts;
use crate::rng::{substream, Stream};

#[derive(Debug, Parser)]
#[command(name = "pricelab", version, about = "Discount-pricing Q-learning laboratory")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run config; defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Number of seeds for `factorial` and `illustrate`.
    #[arg(long, global = true)]
    pub seeds: Option<usize>,

    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One training run: curve.csv, result.json, qtable.csv.
    Run,
    /// 2 state grids x 2 action grids x 2 update rules: factorial.csv.
    Factorial,
    /// Fixed-customer learning dynamics: trace_single.csv, trace_batch.csv, improvement.json.
    Illustrate,
    /// Ground truth: oracle.json, revenue_curves.csv.
    Oracle,
    /// Reward distribution sample: histogram.csv.
    Histogram {
        /// Number of sampled rewards (overrides histogram.samples).
        #[arg(long)]
        n: Option<u64>,
    },
}

/// Config file plus command-line overrides (flag > file > default).
pub fn load_config(common: &CommonArgs) -> Result<RunConfigFile> {
    let mut cfg = match &common.config {
        Some(path) => RunConfigFile::from_path(path)?,
        None => RunConfigFile::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(n) = common.seeds {
        cfg.seeds = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = load_config(&cli.common)?;
    let out = cli.common.out.as_path();
    let written = match cli.command {
        Command::Run => cmd_run(&cfg, out)?,
        Command::Factorial => cmd_factorial(&cfg, out, cli.common.quiet)?,
        Command::Illustrate => cmd_illustrate(&cfg, out)?,
        Command::Oracle => cmd_oracle(&cfg, out)?,
        Command::Histogram { n } => cmd_histogram(&cfg, n, out)?,
    };
    if !cli.common.quiet {
        for p in &written {
            println!("wrote {}", p.display());
        }
    }
    Ok(written)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| std::io::Error::other(e.to_string()).into())
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn money(x: f64) -> String {
    format!("{x:.6}")
}

#[derive(Serialize)]
struct RunReport<'a> {
    config: &'a RunConfigFile,
    result: &'a RunResult,
}

pub fn cmd_run(cfg: &RunConfigFile, out: &Path) -> Result<Vec<PathBuf>> {
    let run_cfg = cfg.run_config()?;
    let result = harness::run(&run_cfg)?;

    let curve = csv_bytes(
        &["iteration", "rolling_mean_reward"],
        result
            .curve
            .iter()
            .map(|p| vec![p.iteration.to_string(), money(p.rolling_mean_reward)]),
    )?;
    let mut qtable = Vec::new();
    result.q_table.write_csv(&run_cfg.env, &mut qtable)?;

    let mut art = Artifacts::new(out)?;
    art.add("curve.csv", &curve)?;
    art.add("result.json", &json_bytes(&RunReport { config: cfg, result: &result })?)?;
    art.add("qtable.csv", &qtable)?;
    art.commit()
}

pub fn cmd_factorial(cfg: &RunConfigFile, out: &Path, quiet: bool) -> Result<Vec<PathBuf>> {
    let base = cfg.run_config()?;
    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    let report = run_factorial(&base, &seeds)?;

    for cell in &report.cells {
        for (seed, err) in &cell.errors {
            eprintln!(
                "{}x{} {}: seed {seed} failed: {err}",
                cell.action_space_size,
                cell.state_space_size,
                cell.update_method.as_str()
            );
        }
    }
    if !quiet {
        for r in report.rows() {
            println!(
                "{:>3} actions {:>3} states {:<6} final {:>8.3}  total {:>12.1}",
                r.action_space_size, r.state_space_size, r.update_method, r.mean_final_reward, r.mean_total_reward
            );
        }
    }

    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let mut art = Artifacts::new(out)?;
    art.add("factorial.csv", &csv)?;
    art.commit()
}

fn trace_bytes(events: &[TrackedEvent], oracle: f64) -> Result<Vec<u8>> {
    csv_bytes(
        &["iteration", "q_value", "observed_reward", "oracle_expectation"],
        events.iter().map(|e| {
            vec![
                e.iteration.to_string(),
                money(e.q_value),
                money(e.observed_reward),
                money(oracle),
            ]
        }),
    )
}

#[derive(Serialize)]
struct ImprovementReport {
    seeds: Vec<u64>,
    beta: f64,
    tracked_discount: f64,
    oracle_expectation: f64,
    single_total_rewards: Vec<f64>,
    batch_total_rewards: Vec<f64>,
    comparison: Comparison,
}

pub fn cmd_illustrate(cfg: &RunConfigFile, out: &Path) -> Result<Vec<PathBuf>> {
    let setup = cfg.illustrative_setup();
    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    let mut singles = Vec::with_capacity(seeds.len());
    let mut batches = Vec::with_capacity(seeds.len());
    let mut first = None;
    for &seed in &seeds {
        let r = run_illustrative(seed, &setup)?;
        if first.is_none() {
            first = Some((
                r.single.tracked_trajectory.clone().unwrap_or_default(),
                r.batch.tracked_trajectory.clone().unwrap_or_default(),
            ));
        }
        singles.push(r.single);
        batches.push(r.batch);
    }
    let comparison = compare_totals(&singles, &batches)?;
    let oracle = setup.oracle_expectation()?;
    let (trace_single, trace_batch) = first.unwrap_or_default();

    let report = ImprovementReport {
        seeds,
        beta: setup.beta,
        tracked_discount: setup.tracked_discount,
        oracle_expectation: oracle,
        single_total_rewards: singles.iter().map(|r| r.total_reward).collect(),
        batch_total_rewards: batches.iter().map(|r| r.total_reward).collect(),
        comparison,
    };

    let mut art = Artifacts::new(out)?;
    art.add("trace_single.csv", &trace_bytes(&trace_single, oracle)?)?;
    art.add("trace_batch.csv", &trace_bytes(&trace_batch, oracle)?)?;
    art.add("improvement.json", &json_bytes(&report)?)?;
    art.commit()
}

#[derive(Serialize)]
struct OracleReport {
    continuous_optimal_discount: f64,
    closed_form: BenchmarkReport,
    monte_carlo: BenchmarkReport,
    mc_samples_per_cell: u64,
}

pub fn cmd_oracle(cfg: &RunConfigFile, out: &Path) -> Result<Vec<PathBuf>> {
    let env = cfg.env()?;
    let report = OracleReport {
        continuous_optimal_discount: optimal_discount_continuous(env.steepness())?,
        closed_form: benchmark_closed_form(&env),
        monte_carlo: benchmark_monte_carlo(&env, cfg.oracle.mc_samples, cfg.seed)?,
        mc_samples_per_cell: cfg.oracle.mc_samples,
    };
    let table = expected_reward_table(&env);
    let n_actions = env.n_actions();
    let curves = csv_bytes(
        &["beta_prob", "discount", "expected_reward"],
        table.iter().enumerate().map(|(i, &v)| {
            vec![
                env.state_grid()[i / n_actions].to_string(),
                env.action_grid()[i % n_actions].to_string(),
                money(v),
            ]
        }),
    )?;

    let mut art = Artifacts::new(out)?;
    art.add("oracle.json", &json_bytes(&report)?)?;
    art.add("revenue_curves.csv", &curves)?;
    art.commit()
}

pub fn cmd_histogram(cfg: &RunConfigFile, n: Option<u64>, out: &Path) -> Result<Vec<PathBuf>> {
    let env = cfg.env()?;
    let n = n.unwrap_or(cfg.histogram.samples);
    let state = env.state(cfg.histogram.state_index)?;
    let policy = cfg.histogram_policy(&env)?;
    let mut rng = substream(cfg.seed, Stream::Histogram);
    let bins = reward_histogram(&env, state, &policy, n, &mut rng)?;
    let bytes = csv_bytes(
        &["reward_value", "count"],
        bins.iter().map(|b| vec![money(b.reward), b.count.to_string()]),
    )?;
    let mut art = Artifacts::new(out)?;
    art.add("histogram.csv", &bytes)?;
    art.commit()
}
