//! Experiment runner.
//!
//! A run is a pure function of its [`RunConfig`]. Customer arrivals,
//! purchase coin flips and exploration each draw from their own substream
//! of the run seed, so a single-update and a batch-update agent given the
//! same seed face exactly the same customers and the same purchase draws.

use rayon::prelude::*;
use serde::Serialize;

use crate::env::{granular_actions, granular_states, sparse_actions, sparse_states, EnvConfig};
use crate::error::{invalid, Error, Result};
use crate::oracle::{benchmark_closed_form, benchmark_monte_carlo, expected_reward, policy_value};
use crate::qlearn::{greedy_policy, Agent, AgentConfig, QTable, UpdateMode};
use crate::rng::{substream, Stream};
use crate::stats::{mean, sign_test_p, std_dev, RollingMean};

pub const DEFAULT_ITERATIONS: usize = 100_000;
pub const DEFAULT_ROLLING_WINDOW: usize = 1000;
pub const DEFAULT_CONVERGENCE_FRACTION: f64 = 0.95;
/// Runs longer than this keep a strided learning curve.
pub const MAX_CURVE_POINTS: usize = 100_000;
/// Samples per cell for the Monte Carlo cross-check of granular factorial cells.
pub const FACTORIAL_MC_SAMPLES: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub iterations: usize,
    pub seed: u64,
    pub rolling_window: usize,
    pub convergence_fraction: f64,
    /// (state_index, action_index) whose Q trajectory is recorded.
    pub tracked_cell: Option<(usize, usize)>,
}

impl RunConfig {
    pub fn new(env: EnvConfig, agent: AgentConfig, seed: u64) -> Self {
        Self {
            env,
            agent,
            iterations: DEFAULT_ITERATIONS,
            seed,
            rolling_window: DEFAULT_ROLLING_WINDOW,
            convergence_fraction: DEFAULT_CONVERGENCE_FRACTION,
            tracked_cell: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        if self.rolling_window == 0 {
            return invalid("rolling_window must be >= 1");
        }
        if self.iterations < self.rolling_window {
            return invalid(format!(
                "iterations ({}) must be >= rolling_window ({})",
                self.iterations, self.rolling_window
            ));
        }
        if !(self.convergence_fraction > 0.0 && self.convergence_fraction <= 1.0) {
            return invalid(format!(
                "convergence_fraction {} outside (0, 1]",
                self.convergence_fraction
            ));
        }
        if let Some((s, a)) = self.tracked_cell {
            if s >= self.env.n_states() || a >= self.env.n_actions() {
                return invalid(format!("tracked cell ({s}, {a}) is outside the grids"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub rolling_mean_reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackedEvent {
    pub iteration: usize,
    /// Q value of the tracked cell right after this observation was learned from.
    pub q_value: f64,
    pub observed_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub seed: u64,
    pub update_mode: UpdateMode,
    pub iterations: usize,
    pub total_reward: f64,
    /// Rolling mean of realised rewards over the last window.
    pub final_reward: f64,
    /// Oracle value of the final greedy policy.
    pub greedy_eval_reward: f64,
    pub benchmark_mean: f64,
    pub convergence_iteration: Option<usize>,
    pub flushes: u64,
    #[serde(skip)]
    pub curve: Vec<CurvePoint>,
    #[serde(skip)]
    pub tracked_trajectory: Option<Vec<TrackedEvent>>,
    #[serde(skip)]
    pub q_table: QTable,
}

impl RunResult {
    /// Standard deviation of the tracked Q values recorded after `from_iteration`.
    pub fn tracked_std_after(&self, from_iteration: usize) -> Option<f64> {
        let traj = self.tracked_trajectory.as_ref()?;
        let qs: Vec<f64> = traj
            .iter()
            .filter(|e| e.iteration > from_iteration)
            .map(|e| e.q_value)
            .collect();
        (qs.len() >= 2).then(|| std_dev(&qs))
    }
}

/// Run from an all-zero Q-table.
pub fn run(config: &RunConfig) -> Result<RunResult> {
    let q = QTable::zeros(config.env.n_states(), config.env.n_actions());
    run_from(config, q)
}

/// Run starting from a given Q-table.
pub fn run_from(config: &RunConfig, initial: QTable) -> Result<RunResult> {
    config.validate()?;
    let env = &config.env;
    if initial.n_states() != env.n_states() || initial.n_actions() != env.n_actions() {
        return invalid("initial q-table shape does not match the environment");
    }
    let benchmark = benchmark_closed_form(env);
    let threshold = config.convergence_fraction * benchmark.mean_optimum;

    let mut customers = substream(config.seed, Stream::Customers);
    let mut purchases = substream(config.seed, Stream::Purchases);
    let mut exploration = substream(config.seed, Stream::Exploration);
    let mut agent = Agent::with_table(config.agent.clone(), initial)?;

    let window = config.rolling_window;
    let n_points = config.iterations - window + 1;
    let stride = n_points.div_ceil(MAX_CURVE_POINTS).max(1);
    let mut rolling = RollingMean::new(window);
    let mut curve = Vec::with_capacity(n_points.div_ceil(stride));
    let mut trajectory = config.tracked_cell.map(|_| Vec::new());
    let mut total_reward = 0.0;
    let mut final_reward = 0.0;
    let mut convergence_iteration = None;

    for t in 1..=config.iterations {
        let state = env.sample_customer(&mut customers);
        let action = agent.act(state.state_index, &mut exploration);
        let obs = env.step(state, action, &mut purchases)?;
        agent.observe(obs)?;
        total_reward += obs.reward;

        if let (Some((s, a)), Some(traj)) = (config.tracked_cell, trajectory.as_mut()) {
            if obs.state_index == s && obs.action_index == a {
                traj.push(TrackedEvent {
                    iteration: t,
                    q_value: agent.q().value(s, a),
                    observed_reward: obs.reward,
                });
            }
        }

        if let Some(m) = rolling.push(obs.reward) {
            if convergence_iteration.is_none() && m >= threshold {
                convergence_iteration = Some(t);
            }
            if (t - window).is_multiple_of(stride) {
                curve.push(CurvePoint {
                    iteration: t,
                    rolling_mean_reward: m,
                });
            }
            final_reward = m;
        }
    }
    agent.finish()?;

    let flushes = agent.flushes();
    let q_table = agent.into_q();
    let greedy_eval_reward = policy_value(env, &greedy_policy(&q_table))?;
    Ok(RunResult {
        seed: config.seed,
        update_mode: config.agent.update_mode,
        iterations: config.iterations,
        total_reward,
        final_reward,
        greedy_eval_reward,
        benchmark_mean: benchmark.mean_optimum,
        convergence_iteration,
        flushes,
        curve,
        tracked_trajectory: trajectory,
        q_table,
    })
}

/// First curve point whose rolling mean reaches `fraction * benchmark_mean`.
pub fn detect_convergence(curve: &[CurvePoint], benchmark_mean: f64, fraction: f64) -> Option<usize> {
    let threshold = fraction * benchmark_mean;
    curve
        .iter()
        .find(|p| p.rolling_mean_reward >= threshold)
        .map(|p| p.iteration)
}

/// Paired comparison of total rewards, `b` against `a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    /// Mean over pairs of `(b - a) / a`.
    pub mean_relative_improvement: f64,
    /// One-sided sign test for `b > a`; tied pairs are dropped.
    pub sign_test_p: f64,
    pub positive: u64,
    pub negative: u64,
    pub ties: u64,
    pub deltas: Vec<f64>,
}

pub fn compare_paired(a: &[f64], b: &[f64]) -> Result<Comparison> {
    if a.len() != b.len() {
        return invalid(format!("paired lists differ in length: {} vs {}", a.len(), b.len()));
    }
    if a.is_empty() {
        return invalid("nothing to compare");
    }
    let mut rel = Vec::with_capacity(a.len());
    let mut deltas = Vec::with_capacity(a.len());
    let (mut positive, mut negative, mut ties) = (0, 0, 0);
    for (&x, &y) in a.iter().zip(b) {
        let d = y - x;
        deltas.push(d);
        match d.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => positive += 1,
            Some(std::cmp::Ordering::Less) => negative += 1,
            _ => ties += 1,
        }
        rel.push(if d == 0.0 {
            0.0
        } else if x == 0.0 {
            return invalid("relative improvement over a zero total is undefined");
        } else {
            d / x
        });
    }
    Ok(Comparison {
        mean_relative_improvement: mean(&rel),
        sign_test_p: sign_test_p(positive, negative),
        positive,
        negative,
        ties,
        deltas,
    })
}

/// Compare total rewards of paired runs, `b` against `a`.
pub fn compare_totals(a: &[RunResult], b: &[RunResult]) -> Result<Comparison> {
    let ta: Vec<f64> = a.iter().map(|r| r.total_reward).collect();
    let tb: Vec<f64> = b.iter().map(|r| r.total_reward).collect();
    compare_paired(&ta, &tb)
}

// ---------------------------------------------------------------------------
// Factorial design

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSize {
    Sparse,
    Granular,
}

/// Compact per-seed outcome kept by the factorial runner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub total_reward: f64,
    pub final_reward: f64,
    pub greedy_eval_reward: f64,
    pub convergence_iteration: Option<usize>,
}

impl From<&RunResult> for RunSummary {
    fn from(r: &RunResult) -> Self {
        Self {
            seed: r.seed,
            total_reward: r.total_reward,
            final_reward: r.final_reward,
            greedy_eval_reward: r.greedy_eval_reward,
            convergence_iteration: r.convergence_iteration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorialCell {
    pub states: GridSize,
    pub actions: GridSize,
    pub update_method: UpdateMode,
    pub action_space_size: usize,
    pub state_space_size: usize,
    pub benchmark_mean: f64,
    /// Monte Carlo benchmark (granular cells only) and its largest cell SE.
    pub mc_benchmark: Option<(f64, f64)>,
    pub runs: Vec<RunSummary>,
    pub errors: Vec<(u64, String)>,
}

impl FactorialCell {
    fn column(&self, f: impl Fn(&RunSummary) -> f64) -> Vec<f64> {
        self.runs.iter().map(f).collect()
    }

    pub fn totals(&self) -> Vec<f64> {
        self.column(|r| r.total_reward)
    }

    pub fn finals(&self) -> Vec<f64> {
        self.column(|r| r.final_reward)
    }

    pub fn row(&self) -> FactorialRow {
        let finals = self.finals();
        let totals = self.totals();
        let conv: Vec<f64> = self
            .runs
            .iter()
            .filter_map(|r| r.convergence_iteration.map(|c| c as f64))
            .collect();
        FactorialRow {
            action_space_size: self.action_space_size,
            state_space_size: self.state_space_size,
            update_method: self.update_method.as_str().to_string(),
            mean_final_reward: mean(&finals),
            std_final_reward: std_dev(&finals),
            mean_total_reward: mean(&totals),
            std_total_reward: std_dev(&totals),
            mean_greedy_eval_reward: mean(&self.column(|r| r.greedy_eval_reward)),
            mean_convergence_iteration: (!conv.is_empty()).then(|| mean(&conv)),
            n_seeds: self.runs.len(),
        }
    }
}

/// One aggregated line of the factorial table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorialRow {
    pub action_space_size: usize,
    pub state_space_size: usize,
    pub update_method: String,
    pub mean_final_reward: f64,
    pub std_final_reward: f64,
    pub mean_total_reward: f64,
    pub std_total_reward: f64,
    pub mean_greedy_eval_reward: f64,
    /// Mean over the seeds that converged; `None` if none did.
    pub mean_convergence_iteration: Option<f64>,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorialReport {
    pub cells: Vec<FactorialCell>,
}

impl FactorialReport {
    pub fn rows(&self) -> Vec<FactorialRow> {
        self.cells.iter().map(FactorialCell::row).collect()
    }

    pub fn cell(&self, actions: GridSize, states: GridSize, mode: UpdateMode) -> Option<&FactorialCell> {
        self.cells
            .iter()
            .find(|c| c.actions == actions && c.states == states && c.update_method == mode)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "action_space_size",
            "state_space_size",
            "update_method",
            "mean_final_reward",
            "std_final_reward",
            "mean_total_reward",
            "std_total_reward",
            "mean_greedy_eval_reward",
            "mean_convergence_iteration",
            "n_seeds",
        ])?;
        for r in self.rows() {
            w.write_record([
                r.action_space_size.to_string(),
                r.state_space_size.to_string(),
                r.update_method,
                format!("{:.6}", r.mean_final_reward),
                format!("{:.6}", r.std_final_reward),
                format!("{:.6}", r.mean_total_reward),
                format!("{:.6}", r.std_total_reward),
                format!("{:.6}", r.mean_greedy_eval_reward),
                r.mean_convergence_iteration
                    .map(|c| format!("{c:.6}"))
                    .unwrap_or_default(),
                r.n_seeds.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn grid_states(size: GridSize) -> Vec<f64> {
    match size {
        GridSize::Sparse => sparse_states(),
        GridSize::Granular => granular_states(),
    }
}

fn grid_actions(size: GridSize) -> Vec<f64> {
    match size {
        GridSize::Sparse => sparse_actions(),
        GridSize::Granular => granular_actions(),
    }
}

/// The eight (action grid, state grid, update rule) cells, in table order.
pub fn factorial_cells() -> Vec<(GridSize, GridSize, UpdateMode)> {
    let mut cells = Vec::with_capacity(8);
    for actions in [GridSize::Sparse, GridSize::Granular] {
        for states in [GridSize::Sparse, GridSize::Granular] {
            for mode in [UpdateMode::Single, UpdateMode::Batch] {
                cells.push((actions, states, mode));
            }
        }
    }
    cells
}

/// Run every factorial cell for every seed.
///
/// Price, steepness, agent hyper-parameters and run lengths come from
/// `base`; its grids, update mode and seed are replaced per cell. Runs
/// execute in parallel; results are collected in cell-then-seed order.
pub fn run_factorial(base: &RunConfig, seeds: &[u64]) -> Result<FactorialReport> {
    if seeds.is_empty() {
        return invalid("factorial needs at least one seed");
    }
    let mut configs = Vec::new();
    for (actions, states, mode) in factorial_cells() {
        let env = EnvConfig::new(
            base.env.base_price(),
            base.env.steepness(),
            grid_states(states),
            grid_actions(actions),
        )?;
        let cfg = RunConfig {
            env,
            agent: base.agent.clone().with_mode(mode),
            tracked_cell: None,
            ..base.clone()
        };
        cfg.validate()?;
        configs.push(((actions, states, mode), cfg));
    }

    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let outcomes: Vec<std::result::Result<RunSummary, String>> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let cfg = RunConfig {
                seed,
                ..configs[c].1.clone()
            };
            run(&cfg).map(|r| RunSummary::from(&r)).map_err(|e| e.to_string())
        })
        .collect();

    let mut cells = Vec::with_capacity(configs.len());
    for (c, ((actions, states, mode), cfg)) in configs.iter().enumerate() {
        let mc_benchmark = if *actions == GridSize::Granular || *states == GridSize::Granular {
            let mc = benchmark_monte_carlo(&cfg.env, FACTORIAL_MC_SAMPLES, base.seed)?;
            Some((mc.mean_optimum, mc.mc_std_error))
        } else {
            None
        };
        let mut runs = Vec::new();
        let mut errors = Vec::new();
        for (k, &seed) in seeds.iter().enumerate() {
            match &outcomes[c * seeds.len() + k] {
                Ok(r) => runs.push(r.clone()),
                Err(e) => errors.push((seed, e.clone())),
            }
        }
        cells.push(FactorialCell {
            states: *states,
            actions: *actions,
            update_method: *mode,
            action_space_size: cfg.env.n_actions(),
            state_space_size: cfg.env.n_states(),
            benchmark_mean: benchmark_closed_form(&cfg.env).mean_optimum,
            mc_benchmark,
            runs,
            errors,
        });
    }
    Ok(FactorialReport { cells })
}

// ---------------------------------------------------------------------------
// Fixed-customer illustration

/// Parameters of the single-customer learning-dynamics experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IllustrativeSetup {
    pub base_price: f64,
    pub steepness: f64,
    pub beta: f64,
    pub tracked_discount: f64,
    pub agent: AgentConfig,
    pub iterations: usize,
    pub rolling_window: usize,
    pub convergence_fraction: f64,
}

impl Default for IllustrativeSetup {
    fn default() -> Self {
        Self {
            base_price: crate::env::DEFAULT_BASE_PRICE,
            steepness: crate::env::DEFAULT_STEEPNESS,
            beta: 0.6,
            tracked_discount: 0.17,
            agent: AgentConfig::default(),
            iterations: DEFAULT_ITERATIONS,
            rolling_window: DEFAULT_ROLLING_WINDOW,
            convergence_fraction: DEFAULT_CONVERGENCE_FRACTION,
        }
    }
}

impl IllustrativeSetup {
    pub fn env(&self) -> Result<EnvConfig> {
        EnvConfig::new(self.base_price, self.steepness, vec![self.beta], granular_actions())
    }

    pub fn run_config(&self, mode: UpdateMode, seed: u64) -> Result<RunConfig> {
        let env = self.env()?;
        let tracked = env.action_index_of(self.tracked_discount).ok_or_else(|| {
            Error::InvalidInput(format!(
                "tracked discount {} is not on the action grid",
                self.tracked_discount
            ))
        })?;
        Ok(RunConfig {
            env,
            agent: self.agent.clone().with_mode(mode),
            iterations: self.iterations,
            seed,
            rolling_window: self.rolling_window,
            convergence_fraction: self.convergence_fraction,
            tracked_cell: Some((0, tracked)),
        })
    }

    /// Oracle expected reward of the tracked cell.
    pub fn oracle_expectation(&self) -> Result<f64> {
        expected_reward(self.beta, self.tracked_discount, self.base_price, self.steepness)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IllustrativeResult {
    pub single: RunResult,
    pub batch: RunResult,
    pub oracle_expectation: f64,
}

/// Both update rules on the same seed in the fixed-customer setup.
pub fn run_illustrative(seed: u64, setup: &IllustrativeSetup) -> Result<IllustrativeResult> {
    let single = run(&setup.run_config(UpdateMode::Single, seed)?)?;
    let batch = run(&setup.run_config(UpdateMode::Batch, seed)?)?;
    Ok(IllustrativeResult {
        single,
        batch,
        oracle_expectation: setup.oracle_expectation()?,
    })
}
