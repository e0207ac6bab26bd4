//! Ground truth for the pricing environment.
//!
//! Expected revenue for a customer with consideration probability `beta`
//! offered discount `d` is `beta * (1 - exp(steepness * d)) * price * (1 - d)`.
//! Because `beta` is a positive multiplier, every state shares the same
//! best discount; only the level of the optimum changes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{purchase_probability, EnvConfig};
use crate::error::{invalid, Result};
use crate::qlearn::argmax;
use crate::rng::{indexed_substream, Stream};

pub fn expected_reward(beta_prob: f64, discount: f64, base_price: f64, steepness: f64) -> Result<f64> {
    if !(base_price.is_finite() && base_price > 0.0) {
        return invalid(format!("base_price must be > 0, got {base_price}"));
    }
    Ok(purchase_probability(beta_prob, discount, steepness)? * base_price * (1.0 - discount))
}

/// Closed-form expected reward for grid cell `(state_index, action_index)`.
pub fn cell_expected_reward(env: &EnvConfig, state_index: usize, action_index: usize) -> Result<f64> {
    expected_reward(
        env.state(state_index)?.beta_prob,
        env.discount(action_index)?,
        env.base_price(),
        env.steepness(),
    )
}

/// Revenue-maximising discount over the continuum `(0, 1)`.
///
/// Root of `exp(steepness * d) * (1 - steepness * (1 - d)) = 1`, found by
/// bisection. The left end of the bracket is positive, the right end
/// negative, and the search runs until the bracket stops shrinking in f64.
pub fn optimal_discount_continuous(steepness: f64) -> Result<f64> {
    if !(steepness.is_finite() && steepness < 0.0) {
        return invalid(format!("steepness must be < 0, got {steepness}"));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if stationarity_residual(mid, steepness) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `exp(steepness * d) * (1 - steepness * (1 - d)) - 1`; zero at the optimum.
pub fn stationarity_residual(discount: f64, steepness: f64) -> f64 {
    (steepness * discount).exp() * (1.0 - steepness * (1.0 - discount)) - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkMethod {
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateOptimum {
    pub state_index: usize,
    pub beta_prob: f64,
    pub best_action_index: usize,
    pub discount: f64,
    pub expected_reward: f64,
}

/// Perfect-knowledge benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub per_state_optimum: Vec<StateOptimum>,
    pub mean_optimum: f64,
    pub method: BenchmarkMethod,
    pub mc_std_error: f64,
}

impl BenchmarkReport {
    fn from_cells(env: &EnvConfig, values: &[f64], method: BenchmarkMethod, mc_std_error: f64) -> Self {
        let n_actions = env.n_actions();
        let per_state_optimum: Vec<StateOptimum> = values
            .chunks(n_actions)
            .enumerate()
            .map(|(state_index, row)| {
                let best = argmax(row);
                StateOptimum {
                    state_index,
                    beta_prob: env.state_grid()[state_index],
                    best_action_index: best,
                    discount: env.action_grid()[best],
                    expected_reward: row[best],
                }
            })
            .collect();
        let mean_optimum = per_state_optimum.iter().map(|s| s.expected_reward).sum::<f64>()
            / per_state_optimum.len() as f64;
        Self {
            per_state_optimum,
            mean_optimum,
            method,
            mc_std_error,
        }
    }

    pub fn best_actions(&self) -> Vec<usize> {
        self.per_state_optimum.iter().map(|s| s.best_action_index).collect()
    }
}

/// Expected reward of every cell, row-major by state.
pub fn expected_reward_table(env: &EnvConfig) -> Vec<f64> {
    let mut out = Vec::with_capacity(env.n_states() * env.n_actions());
    for &beta in env.state_grid() {
        for &d in env.action_grid() {
            // Grid values were validated by EnvConfig.
            out.push(beta * -(env.steepness() * d).exp_m1() * env.base_price() * (1.0 - d));
        }
    }
    out
}

/// Exact grid benchmark. Ties go to the lowest action index.
pub fn benchmark_closed_form(env: &EnvConfig) -> BenchmarkReport {
    BenchmarkReport::from_cells(env, &expected_reward_table(env), BenchmarkMethod::ClosedForm, 0.0)
}

/// Sample mean and standard error of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellEstimate {
    pub state_index: usize,
    pub action_index: usize,
    pub mean: f64,
    pub std_error: f64,
}

/// Monte Carlo estimates for every cell, `samples_per_cell` environment steps each.
///
/// Every cell draws from its own substream of `seed`, so the result does
/// not depend on how cells are spread over threads.
pub fn monte_carlo_cells(env: &EnvConfig, samples_per_cell: u64, seed: u64) -> Result<Vec<CellEstimate>> {
    if samples_per_cell == 0 {
        return invalid("samples_per_cell must be >= 1");
    }
    let n_actions = env.n_actions();
    let n_cells = env.n_states() * n_actions;
    if n_cells > u32::MAX as usize {
        return invalid("too many cells for Monte Carlo substreams");
    }
    (0..n_cells)
        .into_par_iter()
        .map(|cell| {
            let (state_index, action_index) = (cell / n_actions, cell % n_actions);
            let mut rng = indexed_substream(seed, Stream::MonteCarlo, cell as u32);
            let state = env.state(state_index)?;
            let price = env.purchase_reward(action_index)?;
            let mut purchases = 0u64;
            for _ in 0..samples_per_cell {
                if env.step(state, action_index, &mut rng)?.purchased {
                    purchases += 1;
                }
            }
            // Two-point rewards: the sample variance follows from the purchase count.
            let n = samples_per_cell as f64;
            let freq = purchases as f64 / n;
            let mean = freq * price;
            let std_error = if samples_per_cell > 1 {
                (freq * (1.0 - freq) * n / (n - 1.0)).sqrt() * price / n.sqrt()
            } else {
                0.0
            };
            Ok(CellEstimate {
                state_index,
                action_index,
                mean,
                std_error,
            })
        })
        .collect()
}

/// Benchmark from sampled cell means; `mc_std_error` is the largest cell SE.
pub fn benchmark_monte_carlo(env: &EnvConfig, samples_per_cell: u64, seed: u64) -> Result<BenchmarkReport> {
    let cells = monte_carlo_cells(env, samples_per_cell, seed)?;
    let means: Vec<f64> = cells.iter().map(|c| c.mean).collect();
    let max_se = cells.iter().map(|c| c.std_error).fold(0.0, f64::max);
    Ok(BenchmarkReport::from_cells(env, &means, BenchmarkMethod::MonteCarlo, max_se))
}

/// Uniform-over-states expected reward of a deterministic policy.
pub fn policy_value(env: &EnvConfig, policy: &[usize]) -> Result<f64> {
    if policy.len() != env.n_states() {
        return invalid(format!(
            "policy covers {} states, env has {}",
            policy.len(),
            env.n_states()
        ));
    }
    let mut total = 0.0;
    for (s, &a) in policy.iter().enumerate() {
        total += cell_expected_reward(env, s, a)?;
    }
    Ok(total / policy.len() as f64)
}
