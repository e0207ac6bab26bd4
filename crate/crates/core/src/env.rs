//! The discount-pricing environment.
//!
//! A customer arrives with a consideration probability `beta`. If they
//! consider buying at all, the chance that an offered discount `d` turns
//! into a purchase is `1 - exp(steepness * d)`. A purchase pays
//! `base_price * (1 - d)`; anything else pays nothing, so every
//! (state, action) cell has a two-point reward distribution.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_BASE_PRICE: f64 = 100.0;
pub const DEFAULT_STEEPNESS: f64 = -35.0;

/// Consideration probabilities 0.2, 0.3, ..., 0.8.
pub fn sparse_states() -> Vec<f64> {
    (2..=8).map(|i| f64::from(i) / 10.0).collect()
}

/// 40 consideration probabilities from 0.2 to 0.785 in steps of 0.015.
pub fn granular_states() -> Vec<f64> {
    (0..40).map(|i| f64::from(200 + 15 * i) / 1000.0).collect()
}

/// Discounts 0.0, 0.1, ..., 0.9.
pub fn sparse_actions() -> Vec<f64> {
    (0..10).map(|i| f64::from(i) / 10.0).collect()
}

/// 80 discounts from 0.00 to 0.79 in steps of 0.01.
pub fn granular_actions() -> Vec<f64> {
    (0..80).map(|i| f64::from(i) / 100.0).collect()
}

/// Validated environment parameters; build through [`EnvConfig::new`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvConfig {
    base_price: f64,
    steepness: f64,
    state_grid: Vec<f64>,
    action_grid: Vec<f64>,
}

impl EnvConfig {
    pub fn new(
        base_price: f64,
        steepness: f64,
        state_grid: Vec<f64>,
        action_grid: Vec<f64>,
    ) -> Result<Self> {
        if !(base_price.is_finite() && base_price > 0.0) {
            return invalid(format!("base_price must be > 0, got {base_price}"));
        }
        if !(steepness.is_finite() && steepness < 0.0) {
            return invalid(format!("steepness must be < 0, got {steepness}"));
        }
        check_grid("state_grid", &state_grid, |p| p > 0.0 && p <= 1.0, "(0, 1]")?;
        check_grid("action_grid", &action_grid, |d| (0.0..1.0).contains(&d), "[0, 1)")?;
        Ok(Self {
            base_price,
            steepness,
            state_grid,
            action_grid,
        })
    }

    /// Default price and steepness over the given grids.
    pub fn with_grids(state_grid: Vec<f64>, action_grid: Vec<f64>) -> Result<Self> {
        Self::new(DEFAULT_BASE_PRICE, DEFAULT_STEEPNESS, state_grid, action_grid)
    }

    pub fn base_price(&self) -> f64 {
        self.base_price
    }

    pub fn steepness(&self) -> f64 {
        self.steepness
    }

    pub fn state_grid(&self) -> &[f64] {
        &self.state_grid
    }

    pub fn action_grid(&self) -> &[f64] {
        &self.action_grid
    }

    pub fn n_states(&self) -> usize {
        self.state_grid.len()
    }

    pub fn n_actions(&self) -> usize {
        self.action_grid.len()
    }

    pub fn state(&self, state_index: usize) -> Result<CustomerState> {
        match self.state_grid.get(state_index) {
            Some(&beta_prob) => Ok(CustomerState {
                state_index,
                beta_prob,
            }),
            None => invalid(format!(
                "state index {state_index} out of range for {} states",
                self.n_states()
            )),
        }
    }

    pub fn discount(&self, action_index: usize) -> Result<f64> {
        self.action_grid.get(action_index).copied().ok_or_else(|| {
            Error::InvalidInput(format!(
                "action index {action_index} out of range for {} actions",
                self.n_actions()
            ))
        })
    }

    /// Index of the grid discount equal to `discount` (within 1e-9).
    pub fn action_index_of(&self, discount: f64) -> Option<usize> {
        self.action_grid
            .iter()
            .position(|&d| (d - discount).abs() < 1e-9)
    }

    /// Revenue on purchase at the given action.
    pub fn purchase_reward(&self, action_index: usize) -> Result<f64> {
        Ok(self.base_price * (1.0 - self.discount(action_index)?))
    }

    /// Uniformly random customer.
    pub fn sample_customer<R: Rng + ?Sized>(&self, rng: &mut R) -> CustomerState {
        let state_index = rng.random_range(0..self.state_grid.len());
        CustomerState {
            state_index,
            beta_prob: self.state_grid[state_index],
        }
    }

    /// Offer the discount at `action_index` to `state`.
    ///
    /// Always consumes exactly two uniforms (consideration, then purchase)
    /// so that runs sharing a purchase stream stay aligned step for step.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: CustomerState,
        action_index: usize,
        rng: &mut R,
    ) -> Result<Observation> {
        let discount = self.discount(action_index)?;
        if self.state_grid.get(state.state_index) != Some(&state.beta_prob) {
            return invalid(format!("customer state {state:?} is not on the state grid"));
        }
        let considered = rng.random::<f64>() < state.beta_prob;
        let converted = rng.random::<f64>() < conversion_probability(discount, self.steepness);
        let purchased = considered && converted;
        Ok(Observation {
            state_index: state.state_index,
            action_index,
            reward: if purchased {
                self.base_price * (1.0 - discount)
            } else {
                0.0
            },
            purchased,
        })
    }
}

fn check_grid(name: &str, grid: &[f64], in_domain: impl Fn(f64) -> bool, domain: &str) -> Result<()> {
    if grid.is_empty() {
        return invalid(format!("{name} must not be empty"));
    }
    if let Some(v) = grid.iter().find(|v| !in_domain(**v)) {
        return invalid(format!("{name} value {v} outside {domain}"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return invalid(format!("{name} must be strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CustomerState {
    pub state_index: usize,
    pub beta_prob: f64,
}

/// One interaction record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub state_index: usize,
    pub action_index: usize,
    pub reward: f64,
    pub purchased: bool,
}

// P(purchase | considered, d)
fn conversion_probability(discount: f64, steepness: f64) -> f64 {
    -(steepness * discount).exp_m1()
}

/// Overall purchase probability `beta * (1 - exp(steepness * d))`.
pub fn purchase_probability(beta_prob: f64, discount: f64, steepness: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta_prob) {
        return invalid(format!("beta_prob {beta_prob} outside [0, 1]"));
    }
    if !(0.0..1.0).contains(&discount) {
        return invalid(format!("discount {discount} outside [0, 1)"));
    }
    if !(steepness.is_finite() && steepness < 0.0) {
        return invalid(format!("steepness must be < 0, got {steepness}"));
    }
    Ok(beta_prob * conversion_probability(discount, steepness))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBin {
    pub reward: f64,
    pub count: u64,
}

/// Sample `n` rewards for a fixed customer under a mixed discount policy.
///
/// `policy` holds one non-negative weight per action. The result always
/// has the zero-reward bin first, followed by one bin per discounted price
/// that was actually paid, in increasing order of reward.
pub fn reward_histogram<R: Rng + ?Sized>(
    env: &EnvConfig,
    state: CustomerState,
    policy: &[f64],
    n: u64,
    rng: &mut R,
) -> Result<Vec<RewardBin>> {
    if n == 0 {
        return invalid("histogram needs n > 0");
    }
    if policy.len() != env.n_actions() {
        return invalid(format!(
            "policy has {} weights for {} actions",
            policy.len(),
            env.n_actions()
        ));
    }
    let picker = WeightedIndex::new(policy)
        .map_err(|e| Error::InvalidInput(format!("bad action policy: {e}")))?;

    let mut zero = 0u64;
    let mut paid = vec![0u64; env.n_actions()];
    for _ in 0..n {
        let action = picker.sample(rng);
        let obs = env.step(state, action, rng)?;
        if obs.purchased {
            paid[action] += 1;
        } else {
            zero += 1;
        }
    }

    let mut bins = vec![RewardBin {
        reward: 0.0,
        count: zero,
    }];
    // Larger discounts pay less, so walk the grid backwards for ascending rewards.
    for action in (0..env.n_actions()).rev() {
        if paid[action] > 0 {
            bins.push(RewardBin {
                reward: env.purchase_reward(action)?,
                count: paid[action],
            });
        }
    }
    Ok(bins)
}

pub fn uniform_policy(n_actions: usize) -> Vec<f64> {
    vec![1.0; n_actions]
}
