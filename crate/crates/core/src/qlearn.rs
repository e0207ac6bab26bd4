//! Tabular Q-learning for single-decision episodes.
//!
//! There is no successor state, so the Bellman target is the reward itself
//! and every update is `Q <- Q + alpha * (target - Q)`. The two
//! update modes differ only in the target:
//!
//! * `single`: the reward of each observation, applied immediately.
//! * `batch`: observations are buffered; when the buffer fills, each
//!   (state, action) group takes one step toward its mean reward.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, Observation};
use crate::error::{invalid, Result};

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
    visits: Vec<u64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
            visits: vec![0; n_states * n_actions],
        }
    }

    /// Table with the given row-major values and no visits.
    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return invalid(format!(
                "{} values for a {n_states}x{n_actions} table",
                values.len()
            ));
        }
        Ok(Self {
            n_states,
            n_actions,
            values,
            visits: vec![0; n_states * n_actions],
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn value(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.n_actions + action]
    }

    pub fn visits(&self, state: usize, action: usize) -> u64 {
        self.visits[state * self.n_actions + action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn check(&self, state: usize, action: usize) -> Result<usize> {
        if state >= self.n_states || action >= self.n_actions {
            return invalid(format!(
                "cell ({state}, {action}) outside {}x{} table",
                self.n_states, self.n_actions
            ));
        }
        Ok(state * self.n_actions + action)
    }

    fn step_toward(&mut self, idx: usize, target: f64, alpha: f64, count: u64) {
        self.values[idx] += alpha * (target - self.values[idx]);
        self.visits[idx] += count;
    }

    /// CSV dump: state_index, beta_prob, action_index, discount, q_value, visits.
    pub fn write_csv<W: Write>(&self, env: &EnvConfig, out: W) -> Result<()> {
        if env.n_states() != self.n_states || env.n_actions() != self.n_actions {
            return invalid("q-table shape does not match the environment");
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["state_index", "beta_prob", "action_index", "discount", "q_value", "visits"])?;
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                w.write_record([
                    s.to_string(),
                    env.state_grid()[s].to_string(),
                    a.to_string(),
                    env.action_grid()[a].to_string(),
                    format!("{:.6}", self.value(s, a)),
                    self.visits(s, a).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    Single,
    Batch,
}

impl UpdateMode {
    pub fn as_str(self) -> &'static str {
        match self {
            UpdateMode::Single => "single",
            UpdateMode::Batch => "batch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub learning_rate: f64,
    /// Probability of playing a uniformly random action.
    pub explore_prob: f64,
    pub update_mode: UpdateMode,
    /// Observations per flush; ignored in single mode.
    pub batch_size: usize,
    /// Flush a partially filled buffer at the end of a run instead of dropping it.
    pub flush_residual: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            explore_prob: 0.1,
            update_mode: UpdateMode::Single,
            batch_size: 1000,
            flush_residual: false,
        }
    }
}

impl AgentConfig {
    pub fn with_mode(mut self, mode: UpdateMode) -> Self {
        self.update_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return invalid(format!("learning_rate {} outside (0, 1]", self.learning_rate));
        }
        if !(0.0..=1.0).contains(&self.explore_prob) {
            return invalid(format!("explore_prob {} outside [0, 1]", self.explore_prob));
        }
        if self.batch_size == 0 {
            return invalid("batch_size must be >= 1");
        }
        Ok(())
    }
}

/// Epsilon-greedy choice: uniform action with probability `explore_prob`,
/// otherwise the row argmax.
pub fn select_action<R: Rng + ?Sized>(q: &QTable, state: usize, explore_prob: f64, rng: &mut R) -> usize {
    if rng.random::<f64>() < explore_prob {
        rng.random_range(0..q.n_actions)
    } else {
        argmax(q.row(state))
    }
}

pub fn update_single(q: &mut QTable, obs: &Observation, alpha: f64) -> Result<()> {
    let idx = q.check(obs.state_index, obs.action_index)?;
    q.step_toward(idx, obs.reward, alpha, 1);
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchBuffer {
    entries: Vec<Observation>,
    capacity: usize,
}

impl BatchBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return invalid("batch capacity must be >= 1");
        }
        Ok(Self {
            entries: Vec::with_capacity(capacity),
            capacity,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> &[Observation] {
        &self.entries
    }
}

/// Apply one step per buffered (state, action) group toward the group's
/// mean reward, then empty the buffer. Returns false if it was empty.
pub fn flush(q: &mut QTable, buffer: &mut BatchBuffer, alpha: f64) -> Result<bool> {
    if buffer.entries.is_empty() {
        return Ok(false);
    }
    let mut groups: BTreeMap<usize, (f64, u64)> = BTreeMap::new();
    for obs in &buffer.entries {
        let idx = q.check(obs.state_index, obs.action_index)?;
        let g = groups.entry(idx).or_insert((0.0, 0));
        g.0 += obs.reward;
        g.1 += 1;
    }
    for (idx, (sum, count)) in groups {
        q.step_toward(idx, sum / count as f64, alpha, count);
    }
    buffer.entries.clear();
    Ok(true)
}

/// Buffer `obs`; flush when the buffer reaches capacity.
pub fn record_and_maybe_flush(
    q: &mut QTable,
    buffer: &mut BatchBuffer,
    obs: Observation,
    alpha: f64,
) -> Result<bool> {
    q.check(obs.state_index, obs.action_index)?;
    buffer.entries.push(obs);
    if buffer.entries.len() >= buffer.capacity {
        flush(q, buffer, alpha)
    } else {
        Ok(false)
    }
}

/// Per-state argmax of the table.
pub fn greedy_policy(q: &QTable) -> Vec<usize> {
    (0..q.n_states).map(|s| argmax(q.row(s))).collect()
}

/// Q-table plus the update machinery selected by an [`AgentConfig`].
#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    q: QTable,
    buffer: BatchBuffer,
    flushes: u64,
}

impl Agent {
    pub fn new(config: AgentConfig, n_states: usize, n_actions: usize) -> Result<Self> {
        Self::with_table(config, QTable::zeros(n_states, n_actions))
    }

    pub fn with_table(config: AgentConfig, q: QTable) -> Result<Self> {
        config.validate()?;
        let buffer = BatchBuffer::new(config.batch_size)?;
        Ok(Self {
            config,
            q,
            buffer,
            flushes: 0,
        })
    }

    pub fn act<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        select_action(&self.q, state, self.config.explore_prob, rng)
    }

    /// Learn from one observation. Returns true when the Q-table changed.
    pub fn observe(&mut self, obs: Observation) -> Result<bool> {
        match self.config.update_mode {
            UpdateMode::Single => {
                update_single(&mut self.q, &obs, self.config.learning_rate)?;
                Ok(true)
            }
            UpdateMode::Batch => {
                let flushed = record_and_maybe_flush(&mut self.q, &mut self.buffer, obs, self.config.learning_rate)?;
                self.flushes += u64::from(flushed);
                Ok(flushed)
            }
        }
    }

    /// End-of-run hook: flushes the residual buffer if configured to.
    pub fn finish(&mut self) -> Result<()> {
        if self.config.flush_residual && flush(&mut self.q, &mut self.buffer, self.config.learning_rate)? {
            self.flushes += 1;
        }
        Ok(())
    }

    pub fn q(&self) -> &QTable {
        &self.q
    }

    pub fn into_q(self) -> QTable {
        self.q
    }

    pub fn buffer(&self) -> &BatchBuffer {
        &self.buffer
    }

    pub fn flushes(&self) -> u64 {
        self.flushes
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn obs(s: usize, a: usize, r: f64) -> Observation {
        Observation {
            state_index: s,
            action_index: a,
            reward: r,
            purchased: r > 0.0,
        }
    }

    #[test]
    fn greedy_selection_and_ties() {
        let q = QTable::from_values(1, 3, vec![1.0, 5.0, 3.0]).unwrap();
        let mut rng = substream(0, Stream::Exploration);
        assert_eq!(select_action(&q, 0, 0.0, &mut rng), 1);
        let flat = QTable::zeros(1, 4);
        assert_eq!(select_action(&flat, 0, 0.0, &mut rng), 0);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let q = QTable::from_values(1, 4, vec![0.0, 9.0, 0.0, 0.0]).unwrap();
        let mut rng = substream(2, Stream::Exploration);
        let n = 200_000;
        let mut counts = [0u32; 4];
        for _ in 0..n {
            counts[select_action(&q, 0, 1.0, &mut rng)] += 1;
        }
        let k = 0.25;
        let tol = 3.0 * (k * (1.0 - k) / n as f64).sqrt();
        for c in counts {
            assert!((f64::from(c) / n as f64 - k).abs() < tol, "{counts:?}");
        }
    }

    #[test]
    fn single_update_arithmetic() {
        let mut q = QTable::zeros(2, 2);
        update_single(&mut q, &obs(0, 1, 90.0), 0.1).unwrap();
        assert_eq!(q.value(0, 1), 9.0);
        assert_eq!(q.visits(0, 1), 1);
        assert_eq!(q.value(0, 0), 0.0);
        assert_eq!(q.value(1, 1), 0.0);
        assert_eq!(q.visits(1, 1), 0);

        let mut fixed = QTable::from_values(1, 1, vec![42.0]).unwrap();
        update_single(&mut fixed, &obs(0, 0, 42.0), 0.1).unwrap();
        assert_eq!(fixed.value(0, 0), 42.0);
        assert!(update_single(&mut q, &obs(2, 0, 1.0), 0.1).is_err());
    }

    #[test]
    fn repeated_reward_is_exponential_average() {
        let (alpha, r) = (0.1, 73.0);
        let mut q = QTable::zeros(1, 1);
        for n in 1..=200 {
            update_single(&mut q, &obs(0, 0, r), alpha).unwrap();
            let expected = r * (1.0 - (1.0 - alpha).powi(n));
            assert!((q.value(0, 0) - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn batch_flush_uses_group_mean() {
        let mut q = QTable::zeros(1, 1);
        let mut buf = BatchBuffer::new(2).unwrap();
        assert!(!record_and_maybe_flush(&mut q, &mut buf, obs(0, 0, 80.0), 0.1).unwrap());
        assert_eq!(q.value(0, 0), 0.0);
        assert!(record_and_maybe_flush(&mut q, &mut buf, obs(0, 0, 100.0), 0.1).unwrap());
        assert_eq!(q.value(0, 0), 9.0);
        assert_eq!(q.visits(0, 0), 2);
        assert!(buf.is_empty());
    }

    #[test]
    fn batch_flush_groups_cells() {
        let mut q = QTable::zeros(2, 2);
        let mut buf = BatchBuffer::new(2).unwrap();
        record_and_maybe_flush(&mut q, &mut buf, obs(0, 1, 50.0), 0.1).unwrap();
        record_and_maybe_flush(&mut q, &mut buf, obs(1, 0, 20.0), 0.1).unwrap();
        assert_eq!(q.value(0, 1), 5.0);
        assert_eq!(q.value(1, 0), 2.0);
        assert_eq!(q.visits(0, 1), 1);
        assert_eq!(q.visits(1, 0), 1);
        assert_eq!(q.value(0, 0), 0.0);
    }

    #[test]
    fn batch_moves_toward_environment_mean() {
        use crate::env::{sparse_actions, EnvConfig};
        let env = EnvConfig::with_grids(vec![0.6], sparse_actions()).unwrap();
        let mut rng = substream(9, Stream::Purchases);
        let state = env.state(0).unwrap();
        let mut q = QTable::zeros(1, 10);
        let mut buf = BatchBuffer::new(1000).unwrap();
        let mut flushes = 0;
        for _ in 0..100_000 {
            let o = env.step(state, 1, &mut rng).unwrap();
            flushes += u32::from(record_and_maybe_flush(&mut q, &mut buf, o, 0.1).unwrap());
        }
        assert_eq!(flushes, 100);
        // 100 steps from zero leave 0.9^100 of the gap; batch means have SE ~1.4.
        assert!((q.value(0, 1) - 52.369).abs() < 2.0, "{}", q.value(0, 1));
    }

    #[test]
    fn greedy_policy_cases() {
        assert_eq!(greedy_policy(&QTable::zeros(3, 4)), vec![0, 0, 0]);
        let q = QTable::from_values(2, 3, vec![1.0, 3.0, 2.0, 7.0, 1.0, 7.0]).unwrap();
        assert_eq!(greedy_policy(&q), vec![1, 0]);
        let shifted = QTable::from_values(2, 3, vec![101.0, 103.0, 102.0, -3.0, -9.0, -3.0]).unwrap();
        assert_eq!(greedy_policy(&shifted), greedy_policy(&q));
    }

    #[test]
    fn residual_flush_flag() {
        let cfg = AgentConfig {
            update_mode: UpdateMode::Batch,
            batch_size: 10,
            ..AgentConfig::default()
        };
        let mut keep = Agent::new(cfg.clone(), 1, 1).unwrap();
        let mut drop = Agent::new(AgentConfig { flush_residual: true, ..cfg }, 1, 1).unwrap();
        for agent in [&mut keep, &mut drop] {
            for _ in 0..3 {
                agent.observe(obs(0, 0, 10.0)).unwrap();
            }
            agent.finish().unwrap();
        }
        assert_eq!(keep.q().value(0, 0), 0.0);
        assert_eq!(keep.buffer().len(), 3);
        assert_eq!(drop.q().value(0, 0), 1.0);
        assert_eq!(drop.flushes(), 1);
    }

    #[test]
    fn config_validation() {
        let ok = AgentConfig::default();
        assert!(ok.validate().is_ok());
        assert!(AgentConfig { learning_rate: 0.0, ..ok.clone() }.validate().is_err());
        assert!(AgentConfig { learning_rate: 1.5, ..ok.clone() }.validate().is_err());
        assert!(AgentConfig { explore_prob: -0.1, ..ok.clone() }.validate().is_err());
        assert!(AgentConfig { batch_size: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn qtable_csv_layout() {
        use crate::env::EnvConfig;
        let env = EnvConfig::with_grids(vec![0.5], vec![0.0, 0.25]).unwrap();
        let mut q = QTable::zeros(1, 2);
        update_single(&mut q, &obs(0, 1, 75.0), 0.1).unwrap();
        let mut out = Vec::new();
        q.write_csv(&env, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "state_index,beta_prob,action_index,discount,q_value,visits\n\
             0,0.5,0,0,0.000000,0\n\
             0,0.5,1,0.25,7.500000,1\n"
        );
    }
}
