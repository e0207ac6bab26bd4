//! Discount-pricing simulator with bimodal rewards and tabular Q-learning.
//!
//! * [`env`]: customers, purchase model and reward sampling.
//! * [`oracle`]: closed-form and Monte Carlo ground truth.
//! * [`qlearn`]: Q-table, epsilon-greedy selection, single and batch updates.
//! * [`harness`]: seeded runs, the factorial suite and the fixed-customer trace.
//! * [`cli`]: config files and the `pricelab` command line.

pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod output;
pub mod qlearn;
pub mod rng;
pub mod stats;

pub use env::{CustomerState, EnvConfig, Observation};
pub use error::{Error, Result};
pub use harness::{run, RunConfig, RunResult};
pub use oracle::BenchmarkReport;
pub use qlearn::{AgentConfig, QTable, UpdateMode};
