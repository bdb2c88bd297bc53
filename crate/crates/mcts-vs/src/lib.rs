//! High-dimensional black-box optimization via MCTS-driven variable
//! selection, with pluggable inner optimizers, baselines, synthetic
//! benchmarks, and an empirical regret lab for the variable-selection
//! regret bound.

pub mod acquisition;
pub mod config;
pub mod error;
pub mod gp;
pub mod inner_opt;
pub mod lhs;
pub mod mcts;
pub mod objective;
pub mod par;
pub mod regret_lab;
pub mod runner;
pub mod trace;
pub mod vs_core;

pub use error::{Error, Result};
