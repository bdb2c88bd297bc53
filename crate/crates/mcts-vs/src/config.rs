//! Run configuration: a flat key/value TOML file.
//!
//! ```toml
//! problem = "hartmann6_300"
//! method = "mcts_vs"            # mcts_vs | dropout | vanilla_bo | random_search
//! optimizer = "gp_bo"           # gp_bo | random_search (inner optimizer)
//! fill = "best_k"               # best_k | average_best_k | random_uniform
//! budget = 600
//! seeds = [2021, 2022, 2023, 2024, 2025]
//! out_dir = "runs/h300"         # optional; omit to keep results in memory
//! c_p = 0.1                     # optional; defaults per problem family
//! # n_v = 2, n_s = 3, n_bad = 5, n_split = 3, k = 20, d = 6
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inner_opt::OptimizerKind;
use crate::mcts::MctsVsConfig;
use crate::objective::{self, ObjectiveSpec};
use crate::regret_lab::SelectionPolicy;
use crate::vs_core::{FillStrategy, VariableIndexSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MctsVs,
    Dropout,
    VanillaBo,
    RandomSearch,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::MctsVs => "mcts_vs",
            Method::Dropout => "dropout",
            Method::VanillaBo => "vanilla_bo",
            Method::RandomSearch => "random_search",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    pub method: Method,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub fill: FillStrategy,
    pub budget: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub n_v: Option<usize>,
    #[serde(default)]
    pub n_s: Option<usize>,
    #[serde(default)]
    pub n_bad: Option<usize>,
    #[serde(default)]
    pub n_split: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub c_p: Option<f64>,
    /// Dropout subset size; defaults to the problem's valid-variable count.
    #[serde(default)]
    pub d: Option<usize>,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("bad run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let spec = objective::by_name(&self.problem)?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be positive".into()));
        }
        if self.method == Method::MctsVs {
            self.mcts_config(self.seeds[0]).validate(spec.dimension())?;
        }
        if let Some(d) = self.d {
            if d == 0 || d > spec.dimension() {
                return Err(Error::Config(format!(
                    "d = {d} not in 1..={}",
                    spec.dimension()
                )));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<ObjectiveSpec> {
        objective::by_name(&self.problem)
    }

    /// Exploration constant: explicit value, else 10 on Levy problems and
    /// 0.1 elsewhere.
    pub fn c_p_value(&self) -> f64 {
        self.c_p.unwrap_or(if self.problem.starts_with("levy") {
            10.0
        } else {
            0.1
        })
    }

    pub fn n_v_value(&self) -> usize {
        self.n_v.unwrap_or(2)
    }

    pub fn n_s_value(&self) -> usize {
        self.n_s.unwrap_or(3)
    }

    pub fn k_value(&self) -> usize {
        self.k.unwrap_or(20)
    }

    pub fn mcts_config(&self, seed: u64) -> MctsVsConfig {
        MctsVsConfig {
            n_v: self.n_v_value(),
            n_s: self.n_s_value(),
            n_e: self.budget,
            n_bad: self.n_bad.unwrap_or(5),
            n_split: self.n_split.unwrap_or(3),
            k: self.k_value(),
            c_p: self.c_p_value(),
            optimizer: self.optimizer,
            fill: self.fill,
            seed,
        }
    }

    pub fn dropout_d(&self, spec: &ObjectiveSpec) -> usize {
        self.d.unwrap_or_else(|| spec.valid_indices().len())
    }

    /// Short slug for per-config output directories.
    pub fn slug(&self) -> String {
        format!("{}-{}", self.problem, self.method)
    }
}

/// Configuration of a regret-lab study.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegretLabConfig {
    pub dims: usize,
    pub resolution: usize,
    pub upper: f64,
    pub signal_variance: f64,
    pub length_scale: f64,
    pub noise_variance: f64,
    pub delta: f64,
    pub a: f64,
    pub b: f64,
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    /// "full", "random:<d>", or "fixed:i,j,...".
    pub policy: String,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RegretLabConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("bad regret-lab config: {e}")))
    }

    pub fn parse_policy(&self) -> Result<SelectionPolicy> {
        let p = self.policy.trim();
        if p == "full" {
            return Ok(SelectionPolicy::Full);
        }
        if let Some(d) = p.strip_prefix("random:") {
            let d: usize = d
                .parse()
                .map_err(|_| Error::Config(format!("bad policy {p:?}")))?;
            return Ok(SelectionPolicy::UniformRandom(d));
        }
        if let Some(ids) = p.strip_prefix("fixed:") {
            let ids: Vec<usize> = ids
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("bad policy {p:?}")))?;
            return Ok(SelectionPolicy::Fixed(VariableIndexSet::new(ids, self.dims)?));
        }
        Err(Error::Config(format!(
            "unknown policy {p:?}; expected full, random:<d> or fixed:i,j,..."
        )))
    }
}
