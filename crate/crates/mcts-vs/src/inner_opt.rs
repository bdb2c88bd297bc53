//! Pluggable inner optimizers proposing batches of points in a selected
//! subspace from the subspace-projected evaluation history.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{self, AcquisitionKind};
use crate::error::{Error, Result};
use crate::gp::{GpModel, KernelParams};
use crate::objective::EvaluatedPoint;
use crate::vs_core::VariableIndexSet;

/// Which algorithm optimizes a selected subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    GpBo,
    RandomSearch,
}

/// Evaluation history projected onto a variable index subset.
#[derive(Debug, Clone)]
pub struct SubspaceHistory {
    pub indices: VariableIndexSet,
    pub points: Vec<(Vec<f64>, f64)>,
}

impl SubspaceHistory {
    pub fn new(indices: VariableIndexSet, points: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let d = indices.len();
        if let Some((i, _)) = points.iter().enumerate().find(|(_, (x, _))| x.len() != d) {
            return Err(Error::Data(format!(
                "projected point {i} has wrong dimension (expected {d})"
            )));
        }
        Ok(SubspaceHistory { indices, points })
    }

    /// Project full-dimensional evaluated points onto `indices`.
    pub fn project(indices: &VariableIndexSet, all: &[EvaluatedPoint]) -> Result<Self> {
        let points = all
            .iter()
            .map(|p| (indices.project(&p.x), p.y))
            .collect();
        SubspaceHistory::new(indices.clone(), points)
    }

    pub fn dimension(&self) -> usize {
        self.indices.len()
    }
}

// Fitting on the whole history is cubic in its size; past this many points
// the GP sees only the most recent ones plus the current top values.
const GP_HISTORY_CAP: usize = 500;
const GP_KEEP_BEST: usize = 20;

/// Inner optimizer with warm-started GP hyperparameters threaded between
/// calls. One instance per run; no shared state.
#[derive(Debug, Clone)]
pub struct InnerOptimizer {
    kind: OptimizerKind,
    restarts: usize,
    warm: Option<KernelParams>,
}

impl InnerOptimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        InnerOptimizer {
            kind,
            restarts: 3,
            warm: None,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Propose `batch` points in the unit cube of the history's subspace.
    pub fn propose(
        &mut self,
        history: &SubspaceHistory,
        batch: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<Vec<f64>>> {
        if batch == 0 {
            return Err(Error::Argument("batch must be at least 1".into()));
        }
        let d = history.dimension();
        match self.kind {
            OptimizerKind::RandomSearch => Ok(uniform_batch(d, batch, rng)),
            OptimizerKind::GpBo => {
                if history.points.is_empty() {
                    // Prior model scores every candidate equally; the
                    // tie-break returns the first draws, i.e. uniform points.
                    return Ok(uniform_batch(d, batch, rng));
                }
                let fit_points = capped_history(&history.points);
                let model = GpModel::fit(&fit_points, self.restarts, self.warm, rng)?;
                self.warm = Some(model.params());
                let best = history
                    .points
                    .iter()
                    .map(|(_, y)| *y)
                    .fold(f64::NEG_INFINITY, f64::max);
                Ok(acquisition::propose_batch(
                    &model,
                    d,
                    batch,
                    acquisition::candidate_count(d),
                    best,
                    AcquisitionKind::ExpectedImprovement,
                    rng,
                ))
            }
        }
    }
}

/// One-shot proposal without warm-start threading.
pub fn propose(
    kind: OptimizerKind,
    history: &SubspaceHistory,
    batch: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<f64>>> {
    InnerOptimizer::new(kind).propose(history, batch, rng)
}

fn uniform_batch(d: usize, batch: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..batch)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect()
}

fn capped_history(points: &[(Vec<f64>, f64)]) -> Vec<(Vec<f64>, f64)> {
    if points.len() <= GP_HISTORY_CAP {
        return points.to_vec();
    }
    let cutoff = points.len() - GP_HISTORY_CAP;
    let mut keep: Vec<usize> = (cutoff..points.len()).collect();
    let mut by_value: Vec<usize> = (0..points.len()).collect();
    by_value.sort_by(|&a, &b| {
        points[b]
            .1
            .partial_cmp(&points[a].1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    keep.extend(by_value.into_iter().take(GP_KEEP_BEST).filter(|&i| i < cutoff));
    keep.sort_unstable();
    keep.into_iter().map(|i| points[i].clone()).collect()
}
