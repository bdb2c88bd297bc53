//! Acquisition values (expected improvement, GP-UCB) and batch proposal by
//! dense random-candidate maximization.

use rand::Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::gp::GpModel;

/// Which acquisition to score candidates with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AcquisitionKind {
    ExpectedImprovement,
    GpUcb { beta: f64 },
}

fn std_normal() -> &'static Normal {
    use std::sync::OnceLock;
    static NORMAL: OnceLock<Normal> = OnceLock::new();
    NORMAL.get_or_init(|| Normal::new(0.0, 1.0).expect("standard normal"))
}

/// Closed-form expected improvement over `best` for a Gaussian belief,
/// maximization convention.
pub fn expected_improvement(mean: f64, variance: f64, best: f64) -> f64 {
    let sigma = variance.max(0.0).sqrt();
    if sigma == 0.0 {
        return (mean - best).max(0.0);
    }
    let z = (mean - best) / sigma;
    let n = std_normal();
    (sigma * (z * n.cdf(z) + n.pdf(z))).max(0.0)
}

/// GP-UCB value mean + sqrt(beta) * sqrt(variance).
pub fn gp_ucb_value(mean: f64, variance: f64, beta: f64) -> f64 {
    mean + beta.sqrt() * variance.max(0.0).sqrt()
}

/// Candidate pool size for dense random-candidate maximization.
pub fn candidate_count(d: usize) -> usize {
    (1000 * d.max(1)).min(5000)
}

fn score_posteriors(posts: &[(f64, f64)], best: f64, kind: AcquisitionKind) -> Vec<f64> {
    posts
        .iter()
        .map(|&(mean, var)| match kind {
            AcquisitionKind::ExpectedImprovement => expected_improvement(mean, var, best),
            AcquisitionKind::GpUcb { beta } => gp_ucb_value(mean, var, beta),
        })
        .collect()
}

/// Acquisition scores of `candidates` under `model`.
pub fn score_candidates(
    model: &GpModel,
    candidates: &[Vec<f64>],
    best: f64,
    kind: AcquisitionKind,
) -> Vec<f64> {
    score_posteriors(&model.posterior_batch(candidates), best, kind)
}

/// Sequential reference path for [`score_candidates`], kept for benchmarks.
pub fn score_candidates_seq(
    model: &GpModel,
    candidates: &[Vec<f64>],
    best: f64,
    kind: AcquisitionKind,
) -> Vec<f64> {
    score_posteriors(&model.posterior_batch_seq(candidates), best, kind)
}

/// Draw `candidates` uniform points in the d-dimensional unit cube, score
/// them, and return the `batch` highest-scoring distinct candidates. Ties
/// are broken by draw order.
pub fn propose_batch(
    model: &GpModel,
    d: usize,
    batch: usize,
    candidates: usize,
    best: f64,
    kind: AcquisitionKind,
    rng: &mut impl Rng,
) -> Vec<Vec<f64>> {
    let candidates = candidates.max(batch);
    let pool: Vec<Vec<f64>> = (0..candidates)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect();
    let scores = score_candidates(model, &pool, best, kind);
    let order = top_indices(&scores, batch);
    order.into_iter().map(|i| pool[i].clone()).collect()
}

/// Indices of the `k` largest scores, ties broken by index order.
pub fn top_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}
