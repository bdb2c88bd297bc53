//! Benchmark objectives, their high-dimensional extensions with unrelated
//! variables, and the recall metric for variable selection quality.
//!
//! Everything follows the maximization convention: classic minimization test
//! functions are negated at construction, so e.g. Hartmann-6 has a global
//! *maximum* of about 3.32237.

use std::sync::Arc;

use crate::error::{Error, Result};

/// One evaluated point: full-dimensional input and observed value.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedPoint {
    pub x: Vec<f64>,
    pub y: f64,
}

impl EvaluatedPoint {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        EvaluatedPoint { x, y }
    }
}

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A D-dimensional black-box objective with a declared set of valid
/// (function-affecting) coordinates. Immutable after construction and safe
/// to evaluate from concurrent runs.
#[derive(Clone)]
pub struct ObjectiveSpec {
    name: String,
    dimension: usize,
    bounds: Vec<(f64, f64)>,
    valid_indices: Vec<usize>,
    evaluator: Evaluator,
    noise_std: f64,
}

impl std::fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("valid_indices", &self.valid_indices)
            .field("noise_std", &self.noise_std)
            .finish()
    }
}

impl ObjectiveSpec {
    pub fn new(
        name: impl Into<String>,
        bounds: Vec<(f64, f64)>,
        valid_indices: Vec<usize>,
        noise_std: f64,
        evaluator: Evaluator,
    ) -> Result<Self> {
        let dimension = bounds.len();
        if dimension == 0 {
            return Err(Error::Argument("objective needs at least one dimension".into()));
        }
        if let Some((lo, hi)) = bounds
            .iter()
            .find(|(lo, hi)| lo.partial_cmp(hi) != Some(std::cmp::Ordering::Less))
        {
            return Err(Error::Argument(format!("invalid bound [{lo}, {hi}]")));
        }
        let mut valid_indices = valid_indices;
        valid_indices.sort_unstable();
        valid_indices.dedup();
        if valid_indices.is_empty() || valid_indices.iter().any(|&i| i >= dimension) {
            return Err(Error::Argument(format!(
                "valid_indices must be a nonempty subset of 0..{dimension}"
            )));
        }
        if noise_std < 0.0 {
            return Err(Error::Argument("noise_std must be nonnegative".into()));
        }
        Ok(ObjectiveSpec {
            name: name.into(),
            dimension,
            bounds,
            valid_indices,
            evaluator,
            noise_std,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn valid_indices(&self) -> &[usize] {
        &self.valid_indices
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// Evaluate at a point in original (bounded) coordinates.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(Error::Argument(format!(
                "expected {} coordinates, got {}",
                self.dimension,
                x.len()
            )));
        }
        for (i, (&xi, &(lo, hi))) in x.iter().zip(&self.bounds).enumerate() {
            if !(lo..=hi).contains(&xi) {
                return Err(Error::Domain(format!(
                    "coordinate {i} = {xi} outside [{lo}, {hi}]"
                )));
            }
        }
        Ok((self.evaluator)(x))
    }

    /// Map a unit-cube point to original coordinates.
    pub fn denormalize(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.bounds)
            .map(|(&ui, &(lo, hi))| lo + ui * (hi - lo))
            .collect()
    }
}

// Standard Hartmann-6 parameterization: alpha (4), A (4x6), P (4x6).
const HARTMANN6_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HARTMANN6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HARTMANN6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

fn hartmann6_unchecked(x: &[f64]) -> f64 {
    let mut sum = 0.0;
    for i in 0..4 {
        let mut inner = 0.0;
        for j in 0..6 {
            let d = x[j] - HARTMANN6_P[i][j];
            inner += HARTMANN6_A[i][j] * d * d;
        }
        sum += HARTMANN6_ALPHA[i] * (-inner).exp();
    }
    sum
}

/// Hartmann-6 on [0,1]^6, negated so the global maximum is about 3.32237.
pub fn hartmann6(x: &[f64]) -> Result<f64> {
    if x.len() != 6 {
        return Err(Error::Argument(format!("hartmann6 expects 6 coordinates, got {}", x.len())));
    }
    for (i, &xi) in x.iter().enumerate() {
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::Domain(format!("coordinate {i} = {xi} outside [0, 1]")));
        }
    }
    Ok(hartmann6_unchecked(x))
}

fn levy_unchecked(x: &[f64]) -> f64 {
    let d = x.len();
    let w = |xi: f64| 1.0 + (xi - 1.0) / 4.0;
    let w1 = w(x[0]);
    let mut value = (std::f64::consts::PI * w1).sin().powi(2);
    for &xi in &x[..d - 1] {
        let wi = w(xi);
        let s = (std::f64::consts::PI * wi + 1.0).sin();
        value += (wi - 1.0).powi(2) * (1.0 + 10.0 * s * s);
    }
    let wd = w(x[d - 1]);
    let s = (2.0 * std::f64::consts::PI * wd).sin();
    value += (wd - 1.0).powi(2) * (1.0 + s * s);
    -value
}

/// Negated Levy function on [-10,10]^d; global maximum 0 at the all-ones point.
pub fn levy(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Argument("levy expects at least one coordinate".into()));
    }
    for (i, &xi) in x.iter().enumerate() {
        if !(-10.0..=10.0).contains(&xi) {
            return Err(Error::Domain(format!("coordinate {i} = {xi} outside [-10, 10]")));
        }
    }
    Ok(levy_unchecked(x))
}

/// The 6-dimensional Hartmann objective as a spec.
pub fn hartmann6_spec() -> ObjectiveSpec {
    ObjectiveSpec::new(
        "hartmann6",
        vec![(0.0, 1.0); 6],
        (0..6).collect(),
        0.0,
        Arc::new(|x: &[f64]| hartmann6_unchecked(&x[..6])),
    )
    .expect("static spec")
}

/// The d-dimensional Levy objective as a spec.
pub fn levy_spec(d: usize) -> ObjectiveSpec {
    ObjectiveSpec::new(
        format!("levy{d}"),
        vec![(-10.0, 10.0); d],
        (0..d).collect(),
        0.0,
        Arc::new(move |x: &[f64]| levy_unchecked(&x[..d])),
    )
    .expect("static spec")
}

/// Extend `base` to `target_d` dimensions by appending unrelated variables
/// with bounds [0,1]. The evaluator reads only the first `base.dimension()`
/// coordinates.
pub fn extend_with_dummies(base: &ObjectiveSpec, target_d: usize) -> Result<ObjectiveSpec> {
    let d0 = base.dimension();
    if target_d < d0 {
        return Err(Error::Argument(format!(
            "target dimension {target_d} is smaller than base dimension {d0}"
        )));
    }
    let mut bounds = base.bounds().to_vec();
    bounds.resize(target_d, (0.0, 1.0));
    let inner = base.evaluator.clone();
    ObjectiveSpec::new(
        format!("{}_{}", base.name(), target_d),
        bounds,
        (0..d0).collect(),
        base.noise_std(),
        Arc::new(move |x: &[f64]| inner(&x[..d0])),
    )
}

/// Sum of `copies` weighted Hartmann-6 blocks on consecutive coordinate
/// groups, extended with unrelated variables up to `target_d`.
pub fn mix_hartmann(copies: usize, weights: &[f64], target_d: usize) -> Result<ObjectiveSpec> {
    if copies == 0 {
        return Err(Error::Argument("copies must be positive".into()));
    }
    if weights.len() != copies {
        return Err(Error::Argument(format!(
            "expected {copies} weights, got {}",
            weights.len()
        )));
    }
    let valid = 6 * copies;
    if valid > target_d {
        return Err(Error::Argument(format!(
            "6 * {copies} = {valid} valid variables exceed target dimension {target_d}"
        )));
    }
    let weights = weights.to_vec();
    ObjectiveSpec::new(
        format!("hartmann6_mix{copies}_{target_d}"),
        vec![(0.0, 1.0); target_d],
        (0..valid).collect(),
        0.0,
        Arc::new(move |x: &[f64]| {
            weights
                .iter()
                .enumerate()
                .map(|(j, &w)| w * hartmann6_unchecked(&x[6 * j..6 * (j + 1)]))
                .sum()
        }),
    )
}

/// Fraction of the spec's valid variables contained in `selected`.
pub fn recall(selected: &[usize], spec: &ObjectiveSpec) -> f64 {
    let valid = spec.valid_indices();
    let hits = valid.iter().filter(|i| selected.contains(i)).count();
    hits as f64 / valid.len() as f64
}

/// Names of the built-in benchmark problems.
pub const REGISTRY: &[&str] = &[
    "hartmann6_100",
    "hartmann6_300",
    "hartmann6_500",
    "hartmann6_1000",
    "levy10_100",
    "levy10_300",
    "hartmann6_5_500",
    "hartmann6_10_500",
    "hartmann6_5_500_v",
];

/// Look up a benchmark problem by registry name.
pub fn by_name(name: &str) -> Result<ObjectiveSpec> {
    let extended = |base: &ObjectiveSpec, d: usize| extend_with_dummies(base, d);
    match name {
        "hartmann6_100" => extended(&hartmann6_spec(), 100),
        "hartmann6_300" => extended(&hartmann6_spec(), 300),
        "hartmann6_500" => extended(&hartmann6_spec(), 500),
        "hartmann6_1000" => extended(&hartmann6_spec(), 1000),
        "levy10_100" => extended(&levy_spec(10), 100),
        "levy10_300" => extended(&levy_spec(10), 300),
        "hartmann6_5_500" => mix_hartmann(5, &[1.0; 5], 500),
        "hartmann6_10_500" => mix_hartmann(10, &[1.0; 10], 500),
        "hartmann6_5_500_v" => mix_hartmann(5, &[1.0, 0.5, 0.25, 0.125, 0.0625], 500),
        _ => Err(Error::Config(format!(
            "unknown problem {name:?}; known problems: {}",
            REGISTRY.join(", ")
        ))),
    }
}
