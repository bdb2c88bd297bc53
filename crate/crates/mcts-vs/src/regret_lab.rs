//! Desk-scale empirical checks of the variable-selection regret bound:
//! GP-UCB with an arbitrary per-iteration variable selection on discretized
//! GP sample paths, with realized Lipschitz importances, beta schedules and
//! per-run bound verdicts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gp::{GpModel, KernelParams};
use crate::par::maybe_par_map;
use crate::vs_core::VariableIndexSet;

const GRID_CAP: usize = 100_000;

/// A regular grid over `[0, upper]^dims` with `resolution` points per axis.
#[derive(Debug, Clone)]
pub struct GridWorld {
    pub dims: usize,
    pub resolution: usize,
    pub upper: f64,
    pub kernel: KernelParams,
}

impl GridWorld {
    pub fn new(dims: usize, resolution: usize, upper: f64, kernel: KernelParams) -> Result<Self> {
        kernel.validate()?;
        if dims == 0 || dims > 4 {
            return Err(Error::Argument("grid dimension must be in 1..=4".into()));
        }
        if resolution < 2 {
            return Err(Error::Argument("grid resolution must be at least 2".into()));
        }
        if upper <= 0.0 {
            return Err(Error::Argument("domain upper bound must be positive".into()));
        }
        let total = resolution.checked_pow(dims as u32).unwrap_or(usize::MAX);
        if total > GRID_CAP {
            return Err(Error::Resource(format!(
                "{resolution}^{dims} = {total} grid points exceed the cap of {GRID_CAP}"
            )));
        }
        Ok(GridWorld {
            dims,
            resolution,
            upper,
            kernel,
        })
    }

    pub fn total_points(&self) -> usize {
        self.resolution.pow(self.dims as u32)
    }

    pub fn step(&self) -> f64 {
        self.upper / (self.resolution - 1) as f64
    }

    fn axis_value(&self, stratum: usize) -> f64 {
        stratum as f64 * self.step()
    }

    /// Grid coordinates of a flat index (axis 0 most significant).
    pub fn point(&self, index: usize) -> Vec<f64> {
        let mut rem = index;
        let mut strata = vec![0usize; self.dims];
        for j in (0..self.dims).rev() {
            strata[j] = rem % self.resolution;
            rem /= self.resolution;
        }
        strata.into_iter().map(|s| self.axis_value(s)).collect()
    }

    fn stride(&self, axis: usize) -> usize {
        self.resolution.pow((self.dims - 1 - axis) as u32)
    }

    fn flat_index(&self, strata: &[usize]) -> usize {
        strata
            .iter()
            .enumerate()
            .map(|(axis, &s)| s * self.stride(axis))
            .sum()
    }
}

/// A function tabulated on every grid point, with its maximum recorded.
#[derive(Debug, Clone)]
pub struct SampledFunction {
    pub values: Vec<f64>,
    pub max_value: f64,
    pub argmax: usize,
}

impl SampledFunction {
    fn from_values(values: Vec<f64>) -> Self {
        let (argmax, max_value) = values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
        SampledFunction {
            values,
            max_value,
            argmax,
        }
    }

    /// Tabulate an explicit function on the grid.
    pub fn tabulate(world: &GridWorld, f: impl Fn(&[f64]) -> f64) -> Self {
        let values: Vec<f64> = (0..world.total_points())
            .map(|i| f(&world.point(i)))
            .collect();
        Self::from_values(values)
    }
}

/// Exact joint draw of a GP sample path on the grid, via Cholesky of the
/// full grid covariance (noiseless kernel plus jitter).
pub fn sample_gp_function(world: &GridWorld, rng: &mut impl Rng) -> Result<SampledFunction> {
    let g = world.total_points();
    let points: Vec<Vec<f64>> = (0..g).map(|i| world.point(i)).collect();
    let inv2l2 = 1.0 / (2.0 * world.kernel.length_scale * world.kernel.length_scale);
    let mut cov = nalgebra::DMatrix::zeros(g, g);
    for i in 0..g {
        for j in 0..=i {
            let s: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let v = world.kernel.signal_variance * (-s * inv2l2).exp();
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
        cov[(i, i)] += 1e-10 * world.kernel.signal_variance;
    }
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Numeric("grid covariance is not positive definite".into()))?;
    let z = nalgebra::DVector::from_iterator(
        g,
        (0..g).map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)),
    );
    let values = chol.unpack() * z;
    Ok(SampledFunction::from_values(values.iter().copied().collect()))
}

/// Realized per-dimension Lipschitz products: the largest absolute forward
/// finite difference along each axis, divided by the grid step. Returns the
/// vector and its maximum.
pub fn estimate_alpha_star(f: &SampledFunction, world: &GridWorld) -> (Vec<f64>, f64) {
    let tau = world.resolution;
    let h = world.step();
    let mut alpha = vec![0.0f64; world.dims];
    for index in 0..world.total_points() {
        let mut rem = index;
        let mut strata = vec![0usize; world.dims];
        for j in (0..world.dims).rev() {
            strata[j] = rem % tau;
            rem /= tau;
        }
        for axis in 0..world.dims {
            if strata[axis] + 1 < tau {
                let neighbor = index + world.stride(axis);
                let slope = (f.values[neighbor] - f.values[index]).abs() / h;
                if slope > alpha[axis] {
                    alpha[axis] = slope;
                }
            }
        }
    }
    let max = alpha.iter().copied().fold(0.0, f64::max);
    (alpha, max)
}

/// Nominal constants of the Lipschitz tail assumption plus the confidence
/// level; everything else in the bound is realized from the run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundParams {
    pub delta: f64,
    pub a: f64,
    pub b: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Argument("delta must lie in (0,1)".into()));
        }
        if self.a <= 0.0 || self.b <= 0.0 {
            return Err(Error::Argument("a and b must be positive".into()));
        }
        Ok(())
    }

    /// L = b sqrt(log(4 D a / delta)).
    pub fn lipschitz_scale(&self, dims: usize) -> f64 {
        self.b * (4.0 * dims as f64 * self.a / self.delta).ln().sqrt()
    }
}

/// The pi_t schedule: pi^2 t^2 / 6, whose reciprocals sum to one.
pub fn pi_schedule(t: usize) -> f64 {
    let t = t as f64;
    std::f64::consts::PI.powi(2) * t * t / 6.0
}

/// beta_t = 2 log(4 pi_t / delta)
///        + 2 d_t log(d_t t^2 b r sqrt(log(4 D a / delta))).
pub fn beta_t(t: usize, d_t: usize, params: &BoundParams, dims: usize, upper: f64) -> f64 {
    let tail = (4.0 * dims as f64 * params.a / params.delta).ln().sqrt();
    let inner = d_t as f64 * (t as f64).powi(2) * params.b * upper * tail;
    2.0 * (4.0 * pi_schedule(t) / params.delta).ln() + 2.0 * d_t as f64 * inner.ln()
}

/// Per-iteration source of the selected variable index set.
#[derive(Debug, Clone)]
pub enum SelectionPolicy {
    /// Always select every variable.
    Full,
    /// Always select the same subset.
    Fixed(VariableIndexSet),
    /// A fresh uniformly random subset of the given size each iteration.
    UniformRandom(usize),
}

impl SelectionPolicy {
    fn select(&self, dims: usize, rng: &mut impl Rng) -> Result<VariableIndexSet> {
        match self {
            SelectionPolicy::Full => Ok(VariableIndexSet::full(dims)),
            SelectionPolicy::Fixed(set) => {
                if set.indices().last().is_some_and(|&i| i >= dims) {
                    return Err(Error::Argument("fixed policy set exceeds the grid dimension".into()));
                }
                Ok(set.clone())
            }
            SelectionPolicy::UniformRandom(d) => {
                if *d == 0 || *d > dims {
                    return Err(Error::Argument(format!("policy subset size {d} not in 1..={dims}")));
                }
                VariableIndexSet::new(rand::seq::index::sample(rng, dims, *d).into_vec(), dims)
            }
        }
    }
}

/// One iteration of the GP-UCB variable-selection trace.
#[derive(Debug, Clone, Serialize)]
pub struct RegretStep {
    pub t: usize,
    pub selected: Vec<usize>,
    pub evaluated_index: usize,
    pub regret: f64,
    /// Posterior standard deviation at the chosen point, before observing it.
    pub sigma_before: f64,
    pub beta: f64,
    pub cumulative_regret: f64,
    /// log(1 + sigma^2 / eta^2), the realized information-gain increment.
    pub info_gain_term: f64,
}

/// Full trace of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RegretTrace {
    pub steps: Vec<RegretStep>,
    pub total_regret: f64,
    pub f_max: f64,
}

/// GP-UCB over the grid restricted to the policy's per-iteration subset,
/// with pessimistic completion: evaluation returns the minimum of `f` over
/// all grid points agreeing with the chosen subspace coordinates.
pub fn gp_ucb_vs_run(
    world: &GridWorld,
    f: &SampledFunction,
    policy: &SelectionPolicy,
    horizon: usize,
    params: &BoundParams,
    rng: &mut impl Rng,
) -> Result<RegretTrace> {
    params.validate()?;
    if horizon == 0 {
        return Err(Error::Argument("horizon must be at least 1".into()));
    }
    let tau = world.resolution;
    let mut history: Vec<(usize, f64)> = Vec::new(); // (flat grid index, observation)
    let mut steps = Vec::with_capacity(horizon);
    let mut cumulative = 0.0;

    for t in 1..=horizon {
        let selected = policy.select(world.dims, rng)?;
        let d_t = selected.len();
        let beta = beta_t(t, d_t, params, world.dims, world.upper);

        // Subspace grid points, lexicographic over the selected axes.
        let sub_total = tau.pow(d_t as u32);
        let sub_strata = |mut idx: usize| -> Vec<usize> {
            let mut s = vec![0usize; d_t];
            for j in (0..d_t).rev() {
                s[j] = idx % tau;
                idx /= tau;
            }
            s
        };
        let sub_points: Vec<Vec<f64>> = (0..sub_total)
            .map(|i| sub_strata(i).into_iter().map(|s| world.axis_value(s)).collect())
            .collect();

        let projected: Vec<(Vec<f64>, f64)> = history
            .iter()
            .map(|&(idx, y)| {
                let full = world.point(idx);
                (selected.project(&full), y)
            })
            .collect();
        let model = GpModel::with_params(world.kernel, &projected)?;
        let posts = model.posterior_batch(&sub_points);
        let (choice, _) = posts
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &(mean, var))| {
                let u = crate::acquisition::gp_ucb_value(mean, var, beta);
                if u > bv {
                    (i, u)
                } else {
                    (bi, bv)
                }
            });
        let sigma_before = posts[choice].1.sqrt();

        // Pessimistic completion: scan the complement combinations.
        let chosen = sub_strata(choice);
        let complement: Vec<usize> = (0..world.dims)
            .filter(|i| !selected.contains(*i))
            .collect();
        let mut base = vec![0usize; world.dims];
        for (k, &axis) in selected.indices().iter().enumerate() {
            base[axis] = chosen[k];
        }
        let mut worst = (f64::INFINITY, 0usize);
        let comp_total = tau.pow(complement.len() as u32);
        for c in 0..comp_total {
            let mut rem = c;
            let mut strata = base.clone();
            for &axis in complement.iter().rev() {
                strata[axis] = rem % tau;
                rem /= tau;
            }
            let idx = world.flat_index(&strata);
            if f.values[idx] < worst.0 {
                worst = (f.values[idx], idx);
            }
        }
        let (y, evaluated_index) = worst;

        let regret = f.max_value - y;
        cumulative += regret;
        let eta2 = world.kernel.noise_variance;
        steps.push(RegretStep {
            t,
            selected: selected.indices().to_vec(),
            evaluated_index,
            regret,
            sigma_before,
            beta,
            cumulative_regret: cumulative,
            info_gain_term: (1.0 + sigma_before * sigma_before / eta2).ln(),
        });
        history.push((evaluated_index, y));
    }

    Ok(RegretTrace {
        steps,
        total_regret: cumulative,
        f_max: f.max_value,
    })
}

/// The third bound term 2 sum_t sum_{i not in M_t} alphaL_i r.
pub fn alpha_term(steps: &[RegretStep], alpha_l: &[f64], dims: usize, upper: f64) -> f64 {
    2.0 * steps
        .iter()
        .map(|step| {
            (0..dims)
                .filter(|i| !step.selected.contains(i))
                .map(|i| alpha_l[i] * upper)
                .sum::<f64>()
        })
        .sum::<f64>()
}

/// Verdict of the two bound checks on one run.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub total_regret: f64,
    /// sum_t 2 beta_t^{1/2} sigma_{t-1}(x_t).
    pub ucb_term: f64,
    /// 2 alpha_max (discretization remainder).
    pub discretization_term: f64,
    /// 2 sum_t sum_{i not in M_t} alphaL_i r.
    pub alpha_term: f64,
    /// Summed per-iteration inequality with realized posterior widths.
    pub check_summed_holds: bool,
    /// Realized information-gain surrogate sum_t log(1 + sigma^2/eta^2).
    pub gamma_surrogate: f64,
    pub beta_star: f64,
    /// Closed-form bound with the surrogate in place of the information
    /// gain; informational only.
    pub check_closed_form_value: f64,
    pub check_closed_form_holds: bool,
}

/// Evaluate both bound checks on a completed trace. `alpha_l` are realized
/// Lipschitz products; the standalone `alpha_max` needed by the
/// discretization term is recovered through the nominal scale L.
pub fn bound_check(
    trace: &RegretTrace,
    params: &BoundParams,
    alpha_l: &[f64],
    alpha_max_l: f64,
    world: &GridWorld,
) -> BoundReport {
    let ucb_term: f64 = trace
        .steps
        .iter()
        .map(|s| 2.0 * s.beta.sqrt() * s.sigma_before)
        .sum();
    let big_l = params.lipschitz_scale(world.dims);
    let discretization_term = 2.0 * alpha_max_l / big_l;
    let alpha_term = alpha_term(&trace.steps, alpha_l, world.dims, world.upper);
    let check_summed_holds = trace.total_regret <= ucb_term + discretization_term + alpha_term;

    let gamma_surrogate: f64 = trace.steps.iter().map(|s| s.info_gain_term).sum();
    let beta_star = trace.steps.iter().map(|s| s.beta).fold(0.0, f64::max);
    let eta2 = world.kernel.noise_variance;
    let c1 = 8.0 / (1.0 + 1.0 / eta2).ln();
    let t = trace.steps.len() as f64;
    let check_closed_form_value =
        (c1 * t * beta_star * gamma_surrogate).sqrt() + discretization_term + alpha_term;
    let check_closed_form_holds = trace.total_regret <= check_closed_form_value;

    BoundReport {
        total_regret: trace.total_regret,
        ucb_term,
        discretization_term,
        alpha_term,
        check_summed_holds,
        gamma_surrogate,
        beta_star,
        check_closed_form_value,
        check_closed_form_holds,
    }
}

/// Result of one sampled-path run inside a study.
#[derive(Debug, Clone, Serialize)]
pub struct StudyRun {
    pub seed: u64,
    pub report: BoundReport,
}

/// Aggregate over many independent sampled functions.
#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub runs: Vec<StudyRun>,
    pub summed_check_successes: usize,
    pub summed_check_fraction: f64,
    pub closed_form_successes: usize,
}

/// Run `runs` independent sampled-path experiments (parallel when enabled)
/// and report per-run bound verdicts.
pub fn run_study(
    world: &GridWorld,
    policy: &SelectionPolicy,
    horizon: usize,
    params: &BoundParams,
    runs: usize,
    base_seed: u64,
) -> Result<StudyReport> {
    params.validate()?;
    let seeds: Vec<u64> = (0..runs as u64).map(|i| base_seed.wrapping_add(i)).collect();
    let outcomes = maybe_par_map(&seeds, |&seed| -> Result<StudyRun> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = sample_gp_function(world, &mut rng)?;
        let trace = gp_ucb_vs_run(world, &f, policy, horizon, params, &mut rng)?;
        let (alpha_l, alpha_max_l) = estimate_alpha_star(&f, world);
        let report = bound_check(&trace, params, &alpha_l, alpha_max_l, world);
        Ok(StudyRun { seed, report })
    });
    let runs: Vec<StudyRun> = outcomes.into_iter().collect::<Result<_>>()?;
    let summed = runs.iter().filter(|r| r.report.check_summed_holds).count();
    let closed = runs.iter().filter(|r| r.report.check_closed_form_holds).count();
    let fraction = summed as f64 / runs.len().max(1) as f64;
    Ok(StudyReport {
        runs,
        summed_check_successes: summed,
        summed_check_fraction: fraction,
        closed_form_successes: closed,
    })
}
