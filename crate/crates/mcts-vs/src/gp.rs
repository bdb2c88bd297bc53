//! Gaussian-process regression with an isotropic squared-exponential kernel.
//!
//! Hyperparameters are fitted by multi-start projected gradient ascent on the
//! log marginal likelihood, in log-parameter space. Inference is exact via
//! Cholesky factorization of K + eta^2 I.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::par::{maybe_par_map, seq_map};

/// Lower bound on the noise variance, in standardized-target units.
pub const NOISE_FLOOR: f64 = 1e-6;

// Log-space search box: length_scale and signal_variance in [1e-2, 1e2],
// noise variance in [NOISE_FLOOR, 1].
const LOG_BOUNDS: [(f64, f64); 3] = [
    (-4.605170185988091, 4.605170185988092), // ln 1e-2 .. ln 1e2
    (-4.605170185988091, 4.605170185988092),
    (-13.815510557964274, 0.0), // ln 1e-6 .. ln 1
];

/// Kernel hyperparameters of the squared-exponential kernel
/// k(x, x') = signal_variance * exp(-|x - x'|^2 / (2 length_scale^2)),
/// plus the observation noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub length_scale: f64,
    pub noise_variance: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            signal_variance: 1.0,
            length_scale: 0.5,
            noise_variance: 1e-4,
        }
    }
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance > 0.0 && self.length_scale > 0.0 && self.noise_variance > 0.0) {
            return Err(Error::Argument(format!("kernel parameters must be positive: {self:?}")));
        }
        Ok(())
    }

    fn to_log(self) -> [f64; 3] {
        [
            self.signal_variance.ln(),
            self.length_scale.ln(),
            self.noise_variance.ln(),
        ]
    }

    fn from_log(p: &[f64; 3]) -> Self {
        KernelParams {
            signal_variance: p[0].exp(),
            length_scale: p[1].exp(),
            noise_variance: p[2].exp(),
        }
    }

    fn clamped_to_bounds(self) -> [f64; 3] {
        let mut p = self.to_log();
        for (v, (lo, hi)) in p.iter_mut().zip(LOG_BOUNDS) {
            *v = v.clamp(lo, hi);
        }
        p
    }
}

/// Knobs of the hyperparameter search. `restarts` is the number of random
/// initializations on top of the warm start.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_steps: usize,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 3,
            max_steps: 12,
            tol: 3e-6,
        }
    }
}

/// Squared-distance matrix of the rows of `x`.
pub fn sqdist_matrix(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let rows: Vec<usize> = (0..n).collect();
    let cols = maybe_par_map(&rows, |&i| sqdist_row(x, i));
    assemble_sqdist(n, cols)
}

/// Sequential reference path for [`sqdist_matrix`], kept for benchmarks.
pub fn sqdist_matrix_seq(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let rows: Vec<usize> = (0..n).collect();
    let cols = seq_map(&rows, |&i| sqdist_row(x, i));
    assemble_sqdist(n, cols)
}

fn sqdist_row(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    let n = x.nrows();
    let d = x.ncols();
    let mut row = vec![0.0; n];
    for (j, rj) in row.iter_mut().enumerate().take(i) {
        let mut s = 0.0;
        for k in 0..d {
            let diff = x[(i, k)] - x[(j, k)];
            s += diff * diff;
        }
        *rj = s;
    }
    row
}

fn assemble_sqdist(n: usize, rows: Vec<Vec<f64>>) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for j in 0..i {
            s[(i, j)] = row[j];
            s[(j, i)] = row[j];
        }
    }
    s
}

/// A fitted GP. Immutable; posterior queries may run concurrently.
#[derive(Debug, Clone)]
pub struct GpModel {
    params: KernelParams,
    train_x: DMatrix<f64>,
    train_y: DVector<f64>, // standardized targets
    y_mean: f64,
    y_std: f64,
    chol_l: DMatrix<f64>,
    alpha: DVector<f64>, // (K + eta^2 I)^{-1} y
}

impl GpModel {
    /// Model with no training data: posterior is the prior.
    pub fn prior(params: KernelParams) -> Result<Self> {
        params.validate()?;
        Ok(GpModel {
            params,
            train_x: DMatrix::zeros(0, 0),
            train_y: DVector::zeros(0),
            y_mean: 0.0,
            y_std: 1.0,
            chol_l: DMatrix::zeros(0, 0),
            alpha: DVector::zeros(0),
        })
    }

    /// Condition on data with fixed hyperparameters and no target
    /// standardization (zero-mean prior in the original scale).
    pub fn with_params(params: KernelParams, points: &[(Vec<f64>, f64)]) -> Result<Self> {
        params.validate()?;
        if points.is_empty() {
            return Self::prior(params);
        }
        let (x, y) = to_matrix(points)?;
        let s = sqdist_matrix(&x);
        let (chol_l, alpha, _) = factorize(&params, &s, &y)?;
        Ok(GpModel {
            params,
            train_x: x,
            train_y: y,
            y_mean: 0.0,
            y_std: 1.0,
            chol_l,
            alpha,
        })
    }

    /// Fit hyperparameters by maximizing the log marginal likelihood over
    /// `budget` random starts plus the warm start (previous-iteration params
    /// or the default). Inputs are expected in the unit cube; targets are
    /// standardized internally.
    pub fn fit(
        points: &[(Vec<f64>, f64)],
        budget: usize,
        warm: Option<KernelParams>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Self::fit_with_options(
            points,
            FitOptions {
                restarts: budget,
                ..FitOptions::default()
            },
            warm,
            rng,
        )
        .map(|r| r.model)
    }

    pub fn fit_with_options(
        points: &[(Vec<f64>, f64)],
        opts: FitOptions,
        warm: Option<KernelParams>,
        rng: &mut impl Rng,
    ) -> Result<FitReport> {
        Self::fit_impl(points, opts, warm, rng, true)
    }

    /// Sequential reference path for [`fit_with_options`], kept for
    /// benchmarks.
    pub fn fit_with_options_seq(
        points: &[(Vec<f64>, f64)],
        opts: FitOptions,
        warm: Option<KernelParams>,
        rng: &mut impl Rng,
    ) -> Result<FitReport> {
        Self::fit_impl(points, opts, warm, rng, false)
    }

    fn fit_impl(
        points: &[(Vec<f64>, f64)],
        opts: FitOptions,
        warm: Option<KernelParams>,
        rng: &mut impl Rng,
        parallel: bool,
    ) -> Result<FitReport> {
        if points.is_empty() {
            return Err(Error::Argument("cannot fit a GP on an empty point set".into()));
        }
        let (x, y_raw) = to_matrix(points)?;
        let n = points.len();

        let y_mean = y_raw.sum() / n as f64;
        let variance = y_raw.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_std = if variance.sqrt() > 1e-12 { variance.sqrt() } else { 1.0 };
        let y = y_raw.map(|v| (v - y_mean) / y_std);

        let s = sqdist_matrix(&x);

        // Warm start first, then random starts; all rng draws happen before
        // the (possibly parallel) ascents so results are scheduling-free.
        let mut starts: Vec<[f64; 3]> = vec![warm.unwrap_or_default().clamped_to_bounds()];
        for _ in 0..opts.restarts {
            let mut p = [0.0; 3];
            for (v, (lo, hi)) in p.iter_mut().zip(LOG_BOUNDS) {
                *v = rng.random_range(lo..hi);
            }
            starts.push(p);
        }

        let outcomes = if parallel {
            maybe_par_map(&starts, |p0| ascend(*p0, &s, &y, &opts))
        } else {
            seq_map(&starts, |p0| ascend(*p0, &s, &y, &opts))
        };

        let start_lmls: Vec<f64> = outcomes.iter().map(|(_, l)| *l).collect();
        let (best_idx, best_lml) = start_lmls
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bl), (i, &l)| {
                if l > bl {
                    (i, l)
                } else {
                    (bi, bl)
                }
            });
        if !best_lml.is_finite() {
            return Err(Error::Numeric("no hyperparameter start produced a valid factorization".into()));
        }
        let params = KernelParams::from_log(&outcomes[best_idx].0);
        let (chol_l, alpha, _) = factorize(&params, &s, &y)?;
        Ok(FitReport {
            model: GpModel {
                params,
                train_x: x,
                train_y: y,
                y_mean,
                y_std,
                chol_l,
                alpha,
            },
            start_lmls,
        })
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn len(&self) -> usize {
        self.train_x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Exact posterior mean and variance at `x`, in original target units.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let (mean, var) = self.posterior_std(x);
        (
            self.y_mean + self.y_std * mean,
            self.y_std * self.y_std * var,
        )
    }

    fn posterior_std(&self, x: &[f64]) -> (f64, f64) {
        let n = self.len();
        if n == 0 {
            return (0.0, self.params.signal_variance);
        }
        let k = self.cross_column(x);
        let mean = k.dot(&self.alpha);
        let v = self
            .chol_l
            .solve_lower_triangular(&k)
            .expect("triangular solve on a Cholesky factor");
        let var = (self.params.signal_variance - v.norm_squared()).max(0.0);
        (mean, var)
    }

    /// Posterior at many points; parallel over chunks with the `parallel`
    /// feature, identical output either way.
    pub fn posterior_batch(&self, xs: &[Vec<f64>]) -> Vec<(f64, f64)> {
        let chunks = chunk_ranges(xs.len(), 256);
        let parts = maybe_par_map(&chunks, |r| self.posterior_chunk(&xs[r.0..r.1]));
        parts.into_iter().flatten().collect()
    }

    /// Sequential reference path for [`posterior_batch`], kept for benchmarks.
    pub fn posterior_batch_seq(&self, xs: &[Vec<f64>]) -> Vec<(f64, f64)> {
        let chunks = chunk_ranges(xs.len(), 256);
        let parts = seq_map(&chunks, |r| self.posterior_chunk(&xs[r.0..r.1]));
        parts.into_iter().flatten().collect()
    }

    fn posterior_chunk(&self, xs: &[Vec<f64>]) -> Vec<(f64, f64)> {
        let n = self.len();
        if n == 0 || xs.is_empty() {
            return xs
                .iter()
                .map(|_| (self.y_mean, self.y_std * self.y_std * self.params.signal_variance))
                .collect();
        }
        let m = xs.len();
        let mut kstar = DMatrix::zeros(n, m);
        for (j, x) in xs.iter().enumerate() {
            kstar.set_column(j, &self.cross_column(x));
        }
        let v = self
            .chol_l
            .solve_lower_triangular(&kstar)
            .expect("triangular solve on a Cholesky factor");
        (0..m)
            .map(|j| {
                let mean = kstar.column(j).dot(&self.alpha);
                let var = (self.params.signal_variance - v.column(j).norm_squared()).max(0.0);
                (
                    self.y_mean + self.y_std * mean,
                    self.y_std * self.y_std * var,
                )
            })
            .collect()
    }

    fn cross_column(&self, x: &[f64]) -> DVector<f64> {
        let n = self.len();
        let d = self.train_x.ncols();
        assert_eq!(x.len(), d, "query dimension mismatch");
        let inv2l2 = 1.0 / (2.0 * self.params.length_scale * self.params.length_scale);
        DVector::from_fn(n, |i, _| {
            let mut s = 0.0;
            for k in 0..d {
                let diff = self.train_x[(i, k)] - x[k];
                s += diff * diff;
            }
            self.params.signal_variance * (-s * inv2l2).exp()
        })
    }

    /// Log marginal likelihood of the stored (standardized) data.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len();
        let quad = self.train_y.dot(&self.alpha);
        let logdet: f64 = (0..n).map(|i| self.chol_l[(i, i)].ln()).sum();
        -0.5 * quad - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    /// Gradient of the log marginal likelihood with respect to the log
    /// kernel parameters (ln signal_variance, ln length_scale, ln noise).
    pub fn lml_gradient_log(&self) -> [f64; 3] {
        let s = sqdist_matrix(&self.train_x);
        let p = self.params.to_log();
        lml_value_grad(&p, &s, &self.train_y)
            .expect("gradient at parameters that already factorized")
            .1
    }
}

/// Result of a hyperparameter fit: the chosen model plus the converged log
/// marginal likelihood of every start (warm start first).
#[derive(Debug)]
pub struct FitReport {
    pub model: GpModel,
    pub start_lmls: Vec<f64>,
}

fn to_matrix(points: &[(Vec<f64>, f64)]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = points.len();
    let d = points[0].0.len();
    if d == 0 {
        return Err(Error::Data("points must have at least one coordinate".into()));
    }
    let mut x = DMatrix::zeros(n, d);
    let mut y = DVector::zeros(n);
    for (i, (xi, yi)) in points.iter().enumerate() {
        if xi.len() != d {
            return Err(Error::Data(format!(
                "point {i} has {} coordinates, expected {d}",
                xi.len()
            )));
        }
        if !yi.is_finite() {
            return Err(Error::Data(format!("non-finite target at point {i}: {yi}")));
        }
        for (k, &v) in xi.iter().enumerate() {
            x[(i, k)] = v;
        }
        y[i] = *yi;
    }
    Ok((x, y))
}

fn build_gram(params: &KernelParams, s: &DMatrix<f64>) -> DMatrix<f64> {
    let n = s.nrows();
    let inv2l2 = 1.0 / (2.0 * params.length_scale * params.length_scale);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = params.signal_variance * (-s[(i, j)] * inv2l2).exp();
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
        a[(i, i)] += params.noise_variance;
    }
    a
}

fn factorize(
    params: &KernelParams,
    s: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>, f64)> {
    let n = s.nrows();
    let a = build_gram(params, s);
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Numeric("Cholesky factorization failed".into()))?;
    let alpha = chol.solve(y);
    let l = chol.unpack();
    let logdet: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
    let lml = -0.5 * y.dot(&alpha) - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    Ok((l, alpha, lml))
}

struct AscentEval {
    value: f64,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    alpha: DVector<f64>,
}

fn evaluate_point(p: &[f64; 3], s: &DMatrix<f64>, y: &DVector<f64>) -> Option<AscentEval> {
    let params = KernelParams::from_log(p);
    let n = s.nrows();
    let a = build_gram(&params, s);
    let chol = a.cholesky()?;
    let alpha = chol.solve(y);
    let l = chol.l_dirty();
    let logdet: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
    let value = -0.5 * y.dot(&alpha) - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    Some(AscentEval { value, chol, alpha })
}

// d lml / d theta = 0.5 tr((alpha alpha^T - A^{-1}) dA/dtheta), with
// dA/d(ln sf2) = K, dA/d(ln l) = K .* S / l^2, dA/d(ln eta2) = eta2 I.
fn gradient_at(p: &[f64; 3], s: &DMatrix<f64>, eval: &AscentEval) -> [f64; 3] {
    let params = KernelParams::from_log(p);
    let n = s.nrows();
    let a_inv = eval.chol.inverse();
    let alpha = &eval.alpha;
    let inv2l2 = 1.0 / (2.0 * params.length_scale * params.length_scale);
    let inv_l2 = 1.0 / (params.length_scale * params.length_scale);
    let mut quad_k = 0.0;
    let mut quad_ks = 0.0;
    let mut tr_k = 0.0;
    let mut tr_ks = 0.0;
    for i in 0..n {
        for j in 0..n {
            let knl = params.signal_variance * (-s[(i, j)] * inv2l2).exp();
            let aa = alpha[i] * alpha[j];
            let ai = a_inv[(i, j)];
            quad_k += aa * knl;
            quad_ks += aa * knl * s[(i, j)];
            tr_k += ai * knl;
            tr_ks += ai * knl * s[(i, j)];
        }
    }
    let tr_ainv: f64 = (0..n).map(|i| a_inv[(i, i)]).sum();
    [
        0.5 * (quad_k - tr_k),
        0.5 * (quad_ks - tr_ks) * inv_l2,
        0.5 * params.noise_variance * (alpha.norm_squared() - tr_ainv),
    ]
}

fn lml_value_grad(p: &[f64; 3], s: &DMatrix<f64>, y: &DVector<f64>) -> Option<(f64, [f64; 3])> {
    let eval = evaluate_point(p, s, y)?;
    let grad = gradient_at(p, s, &eval);
    Some((eval.value, grad))
}

/// Projected gradient ascent with adaptive step, in log-parameter space.
/// The Cholesky factor of each accepted point is reused for its gradient.
fn ascend(p0: [f64; 3], s: &DMatrix<f64>, y: &DVector<f64>, opts: &FitOptions) -> ([f64; 3], f64) {
    let mut p = p0;
    let Some(mut current) = evaluate_point(&p, s, y) else {
        return (p0, f64::NEG_INFINITY);
    };
    let mut grad = gradient_at(&p, s, &current);
    let mut step = 0.1;
    for _ in 0..opts.max_steps {
        let mut accepted = None;
        for _ in 0..12 {
            let mut q = p;
            for k in 0..3 {
                q[k] = (q[k] + step * grad[k]).clamp(LOG_BOUNDS[k].0, LOG_BOUNDS[k].1);
            }
            if q == p {
                break;
            }
            if let Some(e) = evaluate_point(&q, s, y) {
                if e.value > current.value {
                    accepted = Some((q, e));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((q, e)) = accepted else { break };
        let gain = e.value - current.value;
        p = q;
        current = e;
        if gain < opts.tol * (1.0 + current.value.abs()) {
            break;
        }
        step *= 1.5;
        grad = gradient_at(&p, s, &current);
    }
    (p, current.value)
}

fn chunk_ranges(len: usize, chunk: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < len {
        let end = (start + chunk).min(len);
        out.push((start, end));
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn kernel(params: &KernelParams, a: &[f64], b: &[f64]) -> f64 {
        let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        params.signal_variance * (-s / (2.0 * params.length_scale * params.length_scale)).exp()
    }

    /// Direct dense-inverse oracle for posterior and log marginal likelihood.
    fn dense_oracle(
        params: &KernelParams,
        points: &[(Vec<f64>, f64)],
        query: &[f64],
    ) -> (f64, f64, f64) {
        let n = points.len();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = kernel(params, &points[i].0, &points[j].0);
            }
            a[(i, i)] += params.noise_variance;
        }
        let a_inv = a.clone().try_inverse().unwrap();
        let y = DVector::from_iterator(n, points.iter().map(|(_, y)| *y));
        let k = DVector::from_iterator(n, points.iter().map(|(x, _)| kernel(params, x, query)));
        let mean = k.dot(&(&a_inv * &y));
        let var = params.signal_variance - k.dot(&(&a_inv * &k));
        let lml = -0.5 * y.dot(&(&a_inv * &y))
            - 0.5 * a.determinant().ln()
            - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        (mean, var, lml)
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<(Vec<f64>, f64)> {
        (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                let y = rng.random_range(-2.0..2.0);
                (x, y)
            })
            .collect()
    }

    #[test]
    fn single_point_closed_form() {
        let params = KernelParams {
            signal_variance: 1.5,
            length_scale: 0.3,
            noise_variance: 0.2,
        };
        let y = 0.8;
        let model = GpModel::with_params(params, &[(vec![0.4, 0.6], y)]).unwrap();
        let (mean, _) = model.posterior(&[0.4, 0.6]);
        let expected = params.signal_variance / (params.signal_variance + params.noise_variance) * y;
        assert!((mean - expected).abs() < 1e-12, "{mean} vs {expected}");
    }

    #[test]
    fn lml_single_point_closed_form() {
        let params = KernelParams {
            signal_variance: 2.0,
            length_scale: 0.5,
            noise_variance: 0.3,
        };
        let model = GpModel::with_params(params, &[(vec![0.2], 0.0)]).unwrap();
        let expected = -0.5 * (params.signal_variance + params.noise_variance).ln()
            - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((model.log_marginal_likelihood() - expected).abs() < 1e-12);
    }

    #[test]
    fn posterior_matches_dense_inverse_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n in 1..=5 {
            let params = KernelParams {
                signal_variance: rng.random_range(0.5..2.0),
                length_scale: rng.random_range(0.2..1.0),
                noise_variance: rng.random_range(0.01..0.2),
            };
            let points = random_points(&mut rng, n, 3);
            let model = GpModel::with_params(params, &points).unwrap();
            for _ in 0..5 {
                let q: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
                let (mean, var) = model.posterior(&q);
                let (om, ov, _) = dense_oracle(&params, &points, &q);
                assert!((mean - om).abs() < 1e-8, "mean {mean} vs {om}");
                assert!((var - ov.max(0.0)).abs() < 1e-8, "var {var} vs {ov}");
            }
            let (_, _, olml) = dense_oracle(&params, &points, &[0.0; 3]);
            assert!((model.log_marginal_likelihood() - olml).abs() < 1e-8);
        }
    }

    #[test]
    fn lml_scaling_follows_quadratic_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = KernelParams {
            signal_variance: 1.0,
            length_scale: 0.4,
            noise_variance: 0.1,
        };
        let points = random_points(&mut rng, 4, 2);
        let scaled: Vec<(Vec<f64>, f64)> =
            points.iter().map(|(x, y)| (x.clone(), 3.0 * y)).collect();
        let m1 = GpModel::with_params(params, &points).unwrap();
        let m2 = GpModel::with_params(params, &scaled).unwrap();
        let (_, _, l1) = dense_oracle(&params, &points, &[0.0; 2]);
        let (_, _, l2) = dense_oracle(&params, &scaled, &[0.0; 2]);
        assert!((m1.log_marginal_likelihood() - l1).abs() < 1e-8);
        assert!((m2.log_marginal_likelihood() - l2).abs() < 1e-8);
        // Difference is confined to the quadratic form.
        let quad = m1.log_marginal_likelihood() - m2.log_marginal_likelihood();
        let oracle_quad = l1 - l2;
        assert!((quad - oracle_quad).abs() < 1e-8);
    }

    #[test]
    fn prior_posterior() {
        let params = KernelParams::default();
        let model = GpModel::prior(params).unwrap();
        let (mean, var) = model.posterior(&[0.3, 0.3]);
        assert_eq!(mean, 0.0);
        assert_eq!(var, params.signal_variance);
    }

    #[test]
    fn near_interpolation_at_noise_floor() {
        let params = KernelParams {
            signal_variance: 1.0,
            length_scale: 0.15,
            noise_variance: NOISE_FLOOR,
        };
        let points = vec![
            (vec![0.1, 0.9], 0.5),
            (vec![0.5, 0.2], -0.3),
            (vec![0.9, 0.6], 0.9),
        ];
        let model = GpModel::with_params(params, &points).unwrap();
        for (x, y) in &points {
            let (mean, _) = model.posterior(x);
            assert!((mean - y).abs() < 1e-6, "{mean} vs {y}");
        }
    }

    #[test]
    fn duplicate_inputs_survive_via_jitter() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let points = vec![(vec![0.5, 0.5], 1.0), (vec![0.5, 0.5], 1.0)];
        let report = GpModel::fit_with_options(
            &points,
            FitOptions::default(),
            None,
            &mut rng,
        )
        .unwrap();
        assert!(report.model.params().noise_variance >= NOISE_FLOOR);
    }

    #[test]
    fn fit_is_argmax_over_starts() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let points = random_points(&mut rng, 12, 2);
        let report =
            GpModel::fit_with_options(&points, FitOptions::default(), None, &mut rng).unwrap();
        let best = report.model.log_marginal_likelihood();
        for &l in &report.start_lmls {
            assert!(best >= l - 1e-9, "best {best} < start {l}");
        }
    }

    #[test]
    fn fit_rejects_bad_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(matches!(
            GpModel::fit(&[], 3, None, &mut rng),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            GpModel::fit(&[(vec![0.1], f64::NAN)], 3, None, &mut rng),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for n in [2usize, 5, 10] {
            let params = KernelParams {
                signal_variance: 1.3,
                length_scale: 0.45,
                noise_variance: 0.05,
            };
            let points = random_points(&mut rng, n, 3);
            let model = GpModel::with_params(params, &points).unwrap();
            let grad = model.lml_gradient_log();
            let p0 = params.to_log();
            let h = 1e-5;
            for k in 0..3 {
                let mut plus = p0;
                plus[k] += h;
                let mut minus = p0;
                minus[k] -= h;
                let lml = |p: &[f64; 3]| {
                    GpModel::with_params(KernelParams::from_log(p), &points)
                        .unwrap()
                        .log_marginal_likelihood()
                };
                let fd = (lml(&plus) - lml(&minus)) / (2.0 * h);
                let rel = (grad[k] - fd).abs() / fd.abs().max(1e-8);
                assert!(rel <= 1e-4, "param {k}: grad {} vs fd {fd} (rel {rel})", grad[k]);
            }
        }
    }

    #[test]
    fn posterior_variance_shrinks_with_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = KernelParams {
            signal_variance: 1.0,
            length_scale: 0.5,
            noise_variance: 0.01,
        };
        for _ in 0..20 {
            let points = random_points(&mut rng, 8, 2);
            let q: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
            let mut prev = f64::INFINITY;
            for n in 1..=8 {
                let model = GpModel::with_params(params, &points[..n]).unwrap();
                let (_, var) = model.posterior(&q);
                assert!(var <= prev + 1e-9, "variance grew: {var} > {prev}");
                prev = var;
            }
        }
    }

    #[test]
    fn posterior_invariant_to_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = KernelParams {
            signal_variance: 0.8,
            length_scale: 0.35,
            noise_variance: 0.02,
        };
        let points = random_points(&mut rng, 6, 2);
        let mut permuted = points.clone();
        permuted.reverse();
        permuted.swap(0, 2);
        let m1 = GpModel::with_params(params, &points).unwrap();
        let m2 = GpModel::with_params(params, &permuted).unwrap();
        for _ in 0..10 {
            let q: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
            let (a, va) = m1.posterior(&q);
            let (b, vb) = m2.posterior(&q);
            assert!((a - b).abs() < 1e-10);
            assert!((va - vb).abs() < 1e-10);
        }
    }

    #[test]
    fn batch_posterior_equals_single_and_seq() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let params = KernelParams::default();
        let points = random_points(&mut rng, 20, 3);
        let model = GpModel::with_params(params, &points).unwrap();
        let queries: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
            .collect();
        let batch = model.posterior_batch(&queries);
        let seq = model.posterior_batch_seq(&queries);
        assert_eq!(batch, seq);
        for (q, &(m, v)) in queries.iter().zip(&batch).take(20) {
            let (sm, sv) = model.posterior(q);
            assert!((m - sm).abs() < 1e-12);
            assert!((v - sv).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_cost_scales_superlinearly() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let opts = FitOptions {
            restarts: 3,
            max_steps: 8,
            tol: 0.0,
        };
        // Min over several repetitions to ride out scheduler noise from
        // concurrently running tests.
        let time_fit = |n: usize, rng: &mut ChaCha8Rng| {
            let points = random_points(rng, n, 4);
            let mut best = f64::INFINITY;
            for rep in 0..5 {
                let mut local = ChaCha8Rng::seed_from_u64(100 + rep);
                let start = std::time::Instant::now();
                let _ = GpModel::fit_with_options(&points, opts, None, &mut local).unwrap();
                best = best.min(start.elapsed().as_secs_f64());
            }
            best
        };
        let t100 = time_fit(100, &mut rng);
        let t200 = time_fit(200, &mut rng);
        assert!(
            t200 >= 4.0 * t100,
            "expected O(n^3)-like scaling, got t100={t100:.4}s t200={t200:.4}s"
        );
    }
}
