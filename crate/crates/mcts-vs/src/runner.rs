//! Seeded experiment execution: method dispatch, persistence and summaries.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Method, RunConfig};
use crate::error::{Error, Result};
use crate::inner_opt::{InnerOptimizer, OptimizerKind, SubspaceHistory};
use crate::lhs::lhs_sample;
use crate::mcts::mcts_vs_run;
use crate::objective::{EvaluatedPoint, ObjectiveSpec};
use crate::par::maybe_par_map;
use crate::trace::{RunTrace, TraceBuilder};
use crate::vs_core::{dropout_run, VariableIndexSet};

/// Aggregate statistics over the seeds of one experiment. Everything except
/// `mean_iter_time_ms` is deterministic for a given config and build.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub problem: String,
    pub method: Method,
    pub budget: usize,
    pub seeds: Vec<u64>,
    pub per_seed_final_best: Vec<f64>,
    pub mean_final_best: f64,
    pub std_final_best: f64,
    pub mean_recall: f64,
    pub mean_leaf_recall: f64,
    pub per_seed_reinits: Vec<usize>,
    /// Measured wall time per evaluation (ms), objective calls excluded;
    /// varies between invocations.
    pub mean_iter_time_ms: f64,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Global BO baseline: LHS initialization, then EI proposals over all
/// variables.
pub fn vanilla_bo_run(
    spec: &ObjectiveSpec,
    budget: usize,
    init: usize,
    n_s: usize,
    seed: u64,
) -> Result<RunTrace> {
    if budget == 0 || n_s == 0 {
        return Err(Error::Config("budget and batch size must be positive".into()));
    }
    let dim = spec.dimension();
    let full = VariableIndexSet::full(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inner = InnerOptimizer::new(OptimizerKind::GpBo);
    let mut all_points: Vec<EvaluatedPoint> = Vec::new();
    let mut builder = TraceBuilder::new(seed, dim);

    let init = init.min(budget).max(1);
    let clock = Instant::now();
    let design = lhs_sample(init, dim, &mut rng);
    let elapsed_ms = clock.elapsed().as_secs_f64() * 1e3 / init as f64;
    for u in design {
        record_full(spec, &full, u, elapsed_ms, &mut all_points, &mut builder)?;
    }
    builder.push_leaf_recall(1.0);

    while builder.evaluations() < budget {
        let batch = n_s.min(budget - builder.evaluations());
        let clock = Instant::now();
        let history = SubspaceHistory::project(&full, &all_points)?;
        let proposals = inner.propose(&history, batch, &mut rng)?;
        let elapsed_ms = clock.elapsed().as_secs_f64() * 1e3 / batch as f64;
        for u in proposals {
            record_full(spec, &full, u, elapsed_ms, &mut all_points, &mut builder)?;
        }
        builder.push_leaf_recall(1.0);
    }
    Ok(builder.finish())
}

/// Uniform random search over all variables.
pub fn random_search_run(
    spec: &ObjectiveSpec,
    budget: usize,
    n_s: usize,
    seed: u64,
) -> Result<RunTrace> {
    if budget == 0 || n_s == 0 {
        return Err(Error::Config("budget and batch size must be positive".into()));
    }
    let dim = spec.dimension();
    let full = VariableIndexSet::full(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut builder = TraceBuilder::new(seed, dim);
    let mut all_points: Vec<EvaluatedPoint> = Vec::new();
    while builder.evaluations() < budget {
        let batch = n_s.min(budget - builder.evaluations());
        let clock = Instant::now();
        let points: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
            .collect();
        let elapsed_ms = clock.elapsed().as_secs_f64() * 1e3 / batch as f64;
        for u in points {
            record_full(spec, &full, u, elapsed_ms, &mut all_points, &mut builder)?;
        }
        builder.push_leaf_recall(1.0);
    }
    Ok(builder.finish())
}

fn record_full(
    spec: &ObjectiveSpec,
    full: &VariableIndexSet,
    u: Vec<f64>,
    elapsed_ms: f64,
    all_points: &mut Vec<EvaluatedPoint>,
    builder: &mut TraceBuilder,
) -> Result<()> {
    let x = spec.denormalize(&u);
    let y = spec.evaluate(&x)?;
    all_points.push(EvaluatedPoint::new(u, y));
    builder.record(x, y, full, 1.0, elapsed_ms);
    Ok(())
}

/// Run one seed of the configured method.
pub fn run_single(config: &RunConfig, spec: &ObjectiveSpec, seed: u64) -> Result<RunTrace> {
    match config.method {
        Method::MctsVs => mcts_vs_run(spec, &config.mcts_config(seed)),
        Method::Dropout => dropout_run(
            spec,
            config.dropout_d(spec),
            config.budget,
            config.optimizer,
            config.fill,
            config.k_value(),
            config.n_s_value(),
            seed,
        ),
        Method::VanillaBo => vanilla_bo_run(
            spec,
            config.budget,
            2 * config.n_v_value() * config.n_s_value(),
            config.n_s_value(),
            seed,
        ),
        Method::RandomSearch => random_search_run(spec, config.budget, config.n_s_value(), seed),
    }
}

/// Execute the config on every seed (parallel when enabled), optionally
/// persist one CSV per seed plus a JSON summary, and return everything.
pub fn run_experiment(config: &RunConfig) -> Result<(Vec<RunTrace>, RunSummary)> {
    config.validate()?;
    let spec = config.spec()?;
    let outcomes = maybe_par_map(&config.seeds, |&seed| run_single(config, &spec, seed));
    let traces: Vec<RunTrace> = outcomes.into_iter().collect::<Result<_>>()?;

    let finals: Vec<f64> = traces
        .iter()
        .map(|t| t.final_best().expect("nonempty run"))
        .collect();
    let summary = RunSummary {
        problem: config.problem.clone(),
        method: config.method,
        budget: config.budget,
        seeds: config.seeds.clone(),
        mean_final_best: mean(&finals),
        std_final_best: std_dev(&finals),
        per_seed_final_best: finals,
        mean_recall: mean(&traces.iter().map(|t| t.mean_recall()).collect::<Vec<_>>()),
        mean_leaf_recall: mean(&traces.iter().map(|t| t.mean_leaf_recall()).collect::<Vec<_>>()),
        per_seed_reinits: traces.iter().map(|t| t.reinit_count).collect(),
        mean_iter_time_ms: mean(
            &traces
                .iter()
                .map(|t| t.mean_elapsed_ms(1, config.budget))
                .collect::<Vec<_>>(),
        ),
    };

    if let Some(dir) = &config.out_dir {
        write_outputs(dir, &traces, &summary)?;
    }
    Ok((traces, summary))
}

fn write_outputs(dir: &Path, traces: &[RunTrace], summary: &RunSummary) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.to_path_buf(), e))?;
    for trace in traces {
        trace.write_csv(&dir.join(format!("seed_{}.csv", trace.seed)))?;
    }
    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::Data(format!("summary serialization: {e}")))?;
    std::fs::write(&path, json).map_err(|e| Error::io(path, e))
}

/// Relative per-iteration timing of two configs around evaluation `at_t`.
#[derive(Debug, Clone, Serialize)]
pub struct TimingReport {
    pub a: String,
    pub b: String,
    pub at_t: usize,
    pub window: (usize, usize),
    pub a_mean_ms: f64,
    pub b_mean_ms: f64,
    /// "a" or "b"; ties go to "a".
    pub faster: String,
}

/// Run both configs and compare mean per-evaluation algorithm time in a
/// window ending at `at_t`. Only the ordering is meaningful.
pub fn compare_timing(a: &RunConfig, b: &RunConfig, at_t: usize) -> Result<TimingReport> {
    if a.budget < at_t || b.budget < at_t {
        return Err(Error::Config(format!(
            "both budgets must reach the comparison point t = {at_t}"
        )));
    }
    let lo = ((at_t as f64) * 0.7).ceil() as usize;
    let (ta, _) = run_experiment(a)?;
    let (tb, _) = run_experiment(b)?;
    let mean_window =
        |ts: &[RunTrace]| mean(&ts.iter().map(|t| t.mean_elapsed_ms(lo, at_t)).collect::<Vec<_>>());
    let a_mean_ms = mean_window(&ta);
    let b_mean_ms = mean_window(&tb);
    Ok(TimingReport {
        a: a.slug(),
        b: b.slug(),
        at_t,
        window: (lo, at_t),
        a_mean_ms,
        b_mean_ms,
        faster: if a_mean_ms <= b_mean_ms { "a".into() } else { "b".into() },
    })
}

/// Recall and quality digest of the trace CSVs under a directory.
#[derive(Debug, Clone, Serialize)]
pub struct RecallReport {
    pub files: Vec<RecallFileStats>,
    pub mean_recall: f64,
    pub mean_final_best: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecallFileStats {
    pub file: String,
    pub seed: u64,
    pub evaluations: usize,
    pub mean_recall: f64,
    pub final_best: f64,
}

pub fn recall_report(dir: &Path) -> Result<RecallReport> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir.to_path_buf(), e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension().is_some_and(|ext| ext == "csv")
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("seed_"))
        })
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err(Error::Argument(format!(
            "no seed_*.csv traces found in {}",
            dir.display()
        )));
    }
    let mut files = Vec::new();
    for path in entries {
        let rows = crate::trace::read_csv(&path)?;
        if rows.is_empty() {
            continue;
        }
        files.push(RecallFileStats {
            file: path.file_name().unwrap().to_string_lossy().into_owned(),
            seed: rows[0].seed,
            evaluations: rows.len(),
            mean_recall: mean(&rows.iter().map(|r| r.recall).collect::<Vec<_>>()),
            final_best: rows.last().unwrap().best_y,
        });
    }
    Ok(RecallReport {
        mean_recall: mean(&files.iter().map(|f| f.mean_recall).collect::<Vec<_>>()),
        mean_final_best: mean(&files.iter().map(|f| f.final_best).collect::<Vec<_>>()),
        files,
    })
}

/// Built-in experiment suites for the `bench` subcommand.
pub fn suite(name: &str, out_base: Option<&Path>) -> Result<Vec<RunConfig>> {
    let bench_seeds = vec![2021, 2022, 2023, 2024, 2025];
    let base = |problem: &str, method: Method, optimizer: OptimizerKind, budget, seeds: &[u64]| {
        RunConfig {
            problem: problem.into(),
            method,
            optimizer,
            fill: Default::default(),
            budget,
            seeds: seeds.to_vec(),
            out_dir: None,
            n_v: None,
            n_s: None,
            n_bad: None,
            n_split: None,
            k: None,
            c_p: None,
            d: None,
        }
    };
    let mut configs = match name {
        "smoke" => vec![
            base("hartmann6_300", Method::MctsVs, OptimizerKind::RandomSearch, 60, &[1, 2]),
            base("hartmann6_300", Method::RandomSearch, OptimizerKind::RandomSearch, 60, &[1, 2]),
        ],
        "hartmann6_300" => vec![base(
            "hartmann6_300",
            Method::MctsVs,
            OptimizerKind::GpBo,
            600,
            &bench_seeds,
        )],
        "figure1_hartmann6_300" => vec![
            base("hartmann6_300", Method::MctsVs, OptimizerKind::GpBo, 600, &bench_seeds),
            base("hartmann6_300", Method::Dropout, OptimizerKind::GpBo, 600, &bench_seeds),
            base("hartmann6_300", Method::VanillaBo, OptimizerKind::GpBo, 600, &bench_seeds),
        ],
        other => {
            return Err(Error::Config(format!(
                "unknown suite {other:?}; known suites: smoke, hartmann6_300, figure1_hartmann6_300"
            )))
        }
    };
    if let Some(base_dir) = out_base {
        for cfg in &mut configs {
            cfg.out_dir = Some(base_dir.join(cfg.slug()));
        }
    }
    Ok(configs)
}
