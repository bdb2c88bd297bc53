//! Variable-selection substrate: index sets, the information set and
//! per-variable score, fill-in strategies, the best-k buffer, and the
//! Dropout baseline loop.
//!
//! Selection machinery works in unit-cube coordinates throughout; points are
//! mapped to original bounds only when the objective is evaluated.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inner_opt::{InnerOptimizer, OptimizerKind, SubspaceHistory};
use crate::objective::{recall, EvaluatedPoint, ObjectiveSpec};
use crate::trace::{RunTrace, TraceBuilder};

/// A nonempty sorted set of variable indices in `0..D`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableIndexSet {
    indices: Vec<usize>,
}

impl VariableIndexSet {
    pub fn new(mut indices: Vec<usize>, dimension: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::Argument("variable index set must be nonempty".into()));
        }
        if let Some(&max) = indices.last() {
            if max >= dimension {
                return Err(Error::Argument(format!(
                    "index {max} out of range for dimension {dimension}"
                )));
            }
        }
        Ok(VariableIndexSet { indices })
    }

    pub fn full(dimension: usize) -> Self {
        VariableIndexSet {
            indices: (0..dimension).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Set difference; `None` when the result would be empty.
    pub fn minus(&self, other: &VariableIndexSet) -> Option<VariableIndexSet> {
        let rest: Vec<usize> = self
            .indices
            .iter()
            .copied()
            .filter(|&i| !other.contains(i))
            .collect();
        if rest.is_empty() {
            None
        } else {
            Some(VariableIndexSet { indices: rest })
        }
    }

    /// Project a full-dimensional point onto this set's coordinates.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| x[i]).collect()
    }

    /// '0'/'1' mask string of length `dimension`.
    pub fn mask_string(&self, dimension: usize) -> String {
        let mut s = vec![b'0'; dimension];
        for &i in &self.indices {
            if i < dimension {
                s[i] = b'1';
            }
        }
        String::from_utf8(s).expect("ascii")
    }
}

/// Boolean vector representation of an index set.
pub fn boolean_mask(set: &VariableIndexSet, dimension: usize) -> Result<Vec<u8>> {
    if let Some(&max) = set.indices().last() {
        if max >= dimension {
            return Err(Error::Argument(format!(
                "index {max} out of range for dimension {dimension}"
            )));
        }
    }
    let mut mask = vec![0u8; dimension];
    for &i in set.indices() {
        mask[i] = 1;
    }
    Ok(mask)
}

/// The set of (index subset, sample batch) pairs feeding the variable score.
#[derive(Debug, Clone, Default)]
pub struct InformationSet {
    entries: Vec<(VariableIndexSet, Vec<EvaluatedPoint>)>,
}

impl InformationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, set: VariableIndexSet, samples: Vec<EvaluatedPoint>) -> Result<()> {
        if samples.is_empty() {
            return Err(Error::Argument("information set entries need at least one sample".into()));
        }
        self.entries.push((set, samples));
        Ok(())
    }

    pub fn entries(&self) -> &[(VariableIndexSet, Vec<EvaluatedPoint>)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub type ScoreVector = Vec<f64>;

/// Per-variable score: for each index, the sum of observed values over all
/// batches whose subset contains it, divided by the number of such samples.
/// Every index must have been queried at least once.
pub fn variable_score(info: &InformationSet, dimension: usize) -> Result<ScoreVector> {
    let mut numer = vec![0.0f64; dimension];
    let mut count = vec![0usize; dimension];
    for (set, samples) in info.entries() {
        let batch_sum: f64 = samples.iter().map(|p| p.y).sum();
        for &i in set.indices() {
            if i >= dimension {
                return Err(Error::Argument(format!(
                    "index {i} out of range for dimension {dimension}"
                )));
            }
            numer[i] += batch_sum;
            count[i] += samples.len();
        }
    }
    if let Some(i) = count.iter().position(|&c| c == 0) {
        return Err(Error::Coverage(i));
    }
    Ok(numer
        .iter()
        .zip(&count)
        .map(|(&n, &c)| n / c as f64)
        .collect())
}

/// Running store of the k highest-valued points seen so far. Ties keep
/// first-seen order.
#[derive(Debug, Clone)]
pub struct BestKBuffer {
    capacity: usize,
    entries: Vec<(u64, EvaluatedPoint)>,
    next_seq: u64,
}

impl BestKBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Argument("best-k capacity must be positive".into()));
        }
        Ok(BestKBuffer {
            capacity,
            entries: Vec::new(),
            next_seq: 0,
        })
    }

    pub fn update(&mut self, batch: &[EvaluatedPoint]) {
        for p in batch {
            self.entries.push((self.next_seq, p.clone()));
            self.next_seq += 1;
        }
        self.entries.sort_by(|(sa, pa), (sb, pb)| {
            pb.y.partial_cmp(&pa.y)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(sa.cmp(sb))
        });
        self.entries.truncate(self.capacity);
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

    /// Entries in descending value order.
    pub fn points(&self) -> impl Iterator<Item = &EvaluatedPoint> {
        self.entries.iter().map(|(_, p)| p)
    }
}

/// How to assign values to unselected coordinates before evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FillStrategy {
    #[default]
    BestK,
    AverageBestK,
    RandomUniform,
}

/// Values for all coordinates outside `selected`, in unit-cube space.
/// Best-k draws each coordinate independently from the buffer entries'
/// values at that coordinate.
pub fn fill_in(
    strategy: FillStrategy,
    selected: &VariableIndexSet,
    buffer: &BestKBuffer,
    dimension: usize,
    rng: &mut impl Rng,
) -> Result<BTreeMap<usize, f64>> {
    if buffer.is_empty() && strategy != FillStrategy::RandomUniform {
        return Err(Error::State("best-k fill-in requires a nonempty buffer".into()));
    }
    let donors: Vec<&EvaluatedPoint> = buffer.points().collect();
    let mut values = BTreeMap::new();
    for i in 0..dimension {
        if selected.contains(i) {
            continue;
        }
        let v = match strategy {
            FillStrategy::BestK => donors[rng.random_range(0..donors.len())].x[i],
            FillStrategy::AverageBestK => {
                donors.iter().map(|p| p.x[i]).sum::<f64>() / donors.len() as f64
            }
            FillStrategy::RandomUniform => rng.random::<f64>(),
        };
        values.insert(i, v);
    }
    Ok(values)
}

/// Assemble a full unit-cube point from subspace coordinates and fill values.
pub fn assemble_point(
    selected: &VariableIndexSet,
    subspace: &[f64],
    fills: &BTreeMap<usize, f64>,
    dimension: usize,
) -> Vec<f64> {
    let mut x = vec![0.0; dimension];
    for (k, &i) in selected.indices().iter().enumerate() {
        x[i] = subspace[k];
    }
    for (&i, &v) in fills {
        x[i] = v;
    }
    x
}

/// The Dropout baseline: a uniformly random d-subset per iteration,
/// optimized by the inner optimizer, unselected coordinates filled in.
#[allow(clippy::too_many_arguments)]
pub fn dropout_run(
    spec: &ObjectiveSpec,
    d: usize,
    budget: usize,
    optimizer: OptimizerKind,
    fill: FillStrategy,
    k: usize,
    n_s: usize,
    seed: u64,
) -> Result<RunTrace> {
    let dim = spec.dimension();
    if d == 0 || d > dim {
        return Err(Error::Config(format!("dropout subset size {d} not in 1..={dim}")));
    }
    if budget == 0 || n_s == 0 {
        return Err(Error::Config("budget and sample batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inner = InnerOptimizer::new(optimizer);
    let mut buffer = BestKBuffer::new(k)?;
    let mut all_points: Vec<EvaluatedPoint> = Vec::new();
    let mut builder = TraceBuilder::new(seed, dim);

    while builder.evaluations() < budget {
        let batch = n_s.min(budget - builder.evaluations());
        let clock = Instant::now();
        let subset =
            VariableIndexSet::new(rand::seq::index::sample(&mut rng, dim, d).into_vec(), dim)?;
        let history = SubspaceHistory::project(&subset, &all_points)?;
        let proposals = inner.propose(&history, batch, &mut rng)?;
        let mut points = Vec::with_capacity(batch);
        for sub in proposals {
            // No donors before the first evaluations; fall back to uniform.
            let strategy = if buffer.is_empty() { FillStrategy::RandomUniform } else { fill };
            let fills = fill_in(strategy, &subset, &buffer, dim, &mut rng)?;
            points.push(assemble_point(&subset, &sub, &fills, dim));
        }
        let elapsed_ms = clock.elapsed().as_secs_f64() * 1e3 / batch as f64;

        let set_recall = recall(subset.indices(), spec);
        for u in points {
            let x = spec.denormalize(&u);
            let y = spec.evaluate(&x)?;
            let point = EvaluatedPoint::new(u, y);
            buffer.update(std::slice::from_ref(&point));
            all_points.push(point);
            builder.record(x, y, &subset, set_recall, elapsed_ms);
        }
        builder.push_leaf_recall(set_recall);
    }
    Ok(builder.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(ids: &[usize], d: usize) -> VariableIndexSet {
        VariableIndexSet::new(ids.to_vec(), d).unwrap()
    }

    fn pt(x: Vec<f64>, y: f64) -> EvaluatedPoint {
        EvaluatedPoint::new(x, y)
    }

    #[test]
    fn index_set_validation() {
        assert!(VariableIndexSet::new(vec![], 4).is_err());
        assert!(VariableIndexSet::new(vec![4], 4).is_err());
        let s = VariableIndexSet::new(vec![3, 1, 1], 4).unwrap();
        assert_eq!(s.indices(), &[1, 3]);
    }

    #[test]
    fn mask_examples() {
        let d = 4;
        let m = set(&[0, 2], d);
        assert_eq!(boolean_mask(&m, d).unwrap(), vec![1, 0, 1, 0]);
        let full = VariableIndexSet::full(d);
        assert_eq!(boolean_mask(&full, d).unwrap(), vec![1; 4]);

        let complement = full.minus(&m).unwrap();
        let a = boolean_mask(&m, d).unwrap();
        let b = boolean_mask(&complement, d).unwrap();
        let sum: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        assert_eq!(sum, vec![1; 4]);

        assert!(boolean_mask(&set(&[3], 4), 3).is_err());
    }

    #[test]
    fn score_worked_example() {
        let mut info = InformationSet::new();
        info.push(set(&[0], 2), vec![pt(vec![0.0, 0.0], 2.0)]).unwrap();
        info.push(set(&[0, 1], 2), vec![pt(vec![0.0, 0.0], 4.0)]).unwrap();
        let s = variable_score(&info, 2).unwrap();
        assert_eq!(s, vec![3.0, 4.0]);
    }

    #[test]
    fn score_constant_values() {
        let mut info = InformationSet::new();
        info.push(set(&[0, 1], 3), vec![pt(vec![0.0; 3], 0.7), pt(vec![0.0; 3], 0.7)])
            .unwrap();
        info.push(set(&[2], 3), vec![pt(vec![0.0; 3], 0.7)]).unwrap();
        let s = variable_score(&info, 3).unwrap();
        for v in s {
            assert!((v - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn score_coverage_error() {
        let mut info = InformationSet::new();
        info.push(set(&[0], 3), vec![pt(vec![0.0; 3], 1.0)]).unwrap();
        match variable_score(&info, 3) {
            Err(Error::Coverage(i)) => assert_eq!(i, 1),
            other => panic!("expected coverage error, got {other:?}"),
        }
    }

    /// Scalar-loop oracle for the score: per dimension, walk every entry.
    fn score_oracle(info: &InformationSet, dimension: usize) -> Vec<f64> {
        (0..dimension)
            .map(|i| {
                let mut total = 0.0;
                let mut n = 0usize;
                for (set, samples) in info.entries() {
                    if set.contains(i) {
                        for p in samples {
                            total += p.y;
                            n += 1;
                        }
                    }
                }
                total / n as f64
            })
            .collect()
    }

    #[test]
    fn score_matches_scalar_oracle_on_random_sets() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let d = rng.random_range(2..=20);
            let mut info = InformationSet::new();
            // Cover every index, then add random entries.
            info.push(VariableIndexSet::full(d), vec![pt(vec![0.0; d], rng.random_range(-1.0..1.0))])
                .unwrap();
            for _ in 0..rng.random_range(1..8) {
                let size = rng.random_range(1..=d);
                let ids = rand::seq::index::sample(&mut rng, d, size).into_vec();
                let samples: Vec<EvaluatedPoint> = (0..rng.random_range(1..5))
                    .map(|_| pt(vec![0.0; d], rng.random_range(-2.0..2.0)))
                    .collect();
                info.push(VariableIndexSet::new(ids, d).unwrap(), samples).unwrap();
            }
            let fast = variable_score(&info, d).unwrap();
            let slow = score_oracle(&info, d);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn score_untouched_by_unrelated_entries() {
        let mut info = InformationSet::new();
        info.push(set(&[0, 1], 3), vec![pt(vec![0.0; 3], 1.0)]).unwrap();
        info.push(set(&[2], 3), vec![pt(vec![0.0; 3], 5.0)]).unwrap();
        let before = variable_score(&info, 3).unwrap();
        info.push(set(&[1, 2], 3), vec![pt(vec![0.0; 3], -3.0)]).unwrap();
        let after = variable_score(&info, 3).unwrap();
        assert_eq!(before[0], after[0]);
        assert_ne!(before[1], after[1]);
    }

    #[test]
    fn buffer_keeps_top_k_with_first_seen_ties() {
        let mut buf = BestKBuffer::new(20).unwrap();
        buf.update(&[pt(vec![0.0], 1.0), pt(vec![1.0], 3.0), pt(vec![2.0], 2.0)]);
        assert_eq!(buf.len(), 3);
        let ys: Vec<f64> = buf.points().map(|p| p.y).collect();
        assert_eq!(ys, vec![3.0, 2.0, 1.0]);

        let mut small = BestKBuffer::new(2).unwrap();
        small.update(&[pt(vec![0.0], 1.0), pt(vec![1.0], 2.0)]);
        // Dominated point leaves the buffer unchanged.
        small.update(&[pt(vec![2.0], 0.5)]);
        let xs: Vec<f64> = small.points().map(|p| p.x[0]).collect();
        assert_eq!(xs, vec![1.0, 0.0]);

        // Ties keep the first-seen entry ahead.
        let mut ties = BestKBuffer::new(2).unwrap();
        ties.update(&[pt(vec![0.0], 1.0)]);
        ties.update(&[pt(vec![1.0], 1.0), pt(vec![2.0], 1.0)]);
        let xs: Vec<f64> = ties.points().map(|p| p.x[0]).collect();
        assert_eq!(xs, vec![0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn buffer_matches_resort_oracle(ys in proptest::collection::vec(-100i32..100, 1..40)) {
            let points: Vec<EvaluatedPoint> =
                ys.iter().enumerate().map(|(i, &y)| pt(vec![i as f64], y as f64)).collect();
            let k = 5;
            let mut buf = BestKBuffer::new(k).unwrap();
            // Feed in two unequal chunks.
            let split = points.len() / 2;
            buf.update(&points[..split]);
            buf.update(&points[split..]);

            let mut oracle: Vec<(usize, f64)> =
                points.iter().enumerate().map(|(i, p)| (i, p.y)).collect();
            oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            oracle.truncate(k);

            let got: Vec<f64> = buf.points().map(|p| p.x[0]).collect();
            let want: Vec<f64> = oracle.iter().map(|(i, _)| *i as f64).collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn fill_in_single_donor_copies_it() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut buf = BestKBuffer::new(1).unwrap();
        buf.update(&[pt(vec![0.1, 0.2, 0.3], 1.0)]);
        let selected = set(&[0], 3);
        let fills = fill_in(FillStrategy::BestK, &selected, &buf, 3, &mut rng).unwrap();
        assert_eq!(fills[&1], 0.2);
        assert_eq!(fills[&2], 0.3);
    }

    #[test]
    fn fill_in_average_of_two_points() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut buf = BestKBuffer::new(2).unwrap();
        buf.update(&[pt(vec![0.0, 0.0], 1.0), pt(vec![1.0, 1.0], 2.0)]);
        let selected = set(&[0], 2);
        let fills = fill_in(FillStrategy::AverageBestK, &selected, &buf, 2, &mut rng).unwrap();
        assert_eq!(fills[&1], 0.5);
    }

    #[test]
    fn fill_in_membership_over_many_draws() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut buf = BestKBuffer::new(20).unwrap();
        let donors: Vec<EvaluatedPoint> = (0..20)
            .map(|i| pt(vec![i as f64 / 20.0, (19 - i) as f64 / 20.0], i as f64))
            .collect();
        buf.update(&donors);
        let selected = set(&[0], 2);
        let pool: Vec<f64> = buf.points().map(|p| p.x[1]).collect();
        for _ in 0..1000 {
            let fills = fill_in(FillStrategy::BestK, &selected, &buf, 2, &mut rng).unwrap();
            assert!(pool.contains(&fills[&1]));
        }
    }

    #[test]
    fn fill_in_empty_buffer_is_state_error() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let buf = BestKBuffer::new(5).unwrap();
        let selected = set(&[0], 2);
        assert!(matches!(
            fill_in(FillStrategy::BestK, &selected, &buf, 2, &mut rng),
            Err(Error::State(_))
        ));
        assert!(fill_in(FillStrategy::RandomUniform, &selected, &buf, 2, &mut rng).is_ok());
    }

    #[test]
    fn dropout_selects_d_each_iteration_and_respects_budget() {
        let spec = crate::objective::by_name("hartmann6_300").unwrap();
        let trace = dropout_run(
            &spec,
            6,
            31,
            OptimizerKind::RandomSearch,
            FillStrategy::BestK,
            20,
            3,
            2021,
        )
        .unwrap();
        assert_eq!(trace.records.len(), 31);
        for r in &trace.records {
            assert_eq!(r.selected.len(), 6);
        }
        let last = trace.records.last().unwrap();
        assert_eq!(last.eval_index, 31);
    }

    #[test]
    fn dropout_mean_recall_matches_d_over_big_d() {
        let spec = crate::objective::by_name("hartmann6_300").unwrap();
        // 1000 iterations of batch 3.
        let trace = dropout_run(
            &spec,
            6,
            3000,
            OptimizerKind::RandomSearch,
            FillStrategy::BestK,
            20,
            3,
            7,
        )
        .unwrap();
        assert_eq!(trace.leaf_recalls.len(), 1000);
        let mean = trace.mean_leaf_recall();
        assert!((mean - 0.02).abs() < 0.01, "mean recall {mean}");
    }
}
