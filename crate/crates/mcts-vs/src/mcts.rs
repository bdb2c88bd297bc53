//! Monte-Carlo-tree-search variable selection: the variable-partition tree,
//! node UCB, leaf selection, subset optimization, bifurcation,
//! back-propagation and re-initialization.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::inner_opt::{InnerOptimizer, OptimizerKind, SubspaceHistory};
use crate::lhs::lhs_sample;
use crate::objective::{recall, EvaluatedPoint, ObjectiveSpec};
use crate::trace::{EventTag, RunTrace, TraceBuilder};
use crate::vs_core::{
    assemble_point, fill_in, variable_score, BestKBuffer, FillStrategy, InformationSet,
    ScoreVector, VariableIndexSet,
};

/// Hyperparameters of a tree-search variable-selection run.
#[derive(Debug, Clone, Copy)]
pub struct MctsVsConfig {
    /// Number of subset/complement rounds per selected leaf.
    pub n_v: usize,
    /// Points proposed per subset optimization.
    pub n_s: usize,
    /// Total evaluation budget.
    pub n_e: usize,
    /// Right-child visits tolerated before the tree is rebuilt.
    pub n_bad: usize,
    /// Leaves with more variables than this may be split.
    pub n_split: usize,
    /// Best-k buffer capacity for the fill-in strategy.
    pub k: usize,
    /// UCB exploration constant.
    pub c_p: f64,
    pub optimizer: OptimizerKind,
    pub fill: FillStrategy,
    pub seed: u64,
}

impl Default for MctsVsConfig {
    fn default() -> Self {
        MctsVsConfig {
            n_v: 2,
            n_s: 3,
            n_e: 600,
            n_bad: 5,
            n_split: 3,
            k: 20,
            c_p: 0.1,
            optimizer: OptimizerKind::GpBo,
            fill: FillStrategy::BestK,
            seed: 0,
        }
    }
}

impl MctsVsConfig {
    pub fn validate(&self, dimension: usize) -> Result<()> {
        if self.n_v == 0 || self.n_s == 0 {
            return Err(Error::Config("n_v and n_s must be positive".into()));
        }
        if 2 * self.n_v * self.n_s > self.n_e {
            return Err(Error::Config(format!(
                "budget {} cannot cover the initialization cost 2*{}*{}",
                self.n_e, self.n_v, self.n_s
            )));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if self.c_p < 0.0 {
            return Err(Error::Config("c_p must be nonnegative".into()));
        }
        if dimension < 2 {
            return Err(Error::Config("tree search needs at least two variables".into()));
        }
        Ok(())
    }
}

/// Mean of the score vector over an index set.
pub fn node_value(s: &[f64], indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Argument("node value of an empty index set".into()));
    }
    let sum: f64 = indices.iter().map(|&i| s[i]).sum();
    Ok(sum / indices.len() as f64)
}

/// UCB of a node: infinite for unvisited nodes, else
/// v + 2 c_p sqrt(2 ln(n_parent) / n).
pub fn node_ucb(value: f64, visits: u64, parent_visits: u64, c_p: f64) -> f64 {
    if visits == 0 {
        return f64::INFINITY;
    }
    if parent_visits == 0 {
        return value;
    }
    value + 2.0 * c_p * (2.0 * (parent_visits as f64).ln() / visits as f64).sqrt()
}

/// Include each index independently with probability 1/2, redrawing until
/// the result is a proper nonempty subset. Sets with fewer than two indices
/// are returned unchanged.
pub fn sample_subset(set: &VariableIndexSet, rng: &mut impl Rng) -> VariableIndexSet {
    let n = set.len();
    if n < 2 {
        return set.clone();
    }
    loop {
        let picked: Vec<usize> = set
            .indices()
            .iter()
            .copied()
            .filter(|_| rng.random::<bool>())
            .collect();
        if !picked.is_empty() && picked.len() < n {
            return VariableIndexSet::new(picked, usize::MAX)
                .expect("subset of a valid set is valid");
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub set: VariableIndexSet,
    pub value: f64,
    pub visits: u64,
    pub parent: Option<NodeId>,
    /// (important child, unimportant child)
    pub children: Option<(NodeId, NodeId)>,
}

/// The variable-partition search tree. Leaves always partition `0..D`.
#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<TreeNode>,
    root: NodeId,
}

impl Tree {
    pub fn new(dimension: usize, s: &ScoreVector) -> Self {
        let set = VariableIndexSet::full(dimension);
        let value = node_value(s, set.indices()).expect("full set is nonempty");
        Tree {
            nodes: vec![TreeNode {
                set,
                value,
                visits: 0,
                parent: None,
                children: None,
            }],
            root: NodeId(0),
        }
    }

    /// Drop all nodes and start over from a fresh root.
    pub fn reinit(&mut self, dimension: usize, s: &ScoreVector) {
        *self = Tree::new(dimension, s);
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Walk from the root picking the larger-UCB child (ties uniformly at
    /// random); returns the leaf, the number of right-child hops, and the
    /// root-to-leaf path.
    pub fn select_leaf(&self, c_p: f64, rng: &mut impl Rng) -> (NodeId, usize, Vec<NodeId>) {
        let mut id = self.root;
        let mut rights = 0;
        let mut path = vec![id];
        while let Some((left, right)) = self.node(id).children {
            let parent_visits = self.node(id).visits;
            let ul = node_ucb(self.node(left).value, self.node(left).visits, parent_visits, c_p);
            let ur = node_ucb(self.node(right).value, self.node(right).visits, parent_visits, c_p);
            let go_left = if ul == ur { rng.random::<bool>() } else { ul > ur };
            if go_left {
                id = left;
            } else {
                id = right;
                rights += 1;
            }
            path.push(id);
        }
        (id, rights, path)
    }

    /// Split a leaf by the current score: indices scoring strictly above the
    /// leaf's mean go left, the rest right. Returns `None` (and leaves the
    /// tree unchanged) when all scores are equal.
    pub fn bifurcate(&mut self, leaf: NodeId, s: &ScoreVector) -> Option<(NodeId, NodeId)> {
        assert!(self.node(leaf).children.is_none(), "can only split leaves");
        let set = self.node(leaf).set.clone();
        let mean = node_value(s, set.indices()).expect("leaf set is nonempty");
        let (important, rest): (Vec<usize>, Vec<usize>) =
            set.indices().iter().partition(|&&i| s[i] > mean);
        if important.is_empty() || rest.is_empty() {
            return None;
        }
        let dim = usize::MAX;
        let left_set = VariableIndexSet::new(important, dim).expect("nonempty");
        let right_set = VariableIndexSet::new(rest, dim).expect("nonempty");
        let left = self.push_node(left_set, s, leaf);
        let right = self.push_node(right_set, s, leaf);
        self.nodes[leaf.0].children = Some((left, right));
        Some((left, right))
    }

    fn push_node(&mut self, set: VariableIndexSet, s: &ScoreVector, parent: NodeId) -> NodeId {
        let value = node_value(s, set.indices()).expect("nonempty");
        self.nodes.push(TreeNode {
            set,
            value,
            visits: 0,
            parent: Some(parent),
            children: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Refresh `v` from the current score and increment the visit count for
    /// every node on the path.
    pub fn backpropagate(&mut self, path: &[NodeId], s: &ScoreVector) {
        for &id in path {
            let value = node_value(s, self.nodes[id.0].set.indices()).expect("nonempty");
            self.nodes[id.0].value = value;
            self.nodes[id.0].visits += 1;
        }
    }

    pub fn leaf_ids(&self) -> Vec<NodeId> {
        (0..self.nodes.len())
            .map(NodeId)
            .filter(|id| self.node(*id).children.is_none())
            .collect()
    }

    /// Whether the leaves partition `0..dimension` exactly.
    pub fn leaves_partition(&self, dimension: usize) -> bool {
        let mut seen = vec![false; dimension];
        for id in self.leaf_ids() {
            for &i in self.node(id).set.indices() {
                if i >= dimension || seen[i] {
                    return false;
                }
                seen[i] = true;
            }
        }
        seen.into_iter().all(|b| b)
    }
}

/// Run the full tree-search variable-selection loop on `spec`.
///
/// Initialization draws `n_v` random subset/complement pairs, each tagged on
/// a fresh full-dimensional Latin hypercube design of `n_s` points. The main
/// loop selects a leaf by UCB, optimizes random subsets of it (and their
/// complements within the leaf) with the inner optimizer, fills unselected
/// coordinates from the best-k buffer, then updates the score vector, splits
/// the leaf if it is large enough, and back-propagates. The tree is rebuilt
/// whenever more than `n_bad` right-child hops have accumulated.
struct RunState<'a> {
    spec: &'a ObjectiveSpec,
    info: InformationSet,
    buffer: BestKBuffer,
    all_points: Vec<EvaluatedPoint>,
    builder: TraceBuilder,
}

impl RunState<'_> {
    /// Evaluate a batch of unit-cube points credited to `subset`: log each
    /// evaluation, refresh the best-k buffer, and extend the information set.
    fn evaluate_batch(
        &mut self,
        subset: &VariableIndexSet,
        unit_points: Vec<Vec<f64>>,
        elapsed_ms: f64,
    ) -> Result<()> {
        let set_recall = recall(subset.indices(), self.spec);
        let mut batch = Vec::with_capacity(unit_points.len());
        for u in unit_points {
            let x = self.spec.denormalize(&u);
            let y = self.spec.evaluate(&x)?;
            batch.push(EvaluatedPoint::new(u, y));
            self.builder.record(x, y, subset, set_recall, elapsed_ms);
        }
        self.buffer.update(&batch);
        self.all_points.extend(batch.iter().cloned());
        self.info.push(subset.clone(), batch)
    }

    fn evaluations(&self) -> usize {
        self.builder.evaluations()
    }
}

pub fn mcts_vs_run(spec: &ObjectiveSpec, cfg: &MctsVsConfig) -> Result<RunTrace> {
    let dim = spec.dimension();
    cfg.validate(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut inner = InnerOptimizer::new(cfg.optimizer);
    let full = VariableIndexSet::full(dim);
    let mut state = RunState {
        spec,
        info: InformationSet::new(),
        buffer: BestKBuffer::new(cfg.k)?,
        all_points: Vec::new(),
        builder: TraceBuilder::new(cfg.seed, dim),
    };

    // Initialization: subset/complement pairs over fresh LHS designs.
    for _ in 0..cfg.n_v {
        let m = sample_subset(&full, &mut rng);
        let complement = full.minus(&m).expect("proper subset has a complement");
        for subset in [m, complement] {
            let clock = Instant::now();
            let design = lhs_sample(cfg.n_s, dim, &mut rng);
            let elapsed_ms = clock.elapsed().as_secs_f64() * 1e3 / cfg.n_s as f64;
            state.evaluate_batch(&subset, design, elapsed_ms)?;
        }
    }

    let mut s = variable_score(&state.info, dim)?;
    let mut tree = Tree::new(dim, &s);
    let mut n_bad = 0usize;

    while state.evaluations() < cfg.n_e {
        if n_bad > cfg.n_bad {
            tree.reinit(dim, &s);
            n_bad = 0;
            state.builder.push_event(EventTag::TreeReinit);
        }

        let (leaf, rights, path) = tree.select_leaf(cfg.c_p, &mut rng);
        n_bad += rights;
        let leaf_set = tree.node(leaf).set.clone();
        state.builder.push_leaf_recall(recall(leaf_set.indices(), spec));

        for _ in 0..cfg.n_v {
            let passes: Vec<VariableIndexSet> = if leaf_set.len() < 2 {
                vec![leaf_set.clone()]
            } else {
                let m = sample_subset(&leaf_set, &mut rng);
                let complement = leaf_set
                    .minus(&m)
                    .expect("proper subset has a complement within the leaf");
                vec![m, complement]
            };
            for subset in passes {
                let remaining = cfg.n_e - state.evaluations();
                if remaining == 0 {
                    break;
                }
                let batch = cfg.n_s.min(remaining);
                let clock = Instant::now();
                let history = SubspaceHistory::project(&subset, &state.all_points)?;
                let proposals = inner.propose(&history, batch, &mut rng)?;
                let mut unit_points = Vec::with_capacity(batch);
                for sub in proposals {
                    let fills = fill_in(cfg.fill, &subset, &state.buffer, dim, &mut rng)?;
                    unit_points.push(assemble_point(&subset, &sub, &fills, dim));
                }
                let elapsed_ms = clock.elapsed().as_secs_f64() * 1e3 / batch as f64;
                state.evaluate_batch(&subset, unit_points, elapsed_ms)?;
            }
        }

        s = variable_score(&state.info, dim)?;
        if leaf_set.len() > cfg.n_split {
            match tree.bifurcate(leaf, &s) {
                Some(_) => state.builder.push_event(EventTag::Split),
                None => state.builder.push_event(EventTag::NoSplit),
            }
        }
        tree.backpropagate(&path, &s);
        debug_assert!(tree.leaves_partition(dim));
        debug_assert!(path.iter().all(|&id| {
            let n = tree.node(id);
            (n.value - node_value(&s, n.set.indices()).unwrap()).abs() < 1e-12
        }));
    }

    Ok(state.builder.finish())
}
