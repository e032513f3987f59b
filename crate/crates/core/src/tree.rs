//! CART induction for axis-aligned binary trees.
//!
//! Regression trees split on the Friedman improvement score
//! `n_l * n_r / (n_l + n_r) * (mean_l - mean_r)^2`; classification trees split on
//! Gini impurity decrease. Candidate thresholds are midpoints between
//! consecutive distinct feature values. Among equal-scoring splits the smaller
//! feature index wins, then the smaller threshold. After growth the tree is
//! pruned by minimal cost-complexity (weakest link), with node risk
//! `R(t) = impurity(t) * n_t / N`.
//!
//! Routing is `x[feature] <= threshold` to the left child, otherwise right.
//! Leaves are numbered left to right; that number is the leaf's [`PathId`].

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    FriedmanMse,
    Gini,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::FriedmanMse => "friedman_mse",
            Criterion::Gini => "gini",
        })
    }
}

/// Induction and pruning hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub criterion: Criterion,
    pub max_depth: usize,
    /// Minimum fraction of training rows in every leaf, in `(0, 0.5]`.
    pub min_leaf_fraction: f64,
    pub ccp_alpha: f64,
}

impl TreeConfig {
    /// Regression surrogate from states to a neuron response: depth 3, leaves
    /// of at least 10% of rows, pruning strength 0.003.
    pub fn surrogate() -> Self {
        TreeConfig {
            criterion: Criterion::FriedmanMse,
            max_depth: 3,
            min_leaf_fraction: 0.10,
            ccp_alpha: 0.003,
        }
    }

    /// Classifier from a neuron response to a decision path: depth 3, leaves
    /// of at least 1% of rows, pruning strength 0.01.
    pub fn path_classifier() -> Self {
        TreeConfig {
            criterion: Criterion::Gini,
            max_depth: 3,
            min_leaf_fraction: 0.01,
            ccp_alpha: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if !(self.min_leaf_fraction > 0.0 && self.min_leaf_fraction <= 0.5) {
            return Err(Error::Config(format!(
                "min_leaf_fraction must lie in (0, 0.5], got {}",
                self.min_leaf_fraction
            )));
        }
        if !(self.ccp_alpha >= 0.0 && self.ccp_alpha.is_finite()) {
            return Err(Error::Config(format!(
                "ccp_alpha must be finite and non-negative, got {}",
                self.ccp_alpha
            )));
        }
        Ok(())
    }

    /// `ceil(min_leaf_fraction * n)`, at least one row.
    pub fn min_leaf_samples(&self, n: usize) -> usize {
        ((self.min_leaf_fraction * n as f64).ceil() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeKind {
    Regression,
    Classification,
}

/// Identity of one leaf, equivalently of one root-to-leaf decision path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PathId(pub usize);

impl fmt::Display for PathId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
}

/// One threshold test on a single feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub feature: usize,
    pub op: Op,
    pub threshold: f64,
}

impl Predicate {
    pub fn le(feature: usize, threshold: f64) -> Self {
        Predicate {
            feature,
            op: Op::Le,
            threshold,
        }
    }

    pub fn gt(feature: usize, threshold: f64) -> Self {
        Predicate {
            feature,
            op: Op::Gt,
            threshold,
        }
    }

    pub fn holds(&self, x: &[f64]) -> bool {
        let v = x[self.feature];
        match self.op {
            Op::Le => v <= self.threshold,
            Op::Gt => v > self.threshold,
        }
    }
}

/// A root-to-leaf route and the tests taken along it.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionPath {
    pub id: PathId,
    pub predicates: Vec<Predicate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub feature: Option<usize>,
    pub threshold: Option<f64>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    /// Mean target (regression) or majority class label (classification).
    pub prediction: f64,
    pub n: usize,
    pub impurity: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub class_counts: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathId>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.left.is_none()
    }

    fn make_leaf(&mut self) {
        self.feature = None;
        self.threshold = None;
        self.left = None;
        self.right = None;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeRepr")]
pub struct DecisionTree {
    kind: TreeKind,
    n_features: usize,
    n_train: usize,
    /// Sorted class labels; `class_counts` entries align with this list.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    classes: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Deserialize)]
struct TreeRepr {
    kind: TreeKind,
    n_features: usize,
    n_train: usize,
    #[serde(default)]
    classes: Vec<usize>,
    nodes: Vec<Node>,
}

impl TryFrom<TreeRepr> for DecisionTree {
    type Error = Error;

    fn try_from(r: TreeRepr) -> Result<Self> {
        let tree = DecisionTree {
            kind: r.kind,
            n_features: r.n_features,
            n_train: r.n_train,
            classes: r.classes,
            nodes: r.nodes,
        };
        tree.check_structure()?;
        Ok(tree)
    }
}

impl DecisionTree {
    /// Grows and prunes a regression tree on `(x, y)`.
    pub fn fit_regression(x: &Matrix, y: &[f64], cfg: &TreeConfig) -> Result<Self> {
        Self::grow_regression(x, y, cfg)?.pruned(cfg.ccp_alpha)
    }

    /// Grows and prunes a classification tree on `(x, labels)`.
    pub fn fit_classification(x: &Matrix, labels: &[usize], cfg: &TreeConfig) -> Result<Self> {
        Self::grow_classification(x, labels, cfg)?.pruned(cfg.ccp_alpha)
    }

    /// Greedy growth only; `cfg.ccp_alpha` is ignored.
    pub fn grow_regression(x: &Matrix, y: &[f64], cfg: &TreeConfig) -> Result<Self> {
        check_fit_inputs(x, y.len(), cfg, Criterion::FriedmanMse)?;
        let grower = Grower {
            x,
            target: Target::Regression(y),
            classes: &[],
            max_depth: cfg.max_depth,
            min_leaf: cfg.min_leaf_samples(x.nrows()),
            nodes: Vec::new(),
        };
        Ok(grower.run(TreeKind::Regression, Vec::new()))
    }

    /// Greedy growth only; `cfg.ccp_alpha` is ignored.
    pub fn grow_classification(x: &Matrix, labels: &[usize], cfg: &TreeConfig) -> Result<Self> {
        check_fit_inputs(x, labels.len(), cfg, Criterion::Gini)?;
        let mut classes = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        let positions = labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label collected above"))
            .collect();
        let grower = Grower {
            x,
            target: Target::Classes {
                positions,
                n_classes: classes.len(),
            },
            classes: &classes,
            max_depth: cfg.max_depth,
            min_leaf: cfg.min_leaf_samples(x.nrows()),
            nodes: Vec::new(),
        };
        Ok(grower.run(TreeKind::Classification, classes.clone()))
    }

    /// Minimal cost-complexity pruning. Repeatedly collapses the internal node
    /// with the smallest effective alpha
    /// `g(t) = (R(t) - R(T_t)) / (|leaves(T_t)| - 1)` while `g(t) <= alpha`.
    /// `alpha == 0` returns the tree unchanged.
    pub fn pruned(&self, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!(
                "ccp_alpha must be finite and non-negative, got {alpha}"
            )));
        }
        if alpha == 0.0 {
            return Ok(self.clone());
        }
        let mut nodes = self.nodes.clone();
        let total = self.n_train as f64;
        loop {
            let mut links = Vec::new();
            subtree_risk(&nodes, 0, total, &mut links);
            let weakest =
                links
                    .into_iter()
                    .fold(None::<(f64, usize)>, |best, (g, id)| match best {
                        Some((bg, _)) if bg <= g => best,
                        _ => Some((g, id)),
                    });
            match weakest {
                Some((g, id)) if g <= alpha => nodes[id].make_leaf(),
                _ => break,
            }
        }
        Ok(DecisionTree {
            kind: self.kind,
            n_features: self.n_features,
            n_train: self.n_train,
            classes: self.classes.clone(),
            nodes: compact(&nodes),
        })
    }

    pub fn kind(&self) -> TreeKind {
        self.kind
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    /// Number of leaves, `K`.
    pub fn n_paths(&self) -> usize {
        self.leaves().count()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> + '_ {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Depth of the deepest leaf; a single-leaf tree has depth 0.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match (nodes[id].left, nodes[id].right) {
                (Some(l), Some(r)) => 1 + walk(nodes, l).max(walk(nodes, r)),
                _ => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    /// Routes `x` to its leaf.
    pub fn leaf_of(&self, x: &[f64]) -> Result<&Node> {
        if x.len() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                actual: x.len(),
            });
        }
        let mut node = &self.nodes[0];
        while let (Some(f), Some(t), Some(l), Some(r)) =
            (node.feature, node.threshold, node.left, node.right)
        {
            node = if x[f] <= t {
                &self.nodes[l]
            } else {
                &self.nodes[r]
            };
        }
        Ok(node)
    }

    /// Leaf mean for regression trees, class label (as `f64`) for classifiers.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.leaf_of(x)?.prediction)
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        if self.kind != TreeKind::Classification {
            return Err(Error::Config("predict_class on a regression tree".into()));
        }
        Ok(self.leaf_of(x)?.prediction as usize)
    }

    pub fn path_of(&self, x: &[f64]) -> Result<PathId> {
        Ok(self.leaf_of(x)?.path.expect("leaves carry path ids"))
    }

    /// `path_of` for every row of `x`.
    pub fn paths_of_rows(&self, x: &Matrix) -> Result<Vec<PathId>> {
        x.rows().map(|row| self.path_of(row)).collect()
    }

    /// One entry per leaf in `PathId` order, predicates in root-to-leaf order.
    pub fn enumerate_paths(&self) -> Vec<DecisionPath> {
        let mut out = Vec::with_capacity(self.n_paths());
        let mut stack = Vec::new();
        self.collect_paths(0, &mut stack, &mut out);
        out
    }

    fn collect_paths(&self, id: usize, stack: &mut Vec<Predicate>, out: &mut Vec<DecisionPath>) {
        let node = &self.nodes[id];
        match (node.feature, node.threshold, node.left, node.right) {
            (Some(f), Some(t), Some(l), Some(r)) => {
                stack.push(Predicate::le(f, t));
                self.collect_paths(l, stack, out);
                stack.pop();
                stack.push(Predicate::gt(f, t));
                self.collect_paths(r, stack, out);
                stack.pop();
            }
            _ => out.push(DecisionPath {
                id: node.path.expect("leaves carry path ids"),
                predicates: stack.clone(),
            }),
        }
    }

    /// True when `self` can be obtained from `other` by collapsing internal
    /// nodes: every split kept in `self` appears at the same position in
    /// `other` with the same feature and threshold.
    pub fn is_pruning_of(&self, other: &DecisionTree) -> bool {
        fn walk(a: &DecisionTree, ai: usize, b: &DecisionTree, bi: usize) -> bool {
            let (na, nb) = (&a.nodes[ai], &b.nodes[bi]);
            if na.n != nb.n {
                return false;
            }
            if na.is_leaf() {
                return true;
            }
            if nb.is_leaf() || na.feature != nb.feature || na.threshold != nb.threshold {
                return false;
            }
            walk(a, na.left.unwrap(), b, nb.left.unwrap())
                && walk(a, na.right.unwrap(), b, nb.right.unwrap())
        }
        self.kind == other.kind && self.n_features == other.n_features && walk(self, 0, other, 0)
    }

    fn check_structure(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Schema(format!("invalid tree: {msg}")));
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut next_path = 0;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            if seen[id] {
                return bad(format!("node {id} reached twice"));
            }
            seen[id] = true;
            let node = &self.nodes[id];
            if node.id != id {
                return bad(format!("node at index {id} has id {}", node.id));
            }
            if self.kind == TreeKind::Classification
                && node.class_counts.len() != self.classes.len()
            {
                return bad(format!("node {id} class counts do not match classes"));
            }
            match (node.feature, node.threshold, node.left, node.right) {
                (Some(f), Some(t), Some(l), Some(r)) => {
                    if f >= self.n_features || !t.is_finite() {
                        return bad(format!("node {id} has an invalid split"));
                    }
                    if l >= self.nodes.len() || r >= self.nodes.len() || l <= id || r <= id {
                        return bad(format!("node {id} has invalid children"));
                    }
                    // right pushed first so leaves pop in left-to-right order
                    stack.push(r);
                    stack.push(l);
                }
                (None, None, None, None) => {
                    if node.path != Some(PathId(next_path)) {
                        return bad(format!("leaf {id} should carry path {next_path}"));
                    }
                    next_path += 1;
                }
                _ => return bad(format!("node {id} is neither a leaf nor a split")),
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return bad(format!("node {orphan} is unreachable"));
        }
        Ok(())
    }
}

fn check_fit_inputs(x: &Matrix, n_targets: usize, cfg: &TreeConfig, want: Criterion) -> Result<()> {
    cfg.validate()?;
    if cfg.criterion != want {
        return Err(Error::Config(format!(
            "criterion {} cannot fit this tree kind (expected {want})",
            cfg.criterion
        )));
    }
    if x.nrows() != n_targets {
        return Err(Error::Dimension {
            expected: x.nrows(),
            actual: n_targets,
        });
    }
    if n_targets == 0 {
        return Err(Error::Empty("no training rows".into()));
    }
    Ok(())
}

/// Returns `(sum of leaf risks, leaf count)` below `id` and records the
/// effective alpha of every internal node.
fn subtree_risk(
    nodes: &[Node],
    id: usize,
    total: f64,
    links: &mut Vec<(f64, usize)>,
) -> (f64, usize) {
    let node = &nodes[id];
    let own = node.impurity * node.n as f64 / total;
    match (node.left, node.right) {
        (Some(l), Some(r)) => {
            let (rl, nl) = subtree_risk(nodes, l, total, links);
            let (rr, nr) = subtree_risk(nodes, r, total, links);
            let (risk, leaves) = (rl + rr, nl + nr);
            links.push(((own - risk) / (leaves - 1) as f64, id));
            (risk, leaves)
        }
        _ => (own, 1),
    }
}

/// Renumbers reachable nodes in pre-order and assigns left-to-right path ids.
fn compact(nodes: &[Node]) -> Vec<Node> {
    fn visit(old: &[Node], id: usize, out: &mut Vec<Node>, next_path: &mut usize) -> usize {
        let new_id = out.len();
        let mut node = old[id].clone();
        node.id = new_id;
        node.path = None;
        out.push(node);
        match (old[id].left, old[id].right) {
            (Some(l), Some(r)) => {
                let l = visit(old, l, out, next_path);
                let r = visit(old, r, out, next_path);
                out[new_id].left = Some(l);
                out[new_id].right = Some(r);
            }
            _ => {
                out[new_id].path = Some(PathId(*next_path));
                *next_path += 1;
            }
        }
        new_id
    }
    let mut out = Vec::with_capacity(nodes.len());
    visit(nodes, 0, &mut out, &mut 0);
    out
}

enum Target<'a> {
    Regression(&'a [f64]),
    /// Per-row index into the sorted class list.
    Classes {
        positions: Vec<usize>,
        n_classes: usize,
    },
}

struct Grower<'a> {
    x: &'a Matrix,
    target: Target<'a>,
    classes: &'a [usize],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

struct NodeStats {
    prediction: f64,
    impurity: f64,
    class_counts: Vec<usize>,
    pure: bool,
}

impl<'a> Grower<'a> {
    fn run(mut self, kind: TreeKind, classes: Vec<usize>) -> DecisionTree {
        let mut rows: Vec<usize> = (0..self.x.nrows()).collect();
        self.grow(&mut rows, 0);
        DecisionTree {
            kind,
            n_features: self.x.ncols(),
            n_train: self.x.nrows(),
            classes,
            nodes: compact(&self.nodes),
        }
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let stats = self.stats(rows);
        let id = self.nodes.len();
        self.nodes.push(Node {
            id,
            feature: None,
            threshold: None,
            left: None,
            right: None,
            prediction: stats.prediction,
            n: rows.len(),
            impurity: stats.impurity,
            class_counts: stats.class_counts,
            path: None,
        });
        if stats.pure || depth >= self.max_depth || rows.len() < 2 * self.min_leaf {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(rows) else {
            return id;
        };
        let x = self.x;
        rows.sort_by_key(|&r| x.get(r, feature) > threshold);
        let n_left = rows.partition_point(|&r| x.get(r, feature) <= threshold);
        let (left_rows, right_rows) = rows.split_at_mut(n_left);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        let node = &mut self.nodes[id];
        node.feature = Some(feature);
        node.threshold = Some(threshold);
        node.left = Some(left);
        node.right = Some(right);
        id
    }

    fn stats(&self, rows: &[usize]) -> NodeStats {
        let n = rows.len() as f64;
        match &self.target {
            Target::Regression(y) => {
                let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / n;
                let sse: f64 = rows.iter().map(|&r| (y[r] - mean).powi(2)).sum();
                let first = y[rows[0]];
                NodeStats {
                    prediction: mean,
                    impurity: sse / n,
                    class_counts: Vec::new(),
                    pure: rows.iter().all(|&r| y[r] == first),
                }
            }
            Target::Classes {
                positions,
                n_classes,
            } => {
                let mut counts = vec![0usize; *n_classes];
                for &r in rows {
                    counts[positions[r]] += 1;
                }
                let sum_sq: f64 = counts.iter().map(|&c| (c as f64 / n).powi(2)).sum();
                // ties go to the smallest label because classes are sorted
                let majority =
                    counts
                        .iter()
                        .enumerate()
                        .fold(0, |best, (i, &c)| if c > counts[best] { i } else { best });
                NodeStats {
                    prediction: self.classes[majority] as f64,
                    impurity: 1.0 - sum_sq,
                    pure: counts.iter().filter(|&&c| c > 0).count() <= 1,
                    class_counts: counts,
                }
            }
        }
    }

    /// Best `(feature, threshold)` with strictly positive impurity decrease.
    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64)> {
        let mut order = rows.to_vec();
        let mut best: Option<(SplitScore, usize, f64)> = None;
        for feature in 0..self.x.ncols() {
            let x = self.x;
            order.sort_by(|&a, &b| {
                x.get(a, feature)
                    .total_cmp(&x.get(b, feature))
                    .then(a.cmp(&b))
            });
            let candidate = match &self.target {
                Target::Regression(y) => self.best_regression_cut(&order, feature, y),
                Target::Classes {
                    positions,
                    n_classes,
                } => self.best_gini_cut(&order, feature, positions, *n_classes),
            };
            if let Some((score, threshold)) = candidate {
                let better = match &best {
                    None => true,
                    Some((b, _, _)) => score.cmp(b) == Ordering::Greater,
                };
                if better {
                    best = Some((score, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    /// Admissible cut positions along `order`: both sides hold at least
    /// `min_leaf` rows and the feature value changes across the cut.
    fn cuts<'o>(&self, order: &'o [usize], feature: usize) -> impl Iterator<Item = usize> + 'o
    where
        'a: 'o,
    {
        let x: &'o Matrix = self.x;
        let n = order.len();
        let min_leaf = self.min_leaf;
        (min_leaf..=n.saturating_sub(min_leaf))
            .filter(move |&i| i > 0 && i < n)
            .filter(move |&i| x.get(order[i - 1], feature) < x.get(order[i], feature))
    }

    fn best_regression_cut(
        &self,
        order: &[usize],
        feature: usize,
        y: &[f64],
    ) -> Option<(SplitScore, f64)> {
        let n = order.len();
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(0.0);
        for &r in order {
            prefix.push(prefix.last().unwrap() + y[r]);
        }
        let total = prefix[n];
        let mut best: Option<(f64, usize)> = None;
        for i in self.cuts(order, feature) {
            let (n_l, n_r) = (i as f64, (n - i) as f64);
            let mean_l = prefix[i] / n_l;
            let mean_r = (total - prefix[i]) / n_r;
            let score = n_l * n_r / (n_l + n_r) * (mean_l - mean_r).powi(2);
            if score > best.map_or(0.0, |b| b.0) {
                best = Some((score, i));
            }
        }
        best.map(|(score, i)| {
            (
                SplitScore::Real(score),
                self.threshold_at(order, feature, i),
            )
        })
    }

    fn best_gini_cut(
        &self,
        order: &[usize],
        feature: usize,
        positions: &[usize],
        n_classes: usize,
    ) -> Option<(SplitScore, f64)> {
        // Gini decrease is maximised by maximising sum_c(l_c^2)/n_l + sum_c(r_c^2)/n_r,
        // compared exactly as a fraction of integers.
        let n = order.len() as u128;
        let mut right = vec![0u128; n_classes];
        for &r in order {
            right[positions[r]] += 1;
        }
        let parent_sq: u128 = right.iter().map(|c| c * c).sum();
        let mut left = vec![0u128; n_classes];
        let mut sq_left = 0u128;
        let mut sq_right = parent_sq;
        let mut moved = 0;
        let mut best = Fraction {
            num: parent_sq,
            den: n,
        };
        let mut best_cut = None;
        for i in self.cuts(order, feature) {
            while moved < i {
                let c = positions[order[moved]];
                sq_left += 2 * left[c] + 1;
                sq_right -= 2 * right[c] - 1;
                left[c] += 1;
                right[c] -= 1;
                moved += 1;
            }
            let (n_l, n_r) = (i as u128, n - i as u128);
            let score = Fraction {
                num: sq_left * n_r + sq_right * n_l,
                den: n_l * n_r,
            };
            if score.cmp(&best) == Ordering::Greater {
                best = score;
                best_cut = Some(i);
            }
        }
        best_cut.map(|i| {
            (
                SplitScore::Exact(best),
                self.threshold_at(order, feature, i),
            )
        })
    }

    fn threshold_at(&self, order: &[usize], feature: usize, i: usize) -> f64 {
        midpoint(
            self.x.get(order[i - 1], feature),
            self.x.get(order[i], feature),
        )
    }
}

/// A threshold `c` with `lo <= c < hi`, halfway between them when representable.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo / 2.0 + hi / 2.0;
    if mid >= hi || mid < lo {
        lo
    } else {
        mid
    }
}

#[derive(Debug, Clone, Copy)]
struct Fraction {
    num: u128,
    den: u128,
}

impl Fraction {
    fn cmp(&self, other: &Fraction) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

#[derive(Debug, Clone, Copy)]
enum SplitScore {
    Real(f64),
    Exact(Fraction),
}

impl SplitScore {
    fn cmp(&self, other: &SplitScore) -> Ordering {
        match (self, other) {
            (SplitScore::Real(a), SplitScore::Real(b)) => a.total_cmp(b),
            (SplitScore::Exact(a), SplitScore::Exact(b)) => a.cmp(b),
            _ => unreachable!("one tree never mixes criteria"),
        }
    }
}
