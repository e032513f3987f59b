//! Independent reference implementations used to check the library.
//!
//! Nothing here calls into the tree or metrics code: splits are found by
//! enumerating every partition directly, impurity is recomputed from scratch
//! for each candidate, and information quantities come from entropies of
//! explicit count tables.

#![allow(dead_code)]

use std::collections::BTreeMap;

use policyscope::{DecisionTree, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Leaf row sets of a greedily grown tree, each sorted, in ascending order of
/// their first row.
pub type Partition = Vec<Vec<usize>>;

/// Left and right row sets of a split.
type Split = (Vec<usize>, Vec<usize>);

pub struct OracleSettings {
    pub max_depth: usize,
    pub min_leaf: usize,
}

fn sse(rows: &[usize], y: &[f64]) -> f64 {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / n;
    rows.iter().map(|&r| (y[r] - mean).powi(2)).sum()
}

/// Every way of cutting `rows` on one feature between two distinct values,
/// in feature-then-value order, as `(left, right)` row sets.
fn candidate_splits(x: &Matrix, rows: &[usize], min_leaf: usize) -> Vec<Split> {
    let mut out = Vec::new();
    for f in 0..x.ncols() {
        let mut values: Vec<f64> = rows.iter().map(|&r| x.get(r, f)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for &cut in values.iter().take(values.len().saturating_sub(1)) {
            let (left, right): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&r| x.get(r, f) <= cut);
            if left.len() >= min_leaf && right.len() >= min_leaf {
                out.push((left, right));
            }
        }
    }
    out
}

/// Greedy regression tree maximizing the drop in squared error at each node.
pub fn grow_regression(x: &Matrix, y: &[f64], s: &OracleSettings) -> Partition {
    fn go(
        x: &Matrix,
        y: &[f64],
        s: &OracleSettings,
        rows: Vec<usize>,
        depth: usize,
        out: &mut Partition,
    ) {
        let constant = rows.iter().all(|&r| y[r] == y[rows[0]]);
        if constant || depth >= s.max_depth || rows.len() < 2 * s.min_leaf {
            out.push(rows);
            return;
        }
        let parent = sse(&rows, y);
        let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
        for (l, r) in candidate_splits(x, &rows, s.min_leaf) {
            let gain = parent - sse(&l, y) - sse(&r, y);
            if gain > best.as_ref().map_or(0.0, |b| b.0) {
                best = Some((gain, l, r));
            }
        }
        match best {
            Some((_, l, r)) => {
                go(x, y, s, l, depth + 1, out);
                go(x, y, s, r, depth + 1, out);
            }
            None => out.push(rows),
        }
    }
    let mut out = Vec::new();
    go(x, y, s, (0..x.nrows()).collect(), 0, &mut out);
    normalize(out)
}

/// `sum over classes of count^2`, and the row count.
fn square_counts(rows: &[usize], labels: &[usize]) -> (u128, u128) {
    let mut counts: BTreeMap<usize, u128> = BTreeMap::new();
    for &r in rows {
        *counts.entry(labels[r]).or_default() += 1;
    }
    (counts.values().map(|c| c * c).sum(), rows.len() as u128)
}

/// Greedy classification tree maximizing the Gini decrease at each node.
/// Gini after a split is `1 - (sq_l / n_l + sq_r / n_r) / n`, so the split with
/// the largest `sq_l / n_l + sq_r / n_r` wins; fractions are compared by
/// cross-multiplication.
pub fn grow_classification(x: &Matrix, labels: &[usize], s: &OracleSettings) -> Partition {
    fn go(
        x: &Matrix,
        labels: &[usize],
        s: &OracleSettings,
        rows: Vec<usize>,
        depth: usize,
        out: &mut Partition,
    ) {
        let pure = rows.iter().all(|&r| labels[r] == labels[rows[0]]);
        if pure || depth >= s.max_depth || rows.len() < 2 * s.min_leaf {
            out.push(rows);
            return;
        }
        let (sq, n) = square_counts(&rows, labels);
        // (numerator, denominator) of the best score so far; the parent's own
        // score sq / n must be strictly beaten
        let mut best: (u128, u128, Option<Split>) = (sq, n, None);
        for (l, r) in candidate_splits(x, &rows, s.min_leaf) {
            let (sl, nl) = square_counts(&l, labels);
            let (sr, nr) = square_counts(&r, labels);
            let (num, den) = (sl * nr + sr * nl, nl * nr);
            if num * best.1 > best.0 * den {
                best = (num, den, Some((l, r)));
            }
        }
        match best.2 {
            Some((l, r)) => {
                go(x, labels, s, l, depth + 1, out);
                go(x, labels, s, r, depth + 1, out);
            }
            None => out.push(rows),
        }
    }
    let mut out = Vec::new();
    go(x, labels, s, (0..x.nrows()).collect(), 0, &mut out);
    normalize(out)
}

fn normalize(mut p: Partition) -> Partition {
    for g in &mut p {
        g.sort_unstable();
    }
    p.sort();
    p
}

/// Rows grouped by the leaf they reach in `tree`.
pub fn tree_partition(tree: &DecisionTree, x: &Matrix) -> Partition {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (r, row) in x.rows().enumerate() {
        groups
            .entry(tree.path_of(row).unwrap().0)
            .or_default()
            .push(r);
    }
    normalize(groups.into_values().collect())
}

/// Total squared error of predicting each group's mean.
pub fn partition_loss(p: &Partition, y: &[f64]) -> f64 {
    p.iter().map(|g| sse(g, y)).sum()
}

/// Rows classified correctly when each group predicts its majority label.
pub fn partition_hits(p: &Partition, labels: &[usize]) -> usize {
    p.iter()
        .map(|g| {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for &r in g {
                *counts.entry(labels[r]).or_default() += 1;
            }
            counts.values().copied().max().unwrap_or(0)
        })
        .sum()
}

/// Random design with values on a 0.1 grid so that ties occur.
pub fn random_design(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    let data = (0..n * d)
        .map(|_| f64::from(rng.random_range(0..11u8)) / 10.0)
        .collect();
    Matrix::from_vec(n, d, data).unwrap()
}

/// Entropy in nats of a count table.
pub fn entropy_of_counts<K>(counts: &BTreeMap<K, usize>) -> f64 {
    let n: usize = counts.values().sum();
    counts
        .values()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

pub fn joint_entropy(columns: &[&[usize]]) -> f64 {
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for r in 0..columns[0].len() {
        *counts
            .entry(columns.iter().map(|c| c[r]).collect())
            .or_default() += 1;
    }
    entropy_of_counts(&counts)
}

/// `I[a; b] = H[a] + H[b] - H[a, b]`.
pub fn mi(a: &[usize], b: &[usize]) -> f64 {
    joint_entropy(&[a]) + joint_entropy(&[b]) - joint_entropy(&[a, b])
}

/// `I[a; b | c] = H[a, c] + H[b, c] - H[a, b, c] - H[c]`.
pub fn conditional_mi(a: &[usize], b: &[usize], c: &[usize]) -> f64 {
    joint_entropy(&[a, c]) + joint_entropy(&[b, c])
        - joint_entropy(&[a, b, c])
        - joint_entropy(&[c])
}
