//! Random forests of CART regression trees grown on bootstrap samples.
//!
//! Splits minimize within-node squared error, which for a 0/1 response is the
//! Gini criterion, so leaf values are class fractions for probability tasks.
//! Every tree owns a seed derived from the forest seed and its index, and
//! predictions are averaged in tree order, so results do not depend on the
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Task;
use crate::data::FoldAssignment;
use crate::linalg::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate features per split; `None` uses ceil(sqrt(p)) for
    /// probabilities and ceil(p/3) for regression.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 200, mtry: None, min_leaf: 5, max_depth: None, seed: 0 }
    }
}

impl ForestParams {
    pub fn resolved_mtry(&self, p: usize, task: Task) -> usize {
        let default = match task {
            Task::Probability => (p as f64).sqrt().ceil() as usize,
            Task::Regression => p.div_ceil(3),
        };
        self.mtry.unwrap_or(default).clamp(1, p.max(1))
    }
}

/// Flattened tree node; `feature == usize::MAX` marks a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub value: f64,
}

impl TreeNode {
    fn leaf(value: f64) -> Self {
        Self { feature: usize::MAX, threshold: 0.0, left: 0, right: 0, value }
    }

    pub fn is_leaf(&self) -> bool {
        self.feature == usize::MAX
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            let n = &self.nodes[k];
            if n.is_leaf() {
                return n.value;
            }
            k = if row[n.feature] <= n.threshold { n.left } else { n.right };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub n_features: usize,
    /// Out-of-bag MSE over units left out by at least one tree.
    pub oob_mse: Option<f64>,
    /// Out-of-bag prediction per training unit (`NaN` if never out of bag).
    #[serde(skip)]
    pub oob_pred: Vec<f64>,
}

impl Forest {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let s: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        s / self.trees.len() as f64
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.nrows()).into_par_iter().map(|i| self.predict_row(x.row(i))).collect()
    }
}

fn tree_seed(seed: u64, t: usize) -> u64 {
    seed ^ (t as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct Grower<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    mtry: usize,
    min_leaf: usize,
    max_depth: usize,
    nodes: Vec<TreeNode>,
}

impl Grower<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let n = idx.len();
        let sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let value = sum / n as f64;
        let me = self.nodes.len();
        self.nodes.push(TreeNode::leaf(value));
        if depth >= self.max_depth || n < 2 * self.min_leaf {
            return me;
        }
        let first = self.y[idx[0]];
        if idx.iter().all(|&i| self.y[i] == first) {
            return me;
        }
        let Some((feature, threshold)) = self.best_split(idx, sum, rng) else {
            return me;
        };
        // Partition in place: left block gets x <= threshold.
        let mut mid = 0;
        for k in 0..n {
            if self.x.get(idx[k], feature) <= threshold {
                idx.swap(k, mid);
                mid += 1;
            }
        }
        let (l, r) = idx.split_at_mut(mid);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[me] = TreeNode { feature, threshold, left, right, value };
        me
    }

    fn best_split(&self, idx: &[usize], total: f64, rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let p = self.x.ncols();
        let n = idx.len();
        // Partial Fisher-Yates draw of mtry distinct features.
        let mut features: Vec<usize> = (0..p).collect();
        for k in 0..self.mtry {
            let j = rng.random_range(k..p);
            features.swap(k, j);
        }
        let parent = total * total / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
        for &f in &features[..self.mtry] {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.x.get(i, f), self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[n - 1].0 {
                continue;
            }
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += pairs[k].1;
                let nl = k + 1;
                if nl < self.min_leaf || n - nl < self.min_leaf || pairs[k].0 == pairs[k + 1].0 {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / (n - nl) as f64 - parent;
                if gain > 1e-12 * parent.abs().max(1e-12) && best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, f, 0.5 * (pairs[k].0 + pairs[k + 1].0)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

fn grow_tree(x: &Matrix, y: &[f64], mtry: usize, params: &ForestParams, t: usize) -> (Tree, Vec<u32>) {
    let n = x.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(params.seed, t));
    let mut in_bag = vec![0u32; n];
    let mut idx: Vec<usize> = (0..n)
        .map(|_| {
            let i = rng.random_range(0..n);
            in_bag[i] += 1;
            i
        })
        .collect();
    let mut g = Grower {
        x,
        y,
        mtry,
        min_leaf: params.min_leaf,
        max_depth: params.max_depth.unwrap_or(usize::MAX),
        nodes: Vec::new(),
    };
    g.grow(&mut idx, 0, &mut rng);
    (Tree { nodes: g.nodes }, in_bag)
}

pub fn fit_random_forest(x: &Matrix, y: &[f64], task: Task, params: &ForestParams) -> Result<Forest> {
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::Parameter("forest: X and y lengths differ".into()));
    }
    if n == 0 || x.ncols() == 0 {
        return Err(Error::Parameter("forest needs at least one row and one feature".into()));
    }
    if params.n_trees == 0 || params.min_leaf == 0 {
        return Err(Error::Parameter("forest needs n_trees >= 1 and min_leaf >= 1".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Value("forest: non-finite response".into()));
    }
    let mtry = params.resolved_mtry(x.ncols(), task);
    let grown: Vec<(Tree, Vec<u32>)> =
        (0..params.n_trees).into_par_iter().map(|t| grow_tree(x, y, mtry, params, t)).collect();

    let mut oob_sum = vec![0.0; n];
    let mut oob_cnt = vec![0u32; n];
    for (tree, in_bag) in &grown {
        for i in 0..n {
            if in_bag[i] == 0 {
                oob_sum[i] += tree.predict_row(x.row(i));
                oob_cnt[i] += 1;
            }
        }
    }
    let oob_pred: Vec<f64> =
        oob_sum.iter().zip(&oob_cnt).map(|(s, &c)| if c > 0 { s / c as f64 } else { f64::NAN }).collect();
    let (sse, m) = oob_pred
        .iter()
        .zip(y)
        .filter(|(p, _)| !p.is_nan())
        .fold((0.0, 0usize), |(s, m), (p, y)| (s + (p - y) * (p - y), m + 1));
    let oob_mse = (m > 0).then(|| sse / m as f64);
    Ok(Forest { trees: grown.into_iter().map(|(t, _)| t).collect(), n_features: x.ncols(), oob_mse, oob_pred })
}

/// Held-out MSE of forests trained on each fold's complement.
pub fn cv_mse(x: &Matrix, y: &[f64], task: Task, params: &ForestParams, folds: &FoldAssignment) -> Result<f64> {
    let mut sse = 0.0;
    let mut count = 0;
    for f in 0..folds.k {
        let test = folds.test_indices(f);
        let train = folds.train_indices(f);
        if test.is_empty() || train.is_empty() {
            continue;
        }
        let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let forest = fit_random_forest(&x.select_rows(&train), &ytr, task, params)?;
        for &i in &test {
            let e = forest.predict_row(x.row(i)) - y[i];
            sse += e * e;
        }
        count += test.len();
    }
    Ok(sse / count.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_response_gives_constant_prediction() {
        let x = Matrix::from_vec(50, 2, (0..100).map(|v| v as f64).collect()).unwrap();
        let y = vec![3.25; 50];
        let f = fit_random_forest(&x, &y, Task::Regression, &ForestParams { n_trees: 20, ..Default::default() }).unwrap();
        assert!(f.predict(&x).iter().all(|&p| p == 3.25));
    }

    #[test]
    fn oob_separates_two_clusters() {
        let n = 400;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let c = if i % 2 == 0 { -5.0 } else { 5.0 };
                let jitter = ((i * 37) % 100) as f64 / 100.0 - 0.5;
                vec![c + jitter, jitter * 2.0]
            })
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..n).map(|i| f64::from(u8::from(i % 2 == 1))).collect();
        let f = fit_random_forest(&x, &y, Task::Probability, &ForestParams { n_trees: 50, seed: 4, ..Default::default() }).unwrap();
        let wrong = f
            .oob_pred
            .iter()
            .zip(&y)
            .filter(|(p, y)| !p.is_nan() && (**p >= 0.5) != (**y == 1.0))
            .count();
        assert!((wrong as f64) < 0.05 * n as f64);
        assert!(f.oob_mse.unwrap() < 0.05);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let x = Matrix::from_vec(60, 3, (0..180).map(|v| ((v * 17) % 23) as f64).collect()).unwrap();
        let y: Vec<f64> = (0..60).map(|i| (i % 5) as f64).collect();
        let p = ForestParams { n_trees: 10, seed: 9, ..Default::default() };
        let a = fit_random_forest(&x, &y, Task::Regression, &p).unwrap();
        let b = fit_random_forest(&x, &y, Task::Regression, &p).unwrap();
        assert_eq!(a, b);
        let c = fit_random_forest(&x, &y, Task::Regression, &ForestParams { seed: 10, ..p }).unwrap();
        assert_ne!(a.trees, c.trees);
    }

    #[test]
    fn leaves_respect_min_leaf() {
        let x = Matrix::from_vec(200, 1, (0..200).map(|v| v as f64).collect()).unwrap();
        let y: Vec<f64> = (0..200).map(|v| (v as f64).sin()).collect();
        let f = fit_random_forest(&x, &y, Task::Regression, &ForestParams { n_trees: 1, min_leaf: 10, ..Default::default() }).unwrap();
        let leaves = f.trees[0].nodes.iter().filter(|n| n.is_leaf()).count();
        assert!(leaves <= 20);
    }

    #[test]
    fn mtry_defaults() {
        let p = ForestParams::default();
        assert_eq!(p.resolved_mtry(20, Task::Probability), 5);
        assert_eq!(p.resolved_mtry(20, Task::Regression), 7);
        assert_eq!(p.resolved_mtry(1, Task::Regression), 1);
    }
}
