use std::cmp::Ordering;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

pub const DEFAULT_MAX_EVALUATIONS: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyNode {
    Leaf { treatment: String },
    /// Units with `feature <= threshold` go left.
    Split { feature: String, threshold: f64, left: Box<PolicyNode>, right: Box<PolicyNode> },
}

impl PolicyNode {
    fn depth(&self) -> usize {
        match self {
            PolicyNode::Leaf { .. } => 0,
            PolicyNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTree {
    pub depth: usize,
    /// Feature names, in the column order expected by [`PolicyTree::assign`].
    pub trained_on: Vec<String>,
    /// Labels of all arms; leaves name one of them.
    pub labels: Vec<String>,
    pub root: PolicyNode,
    /// In-sample mean score under the tree.
    pub value: f64,
}

impl PolicyTree {
    /// Arm index for every row of `z` (columns as in `trained_on`).
    pub fn assign(&self, z: &Matrix) -> Result<Vec<usize>> {
        if z.ncols() != self.trained_on.len() {
            return Err(Error::Parameter(format!("tree expects {} features, got {}", self.trained_on.len(), z.ncols())));
        }
        (0..z.nrows()).map(|i| self.assign_row(z.row(i))).collect()
    }

    pub fn assign_row(&self, row: &[f64]) -> Result<usize> {
        let mut node = &self.root;
        loop {
            match node {
                PolicyNode::Leaf { treatment } => {
                    return self
                        .labels
                        .iter()
                        .position(|l| l == treatment)
                        .ok_or_else(|| Error::Value(format!("tree leaf names unknown treatment '{treatment}'")));
                }
                PolicyNode::Split { feature, threshold, left, right } => {
                    let j = self
                        .trained_on
                        .iter()
                        .position(|f| f == feature)
                        .ok_or_else(|| Error::Value(format!("tree splits on unknown feature '{feature}'")))?;
                    node = if row[j] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let t: PolicyTree = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if t.root.depth() > t.depth {
            return Err(Error::Schema(format!("{}: tree deeper than its declared depth", path.display())));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeOptions {
    /// Abort once this many unit-feature visits have been made.
    pub max_evaluations: u64,
}

impl Default for TreeOptions {
    fn default() -> Self {
        Self { max_evaluations: DEFAULT_MAX_EVALUATIONS }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum KeyItem {
    /// Feature rank in name order, threshold.
    Split(usize, f64),
    Leaf(usize),
}

impl KeyItem {
    fn cmp(&self, other: &KeyItem) -> Ordering {
        match (self, other) {
            (KeyItem::Split(a, s), KeyItem::Split(b, t)) => a.cmp(b).then(s.total_cmp(t)),
            (KeyItem::Split(..), KeyItem::Leaf(_)) => Ordering::Less,
            (KeyItem::Leaf(_), KeyItem::Split(..)) => Ordering::Greater,
            (KeyItem::Leaf(a), KeyItem::Leaf(b)) => a.cmp(b),
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(usize),
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

#[derive(Debug, Clone)]
struct Cand {
    /// Sum (not mean) of scores under the subtree.
    value: f64,
    /// Bitmask of leaf treatments.
    used: u128,
    key: Vec<KeyItem>,
    node: Node,
}

impl Cand {
    /// Higher value, then fewer distinct treatments, then smaller key.
    fn better_than(&self, other: &Cand) -> bool {
        let tol = 1e-10 * (1.0 + self.value.abs() + other.value.abs());
        if self.value > other.value + tol {
            return true;
        }
        if self.value < other.value - tol {
            return false;
        }
        let (a, b) = (self.used.count_ones(), other.used.count_ones());
        if a != b {
            return a < b;
        }
        for (x, y) in self.key.iter().zip(&other.key) {
            match x.cmp(y) {
                Ordering::Less => return true,
                Ordering::Greater => return false,
                Ordering::Equal => {}
            }
        }
        self.key.len() < other.key.len()
    }

    fn split(feature: usize, rank: usize, threshold: f64, l: Cand, r: Cand) -> Cand {
        let mut key = Vec::with_capacity(1 + l.key.len() + r.key.len());
        key.push(KeyItem::Split(rank, threshold));
        key.extend(l.key);
        key.extend(r.key);
        Cand {
            value: l.value + r.value,
            used: l.used | r.used,
            key,
            node: Node::Split { feature, threshold, left: Box::new(l.node), right: Box::new(r.node) },
        }
    }
}

fn pick(best: &mut Option<Cand>, c: Cand) {
    if best.as_ref().is_none_or(|b| c.better_than(b)) {
        *best = Some(c);
    }
}

struct Search<'a> {
    z: &'a Matrix,
    gamma: &'a Matrix,
    candidates: &'a [usize],
    /// Rank of each feature in name order.
    rank: Vec<usize>,
    evaluations: AtomicU64,
    max: u64,
}

impl Search<'_> {
    fn charge(&self, amount: usize) -> Result<()> {
        let total = self.evaluations.fetch_add(amount as u64, AtomicOrdering::Relaxed) + amount as u64;
        if total > self.max {
            return Err(Error::Parameter(format!(
                "policy tree search exceeded {} node evaluations; use fewer or coarser features, or a smaller depth",
                self.max
            )));
        }
        Ok(())
    }

    fn leaf_from_sums(&self, sums: &[f64]) -> Cand {
        let mut c = 0;
        for k in 1..sums.len() {
            if sums[k] > sums[c] {
                c = k;
            }
        }
        let d = self.candidates[c];
        Cand { value: sums[c], used: 1u128 << d, key: vec![KeyItem::Leaf(d)], node: Node::Leaf(d) }
    }

    fn leaf(&self, units: &[u32]) -> Cand {
        let mut sums = vec![0.0; self.candidates.len()];
        for &i in units {
            for (s, &d) in sums.iter_mut().zip(self.candidates) {
                *s += self.gamma.get(i as usize, d);
            }
        }
        self.leaf_from_sums(&sums)
    }

    /// Best pair of leaves on each side of a depth-1 split. On ties the
    /// pair sharing a treatment is preferred.
    fn leaf_pair(&self, left: &[f64], right: &[f64]) -> (Cand, Cand) {
        let l = self.leaf_from_sums(left);
        let r = self.leaf_from_sums(right);
        if l.used == r.used {
            return (l, r);
        }
        let tol = |v: f64| 1e-10 * (1.0 + v.abs());
        let shared = (0..left.len()).find(|&c| left[c] >= l.value - tol(l.value) && right[c] >= r.value - tol(r.value));
        match shared {
            Some(c) => {
                let mk = |s: f64| {
                    let d = self.candidates[c];
                    Cand { value: s, used: 1u128 << d, key: vec![KeyItem::Leaf(d)], node: Node::Leaf(d) }
                };
                (mk(left[c]), mk(right[c]))
            }
            None => (l, r),
        }
    }

    fn best_depth1(&self, sorted: &[Vec<u32>]) -> Result<Cand> {
        let n = sorted[0].len();
        self.charge(n * sorted.len())?;
        let m = self.candidates.len();
        let mut total = vec![0.0; m];
        for &i in &sorted[0] {
            for (t, &d) in total.iter_mut().zip(self.candidates) {
                *t += self.gamma.get(i as usize, d);
            }
        }
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut best: Option<Cand> = None;
        let mut right = vec![0.0; m];
        for (j, order) in sorted.iter().enumerate() {
            let mut cum = vec![0.0; m];
            for b in 1..n {
                let prev = order[b - 1] as usize;
                for (c, &d) in cum.iter_mut().zip(self.candidates) {
                    *c += self.gamma.get(prev, d);
                }
                let (lo, hi) = (self.z.get(prev, j), self.z.get(order[b] as usize, j));
                if lo >= hi {
                    continue;
                }
                for ((r, t), c) in right.iter_mut().zip(&total).zip(&cum) {
                    *r = t - c;
                }
                if let Some(bst) = &best {
                    // Only candidates within the tie tolerance can win.
                    let v = max(&cum) + max(&right);
                    if v < bst.value - 1e-10 * (1.0 + v.abs() + bst.value.abs()) {
                        continue;
                    }
                }
                let (l, r) = self.leaf_pair(&cum, &right);
                pick(&mut best, Cand::split(j, self.rank[j], midpoint(lo, hi), l, r));
            }
        }
        Ok(best.unwrap_or_else(|| self.leaf(&sorted[0])))
    }

    /// Boundaries `(feature, position)` where a node's sorted values change.
    fn boundaries(&self, sorted: &[Vec<u32>]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (j, order) in sorted.iter().enumerate() {
            for b in 1..order.len() {
                if self.z.get(order[b - 1] as usize, j) < self.z.get(order[b] as usize, j) {
                    out.push((j, b));
                }
            }
        }
        out
    }

    fn split_at(&self, sorted: &[Vec<u32>], j: usize, b: usize, n_total: usize) -> Result<(f64, Vec<Vec<u32>>, Vec<Vec<u32>>)> {
        self.charge(sorted[0].len() * sorted.len())?;
        let order = &sorted[j];
        let threshold = midpoint(self.z.get(order[b - 1] as usize, j), self.z.get(order[b] as usize, j));
        let mut left_mask = vec![false; n_total];
        for &i in &order[..b] {
            left_mask[i as usize] = true;
        }
        let (mut l, mut r) = (Vec::with_capacity(sorted.len()), Vec::with_capacity(sorted.len()));
        for list in sorted {
            let (a, c): (Vec<u32>, Vec<u32>) = list.iter().partition(|&&i| left_mask[i as usize]);
            l.push(a);
            r.push(c);
        }
        Ok((threshold, l, r))
    }

    fn best(&self, sorted: &[Vec<u32>], depth: usize) -> Result<Cand> {
        match depth {
            0 => Ok(self.leaf(&sorted[0])),
            1 => self.best_depth1(sorted),
            _ => {
                let mut best: Option<Cand> = None;
                for (j, b) in self.boundaries(sorted) {
                    pick(&mut best, self.split_candidate(sorted, j, b, depth)?);
                }
                Ok(best.unwrap_or_else(|| self.leaf(&sorted[0])))
            }
        }
    }

    fn split_candidate(&self, sorted: &[Vec<u32>], j: usize, b: usize, depth: usize) -> Result<Cand> {
        let (threshold, l, r) = self.split_at(sorted, j, b, self.z.nrows())?;
        let lc = self.best(&l, depth - 1)?;
        let rc = self.best(&r, depth - 1)?;
        Ok(Cand::split(j, self.rank[j], threshold, lc, rc))
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    a + 0.5 * (b - a)
}

/// Exact search over all trees of the given depth with axis-aligned splits
/// at node-local midpoints between adjacent distinct feature values,
/// maximizing the summed score of the assigned treatment among
/// `candidates`. Ties go to fewer distinct treatments, then to the smaller
/// feature name and threshold in preorder. A node is a leaf only when no
/// feature varies within it.
///
/// Cost grows like `(p n)^depth`; the search aborts with an error once
/// `options.max_evaluations` unit-feature visits are exceeded.
pub fn fit_policy_tree(
    z: &Matrix,
    feature_names: &[String],
    gamma: &Matrix,
    labels: &[String],
    candidates: &[usize],
    depth: usize,
    options: TreeOptions,
) -> Result<PolicyTree> {
    if !(1..=3).contains(&depth) {
        return Err(Error::Parameter(format!("policy tree depth must be 1, 2 or 3, got {depth}")));
    }
    if z.ncols() == 0 || z.nrows() == 0 {
        return Err(Error::Parameter("policy tree needs at least one feature and one unit".into()));
    }
    if feature_names.len() != z.ncols() || gamma.nrows() != z.nrows() || labels.len() != gamma.ncols() {
        return Err(Error::Parameter("policy tree: features, scores and labels disagree in shape".into()));
    }
    let mut cands = candidates.to_vec();
    cands.sort_unstable();
    cands.dedup();
    if cands.len() < 2 || cands.iter().any(|&d| d >= gamma.ncols()) || gamma.ncols() > 128 {
        return Err(Error::Parameter("policy tree needs at least two valid candidate treatments".into()));
    }
    if z.as_slice().iter().any(|v| !v.is_finite()) || gamma.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Value("policy tree: non-finite feature or score".into()));
    }
    let mut by_name: Vec<usize> = (0..z.ncols()).collect();
    by_name.sort_by(|&a, &b| feature_names[a].cmp(&feature_names[b]).then(a.cmp(&b)));
    let mut rank = vec![0; z.ncols()];
    for (r, &j) in by_name.iter().enumerate() {
        rank[j] = r;
    }
    let search = Search { z, gamma, candidates: &cands, rank, evaluations: AtomicU64::new(0), max: options.max_evaluations };
    let sorted: Vec<Vec<u32>> = (0..z.ncols())
        .map(|j| {
            let mut o: Vec<u32> = (0..z.nrows() as u32).collect();
            o.sort_by(|&a, &b| z.get(a as usize, j).total_cmp(&z.get(b as usize, j)).then(a.cmp(&b)));
            o
        })
        .collect();

    let best = if depth == 1 {
        search.best_depth1(&sorted)?
    } else {
        let roots = search.boundaries(&sorted);
        let results: Vec<Result<Cand>> =
            roots.par_iter().map(|&(j, b)| search.split_candidate(&sorted, j, b, depth)).collect();
        let mut best: Option<Cand> = None;
        for r in results {
            pick(&mut best, r?);
        }
        best.unwrap_or_else(|| search.leaf(&sorted[0]))
    };
    fn convert(n: &Node, names: &[String], labels: &[String]) -> PolicyNode {
        match n {
            Node::Leaf(d) => PolicyNode::Leaf { treatment: labels[*d].clone() },
            Node::Split { feature, threshold, left, right } => PolicyNode::Split {
                feature: names[*feature].clone(),
                threshold: *threshold,
                left: Box::new(convert(left, names, labels)),
                right: Box::new(convert(right, names, labels)),
            },
        }
    }
    Ok(PolicyTree {
        depth,
        trained_on: feature_names.to_vec(),
        labels: labels.to_vec(),
        root: convert(&best.node, feature_names, labels),
        value: best.value / z.nrows() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("z{j}")).collect()
    }

    fn labels(k: usize) -> Vec<String> {
        (0..k).map(|d| format!("t{d}")).collect()
    }

    #[test]
    fn dominant_treatment_fills_both_leaves() {
        let z = Matrix::from_columns(&[vec![0.0, 1.0, 2.0, 3.0]]).unwrap();
        let g = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.5, 2.0], vec![0.1, 0.3], vec![-1.0, 0.0]]).unwrap();
        let t = fit_policy_tree(&z, &names(1), &g, &labels(2), &[0, 1], 1, TreeOptions::default()).unwrap();
        let leaf = PolicyNode::Leaf { treatment: "t1".into() };
        assert_eq!(t.root, PolicyNode::Split { feature: "z0".into(), threshold: 0.5, left: Box::new(leaf.clone()), right: Box::new(leaf) });
        assert!((t.value - 3.3 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_planted_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..300).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let noise: Vec<f64> = (0..300).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let z = Matrix::from_columns(&[noise, x.clone()]).unwrap();
        let g = Matrix::from_rows(&x.iter().map(|&v| vec![0.0, v.signum()]).collect::<Vec<_>>()).unwrap();
        let t = fit_policy_tree(&z, &names(2), &g, &labels(2), &[0, 1], 1, TreeOptions::default()).unwrap();
        let below = x.iter().copied().filter(|&v| v <= 0.0).fold(f64::MIN, f64::max);
        let above = x.iter().copied().filter(|&v| v > 0.0).fold(f64::MAX, f64::min);
        match &t.root {
            PolicyNode::Split { feature, threshold, .. } => {
                assert_eq!(feature, "z1");
                assert!(*threshold > below && *threshold < above);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nested_depths_never_lose_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let z = Matrix::from_rows(&(0..60).map(|_| (0..3).map(|_| f64::from(rng.random_range(0..3u8))).collect()).collect::<Vec<_>>()).unwrap();
            let g = Matrix::from_rows(&(0..60).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect::<Vec<_>>()).unwrap();
            let mut last = f64::MIN;
            for depth in 1..=3 {
                let t = fit_policy_tree(&z, &names(3), &g, &labels(3), &[0, 1, 2], depth, TreeOptions::default()).unwrap();
                assert!(t.value >= last - 1e-12);
                let a = t.assign(&z).unwrap();
                let v = (0..60).map(|i| g.get(i, a[i])).sum::<f64>() / 60.0;
                assert!((v - t.value).abs() < 1e-12);
                last = t.value;
            }
        }
    }

    #[test]
    fn column_order_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..80).map(|_| f64::from(rng.random_range(0..2u8))).collect()).collect();
        let g = Matrix::from_rows(&(0..80).map(|_| (0..2).map(|_| rng.random::<f64>()).collect()).collect::<Vec<_>>()).unwrap();
        let a = fit_policy_tree(&Matrix::from_columns(&cols).unwrap(), &names(3), &g, &labels(2), &[0, 1], 2, TreeOptions::default()).unwrap();
        let rev: Vec<Vec<f64>> = cols.iter().rev().cloned().collect();
        let rev_names: Vec<String> = names(3).into_iter().rev().collect();
        let b = fit_policy_tree(&Matrix::from_columns(&rev).unwrap(), &rev_names, &g, &labels(2), &[0, 1], 2, TreeOptions::default()).unwrap();
        assert_eq!(a.root, b.root);
    }

    #[test]
    fn evaluation_cap_errors() {
        let z = Matrix::from_columns(&[(0..100).map(f64::from).collect()]).unwrap();
        let g = Matrix::from_rows(&(0..100).map(|i| vec![0.0, f64::from(i % 3)]).collect::<Vec<_>>()).unwrap();
        let e = fit_policy_tree(&z, &names(1), &g, &labels(2), &[0, 1], 3, TreeOptions { max_evaluations: 1000 });
        assert!(matches!(e, Err(Error::Parameter(_))));
        assert!(fit_policy_tree(&z, &names(1), &g, &labels(2), &[0, 1], 4, TreeOptions::default()).is_err());
    }

    #[test]
    fn json_round_trip() {
        let z = Matrix::from_columns(&[vec![0.0, 1.0, 0.0, 1.0], vec![0.0, 0.0, 1.0, 1.0]]).unwrap();
        let g = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let t = fit_policy_tree(&z, &names(2), &g, &labels(2), &[0, 1], 2, TreeOptions::default()).unwrap();
        assert_eq!(t.value, 1.0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tree.json");
        t.write_json(&p).unwrap();
        assert_eq!(PolicyTree::read_json(&p).unwrap(), t);
    }
}
