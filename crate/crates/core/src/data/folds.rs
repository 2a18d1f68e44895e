use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Assignment of every unit to exactly one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl FoldAssignment {
    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.fold_of {
            s[f] += 1;
        }
        s
    }

    /// Restriction to a subset of units (in the given order), keeping fold labels.
    pub fn restrict(&self, idx: &[usize]) -> FoldAssignment {
        FoldAssignment {
            fold_of: idx.iter().map(|&i| self.fold_of[i]).collect(),
            k: self.k,
            seed: self.seed,
            stratified: self.stratified,
        }
    }
}

/// Random K-fold split. With `stratify`, units are shuffled within each
/// treatment arm and dealt round-robin with a position counter that carries
/// over between arms, so both the overall fold sizes and every arm's per-fold
/// counts differ by at most one.
pub fn make_folds(n: usize, k: usize, treatment: &[usize], seed: u64, stratify: bool) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Parameter(format!("fold count must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::Parameter(format!("fold count {k} exceeds sample size {n}")));
    }
    if stratify && treatment.len() != n {
        return Err(Error::Parameter("treatment vector length must equal n for stratified folds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; n];
    if stratify {
        let n_arms = treatment.iter().copied().max().map_or(0, |m| m + 1);
        let mut pos = 0usize;
        for arm in 0..n_arms {
            let mut members: Vec<usize> = (0..n).filter(|&i| treatment[i] == arm).collect();
            members.shuffle(&mut rng);
            for i in members {
                fold_of[i] = pos % k;
                pos += 1;
            }
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for (pos, i) in order.into_iter().enumerate() {
            fold_of[i] = pos % k;
        }
    }
    Ok(FoldAssignment { fold_of, k, seed, stratified: stratify })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equal_division() {
        let f = make_folds(10, 5, &[0; 10], 1, false).unwrap();
        assert_eq!(f.sizes(), vec![2; 5]);
    }

    #[test]
    fn remainder_rule() {
        let f = make_folds(11, 5, &[0; 11], 1, false).unwrap();
        let mut s = f.sizes();
        s.sort_unstable();
        assert_eq!(s, vec![2, 2, 2, 2, 3]);
    }

    #[test]
    fn k_out_of_range() {
        assert!(make_folds(3, 4, &[0; 3], 0, false).is_err());
        assert!(make_folds(3, 1, &[0; 3], 0, false).is_err());
        assert!(make_folds(3, 3, &[0; 3], 0, false).is_ok());
    }

    #[test]
    fn stratified_seven_arms() {
        let n = 4000;
        // Unequal arm sizes.
        let treat: Vec<usize> = (0..n).map(|i| (i * 7919 % 113) % 7).collect();
        let f = make_folds(n, 5, &treat, 42, true).unwrap();
        for arm in 0..7 {
            let nd = treat.iter().filter(|&&t| t == arm).count();
            for fold in 0..5 {
                let c = (0..n).filter(|&i| treat[i] == arm && f.fold_of[i] == fold).count();
                assert!((c as f64 - nd as f64 / 5.0).abs() <= 1.0, "arm {arm} fold {fold}: {c} vs {nd}/5");
            }
        }
        let s = f.sizes();
        assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
    }

    #[test]
    fn reproducible() {
        let t: Vec<usize> = (0..100).map(|i| i % 3).collect();
        assert_eq!(make_folds(100, 5, &t, 9, true).unwrap(), make_folds(100, 5, &t, 9, true).unwrap());
        assert_ne!(make_folds(100, 5, &t, 9, true).unwrap(), make_folds(100, 5, &t, 10, true).unwrap());
    }

    proptest! {
        #[test]
        fn fold_invariants(n in 2usize..300, k in 2usize..12, seed in any::<u64>(), stratify in any::<bool>(), arms in 1usize..5) {
            prop_assume!(k <= n);
            let treat: Vec<usize> = (0..n).map(|i| (i * 31 + 7) % arms).collect();
            let f = make_folds(n, k, &treat, seed, stratify).unwrap();
            prop_assert_eq!(f.fold_of.len(), n);
            prop_assert!(f.fold_of.iter().all(|&x| x < k));
            let s = f.sizes();
            prop_assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
            if stratify {
                for arm in 0..arms {
                    let nd = treat.iter().filter(|&&t| t == arm).count() as f64;
                    for fold in 0..k {
                        let c = (0..n).filter(|&i| treat[i] == arm && f.fold_of[i] == fold).count() as f64;
                        prop_assert!((c - nd / k as f64).abs() <= 1.0);
                    }
                }
            }
        }
    }
}
