use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::used;
use crate::persist::fmt_f64;
use crate::stats;
use crate::{Error, Result};

/// Observations beyond this many bandwidths carry no kernel weight.
const SUPPORT: f64 = 8.0;
const CV_GRID: usize = 20;
const CV_SHRINK: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CateCurve {
    pub grid: Vec<f64>,
    /// NaN at gap points.
    pub values: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    pub bandwidth: f64,
    /// LOO-CV optimum before shrinking; `None` when the bandwidth was supplied.
    pub cv_bandwidth: Option<f64>,
    /// Grid indices without any observation within the kernel support.
    pub gaps: Vec<usize>,
    /// Number of observations whose nearest grid point is each grid point.
    pub grid_mass: Vec<usize>,
}

impl CateCurve {
    /// The curve averaged over the empirical distribution of the moderator,
    /// each grid point weighted by the observations nearest to it.
    pub fn integrated(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (v, &m) in self.values.iter().zip(&self.grid_mass) {
            if v.is_finite() && m > 0 {
                num += v * m as f64;
                den += m as f64;
            }
        }
        num / den
    }

    /// Columns: grid, value, lo, hi.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["grid", "value", "lo", "hi"])?;
        for g in 0..self.grid.len() {
            w.write_record([self.grid[g], self.values[g], self.ci_lo[g], self.ci_hi[g]].map(fmt_f64))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rule-of-thumb bandwidth `1.06 min(sd, IQR/1.34) n^(-1/5)`.
pub fn silverman_bandwidth(z: &[f64]) -> f64 {
    let sd = stats::sd(z);
    let iqr = stats::quantile(z, 0.75) - stats::quantile(z, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    1.06 * spread * (z.len() as f64).powf(-0.2)
}

/// Observations sorted by moderator value, for windowed kernel sums.
struct Sorted {
    z: Vec<f64>,
    s: Vec<f64>,
}

impl Sorted {
    fn new(z: &[f64], s: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..z.len()).collect();
        order.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b)));
        Self { z: order.iter().map(|&i| z[i]).collect(), s: order.iter().map(|&i| s[i]).collect() }
    }

    fn window(&self, at: f64, h: f64) -> std::ops::Range<usize> {
        let lo = self.z.partition_point(|&v| v < at - SUPPORT * h);
        let hi = self.z.partition_point(|&v| v <= at + SUPPORT * h);
        lo..hi
    }

    /// Kernel mass and kernel-weighted score sum around `at`, leaving out `skip`.
    fn sums(&self, at: f64, h: f64, skip: Option<usize>) -> (f64, f64) {
        let (mut kw, mut ks) = (0.0, 0.0);
        for j in self.window(at, h) {
            if Some(j) == skip {
                continue;
            }
            let u = (self.z[j] - at) / h;
            let k = (-0.5 * u * u).exp();
            kw += k;
            ks += k * self.s[j];
        }
        (kw, ks)
    }
}

/// Leave-one-out CV over a 20-point log grid spanning a tenth to ten times
/// the rule-of-thumb bandwidth. A bandwidth is eligible only if at least
/// 99% of units keep positive leave-one-out kernel mass.
pub fn loo_cv_bandwidth(scores: &[f64], z: &[f64]) -> Result<f64> {
    let idx = used(scores);
    let zs: Vec<f64> = idx.iter().map(|&i| z[i]).collect();
    let ss: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
    let h0 = silverman_bandwidth(&zs);
    if !(h0 > 0.0) || !h0.is_finite() {
        return Err(Error::Validity("kernel CATE: moderator has no spread".into()));
    }
    let sorted = Sorted::new(&zs, &ss);
    let grid: Vec<f64> = (0..CV_GRID).map(|g| h0 * 10f64.powf(-1.0 + 2.0 * g as f64 / (CV_GRID - 1) as f64)).collect();
    let crit: Vec<f64> = grid
        .par_iter()
        .map(|&h| {
            let (mut sse, mut covered) = (0.0, 0usize);
            for j in 0..sorted.z.len() {
                let (kw, ks) = sorted.sums(sorted.z[j], h, Some(j));
                if kw > 0.0 {
                    let r = sorted.s[j] - ks / kw;
                    sse += r * r;
                    covered += 1;
                }
            }
            if (covered as f64) < 0.99 * sorted.z.len() as f64 { f64::INFINITY } else { sse / covered as f64 }
        })
        .collect();
    let best = (0..CV_GRID).filter(|&g| crit[g].is_finite()).min_by(|&a, &b| crit[a].total_cmp(&crit[b]));
    Ok(grid[best.unwrap_or(CV_GRID - 1)])
}

/// Nadaraya-Watson regression of the scores on `z` with a Gaussian kernel
/// at `0.9 ×` the LOO-CV bandwidth, on `grid_size` evenly spaced points
/// spanning the observed range.
pub fn kernel_cate(scores: &[f64], z: &[f64], grid_size: usize) -> Result<CateCurve> {
    check(scores, z)?;
    let idx = used(scores);
    let mut distinct: Vec<f64> = idx.iter().map(|&i| z[i]).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 10 {
        return Err(Error::Validity(format!("kernel CATE needs at least 10 distinct moderator values, got {}", distinct.len())));
    }
    let cv = loo_cv_bandwidth(scores, z)?;
    let mut curve = kernel_cate_with_bandwidth(scores, z, &even_grid(distinct[0], distinct[distinct.len() - 1], grid_size), CV_SHRINK * cv)?;
    curve.cv_bandwidth = Some(cv);
    Ok(curve)
}

fn even_grid(lo: f64, hi: f64, size: usize) -> Vec<f64> {
    if size <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..size).map(|g| lo + (hi - lo) * g as f64 / (size - 1) as f64).collect()
}

fn check(scores: &[f64], z: &[f64]) -> Result<()> {
    if scores.len() != z.len() {
        return Err(Error::Parameter("kernel CATE: scores and moderator differ in length".into()));
    }
    if used(scores).iter().any(|&i| !z[i].is_finite()) {
        return Err(Error::Value("kernel CATE: non-finite moderator value".into()));
    }
    Ok(())
}

/// Fixed-bandwidth Nadaraya-Watson curve with a pointwise normal band
/// built from `sum_i w_i^2 (s_i - m(g))^2`.
pub fn kernel_cate_with_bandwidth(scores: &[f64], z: &[f64], grid: &[f64], bandwidth: f64) -> Result<CateCurve> {
    check(scores, z)?;
    if !(bandwidth > 0.0) {
        return Err(Error::Parameter(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let idx = used(scores);
    if idx.is_empty() {
        return Err(Error::Validity("kernel CATE: no usable scores".into()));
    }
    let zs: Vec<f64> = idx.iter().map(|&i| z[i]).collect();
    let ss: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
    let sorted = Sorted::new(&zs, &ss);
    let h = bandwidth;
    let points: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&g| {
            let (kw, ks) = sorted.sums(g, h, None);
            if !(kw > 0.0) {
                return (f64::NAN, f64::NAN);
            }
            let m = ks / kw;
            let mut v = 0.0;
            for j in sorted.window(g, h) {
                let u = (sorted.z[j] - g) / h;
                let w = (-0.5 * u * u).exp() / kw;
                v += w * w * (sorted.s[j] - m) * (sorted.s[j] - m);
            }
            (m, v.sqrt())
        })
        .collect();
    let mut grid_mass = vec![0usize; grid.len()];
    for &zi in &zs {
        let nearest = (0..grid.len()).min_by(|&a, &b| (grid[a] - zi).abs().total_cmp(&(grid[b] - zi).abs()));
        if let Some(g) = nearest {
            grid_mass[g] += 1;
        }
    }
    Ok(CateCurve {
        grid: grid.to_vec(),
        values: points.iter().map(|p| p.0).collect(),
        ci_lo: points.iter().map(|p| p.0 - 1.96 * p.1).collect(),
        ci_hi: points.iter().map(|p| p.0 + 1.96 * p.1).collect(),
        bandwidth,
        cv_bandwidth: None,
        gaps: (0..grid.len()).filter(|&g| !points[g].0.is_finite()).collect(),
        grid_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_moderator_gives_flat_ate() {
        let scores: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let ate = stats::mean(&scores);
        let c = kernel_cate_with_bandwidth(&scores, &vec![2.0; 50], &[1.0, 2.0, 3.0], 0.5).unwrap();
        assert!(c.values.iter().all(|v| (v - ate).abs() < 1e-9));
        assert!(kernel_cate(&scores, &vec![2.0; 50], 10).is_err());
    }

    #[test]
    fn huge_bandwidth_is_constant_at_ate() {
        let z: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let s: Vec<f64> = z.iter().map(|v| v * 3.0 - 1.0).collect();
        let c = kernel_cate_with_bandwidth(&s, &z, &[0.0, 0.5, 1.0], 1e7).unwrap();
        assert!(c.values.iter().all(|v| (v - stats::mean(&s)).abs() < 1e-9));
    }

    #[test]
    fn gaps_are_flagged() {
        let z: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        let c = kernel_cate_with_bandwidth(&vec![1.0; 20], &z, &[0.5, 50.0], 0.05).unwrap();
        assert_eq!(c.gaps, vec![1]);
        assert!(c.values[1].is_nan());
    }

    #[test]
    fn matches_brute_force_nw() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let s: Vec<f64> = z.iter().map(|v| v + rng.random::<f64>()).collect();
        let h = 0.07;
        let c = kernel_cate_with_bandwidth(&s, &z, &[0.3], h).unwrap();
        let k: Vec<f64> = z.iter().map(|v| (-0.5 * ((v - 0.3) / h).powi(2)).exp()).collect();
        let nw = k.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() / k.iter().sum::<f64>();
        assert!((c.values[0] - nw).abs() < 1e-12);
    }

    #[test]
    fn recovers_linear_moderation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z: Vec<f64> = (0..3000).map(|_| rng.random::<f64>()).collect();
        let s: Vec<f64> = z.iter().map(|v| v + 2.0 * (rng.random::<f64>() - 0.5)).collect();
        let c = kernel_cate(&s, &z, 41).unwrap();
        assert!((c.bandwidth - 0.9 * c.cv_bandwidth.unwrap()).abs() < 1e-15);
        for (g, v) in c.grid.iter().zip(&c.values) {
            if (0.1..=0.9).contains(g) {
                assert!((v - g).abs() < 0.1, "{g}: {v}");
            }
        }
        assert!((c.integrated() - stats::mean(&s)).abs() < 0.05);
    }
}
