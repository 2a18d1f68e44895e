//! Small descriptive and inferential helpers shared by the estimators.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// Sequential left-to-right sum. Every reduction in the crate goes through a
/// fixed order so results do not depend on scheduling.
pub fn sum(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |acc, &x| acc + x)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    sum(xs) / xs.len() as f64
}

/// Sample variance with `n - 1` in the denominator.
pub fn var(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().fold(0.0, |acc, &x| acc + (x - m) * (x - m)) / (n - 1) as f64
}

pub fn sd(xs: &[f64]) -> f64 {
    var(xs).sqrt()
}

/// Quantile with linear interpolation between order statistics
/// (Hyndman–Fan type 7, the R default). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(xs: &[f64], prob: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, prob)
}

/// Two-sided p-value of a z statistic.
pub fn normal_two_sided_p(z: f64) -> f64 {
    if !z.is_finite() {
        return if z.is_nan() { f64::NAN } else { 0.0 };
    }
    let n = Normal::standard();
    2.0 * (1.0 - n.cdf(z.abs()))
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return if t.is_nan() { f64::NAN } else { 0.0 };
    }
    match StudentsT::new(0.0, 1.0, df) {
        Ok(dist) => 2.0 * (1.0 - dist.cdf(t.abs())),
        Err(_) => normal_two_sided_p(t),
    }
}

/// One-sample t-test of `H0: E[x] = 0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeanTest {
    pub mean: f64,
    pub se: f64,
    pub t: f64,
    pub p_value: f64,
    pub n: usize,
    /// Set when the sample has no spread (all values equal), in which case
    /// `se = 0` and the test is reported with `p = 1` if the mean is zero.
    pub degenerate: bool,
}

pub fn one_sample_t_test(xs: &[f64]) -> MeanTest {
    let n = xs.len();
    let m = mean(xs);
    let s = sd(xs);
    let se = s / (n as f64).sqrt();
    if n < 2 || !(se > 0.0) {
        let (t, p) = if m == 0.0 || n < 2 { (0.0, 1.0) } else { (f64::INFINITY * m.signum(), 0.0) };
        return MeanTest { mean: m, se: if se.is_nan() { 0.0 } else { se }, t, p_value: p, n, degenerate: true };
    }
    let t = m / se;
    MeanTest { mean: m, se, t, p_value: t_two_sided_p(t, (n - 1) as f64), n, degenerate: false }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_matches_type7() {
        // R: quantile(c(1,2,3,4,10), 0.3) = 2.2
        let q = quantile(&[4.0, 1.0, 10.0, 3.0, 2.0], 0.3);
        assert!((q - 2.2).abs() < 1e-12);
        assert_eq!(quantile(&[5.0], 0.9), 5.0);
        assert_eq!(quantile(&[1.0, 2.0], 1.0), 2.0);
    }

    #[test]
    fn t_test_basics() {
        let t = one_sample_t_test(&[1.0, 2.0, 3.0]);
        assert!((t.mean - 2.0).abs() < 1e-15);
        assert!((t.se - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(!t.degenerate);
        let d = one_sample_t_test(&[0.0, 0.0, 0.0]);
        assert!(d.degenerate);
        assert_eq!(d.p_value, 1.0);
    }

    #[test]
    fn normal_p_value() {
        assert!((normal_two_sided_p(1.959963984540054) - 0.05).abs() < 1e-9);
    }
}
