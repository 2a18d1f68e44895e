//! Elastic net by cyclic coordinate descent on standardized covariates.
//!
//! Minimizes `1/(2n) |y - b0 - X b|^2 + lambda (a |b|_1 + (1-a)/2 |b|_2^2)`
//! (`a` = mixing; `a = 1` is the lasso). Gaussian fits work in covariance
//! form: the standardized Gram matrix is built once from additive sums, so a
//! cross-validation fold costs one pass over its own rows and every
//! coordinate update is O(p). Probability tasks can use a logit link, fitted
//! by iteratively reweighted least squares around the same solver.

use serde::{Deserialize, Serialize};

use super::Task;
use crate::data::{make_folds, FoldAssignment};
use crate::linalg::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    Logit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetParams {
    /// 1 = lasso, 0 = ridge.
    pub mixing: f64,
    pub n_lambda: usize,
    /// Smallest lambda on the path as a fraction of `lambda_max`.
    pub lambda_min_ratio: f64,
    /// Folds for lambda selection when the caller does not supply any.
    pub cv_folds: usize,
    /// Fit at this single lambda instead of cross-validating the path.
    pub lambda: Option<f64>,
    /// Link used for [`Task::Probability`]; regression always uses identity.
    /// The identity link (a clamped linear probability model) is the default
    /// because a logit fit costs one weighted Gram matrix per IRLS step.
    pub link: Link,
    /// Convergence: max absolute change of a standardized coefficient in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for ElasticNetParams {
    fn default() -> Self {
        Self {
            mixing: 0.5,
            n_lambda: 100,
            lambda_min_ratio: 1e-4,
            cv_folds: 5,
            lambda: None,
            link: Link::Identity,
            tol: 1e-7,
            max_sweeps: 10_000,
            seed: 0,
        }
    }
}

impl ElasticNetParams {
    pub fn lasso() -> Self {
        Self { mixing: 1.0, ..Self::default() }
    }

    pub fn with_mixing(mixing: f64) -> Self {
        Self { mixing, ..Self::default() }
    }
}

/// Linear predictor on the original covariate scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub lambda: f64,
    pub link: Link,
}

impl LinearModel {
    pub fn linear_predictor(&self, x: &Matrix) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| x.row(i).iter().zip(&self.coef).fold(self.intercept, |acc, (a, b)| acc + a * b))
            .collect()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let eta = self.linear_predictor(x);
        match self.link {
            Link::Identity => eta,
            Link::Logit => eta.into_iter().map(sigmoid).collect(),
        }
    }

    pub fn n_nonzero(&self) -> usize {
        self.coef.iter().filter(|&&c| c != 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElasticNetFit {
    pub model: LinearModel,
    pub lambda_max: f64,
    /// The path (empty when a fixed lambda was requested).
    pub lambdas: Vec<f64>,
    /// CV mean squared error per lambda (empty for fixed lambda).
    pub cv_curve: Vec<f64>,
    /// CV MSE at the selected lambda (`NaN` for a fixed-lambda fit).
    pub cv_mse: f64,
    pub warnings: Vec<String>,
}

#[inline]
fn sigmoid(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

#[inline]
fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// Additive sufficient statistics over a set of rows.
#[derive(Debug, Clone)]
struct Sums {
    n: f64,
    sx: Vec<f64>,
    sy: f64,
    sxx: Vec<f64>,
    sxy: Vec<f64>,
    syy: f64,
}

impl Sums {
    fn new(p: usize) -> Self {
        Self { n: 0.0, sx: vec![0.0; p], sy: 0.0, sxx: vec![0.0; p * p], sxy: vec![0.0; p], syy: 0.0 }
    }

    fn add_rows(&mut self, x: &Matrix, y: &[f64], rows: impl Iterator<Item = usize>) {
        let p = self.sx.len();
        for i in rows {
            let r = x.row(i);
            let yi = y[i];
            self.n += 1.0;
            self.sy += yi;
            self.syy += yi * yi;
            for a in 0..p {
                let xa = r[a];
                self.sx[a] += xa;
                self.sxy[a] += xa * yi;
                if xa != 0.0 {
                    let row = &mut self.sxx[a * p..a * p + p];
                    for b in a..p {
                        row[b] += xa * r[b];
                    }
                }
            }
        }
    }

    fn minus(&self, o: &Sums) -> Sums {
        let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
        Sums {
            n: self.n - o.n,
            sx: sub(&self.sx, &o.sx),
            sy: self.sy - o.sy,
            sxx: sub(&self.sxx, &o.sxx),
            sxy: sub(&self.sxy, &o.sxy),
            syy: self.syy - o.syy,
        }
    }
}

/// Standardized problem in covariance form over the kept columns.
#[derive(Debug, Clone)]
struct CovProblem {
    keep: Vec<usize>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    y_mean: f64,
    y_var: f64,
    gram: Vec<f64>,
    c: Vec<f64>,
}

impl CovProblem {
    fn from_sums(s: &Sums, keep: &[usize]) -> Self {
        let p = s.sx.len();
        let n = s.n;
        let q = keep.len();
        let y_mean = s.sy / n;
        let y_var = (s.syy / n - y_mean * y_mean).max(0.0);
        let mean: Vec<f64> = keep.iter().map(|&j| s.sx[j] / n).collect();
        let sd: Vec<f64> = keep
            .iter()
            .zip(&mean)
            .map(|(&j, &m)| {
                let v = s.sxx[j * p + j] / n - m * m;
                let tiny = 1e-12 * (1.0 + m * m);
                if v > tiny {
                    v.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let mut gram = vec![0.0; q * q];
        let mut c = vec![0.0; q];
        for a in 0..q {
            if sd[a] == 0.0 {
                continue;
            }
            let ja = keep[a];
            c[a] = (s.sxy[ja] / n - mean[a] * y_mean) / sd[a];
            for b in a..q {
                if sd[b] == 0.0 {
                    continue;
                }
                let jb = keep[b];
                let (lo, hi) = if ja <= jb { (ja, jb) } else { (jb, ja) };
                let cov = s.sxx[lo * p + hi] / n - mean[a] * mean[b];
                let g = cov / (sd[a] * sd[b]);
                gram[a * q + b] = g;
                gram[b * q + a] = g;
            }
        }
        Self { keep: keep.to_vec(), mean, sd, y_mean, y_var, gram, c }
    }

    fn q(&self) -> usize {
        self.keep.len()
    }

    fn objective(&self, beta: &[f64], lambda: f64, mixing: f64) -> f64 {
        quad_objective(&self.gram, &self.c, self.y_var, beta, lambda, mixing)
    }

    /// Prediction for one raw row from standardized coefficients.
    fn predict_row(&self, row: &[f64], beta: &[f64]) -> f64 {
        let mut v = self.y_mean;
        for (a, &j) in self.keep.iter().enumerate() {
            if beta[a] != 0.0 && self.sd[a] > 0.0 {
                v += beta[a] * (row[j] - self.mean[a]) / self.sd[a];
            }
        }
        v
    }

    fn to_model(&self, p: usize, beta: &[f64], lambda: f64) -> LinearModel {
        let mut coef = vec![0.0; p];
        let mut intercept = self.y_mean;
        for (a, &j) in self.keep.iter().enumerate() {
            if beta[a] != 0.0 && self.sd[a] > 0.0 {
                coef[j] = beta[a] / self.sd[a];
                intercept -= coef[j] * self.mean[a];
            }
        }
        LinearModel { intercept, coef, lambda, link: Link::Identity }
    }
}

fn quad_objective(gram: &[f64], c: &[f64], y_var: f64, beta: &[f64], lambda: f64, mixing: f64) -> f64 {
    let q = c.len();
    let mut quad = 0.0;
    let mut lin = 0.0;
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    for a in 0..q {
        lin += c[a] * beta[a];
        l1 += beta[a].abs();
        l2 += beta[a] * beta[a];
        for b in 0..q {
            quad += beta[a] * gram[a * q + b] * beta[b];
        }
    }
    0.5 * (y_var - 2.0 * lin + quad) + lambda * (mixing * l1 + 0.5 * (1.0 - mixing) * l2)
}

/// Coordinate descent on `1/2 b'Gb - c'b + penalty` with active-set cycling.
/// `gb` must equal `G beta` on entry and is kept in sync. Returns the number
/// of sweeps; when `trace` is given the objective is pushed after each sweep.
#[allow(clippy::too_many_arguments)]
fn coordinate_descent(
    gram: &[f64],
    c: &[f64],
    beta: &mut [f64],
    gb: &mut [f64],
    lambda: f64,
    mixing: f64,
    tol: f64,
    max_sweeps: usize,
    mut trace: Option<(&mut Vec<f64>, f64)>,
) -> usize {
    let q = c.len();
    let l1 = lambda * mixing;
    let l2 = lambda * (1.0 - mixing);
    let mut sweeps = 0;
    let update = |j: usize, beta: &mut [f64], gb: &mut [f64]| -> f64 {
        let gjj = gram[j * q + j];
        if gjj <= 0.0 {
            return 0.0;
        }
        let rho = c[j] - gb[j] + gjj * beta[j];
        let new = soft_threshold(rho, l1) / (gjj + l2);
        let delta = new - beta[j];
        if delta != 0.0 {
            for k in 0..q {
                gb[k] += delta * gram[k * q + j];
            }
            beta[j] = new;
        }
        delta.abs()
    };
    let record = |beta: &[f64], trace: &mut Option<(&mut Vec<f64>, f64)>| {
        if let Some((t, y_var)) = trace {
            t.push(quad_objective(gram, c, *y_var, beta, lambda, mixing));
        }
    };
    loop {
        // Full sweep.
        let mut max_change = 0.0f64;
        for j in 0..q {
            max_change = max_change.max(update(j, beta, gb));
        }
        sweeps += 1;
        record(beta, &mut trace);
        if max_change < tol || sweeps >= max_sweeps {
            break;
        }
        // Iterate on the active set until it settles.
        let active: Vec<usize> = (0..q).filter(|&j| beta[j] != 0.0).collect();
        loop {
            let mut m = 0.0f64;
            for &j in &active {
                m = m.max(update(j, beta, gb));
            }
            sweeps += 1;
            record(beta, &mut trace);
            if m < tol || sweeps >= max_sweeps {
                break;
            }
        }
        if sweeps >= max_sweeps {
            break;
        }
    }
    sweeps
}

/// Log-spaced lambda sequence from `lambda_max` down to `ratio * lambda_max`.
pub fn lambda_path(lambda_max: f64, n_lambda: usize, ratio: f64) -> Vec<f64> {
    if n_lambda <= 1 || lambda_max <= 0.0 {
        return vec![lambda_max.max(0.0)];
    }
    let lmin = (lambda_max * ratio).ln();
    let lmax = lambda_max.ln();
    (0..n_lambda)
        .map(|k| (lmax + (lmin - lmax) * k as f64 / (n_lambda - 1) as f64).exp())
        .collect()
}

fn kept_columns(x: &Matrix) -> Vec<usize> {
    (0..x.ncols())
        .filter(|&j| {
            let first = x.get(0, j);
            (1..x.nrows()).any(|i| x.get(i, j) != first)
        })
        .collect()
}

fn validate(x: &Matrix, y: &[f64], params: &ElasticNetParams) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Parameter("elastic net: X and y lengths differ".into()));
    }
    if x.nrows() < 2 {
        return Err(Error::Parameter("elastic net needs at least 2 rows".into()));
    }
    if !(0.0..=1.0).contains(&params.mixing) {
        return Err(Error::Parameter(format!("mixing must be in [0, 1], got {}", params.mixing)));
    }
    if let Some(l) = params.lambda {
        if !(l >= 0.0) {
            return Err(Error::Parameter(format!("lambda must be non-negative, got {l}")));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Value("elastic net: non-finite response".into()));
    }
    Ok(())
}

/// Fits an elastic net. With `params.lambda = None` the lambda is chosen by
/// minimum cross-validated MSE over the path, using `folds` when given and
/// otherwise `params.cv_folds` random folds.
pub fn fit_elastic_net(
    x: &Matrix,
    y: &[f64],
    params: &ElasticNetParams,
    task: Task,
    folds: Option<&FoldAssignment>,
) -> Result<ElasticNetFit> {
    validate(x, y, params)?;
    let logit = task == Task::Probability && params.link == Link::Logit;
    if logit && y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::Value("logit link needs responses in [0, 1]".into()));
    }
    let p = x.ncols();
    let n = x.nrows();
    let keep = kept_columns(x);
    let mut warnings = Vec::new();
    if keep.is_empty() {
        warnings.push("all covariates constant: intercept-only model".to_string());
    }
    let clamp = task == Task::Probability;

    let owned_folds;
    let folds = match folds {
        Some(f) => Some(f),
        None if params.lambda.is_none() && n >= params.cv_folds.max(2) => {
            owned_folds = make_folds(n, params.cv_folds.max(2), &[], params.seed, false)?;
            Some(&owned_folds)
        }
        None => None,
    };

    if logit {
        return logistic::fit(x, y, params, &keep, folds, warnings);
    }

    let mut total = Sums::new(p);
    total.add_rows(x, y, 0..n);
    let full = CovProblem::from_sums(&total, &keep);
    let lambda_max = full.c.iter().fold(0.0f64, |m, v| m.max(v.abs())) / params.mixing.max(1e-3);

    if let Some(lambda) = params.lambda {
        let beta = solve_at(&full, lambda, lambda_max, params);
        let model = full.to_model(p, &beta, lambda);
        return Ok(ElasticNetFit { model, lambda_max, lambdas: Vec::new(), cv_curve: Vec::new(), cv_mse: f64::NAN, warnings });
    }

    let lambdas = lambda_path(lambda_max, params.n_lambda, params.lambda_min_ratio);
    let folds = folds.ok_or_else(|| Error::Parameter("too few rows for lambda cross-validation".into()))?;
    let mut sse = vec![0.0; lambdas.len()];
    let mut counted = 0usize;
    for f in 0..folds.k {
        let test: Vec<usize> = folds.test_indices(f);
        if test.is_empty() || test.len() == n {
            continue;
        }
        let mut fs = Sums::new(p);
        fs.add_rows(x, y, test.iter().copied());
        let train = CovProblem::from_sums(&total.minus(&fs), &keep);
        let q = train.q();
        let mut beta = vec![0.0; q];
        let mut gb = vec![0.0; q];
        for (li, &lambda) in lambdas.iter().enumerate() {
            coordinate_descent(&train.gram, &train.c, &mut beta, &mut gb, lambda, params.mixing, params.tol, params.max_sweeps, None);
            for &i in &test {
                let mut pred = train.predict_row(x.row(i), &beta);
                if clamp {
                    pred = pred.clamp(0.0, 1.0);
                }
                sse[li] += (y[i] - pred) * (y[i] - pred);
            }
        }
        counted += test.len();
    }
    let cv_curve: Vec<f64> = sse.iter().map(|s| s / counted.max(1) as f64).collect();
    let best = cv_curve
        .iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v < cv_curve[b] { i } else { b });

    let q = full.q();
    let mut beta = vec![0.0; q];
    let mut gb = vec![0.0; q];
    for &lambda in &lambdas[..=best] {
        coordinate_descent(&full.gram, &full.c, &mut beta, &mut gb, lambda, params.mixing, params.tol, params.max_sweeps, None);
    }
    let model = full.to_model(p, &beta, lambdas[best]);
    Ok(ElasticNetFit { model, lambda_max, cv_mse: cv_curve[best], lambdas, cv_curve, warnings })
}

/// Warm-started descent from `lambda_max` to `lambda`.
fn solve_at(prob: &CovProblem, lambda: f64, lambda_max: f64, params: &ElasticNetParams) -> Vec<f64> {
    let q = prob.q();
    let mut beta = vec![0.0; q];
    let mut gb = vec![0.0; q];
    let mut path: Vec<f64> = if lambda_max > lambda && lambda_max > 0.0 {
        let floor = if lambda > 0.0 { lambda } else { lambda_max * params.lambda_min_ratio };
        lambda_path(lambda_max, 20, floor / lambda_max)
    } else {
        Vec::new()
    };
    path.push(lambda);
    for l in path {
        coordinate_descent(&prob.gram, &prob.c, &mut beta, &mut gb, l, params.mixing, params.tol, params.max_sweeps, None);
    }
    beta
}

/// Objective value after every sweep of a fixed-lambda Gaussian fit started
/// from zero. Exposed for checking the descent property.
pub fn objective_trace(x: &Matrix, y: &[f64], mixing: f64, lambda: f64) -> Result<Vec<f64>> {
    let params = ElasticNetParams { mixing, lambda: Some(lambda), ..ElasticNetParams::default() };
    validate(x, y, &params)?;
    let keep = kept_columns(x);
    let mut s = Sums::new(x.ncols());
    s.add_rows(x, y, 0..x.nrows());
    let prob = CovProblem::from_sums(&s, &keep);
    let q = prob.q();
    let mut beta = vec![0.0; q];
    let mut gb = vec![0.0; q];
    let mut trace = vec![prob.objective(&beta, lambda, mixing)];
    coordinate_descent(&prob.gram, &prob.c, &mut beta, &mut gb, lambda, mixing, params.tol, params.max_sweeps, Some((&mut trace, prob.y_var)));
    Ok(trace)
}

mod logistic {
    //! Penalized logistic regression by IRLS; each reweighted least-squares
    //! step is solved in covariance form by the shared coordinate descent.

    use super::*;

    /// Standardized design over a row subset (column-major).
    struct Design {
        keep: Vec<usize>,
        mean: Vec<f64>,
        sd: Vec<f64>,
        cols: Vec<Vec<f64>>,
        y: Vec<f64>,
    }

    impl Design {
        fn new(x: &Matrix, y: &[f64], rows: &[usize], keep: &[usize]) -> Self {
            let n = rows.len() as f64;
            let mut mean = Vec::with_capacity(keep.len());
            let mut sd = Vec::with_capacity(keep.len());
            let mut cols = Vec::with_capacity(keep.len());
            for &j in keep {
                let raw: Vec<f64> = rows.iter().map(|&i| x.get(i, j)).collect();
                let m = raw.iter().sum::<f64>() / n;
                let v = raw.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n;
                let s = if v > 1e-12 * (1.0 + m * m) { v.sqrt() } else { 0.0 };
                cols.push(if s > 0.0 { raw.iter().map(|a| (a - m) / s).collect() } else { vec![0.0; rows.len()] });
                mean.push(m);
                sd.push(s);
            }
            Self { keep: keep.to_vec(), mean, sd, cols, y: rows.iter().map(|&i| y[i]).collect() }
        }

        fn n(&self) -> usize {
            self.y.len()
        }

        fn eta(&self, b0: f64, beta: &[f64]) -> Vec<f64> {
            let mut eta = vec![b0; self.n()];
            for (a, col) in self.cols.iter().enumerate() {
                if beta[a] != 0.0 {
                    for (e, v) in eta.iter_mut().zip(col) {
                        *e += beta[a] * v;
                    }
                }
            }
            eta
        }

        fn predict_raw_row(&self, row: &[f64], b0: f64, beta: &[f64]) -> f64 {
            let mut e = b0;
            for (a, &j) in self.keep.iter().enumerate() {
                if beta[a] != 0.0 && self.sd[a] > 0.0 {
                    e += beta[a] * (row[j] - self.mean[a]) / self.sd[a];
                }
            }
            sigmoid(e)
        }

        fn lambda_max(&self, mixing: f64) -> f64 {
            let n = self.n() as f64;
            let ybar = self.y.iter().sum::<f64>() / n;
            self.cols
                .iter()
                .map(|c| c.iter().zip(&self.y).map(|(x, y)| x * (y - ybar)).sum::<f64>().abs() / n)
                .fold(0.0, f64::max)
                / mixing.max(1e-3)
        }

        fn deviance(&self, eta: &[f64]) -> f64 {
            let mut d = 0.0;
            for (&e, &y) in eta.iter().zip(&self.y) {
                let p = sigmoid(e).clamp(1e-12, 1.0 - 1e-12);
                d -= 2.0 * (y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            }
            d
        }

        /// IRLS at one lambda from a warm start; returns the deviance.
        fn solve(&self, b0: &mut f64, beta: &mut [f64], lambda: f64, params: &ElasticNetParams) -> f64 {
            let n = self.n();
            let nf = n as f64;
            let q = self.cols.len();
            let mut dev_old = f64::INFINITY;
            for _ in 0..25 {
                let eta = self.eta(*b0, beta);
                let mut w = vec![0.0; n];
                let mut z = vec![0.0; n];
                for i in 0..n {
                    let p = sigmoid(eta[i]).clamp(1e-5, 1.0 - 1e-5);
                    w[i] = p * (1.0 - p);
                    z[i] = eta[i] + (self.y[i] - p) / w[i];
                }
                let sw: f64 = w.iter().sum();
                let zbar = w.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() / sw;
                let xbar: Vec<f64> =
                    self.cols.iter().map(|c| c.iter().zip(&w).map(|(x, wi)| x * wi).sum::<f64>() / sw).collect();
                // Weighted, centered Gram and cross-products.
                let mut gram = vec![0.0; q * q];
                let mut c = vec![0.0; q];
                let centered: Vec<Vec<f64>> =
                    self.cols.iter().zip(&xbar).map(|(col, m)| col.iter().map(|v| v - m).collect()).collect();
                for a in 0..q {
                    let ca = &centered[a];
                    c[a] = (0..n).map(|i| w[i] * ca[i] * (z[i] - zbar)).sum::<f64>() / nf;
                    for b in a..q {
                        let cb = &centered[b];
                        let g = (0..n).map(|i| w[i] * ca[i] * cb[i]).sum::<f64>() / nf;
                        gram[a * q + b] = g;
                        gram[b * q + a] = g;
                    }
                }
                let mut gb = vec![0.0; q];
                for a in 0..q {
                    gb[a] = (0..q).map(|b| gram[a * q + b] * beta[b]).sum();
                }
                coordinate_descent(&gram, &c, beta, &mut gb, lambda, params.mixing, params.tol, params.max_sweeps, None);
                *b0 = zbar - xbar.iter().zip(beta.iter()).map(|(m, b)| m * b).sum::<f64>();
                let dev = self.deviance(&self.eta(*b0, beta));
                if (dev_old - dev).abs() < 1e-8 * (dev.abs() + 0.1) {
                    return dev;
                }
                dev_old = dev;
            }
            dev_old
        }

        fn to_model(&self, p: usize, b0: f64, beta: &[f64], lambda: f64) -> LinearModel {
            let mut coef = vec![0.0; p];
            let mut intercept = b0;
            for (a, &j) in self.keep.iter().enumerate() {
                if beta[a] != 0.0 && self.sd[a] > 0.0 {
                    coef[j] = beta[a] / self.sd[a];
                    intercept -= coef[j] * self.mean[a];
                }
            }
            LinearModel { intercept, coef, lambda, link: Link::Logit }
        }
    }

    fn null_intercept(y: &[f64]) -> f64 {
        let m = (y.iter().sum::<f64>() / y.len() as f64).clamp(1e-6, 1.0 - 1e-6);
        (m / (1.0 - m)).ln()
    }

    /// Follows the path, stopping early once the deviance stops moving.
    /// Returns the coefficients reached at each lambda (the last one is
    /// repeated after an early stop).
    fn path(d: &Design, lambdas: &[f64], params: &ElasticNetParams) -> Vec<(f64, Vec<f64>)> {
        let q = d.cols.len();
        let mut b0 = null_intercept(&d.y);
        let mut beta = vec![0.0; q];
        let null_dev = d.deviance(&vec![b0; d.n()]);
        let mut out = Vec::with_capacity(lambdas.len());
        let mut prev_dev = null_dev;
        let mut stopped = false;
        for &l in lambdas {
            if !stopped {
                let dev = d.solve(&mut b0, &mut beta, l, params);
                let ratio_change = (prev_dev - dev) / null_dev.max(1e-12);
                if out.len() > 4 && (ratio_change.abs() < 1e-5 || 1.0 - dev / null_dev.max(1e-12) > 0.999) {
                    stopped = true;
                }
                prev_dev = dev;
            }
            out.push((b0, beta.clone()));
        }
        out
    }

    pub(super) fn fit(
        x: &Matrix,
        y: &[f64],
        params: &ElasticNetParams,
        keep: &[usize],
        folds: Option<&FoldAssignment>,
        warnings: Vec<String>,
    ) -> Result<ElasticNetFit> {
        let n = x.nrows();
        let p = x.ncols();
        let all: Vec<usize> = (0..n).collect();
        let full = Design::new(x, y, &all, keep);
        let lambda_max = full.lambda_max(params.mixing);
        if let Some(lambda) = params.lambda {
            let mut lams = if lambda_max > lambda { lambda_path(lambda_max, 20, (lambda.max(lambda_max * 1e-4)) / lambda_max) } else { Vec::new() };
            lams.push(lambda);
            let (b0, beta) = path(&full, &lams, &ElasticNetParams { ..params.clone() }).pop().expect("non-empty path");
            let model = full.to_model(p, b0, &beta, lambda);
            return Ok(ElasticNetFit { model, lambda_max, lambdas: Vec::new(), cv_curve: Vec::new(), cv_mse: f64::NAN, warnings });
        }
        let lambdas = lambda_path(lambda_max, params.n_lambda, params.lambda_min_ratio);
        let folds = folds.ok_or_else(|| Error::Parameter("too few rows for lambda cross-validation".into()))?;
        let mut sse = vec![0.0; lambdas.len()];
        let mut counted = 0;
        for f in 0..folds.k {
            let test = folds.test_indices(f);
            if test.is_empty() || test.len() == n {
                continue;
            }
            let train = folds.train_indices(f);
            let d = Design::new(x, y, &train, keep);
            let fits = path(&d, &lambdas, params);
            for (li, (b0, beta)) in fits.iter().enumerate() {
                for &i in &test {
                    let pr = d.predict_raw_row(x.row(i), *b0, beta);
                    sse[li] += (y[i] - pr) * (y[i] - pr);
                }
            }
            counted += test.len();
        }
        let cv_curve: Vec<f64> = sse.iter().map(|s| s / counted.max(1) as f64).collect();
        let best = cv_curve.iter().enumerate().fold(0, |b, (i, &v)| if v < cv_curve[b] { i } else { b });
        let fits = path(&full, &lambdas[..=best], params);
        let (b0, beta) = fits.last().cloned().expect("non-empty path");
        let model = full.to_model(p, b0, &beta, lambdas[best]);
        Ok(ElasticNetFit { model, lambda_max, cv_mse: cv_curve[best], lambdas, cv_curve, warnings })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ols;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn design(n: usize, p: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Matrix::from_vec(n, p, data).unwrap()
    }

    #[test]
    fn lambda_zero_equals_ols() {
        let x = design(200, 4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y: Vec<f64> = (0..200)
            .map(|i| 1.0 + 0.5 * x.get(i, 0) - x.get(i, 2) + rng.sample::<f64, _>(StandardNormal))
            .collect();
        for mixing in [0.0, 0.5, 1.0] {
            let params = ElasticNetParams { mixing, lambda: Some(0.0), tol: 1e-12, ..Default::default() };
            let fit = fit_elastic_net(&x, &y, &params, Task::Regression, None).unwrap();
            let o = ols(&x.with_intercept(), &y).unwrap();
            assert!((fit.model.intercept - o.coef[0]).abs() < 1e-6);
            for j in 0..4 {
                assert!((fit.model.coef[j] - o.coef[j + 1]).abs() < 1e-6, "mixing {mixing} coef {j}");
            }
        }
    }

    #[test]
    fn lasso_null_threshold() {
        let x = design(100, 5, 3);
        let y: Vec<f64> = (0..100).map(|i| x.get(i, 1) * 2.0 + 0.1 * i as f64).collect();
        // max |X'y| / n on the standardized design, centered y.
        let keep: Vec<usize> = (0..5).collect();
        let mut s = Sums::new(5);
        s.add_rows(&x, &y, 0..100);
        let prob = CovProblem::from_sums(&s, &keep);
        let lmax = prob.c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for lambda in [lmax, lmax * 1.5] {
            let params = ElasticNetParams { mixing: 1.0, lambda: Some(lambda), ..Default::default() };
            let fit = fit_elastic_net(&x, &y, &params, Task::Regression, None).unwrap();
            assert!(fit.model.coef.iter().all(|&c| c == 0.0));
        }
        let params = ElasticNetParams { mixing: 1.0, lambda: Some(lmax * 0.9), ..Default::default() };
        let fit = fit_elastic_net(&x, &y, &params, Task::Regression, None).unwrap();
        assert!(fit.model.n_nonzero() >= 1);
    }

    #[test]
    fn recovers_slopes_at_cv_lambda() {
        let n = 500;
        let x = design(n, 6, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let y: Vec<f64> = (0..n)
            .map(|i| 2.0 * x.get(i, 0) - 3.0 * x.get(i, 1) + 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for params in [ElasticNetParams::lasso(), ElasticNetParams::with_mixing(0.5)] {
            let fit = fit_elastic_net(&x, &y, &params, Task::Regression, None).unwrap();
            assert!((fit.model.coef[0] - 2.0).abs() < 0.05, "{:?}", fit.model.coef);
            assert!((fit.model.coef[1] + 3.0).abs() < 0.05, "{:?}", fit.model.coef);
            assert!(fit.cv_mse < 0.05);
        }
    }

    #[test]
    fn constant_columns_give_intercept_only() {
        let x = Matrix::filled(10, 3, 2.0);
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let fit = fit_elastic_net(&x, &y, &ElasticNetParams::default(), Task::Regression, None).unwrap();
        assert!(fit.model.coef.iter().all(|&c| c == 0.0));
        assert!((fit.model.intercept - 4.5).abs() < 1e-12);
        assert!(!fit.warnings.is_empty());
    }

    #[test]
    fn lasso_is_elastic_net_with_unit_mixing() {
        let x = design(120, 5, 5);
        let y: Vec<f64> = (0..120).map(|i| x.get(i, 0) - x.get(i, 4) * 0.5 + (i % 7) as f64 * 0.1).collect();
        let folds = make_folds(120, 5, &[], 3, false).unwrap();
        let a = fit_elastic_net(&x, &y, &ElasticNetParams::lasso(), Task::Regression, Some(&folds)).unwrap();
        let b = fit_elastic_net(&x, &y, &ElasticNetParams::with_mixing(1.0), Task::Regression, Some(&folds)).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn objective_never_increases() {
        for seed in 0..20 {
            let x = design(80, 6, seed);
            let y: Vec<f64> = (0..80).map(|i| x.get(i, 0) + x.get(i, 1) * x.get(i, 2)).collect();
            for (mixing, lambda) in [(1.0, 0.01), (0.5, 0.1), (0.2, 0.001)] {
                let t = objective_trace(&x, &y, mixing, lambda).unwrap();
                for w in t.windows(2) {
                    assert!(w[1] <= w[0] + 1e-12, "seed {seed}: {} -> {}", w[0], w[1]);
                }
            }
        }
    }

    #[test]
    fn lasso_sparsity_is_mostly_monotone() {
        let mut ok = 0;
        let total = 100;
        for seed in 0..total {
            let x = design(60, 8, 100 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = (0..60).map(|i| x.get(i, 0) - 0.5 * x.get(i, 3) + rng.sample::<f64, _>(StandardNormal)).collect();
            let nz = |l: f64| {
                let p = ElasticNetParams { mixing: 1.0, lambda: Some(l), ..Default::default() };
                fit_elastic_net(&x, &y, &p, Task::Regression, None).unwrap().model.n_nonzero()
            };
            if nz(0.3) <= nz(0.05) {
                ok += 1;
            }
        }
        assert!(ok as f64 >= 0.95 * total as f64, "{ok}/{total}");
    }

    #[test]
    fn logistic_probabilities_in_unit_interval() {
        let n = 400;
        let x = design(n, 3, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let p = sigmoid(1.5 * x.get(i, 0) - x.get(i, 1));
                f64::from(u8::from(rng.random::<f64>() < p))
            })
            .collect();
        let params = ElasticNetParams { link: Link::Logit, ..ElasticNetParams::lasso() };
        let fit = fit_elastic_net(&x, &y, &params, Task::Probability, None).unwrap();
        let pr = fit.model.predict(&x);
        assert!(pr.iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert!(fit.model.coef[0] > 0.8 && fit.model.coef[1] < -0.5, "{:?}", fit.model.coef);
        assert_eq!(fit.model.link, Link::Logit);
    }
}
