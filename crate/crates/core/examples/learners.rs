//! Cross-validated ensemble of lasso, elastic net and random forest over two
//! covariate blocks, on a nonlinear regression and a propensity task.

use mtdml::learners::{fit_ensemble, EnsembleConfig, FeatureBlock, ForestParams, LearnerSpec, Task};
use mtdml::linalg::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> mtdml::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 1500;
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..6).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
    let x = Matrix::from_rows(&rows)?;
    let y: Vec<f64> = rows.iter().map(|r| r[0] + 2.0 * (r[1] > 0.0) as u8 as f64 + 0.5 * r[3] * r[4] + 0.3 * rng.random::<f64>()).collect();
    let d: Vec<f64> = rows.iter().map(|r| (rng.random::<f64>() < 1.0 / (1.0 + (-r[0] - r[2]).exp())) as u8 as f64).collect();

    let blocks = vec![FeatureBlock::new("main", vec![0, 1, 2]), FeatureBlock::new("all", (0..6).collect())];
    let forest = ForestParams { n_trees: 100, ..ForestParams::default() };
    let config = EnsembleConfig { top_k: 3, ..EnsembleConfig::new(LearnerSpec::grid(&["main", "all"], Some(forest))) };
    for (name, target, task) in [("outcome", &y, Task::Regression), ("propensity", &d, Task::Probability)] {
        let ens = fit_ensemble(&x, &blocks, target, task, &config)?;
        println!("{name}:");
        for ((spec, mse), w) in ens.report.ranked.iter().zip(ens.report.weights.iter().chain(std::iter::repeat(&0.0))) {
            println!("  {:<22} held-out MSE {mse:.4}  weight {w:.3}", spec.name);
        }
    }
    Ok(())
}
