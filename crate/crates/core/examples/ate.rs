//! Cross-fitted doubly-robust APO, ATE and ATET estimates against the known
//! truth, with and without Crump trimming.

use mtdml::dgp::{generate, DgpSpec};
use mtdml::dml::{apply_trimming, build_scores, crossfit_nuisances, estimate_all, NuisanceConfig, ScoreOptions, TrimScheme};
use mtdml::learners::FeatureBlock;

fn main() -> mtdml::Result<()> {
    let spec = DgpSpec { n: 5000, seed: 11, ..DgpSpec::default() };
    let sim = generate(&spec)?;
    let ds = &sim.dataset;
    let cfg = NuisanceConfig { seed: 11, ..NuisanceConfig::linear(vec![FeatureBlock::new("all", (0..spec.p).collect())]) };
    let nf = crossfit_nuisances(ds, "y", &cfg)?;
    let y = ds.outcome("y")?;
    let labels = spec.arm_labels();
    for trim in [TrimScheme::None, TrimScheme::Crump(0.05)] {
        let keep = apply_trimming(&nf.p_hat, ds.treatment(), trim)?;
        let scores = build_scores(&nf, &labels, &y.values, &y.observed, ds.treatment(), &keep, ScoreOptions::default())?;
        println!("trimming {trim}: {} of {} units kept", scores.n_used(), scores.n());
        for e in estimate_all(&scores, None)?.iter().filter(|e| e.estimand == "ATE") {
            let (d, dp) = (labels.iter().position(|l| *l == e.d).unwrap(), labels.iter().position(|l| *l == e.d_prime).unwrap());
            let truth = sim.truth.ate(d, dp);
            println!("  ATE {:>18} vs {:<18} {:+.4} (se {:.4})  truth {truth:+.4}", e.d, e.d_prime, e.point, e.se);
        }
    }
    Ok(())
}
