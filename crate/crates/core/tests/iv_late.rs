use mtdml::dgp::{generate_iv, IvSpec};
use mtdml::iv::{build_deviation_instrument, two_sls, InstrumentOptions};
use mtdml::linalg::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[test]
fn late_recovered_across_seeds() {
    let mut hits = 0;
    for seed in 1..=10 {
        let data = generate_iv(&IvSpec { seed, ..IvSpec::default() }).unwrap();
        let inst = build_deviation_instrument(&data.treated, &data.school, &data.year, None, InstrumentOptions::default()).unwrap();
        let est = two_sls(&data.y, &data.treated_f64(), inst.values(), Some(&data.x), None).unwrap();
        assert!(!est.weak_instrument, "F = {}", est.first_stage_f);
        if (est.point + 0.45).abs() < 3.0 * est.se {
            hits += 1;
        }
        assert!(est.ols_coef > est.point, "OLS should be biased upward by ability");
    }
    assert!(hits >= 9, "{hits}/10");
}

#[test]
fn raw_deviation_is_mean_zero_within_year() {
    let data = generate_iv(&IvSpec { n: 3000, seed: 4, ..IvSpec::default() }).unwrap();
    let inst = build_deviation_instrument(&data.treated, &data.school, &data.year, None, InstrumentOptions::default()).unwrap();
    let mut years: Vec<&String> = data.year.iter().collect();
    years.sort();
    years.dedup();
    for y in years {
        let vals: Vec<f64> = (0..data.n()).filter(|&i| &data.year[i] == y).map(|i| inst.raw[i]).collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!(m.abs() < 1e-9, "{y}: {m}");
    }
}

#[test]
fn noise_instrument_is_flagged_weak() {
    let data = generate_iv(&IvSpec { seed: 2, ..IvSpec::default() }).unwrap();
    let d = data.treated_f64();
    let mut flagged = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise: Vec<f64> = (0..data.n()).map(|_| rng.sample(StandardNormal)).collect();
        if two_sls(&data.y, &d, &noise, None, None).unwrap().weak_instrument {
            flagged += 1;
        }
    }
    assert!(flagged >= 95, "{flagged}/100");
}

#[test]
fn orthogonal_covariates_barely_move_the_estimate() {
    let data = generate_iv(&IvSpec { seed: 6, ..IvSpec::default() }).unwrap();
    let inst = build_deviation_instrument(&data.treated, &data.school, &data.year, None, InstrumentOptions::default()).unwrap();
    let d = data.treated_f64();
    let base = two_sls(&data.y, &d, inst.values(), None, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let w = Matrix::from_columns(&[(0..data.n()).map(|_| rng.sample(StandardNormal)).collect()]).unwrap();
    let with = two_sls(&data.y, &d, inst.values(), Some(&w), None).unwrap();
    assert!((with.point - base.point).abs() < 2.0 * base.se);
}
