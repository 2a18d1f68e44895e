//! Scored two-arm placement data (inclusion vs semi-segregation) with a
//! known optimal depth-2 rule, plus the reallocation welfare inputs.

use rand::Rng;
use rand_distr::StandardNormal;

use super::unit_rng;
use crate::linalg::Matrix;
use crate::policy::{PolicyData, ReallocationInputs, SpilloverTable};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureOutcome {
    /// Standardized test score; observed policy value -0.46.
    TestScore,
    /// Employment indicator; observed policy value 0.67.
    Employment,
}

struct Shape {
    n: usize,
    observed_value: f64,
    base: f64,
    /// Semi-segregation minus inclusion outside / inside the favoured group.
    gap: f64,
    favoured_gap: f64,
    noise: f64,
    /// Probability of observed semi-segregation before the covariate shifts.
    semi_rate: f64,
    seed: u64,
}

impl FixtureOutcome {
    fn shape(self) -> Shape {
        match self {
            FixtureOutcome::TestScore => Shape {
                n: 3000,
                observed_value: -0.46,
                base: -0.3,
                gap: -0.45,
                favoured_gap: 0.3,
                noise: 0.6,
                semi_rate: 0.2,
                seed: 51,
            },
            FixtureOutcome::Employment => Shape {
                n: 2500,
                observed_value: 0.67,
                base: 0.7,
                gap: -0.12,
                favoured_gap: 0.1,
                noise: 0.35,
                semi_rate: 0.37,
                seed: 52,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FixtureOutcome::TestScore => "test_score",
            FixtureOutcome::Employment => "employment",
        }
    }

    pub fn observed_value(self) -> f64 {
        self.shape().observed_value
    }
}

/// Features `iq` (0 when untested), `iq_tested`, `nonnative` and
/// `social_emotional`. Semi-segregation beats inclusion only for nonnative
/// students with social or emotional issues and for students without such
/// issues whose IQ exceeds 125. Both score columns are shifted by one
/// constant so the observed assignment has exactly the target value.
pub fn policy_fixture(outcome: FixtureOutcome) -> Result<PolicyData> {
    let s = outcome.shape();
    let mut ids = Vec::with_capacity(s.n);
    let mut rows = Vec::with_capacity(s.n);
    let mut gamma = Vec::with_capacity(s.n);
    let mut observed = Vec::with_capacity(s.n);
    for i in 0..s.n {
        let mut rng = unit_rng(s.seed, i as u64 + 1);
        let tested = rng.random::<f64>() < 0.85;
        let iq_raw = (100.0 + 15.0 * rng.sample::<f64, _>(StandardNormal)).round().clamp(50.0, 160.0);
        let iq = if tested { iq_raw } else { 0.0 };
        let nonnative = rng.random::<f64>() < 0.3;
        let social = rng.random::<f64>() < 0.3;
        let favoured = (social && nonnative) || (!social && iq > 125.0);
        let mu_i = s.base + 0.1 * f64::from(u8::from(tested)) * (iq_raw - 100.0) / 15.0;
        let mu_s = mu_i + if favoured { s.favoured_gap } else { s.gap };
        let gi = mu_i + s.noise * rng.sample::<f64, _>(StandardNormal);
        let gs = mu_s + s.noise * rng.sample::<f64, _>(StandardNormal);
        let p_semi = s.semi_rate + 0.15 * f64::from(u8::from(social)) + 0.05 * f64::from(u8::from(nonnative));
        observed.push(usize::from(rng.random::<f64>() < p_semi));
        ids.push(format!("p{:05}", i + 1));
        rows.push(vec![iq, f64::from(u8::from(tested)), f64::from(u8::from(nonnative)), f64::from(u8::from(social))]);
        gamma.push(vec![gi, gs]);
    }
    let current = gamma.iter().zip(&observed).map(|(g, &d)| g[d]).sum::<f64>() / s.n as f64;
    let shift = s.observed_value - current;
    for g in &mut gamma {
        g.iter_mut().for_each(|v| *v += shift);
    }
    Ok(PolicyData {
        ids,
        labels: vec!["inclusion".into(), "semi_segregation".into()],
        gamma: Matrix::from_rows(&gamma)?,
        observed,
        z_names: ["iq", "iq_tested", "nonnative", "social_emotional"].map(String::from).to_vec(),
        z: Matrix::from_rows(&rows)?,
    })
}

/// Moving 807 students into 2723 mainstream classrooms of average size
/// 19.17 at a gain of 0.17 per student. Spillover tables interpolate
/// linearly between the outcomes at SEN shares 0.25 and 0.266.
pub fn welfare_fixture() -> ReallocationInputs {
    ReallocationInputs {
        n_mainstream: 48_714,
        n_reallocated: 807,
        n_classrooms: 2723,
        avg_class_size: 19.17,
        sen_share_before: 0.25,
        spillover_sen: SpilloverTable::new(vec![(0.25, 0.02), (0.266, -0.02)]).expect("valid knots"),
        spillover_nonsen: SpilloverTable::new(vec![(0.25, 0.35), (0.266, 0.32)]).expect("valid knots"),
        policy_gain_per_reallocated: 0.17,
    }
}
