//! School-year deviation instrument and 2SLS local average treatment effect.

use mtdml::dgp::{generate_iv, IvSpec};
use mtdml::iv::{build_deviation_instrument, two_sls, InstrumentOptions};

fn main() -> mtdml::Result<()> {
    let spec = IvSpec { seed: 4, ..IvSpec::default() };
    let data = generate_iv(&spec)?;
    let inst = build_deviation_instrument(&data.treated, &data.school, &data.year, None, InstrumentOptions::default())?;
    let d = data.treated_f64();
    println!("true complier effect {:+.3}", spec.effect);
    for (name, cov, cl) in [("no covariates", None, None), ("covariates", Some(&data.x), None), ("clustered", Some(&data.x), Some(&data.school[..]))] {
        let e = two_sls(&data.y, &d, inst.values(), cov, cl)?;
        println!(
            "{name:>14}: LATE {:+.3} (se {:.3})  first stage {:.3}, F {:.1}{}  OLS {:+.3}",
            e.point,
            e.se,
            e.first_stage_coef,
            e.first_stage_f,
            if e.weak_instrument { " weak" } else { "" },
            e.ols_coef
        );
    }
    Ok(())
}
