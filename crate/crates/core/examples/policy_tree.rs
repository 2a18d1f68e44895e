//! Depth-2 placement tree on the scored fixture, its value against simple
//! policies, and out-of-fold validation.

use mtdml::dgp::{policy_fixture, FixtureOutcome};
use mtdml::policy::{cost_table_default, fit_policy_tree, policy_value, validate_policy, Baseline, TreeOptions};

fn main() -> mtdml::Result<()> {
    let pd = policy_fixture(FixtureOutcome::TestScore)?;
    let cols = [0, 2, 3];
    let z = pd.z.select_columns(&cols);
    let names: Vec<String> = cols.iter().map(|&j| pd.z_names[j].clone()).collect();
    let tree = fit_policy_tree(&z, &names, &pd.gamma, &pd.labels, &[0, 1], 2, TreeOptions::default())?;
    println!("{}", serde_json::to_string_pretty(&tree.root)?);

    let table = cost_table_default();
    let costs: Vec<f64> = pd.labels.iter().map(|l| table.cost(table.index_of(l).unwrap()).unwrap()).collect();
    let assigned = tree.assign(&z)?;
    for (name, a) in [("tree", assigned), ("observed", pd.observed.clone()), ("all inclusion", vec![0; pd.n()]), ("all semi", vec![1; pd.n()])] {
        let e = policy_value(&a, &pd.gamma, Some(&costs), Some(&pd.observed))?;
        println!("{name:>14}: value {:+.3} (se {:.3}), cost ratio {:.3}", e.value, e.se, e.cost_ratio_vs_actual.unwrap());
    }

    let baselines = [Baseline::All(0), Baseline::All(1), Baseline::Observed];
    let v = validate_policy(&z, &names, &pd.gamma, &pd.labels, &[0, 1], 2, &pd.observed, &baselines, 10, 1, TreeOptions::default())?;
    println!("out-of-fold value {:+.3}", v.oof_value);
    for t in &v.tests {
        println!("  vs {:<22} diff {:+.3}  p {:.4}", t.baseline, t.test.mean, t.test.p_value);
    }
    Ok(())
}
