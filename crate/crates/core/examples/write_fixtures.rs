//! Writes the scored placement fixture, the cost table and the welfare
//! inputs as CSV/JSON.
//!
//! `cargo run --example write_fixtures -- [dir]` (default `fixtures/stgallen_policy`)

use std::path::PathBuf;

use mtdml::dgp::{policy_fixture, welfare_fixture, FixtureOutcome};
use mtdml::policy::cost_table_default;

fn main() -> mtdml::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("fixtures/stgallen_policy"));
    std::fs::create_dir_all(&dir)?;
    for o in [FixtureOutcome::TestScore, FixtureOutcome::Employment] {
        policy_fixture(o)?.write_csv(&dir.join(format!("{}.csv", o.name())))?;
    }
    let table = cost_table_default();
    let mut w = csv::Writer::from_path(dir.join("costs.csv"))?;
    w.write_record(["treatment", "cost"])?;
    for (d, l) in table.labels().iter().enumerate() {
        w.write_record([l.clone(), table.cost(d).unwrap().to_string()])?;
    }
    w.flush()?;
    std::fs::write(dir.join("welfare.json"), serde_json::to_string_pretty(&welfare_fixture())? + "\n")?;
    println!("wrote {}", dir.display());
    Ok(())
}
