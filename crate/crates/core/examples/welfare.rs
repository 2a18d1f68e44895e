//! Per-student welfare of moving segregated students into mainstream
//! classrooms, with peer spillovers read off piecewise-linear tables.

use mtdml::dgp::welfare_fixture;
use mtdml::policy::reallocation_welfare;

fn main() -> mtdml::Result<()> {
    let inputs = welfare_fixture();
    let w = reallocation_welfare(&inputs)?;
    println!("SEN share {:.4} -> {:.4} (+{:.4})", inputs.sen_share_before, w.sen_share_after, w.share_increase);
    println!("direct gain     {:+.4}", w.direct_gain);
    println!("spillover SEN   {:+.4}", w.spillover_sen);
    println!("spillover other {:+.4}", w.spillover_nonsen);
    println!("spillover       {:+.4}", w.spillover);
    println!("combined        {:+.4}", w.combined);
    Ok(())
}
