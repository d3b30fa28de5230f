//! Monte Carlo total gaps of the one-dimensional estimator and the exact
//! envelope for the two sigmoid instances of the gap experiments.

use std::time::Instant;

use stfe_hull::activation::Activation;
use stfe_hull::envelope::RawInstance;
use stfe_hull::gapstats::gap_report;

fn main() -> stfe_hull::Result<()> {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1_000_000);
    for (w, b) in [(vec![10.0, 5.0], -10.0), (vec![5.0, 8.0, 7.0], -8.0)] {
        let raw = RawInstance::on_unit_box(w.clone(), b, Activation::sigmoid())?;
        let start = Instant::now();
        let r = gap_report(&raw, samples, 1, 1)?;
        println!(
            "w={w:?} b={b}: mean f {:.4}, h {:.4}, conc {:.4}; gap improvement {:.2}% ({:.1}s)",
            r.mean_f,
            r.mean_h,
            r.mean_conc,
            100.0 * r.improvement,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
