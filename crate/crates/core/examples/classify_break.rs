//! Shows the force signature of a part that survives and one that snaps.

use droptest::simrig::{simulate_drop, SimConfig};
use droptest::trace::{classify_signature, find_peaks, SignatureConfig};

fn main() -> droptest::Result<()> {
    for threshold in [None, Some(40.0)] {
        let cfg = SimConfig {
            drop_height_cm: 10.0,
            part_break_threshold_n: threshold,
            seed: 5,
            ..SimConfig::default()
        };
        let run = simulate_drop(&cfg)?;
        let corrected = run.force.corrected();
        let global = corrected.iter().cloned().fold(0.0, f64::max);
        let peaks = find_peaks(&corrected, SignatureConfig::default().min_relative_prominence * global);
        println!("break threshold {threshold:?}: truth broke = {}", run.truth.broke);
        for p in peaks.iter().take(3) {
            println!("  peak at {:.4} s: {:.1} N", run.force.samples()[p.index].t_s, 20.0 * p.height_v);
        }
        println!("  classified {:?}", classify_signature(&run.force)?);
    }
    Ok(())
}
