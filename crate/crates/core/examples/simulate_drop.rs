//! Simulates one drop and compares the analyzer's reading with the
//! simulator's ground truth.

use droptest::mechanics::RigCalibration;
use droptest::simrig::{simulate_drop, SimConfig};
use droptest::trace::{analyze_trial, AnalysisConfig};

fn main() -> droptest::Result<()> {
    let height_cm = std::env::args().nth(1).and_then(|h| h.parse().ok()).unwrap_or(4.0);
    let cfg = SimConfig {
        drop_height_cm: height_cm,
        seed: 1,
        ..SimConfig::default()
    };
    let run = simulate_drop(&cfg)?;
    let a = analyze_trial(&run.force, &run.kin, cfg.mass_kg, &RigCalibration::default(), &AnalysisConfig::default())?;
    println!("drop from {height_cm} cm");
    println!("              truth      analyzed");
    println!("peak force    {:>7.2} N  {:>7.2} N", run.truth.peak_force_n, a.peak_force_n);
    println!("impact speed  {:>7.1} mm/s {:>7.1} mm/s", 1000.0 * run.truth.v_impact_m_s, a.kin_summary.v_max_mm_s);
    println!("stop distance {:>7.3} mm {:>7.3} mm", 1000.0 * run.truth.d_stop_m, a.kin_summary.d_stop_mm);
    println!("F_theoretical {:.2} N, error {:.1} %", a.f_theoretical_n, a.error_pct);
    Ok(())
}
