//! Validates the rig from a synchronized force/motion pair. Pass two CSV
//! paths (force, kinematics) or run without arguments to use the built-in
//! reference drop.

use std::fs::File;

use droptest::fixtures::{table_one_traces, TABLE_ONE_MASS_KG};
use droptest::mechanics::RigCalibration;
use droptest::trace::{analyze_trial, ingest_force_trace, ingest_kin_trace, AnalysisConfig};

fn main() -> droptest::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (force, kin) = match args.as_slice() {
        [f, k] => (ingest_force_trace(File::open(f)?)?, ingest_kin_trace(File::open(k)?)?),
        _ => table_one_traces(),
    };
    let a = analyze_trial(
        &force,
        &kin,
        TABLE_ONE_MASS_KG,
        &RigCalibration::default(),
        &AnalysisConfig::default(),
    )?;
    let k = &a.kin_summary;
    println!("mass             {TABLE_ONE_MASS_KG} kg");
    println!("rest position    {:.3} mm", k.p_rest_mm);
    println!("lowest position  {:.3} mm", k.p_lowest_mm);
    println!("stopping dist.   {:.3} mm", k.d_stop_mm);
    println!("max velocity     {:.3} mm/s", k.v_max_mm_s);
    println!("F_theoretical    {:.1} N", a.f_theoretical_n);
    println!("F_actual         {:.1} N", a.peak_force_n);
    println!("error            {:.1} %", a.error_pct);
    println!("signature        {:?}", a.signature);
    Ok(())
}
