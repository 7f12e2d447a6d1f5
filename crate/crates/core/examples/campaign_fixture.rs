//! Writes a simulated campaign's trace files and truth sidecars to a
//! directory (default `target/fixture`).

use std::path::PathBuf;

use droptest::simrig::{generate_campaign_fixture, SimConfig};

fn main() -> droptest::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/fixture".into()));
    let heights = [4.0, 4.0, 4.0, 5.0, 5.0, 5.0, 6.0, 6.0, 6.0];
    let template = SimConfig {
        seed: 42,
        ..SimConfig::default()
    };
    for trial in generate_campaign_fixture(64.0, &template, &heights)? {
        let stem = trial.file_stem();
        trial.run.write_files(&dir, &stem)?;
        println!(
            "{stem}: strength {:.1} N, peak {:.1} N, broke {}",
            trial.strength_n, trial.run.truth.peak_force_n, trial.run.truth.broke
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}
