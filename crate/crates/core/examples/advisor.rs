//! Picks slot depth and wall loops for a user's maximum permissible force.

use droptest::advisor::{builtin_table, merge_campaign_result, recommend};
use droptest::campaign::PartSpec;

fn main() -> droptest::Result<()> {
    let table = builtin_table();
    for target in [80.0, 65.0, 50.0, 40.0, 20.0] {
        match recommend(target, &table) {
            Ok(r) => {
                println!(
                    "{target:>5.1} N -> d = {:.1} mm, w = {} ({:.1} N, margin {:.1} N)",
                    r.entry.slot_depth_mm, r.entry.wall_loops, r.entry.mean_breaking_force_n, r.margin_n
                );
                if let Some(note) = r.note {
                    println!("        note: {note}");
                }
            }
            Err(e) => println!("{target:>5.1} N -> {e}"),
        }
    }

    let merged = merge_campaign_result(&table, &PartSpec::new(1.5, 3), 55.0)?;
    println!("\nafter adding a 1.5 mm / 3 loop campaign:");
    merged.table.to_csv(std::io::stdout())?;
    println!("ordering violations: {}", merged.violations.len());
    Ok(())
}
