//! Slot depth / wall loop recommendations from measured breaking forces.
//!
//! Selection follows a never-exceed rule: the chosen configuration is the
//! strongest one whose mean breaking force does not exceed the target. When no
//! measured configuration qualifies, the weakest one is returned together with
//! a note on which way to move the parameters.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::campaign::PartSpec;
use crate::error::{Error, Result};
use crate::mechanics::FUNCTIONAL_FLOOR_N;

pub const CSV_HEADER: [&str; 3] = ["slot_depth_mm", "wall_loops", "mean_breaking_force_n"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrengthEntry {
    pub slot_depth_mm: f64,
    pub wall_loops: u32,
    pub mean_breaking_force_n: f64,
}

impl StrengthEntry {
    pub fn new(slot_depth_mm: f64, wall_loops: u32, mean_breaking_force_n: f64) -> Self {
        Self {
            slot_depth_mm,
            wall_loops,
            mean_breaking_force_n,
        }
    }

    fn same_config(&self, slot_depth_mm: f64, wall_loops: u32) -> bool {
        self.slot_depth_mm == slot_depth_mm && self.wall_loops == wall_loops
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthTable {
    entries: Vec<StrengthEntry>,
    pub f_min_functional_n: f64,
}

impl StrengthTable {
    pub fn new(entries: Vec<StrengthEntry>) -> Result<Self> {
        Self::with_floor(entries, FUNCTIONAL_FLOOR_N)
    }

    pub fn with_floor(entries: Vec<StrengthEntry>, f_min_functional_n: f64) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("strength table is empty"));
        }
        if !(f_min_functional_n.is_finite() && f_min_functional_n >= 0.0) {
            return Err(Error::invalid("functional floor must be a non-negative force"));
        }
        for (i, e) in entries.iter().enumerate() {
            if !(e.slot_depth_mm.is_finite() && e.slot_depth_mm > 0.0) {
                return Err(Error::invalid(format!(
                    "slot depth must be positive, got {} mm",
                    e.slot_depth_mm
                )));
            }
            if !(e.mean_breaking_force_n.is_finite() && e.mean_breaking_force_n > 0.0) {
                return Err(Error::invalid(format!(
                    "breaking force must be positive, got {} N",
                    e.mean_breaking_force_n
                )));
            }
            if entries[..i]
                .iter()
                .any(|o| o.same_config(e.slot_depth_mm, e.wall_loops))
            {
                return Err(Error::invalid(format!(
                    "duplicate entry for d = {} mm, w = {}",
                    e.slot_depth_mm, e.wall_loops
                )));
            }
        }
        Ok(Self {
            entries,
            f_min_functional_n,
        })
    }

    pub fn entries(&self) -> &[StrengthEntry] {
        &self.entries
    }

    pub fn lookup(&self, slot_depth_mm: f64, wall_loops: u32) -> Result<f64> {
        self.entries
            .iter()
            .find(|e| e.same_config(slot_depth_mm, wall_loops))
            .map(|e| e.mean_breaking_force_n)
            .ok_or_else(|| {
                Error::NotFound(format!(
                    "no entry for d = {slot_depth_mm} mm, w = {wall_loops}"
                ))
            })
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        if header.iter().ne(CSV_HEADER) {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {}", CSV_HEADER.join(",")),
            });
        }
        let mut entries = Vec::new();
        for row in rdr.deserialize::<StrengthEntry>() {
            let entry = row.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        Self::new(entries)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        for e in &self.entries {
            wtr.serialize(e).map_err(|e| Error::Io(e.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Mean breaking forces measured on the rig.
pub fn builtin_table() -> StrengthTable {
    StrengthTable::new(vec![
        StrengthEntry::new(1.0, 6, 75.6),
        StrengthEntry::new(1.0, 3, 65.0),
        StrengthEntry::new(2.0, 6, 53.1),
        StrengthEntry::new(2.0, 3, 45.0),
    ])
    .expect("builtin table is well formed")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    SlotDepth,
    WallLoops,
}

/// Two entries sharing one parameter whose forces are ordered the wrong way.
/// `lower` has the smaller value of the varying parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub parameter: Parameter,
    pub lower: StrengthEntry,
    pub higher: StrengthEntry,
}

/// Force must fall as the slot deepens and rise with more wall loops.
pub fn validate_monotonicity(table: &StrengthTable) -> Vec<Violation> {
    let mut out = Vec::new();
    for a in &table.entries {
        for b in &table.entries {
            let (fa, fb) = (a.mean_breaking_force_n, b.mean_breaking_force_n);
            if a.wall_loops == b.wall_loops && a.slot_depth_mm < b.slot_depth_mm && fa <= fb {
                out.push(Violation {
                    parameter: Parameter::SlotDepth,
                    lower: *a,
                    higher: *b,
                });
            }
            if a.slot_depth_mm == b.slot_depth_mm && a.wall_loops < b.wall_loops && fa >= fb {
                out.push(Violation {
                    parameter: Parameter::WallLoops,
                    lower: *a,
                    higher: *b,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub entry: StrengthEntry,
    /// Target minus the chosen entry's force. Negative only alongside a note.
    pub margin_n: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub fn recommend(target_f_max_n: f64, table: &StrengthTable) -> Result<Recommendation> {
    if !target_f_max_n.is_finite() {
        return Err(Error::invalid("target force must be finite"));
    }
    if target_f_max_n <= table.f_min_functional_n {
        return Err(Error::InfeasibleTarget {
            target_n: target_f_max_n,
            floor_n: table.f_min_functional_n,
        });
    }
    let by_force = |a: &&StrengthEntry, b: &&StrengthEntry| {
        a.mean_breaking_force_n.total_cmp(&b.mean_breaking_force_n)
    };
    let compliant = table
        .entries
        .iter()
        .filter(|e| e.mean_breaking_force_n <= target_f_max_n)
        .max_by(by_force);
    if let Some(entry) = compliant {
        return Ok(Recommendation {
            entry: *entry,
            margin_n: target_f_max_n - entry.mean_breaking_force_n,
            note: None,
        });
    }
    let weakest = table
        .entries
        .iter()
        .min_by(by_force)
        .expect("table is non-empty");
    Ok(Recommendation {
        entry: *weakest,
        margin_n: target_f_max_n - weakest.mean_breaking_force_n,
        note: Some(format!(
            "every measured configuration breaks above {target_f_max_n} N; the weakest \
             ({} mm slot, {} wall loops) breaks at {} N. Deepen the slot or use fewer wall \
             loops and run a new campaign.",
            weakest.slot_depth_mm, weakest.wall_loops, weakest.mean_breaking_force_n
        )),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeOutcome {
    pub table: StrengthTable,
    pub violations: Vec<Violation>,
}

/// Inserts or replaces the entry for a part's configuration.
pub fn merge_campaign_result(
    table: &StrengthTable,
    part: &PartSpec,
    breaking_force_n: f64,
) -> Result<MergeOutcome> {
    if !(breaking_force_n.is_finite() && breaking_force_n > 0.0) {
        return Err(Error::invalid(format!(
            "breaking force must be positive, got {breaking_force_n} N"
        )));
    }
    let merged = StrengthEntry::new(part.slot_depth_mm, part.wall_loops, breaking_force_n);
    let mut entries = table.entries.clone();
    match entries
        .iter_mut()
        .find(|e| e.same_config(part.slot_depth_mm, part.wall_loops))
    {
        Some(e) => *e = merged,
        None => entries.push(merged),
    }
    let table = StrengthTable::with_floor(entries, table.f_min_functional_n)?;
    let violations = validate_monotonicity(&table);
    Ok(MergeOutcome { table, violations })
}
