//! Adaptive breaking-height search.
//!
//! The search ascends in coarse steps with one drop per height until the
//! part first breaks, then refines downward in fine steps with a fixed number
//! of trials per height until a height where every trial survives. The
//! breaking height is the highest refined height with at least one intact
//! trial, and the breaking force is the mean peak of those intact trials.
//!
//! [`CampaignState`] is a plain value. Its phase and result are a pure
//! function of the recorded trials, so any state can be rebuilt by replaying
//! its [`CampaignEvent`] log.

mod height;
mod machine;
mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::TrialAnalysis;

pub use height::Height;
pub use machine::Walk;
pub use report::{campaign_report, CampaignReport, Disagreement, LedgerRow};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PrintOrientation {
    #[default]
    LayersParallelToBreakLine,
    LayersPerpendicular,
}

/// A printed attachment variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSpec {
    pub slot_depth_mm: f64,
    pub wall_loops: u32,
    #[serde(default)]
    pub print_orientation: PrintOrientation,
    #[serde(default)]
    pub infill: String,
}

impl PartSpec {
    pub fn new(slot_depth_mm: f64, wall_loops: u32) -> Self {
        Self {
            slot_depth_mm,
            wall_loops,
            print_orientation: PrintOrientation::default(),
            infill: String::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.slot_depth_mm.is_finite() && self.slot_depth_mm > 0.0) {
            return Err(Error::invalid(format!(
                "slot depth must be positive, got {} mm",
                self.slot_depth_mm
            )));
        }
        if self.wall_loops < 1 {
            return Err(Error::invalid("a part needs at least one wall loop"));
        }
        Ok(())
    }
}

/// Where refinement begins once the coarse ascent first breaks a part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RefineStart {
    /// Complete the trial quota at the first breaking height, then descend.
    #[default]
    AtBreak,
    /// Start one fine step below the first breaking height.
    BelowBreak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub start_height_cm: f64,
    pub coarse_step_cm: f64,
    pub fine_step_cm: f64,
    pub trials_per_height: u32,
    pub mass_kg: f64,
    pub max_height_cm: f64,
    #[serde(default)]
    pub refine_start: RefineStart,
}

impl CampaignConfig {
    pub fn new(start_height_cm: f64, mass_kg: f64) -> Self {
        Self {
            start_height_cm,
            coarse_step_cm: 1.0,
            fine_step_cm: 0.2,
            trials_per_height: 3,
            mass_kg,
            max_height_cm: 50.0,
            refine_start: RefineStart::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid().map(|_| ())
    }

    pub(crate) fn grid(&self) -> Result<Grid> {
        let start = Height::from_cm(self.start_height_cm)?;
        let coarse = Height::from_cm(self.coarse_step_cm)?;
        let fine = Height::from_cm(self.fine_step_cm)?;
        let max = Height::from_cm(self.max_height_cm)?;
        if !(fine.tenths() > 0 && fine < coarse) {
            return Err(Error::invalid("steps must satisfy 0 < fine < coarse"));
        }
        if coarse.tenths() % fine.tenths() != 0 {
            return Err(Error::invalid("coarse step must be a whole number of fine steps"));
        }
        if start < fine || start > max {
            return Err(Error::invalid(format!(
                "start height {start} must lie between the fine step and the rig maximum {max}"
            )));
        }
        if self.trials_per_height < 1 {
            return Err(Error::invalid("at least one trial per height is required"));
        }
        if !(self.mass_kg.is_finite() && self.mass_kg > 0.0) {
            return Err(Error::invalid("mass must be positive"));
        }
        Ok(Grid {
            start,
            coarse: coarse.tenths(),
            fine: fine.tenths(),
            max,
            quota: self.trials_per_height as usize,
            refine_start: self.refine_start,
        })
    }
}

/// Config resolved onto the 0.1 cm grid.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Grid {
    pub start: Height,
    pub coarse: i64,
    pub fine: i64,
    pub max: Height,
    pub quota: usize,
    pub refine_start: RefineStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Broke,
    Intact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Coarse,
    Refine,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum NextAction {
    Drop { height_cm: Height },
    Finished,
}

/// One operator-recorded drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialInput {
    pub height_cm: f64,
    pub outcome: Outcome,
    #[serde(default)]
    pub peak_force_n: Option<f64>,
    #[serde(default)]
    pub idempotency_key: Option<String>,
    #[serde(default)]
    pub trace_id: Option<String>,
}

impl TrialInput {
    pub fn intact(height_cm: f64, peak_force_n: f64) -> Self {
        Self {
            height_cm,
            outcome: Outcome::Intact,
            peak_force_n: Some(peak_force_n),
            idempotency_key: None,
            trace_id: None,
        }
    }

    pub fn broke(height_cm: f64) -> Self {
        Self {
            height_cm,
            outcome: Outcome::Broke,
            peak_force_n: None,
            idempotency_key: None,
            trace_id: None,
        }
    }

    pub fn with_key(mut self, key: impl Into<String>) -> Self {
        self.idempotency_key = Some(key.into());
        self
    }

    pub fn with_trace(mut self, trace_id: impl Into<String>) -> Self {
        self.trace_id = Some(trace_id.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Position in the campaign's trial log; doubles as the trial id.
    pub seq: u64,
    pub height_cm: Height,
    /// Index of this trial among those at the same height.
    pub trial_index: u32,
    pub outcome: Outcome,
    pub peak_force_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<TrialAnalysis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis_error: Option<String>,
}

impl TrialRecord {
    /// A trace is attached but no analysis result (or failure) has landed yet.
    pub fn analysis_pending(&self) -> bool {
        self.trace_id.is_some() && self.analysis.is_none() && self.analysis_error.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub breaking_height_cm: Height,
    pub breaking_force_n: f64,
}

/// Entries of the append-only campaign log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum CampaignEvent {
    Created {
        part: PartSpec,
        config: CampaignConfig,
    },
    TrialRecorded(TrialInput),
    AnalysisAttached {
        seq: u64,
        #[serde(default)]
        analysis: Option<TrialAnalysis>,
        #[serde(default)]
        error: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignState {
    pub schema_version: u32,
    pub part: PartSpec,
    pub config: CampaignConfig,
    pub phase: Phase,
    pub trials: Vec<TrialRecord>,
    pub result: Option<CampaignResult>,
}

impl CampaignState {
    pub fn new(part: PartSpec, config: CampaignConfig) -> Result<Self> {
        part.validate()?;
        config.validate()?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            part,
            config,
            phase: Phase::Coarse,
            trials: Vec::new(),
            result: None,
        })
    }

    /// Rebuilds a campaign from its log.
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a CampaignEvent>) -> Result<Self> {
        let mut events = events.into_iter();
        let mut state = match events.next() {
            Some(CampaignEvent::Created { part, config }) => Self::new(part.clone(), config.clone())?,
            _ => {
                return Err(Error::StateCorruption(
                    "log must begin with a created event".into(),
                ))
            }
        };
        for event in events {
            state = state.apply(event)?;
        }
        Ok(state)
    }

    pub fn apply(&self, event: &CampaignEvent) -> Result<Self> {
        match event {
            CampaignEvent::Created { .. } => Err(Error::StateCorruption(
                "created event in the middle of a log".into(),
            )),
            CampaignEvent::TrialRecorded(input) => self.record_trial(input),
            CampaignEvent::AnalysisAttached {
                seq,
                analysis,
                error,
            } => self.attach_analysis(*seq, *analysis, error.clone()),
        }
    }

    /// Per-height view of the trial log.
    pub fn ledger(&self) -> BTreeMap<Height, Vec<&TrialRecord>> {
        let mut map: BTreeMap<Height, Vec<&TrialRecord>> = BTreeMap::new();
        for t in &self.trials {
            map.entry(t.height_cm).or_default().push(t);
        }
        map
    }

    pub fn find_trial_by_key(&self, key: &str) -> Option<&TrialRecord> {
        self.trials
            .iter()
            .find(|t| t.idempotency_key.as_deref() == Some(key))
    }

    /// Checks that the stored phase and result match what the trial log implies.
    pub fn validate(&self) -> Result<machine::Walk> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::StateCorruption(format!(
                "unsupported schema version {}",
                self.schema_version
            )));
        }
        let walk = machine::walk(&self.config.grid()?, &self.trials)?;
        if walk.phase != self.phase {
            return Err(Error::StateCorruption(format!(
                "stored phase {:?} but the ledger implies {:?}",
                self.phase, walk.phase
            )));
        }
        if walk.result != self.result {
            return Err(Error::StateCorruption(
                "stored result disagrees with the ledger".into(),
            ));
        }
        Ok(walk)
    }

    pub fn next_action(&self) -> Result<NextAction> {
        self.validate()?.next_action()
    }

    pub fn record_trial(&self, input: &TrialInput) -> Result<Self> {
        if let Some(key) = input.idempotency_key.as_deref() {
            if self.find_trial_by_key(key).is_some() {
                return Ok(self.clone());
            }
        }
        let walk = self.validate()?;
        let pending = match walk.next_action()? {
            NextAction::Finished => {
                return Err(Error::ProtocolViolation("campaign is already complete".into()))
            }
            NextAction::Drop { height_cm } => height_cm,
        };
        let matches_pending = Height::from_cm(input.height_cm).is_ok_and(|h| h == pending);
        if !matches_pending {
            return Err(Error::ProtocolViolation(format!(
                "pending drop is at {pending} cm, not {} cm",
                input.height_cm
            )));
        }
        match (input.outcome, input.peak_force_n) {
            (Outcome::Intact, None) => {
                return Err(Error::MissingMeasurement(
                    "an intact trial needs its peak force".into(),
                ))
            }
            (Outcome::Intact, Some(f)) if !(f.is_finite() && f > 0.0) => {
                return Err(Error::invalid(format!("peak force must be positive, got {f} N")))
            }
            (Outcome::Broke, Some(_)) => {
                return Err(Error::invalid("a broken trial has no usable peak force"))
            }
            _ => {}
        }

        let trial_index = self.trials.iter().filter(|t| t.height_cm == pending).count() as u32;
        let mut next = self.clone();
        next.trials.push(TrialRecord {
            seq: self.trials.len() as u64,
            height_cm: pending,
            trial_index,
            outcome: input.outcome,
            peak_force_n: input.peak_force_n,
            idempotency_key: input.idempotency_key.clone(),
            trace_id: input.trace_id.clone(),
            analysis: None,
            analysis_error: None,
        });
        let walk = machine::walk(&next.config.grid()?, &next.trials)?;
        next.phase = walk.phase;
        next.result = walk.result;
        Ok(next)
    }

    /// Stores the outcome of a trace analysis against an existing trial.
    pub fn attach_analysis(
        &self,
        seq: u64,
        analysis: Option<TrialAnalysis>,
        error: Option<String>,
    ) -> Result<Self> {
        let mut next = self.clone();
        let trial = next
            .trials
            .get_mut(seq as usize)
            .ok_or_else(|| Error::NotFound(format!("trial {seq}")))?;
        trial.analysis = analysis;
        trial.analysis_error = error;
        Ok(next)
    }

    pub fn breaking_height(&self) -> Result<f64> {
        self.completed_result().map(|r| r.breaking_height_cm.cm())
    }

    pub fn breaking_force(&self) -> Result<f64> {
        self.completed_result().map(|r| r.breaking_force_n)
    }

    fn completed_result(&self) -> Result<CampaignResult> {
        match (self.phase, self.result) {
            (Phase::Complete, Some(r)) => Ok(r),
            (Phase::Complete, None) => Err(Error::StateCorruption(
                "complete campaign without a result".into(),
            )),
            _ => Err(Error::NotReady),
        }
    }

    /// Heights whose trials all broke although a higher height kept a part
    /// intact. The search does not re-ascend for these; they are surfaced for
    /// the operator instead.
    pub fn non_monotone_heights(&self) -> Vec<Height> {
        let ledger = self.ledger();
        let mut highest_intact: Option<Height> = None;
        let mut flagged = Vec::new();
        for (&h, trials) in ledger.iter().rev() {
            let any_intact = trials.iter().any(|t| t.outcome == Outcome::Intact);
            if any_intact {
                highest_intact.get_or_insert(h);
            } else if highest_intact.is_some() {
                flagged.push(h);
            }
        }
        flagged.reverse();
        flagged
    }
}
