//! Operations shared by the HTTP handlers and the CLI, so both paths reach
//! identical stored state.

use std::path::Path;

use droptest::campaign::{Outcome, TrialInput};
use droptest::mechanics::RigCalibration;
use droptest::trace::{analyze_trial, peak_force, AnalysisConfig};
use serde::Deserialize;

use crate::error::{Result, ServiceError};
use crate::store::Store;

/// Rig calibration and analysis settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RigSettings {
    pub calibration: RigCalibration,
    pub analysis: AnalysisConfig,
    /// Largest |error| in percent for which a rig validation passes.
    pub error_bound_pct: f64,
}

impl Default for RigSettings {
    fn default() -> Self {
        Self {
            calibration: RigCalibration::default(),
            analysis: AnalysisConfig::default(),
            error_bound_pct: 25.0,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SettingsFile {
    scale_n_per_v: Option<f64>,
    error_bound_pct: Option<f64>,
    rest_window_s: Option<f64>,
}

impl RigSettings {
    /// Parses `key = value` lines: `scale_n_per_v`, `error_bound_pct`,
    /// `rest_window_s`. Missing keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SettingsFile =
            toml::from_str(text).map_err(|e| ServiceError::Invalid(format!("config: {e}")))?;
        let mut s = Self::default();
        if let Some(scale) = file.scale_n_per_v {
            s.calibration = RigCalibration::new(scale)?;
        }
        if let Some(bound) = file.error_bound_pct {
            if !(bound.is_finite() && bound >= 0.0) {
                return Err(ServiceError::Invalid("error_bound_pct must be non-negative".into()));
            }
            s.error_bound_pct = bound;
        }
        if let Some(window) = file.rest_window_s {
            s.analysis.kinematics.rest_window_s = window;
            s.analysis.kinematics.validate()?;
        }
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Fills in an intact trial's peak force from its trace when the operator
/// left it out.
pub fn prepare_trial(store: &Store, settings: &RigSettings, input: &TrialInput) -> Result<TrialInput> {
    let mut input = input.clone();
    if let (Outcome::Intact, None, Some(trace)) =
        (input.outcome, input.peak_force_n, input.trace_id.as_deref())
    {
        let (force, _) = store.load_trace(trace)?;
        input.peak_force_n = Some(peak_force(&force, &settings.calibration)?);
    }
    Ok(input)
}

/// Analyzes the trace attached to trial `seq` and stores the outcome, or the
/// reason analysis failed.
pub fn analyze_and_attach(store: &Store, settings: &RigSettings, campaign_id: &str, seq: u64) -> Result<()> {
    let state = store.campaign(campaign_id)?;
    let trial = state
        .trials
        .get(seq as usize)
        .ok_or_else(|| ServiceError::NotFound(format!("trial {seq}")))?;
    let Some(trace_id) = trial.trace_id.as_deref() else {
        return Ok(());
    };
    let (force, kin) = store.load_trace(trace_id)?;
    let (analysis, error) =
        match analyze_trial(&force, &kin, state.config.mass_kg, &settings.calibration, &settings.analysis) {
            Ok(a) => (Some(a), None),
            Err(e) => (None, Some(e.to_string())),
        };
    store.attach_analysis(campaign_id, seq, analysis, error)?;
    Ok(())
}
