use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanics::{voltage_to_force, RigCalibration};

use super::ForceTrace;

/// Noise multiples above baseline a sample must exceed to count as contact.
const DETECTION_SIGMAS: f64 = 6.0;

/// Force-time morphology verdict for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signature {
    Intact,
    Broke,
    Uncertain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignatureConfig {
    /// A first peak below this fraction of the global maximum reads as a break.
    pub broke_ratio: f64,
    /// Minimum peak prominence as a fraction of the global maximum.
    pub min_relative_prominence: f64,
    /// Relative gap under which the first peak still counts as the maximum.
    pub tie_tolerance: f64,
}

impl Default for SignatureConfig {
    fn default() -> Self {
        Self {
            broke_ratio: 0.6,
            min_relative_prominence: 0.05,
            tie_tolerance: 0.005,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    pub t_s: f64,
    /// Height above baseline, V.
    pub height_v: f64,
    pub prominence_v: f64,
}

/// Smallest baseline-corrected voltage treated as a real excursion.
pub fn detection_threshold_v(trace: &ForceTrace, cal: &RigCalibration) -> f64 {
    let display_floor = cal.display_resolution_n / cal.volts_to_newtons;
    (DETECTION_SIGMAS * trace.noise_sigma_v()).max(display_floor)
}

/// Primary peak force: the calibrated maximum excursion above baseline.
pub fn peak_force(trace: &ForceTrace, cal: &RigCalibration) -> Result<f64> {
    cal.validate()?;
    let excursion = trace
        .corrected()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = detection_threshold_v(trace, cal);
    if !(excursion > threshold) {
        return Err(Error::NoImpact(format!(
            "maximum excursion {excursion:.6} V does not exceed the {threshold:.6} V detection threshold"
        )));
    }
    voltage_to_force(excursion, cal)
}

/// Local maxima with at least `min_prominence` of topographic prominence,
/// in time order. Plateaus report their first sample.
pub fn find_peaks(signal: &[f64], min_prominence: f64) -> Vec<Peak> {
    let n = signal.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if signal[i] > signal[i - 1] {
            let mut j = i;
            while j + 1 < n && signal[j + 1] == signal[i] {
                j += 1;
            }
            if j + 1 < n && signal[j + 1] < signal[i] {
                let prominence = prominence(signal, i, j);
                if prominence >= min_prominence {
                    peaks.push(Peak {
                        index: i,
                        t_s: 0.0,
                        height_v: signal[i],
                        prominence_v: prominence,
                    });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

fn prominence(signal: &[f64], first: usize, last: usize) -> f64 {
    let h = signal[first];
    let mut left_min = h;
    for &v in signal[..first].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &signal[last + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

fn prominent_peaks(trace: &ForceTrace, cfg: &SignatureConfig) -> Result<(Vec<Peak>, f64)> {
    let corrected = trace.corrected();
    let global = corrected.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let noise = DETECTION_SIGMAS * trace.noise_sigma_v();
    if !(global > noise && global > 0.0) {
        return Err(Error::NoImpact("no peak above the noise threshold".into()));
    }
    let min_prominence = (cfg.min_relative_prominence * global).max(noise);
    let samples = trace.samples();
    let peaks: Vec<Peak> = find_peaks(&corrected, min_prominence)
        .into_iter()
        .filter(|p| p.height_v > noise)
        .map(|p| Peak {
            t_s: samples[p.index].t_s,
            ..p
        })
        .collect();
    Ok((peaks, global))
}

pub fn classify_signature(trace: &ForceTrace) -> Result<Signature> {
    classify_signature_with(trace, &SignatureConfig::default())
}

/// Ratio test between the first prominent peak and the global maximum.
///
/// Breaking parts shed energy in the fracture before the basket lands, so
/// their first peak sits well under the later one.
pub fn classify_signature_with(trace: &ForceTrace, cfg: &SignatureConfig) -> Result<Signature> {
    let (peaks, global) = prominent_peaks(trace, cfg)?;
    // A global maximum sitting on the last sample is not a local peak; fall
    // back to the raw maximum in that case.
    let first = peaks.first().map_or(global, |p| p.height_v);
    let ratio = first / global;
    Ok(if ratio >= 1.0 - cfg.tie_tolerance {
        Signature::Intact
    } else if ratio < cfg.broke_ratio {
        Signature::Broke
    } else {
        Signature::Uncertain
    })
}

/// Time at which the load cell starts seeing contact for the impact whose
/// compression ends at or before `t_limit_s`: the last upward crossing of the
/// detection threshold, interpolated between samples.
pub fn contact_onset_before(
    trace: &ForceTrace,
    cal: &RigCalibration,
    t_limit_s: f64,
) -> Option<f64> {
    let threshold = detection_threshold_v(trace, cal);
    let corrected = trace.corrected();
    let samples = trace.samples();
    let mut onset = None;
    for i in 1..samples.len() {
        if samples[i].t_s > t_limit_s {
            break;
        }
        let (lo, hi) = (corrected[i - 1], corrected[i]);
        if lo <= threshold && hi > threshold {
            let frac = (threshold - lo) / (hi - lo);
            onset = Some(samples[i - 1].t_s + frac * (samples[i].t_s - samples[i - 1].t_s));
        }
    }
    onset
}
