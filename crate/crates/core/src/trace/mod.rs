//! Sensor traces for a single drop and the analyses run over them.
//!
//! A trial produces two synchronized channels: load-cell amplifier voltage
//! (nominally 2000 Hz) and the vertical position of a marker on the weight
//! basket (nominally 200 Hz). Both share one time base.

mod analysis;
mod force;
mod io;
mod kinematics;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use analysis::{analyze_trial, AnalysisConfig, TrialAnalysis};
pub use force::{
    classify_signature, classify_signature_with, contact_onset_before, detection_threshold_v,
    find_peaks, peak_force, Peak, Signature, SignatureConfig,
};
pub use io::{
    force_trace_to_csv, ingest_force_trace, ingest_kin_trace, kin_trace_to_csv,
    write_force_trace, write_kin_trace, FORCE_HEADER, KIN_HEADER,
};
pub use kinematics::{
    kinematic_summary, kinematic_summary_at_impact, velocity_profile, KinSummary,
    KinematicsConfig, RestAnchor,
};

pub const NOMINAL_FORCE_RATE_HZ: f64 = 2000.0;
pub const NOMINAL_KIN_RATE_HZ: f64 = 200.0;
pub const MIN_SAMPLES: usize = 10;
/// Allowed relative deviation of the measured rate before a trace is
/// flagged irregular.
pub const RATE_TOLERANCE: f64 = 0.01;
/// Leading span used to estimate the voltage baseline, s.
pub const BASELINE_WINDOW_S: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSample {
    pub t_s: f64,
    pub voltage_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinSample {
    pub t_s: f64,
    pub z_mm: f64,
}

fn check_times(times: impl Iterator<Item = f64>) -> Result<usize> {
    let mut prev: Option<f64> = None;
    let mut n = 0usize;
    for (i, t) in times.enumerate() {
        if !t.is_finite() {
            return Err(Error::invalid(format!("non-finite timestamp at sample {i}")));
        }
        if let Some(p) = prev {
            if t <= p {
                // +2: one for the header row, one for 1-based numbering
                return Err(Error::Sequencing { line: i as u64 + 2 });
            }
        }
        prev = Some(t);
        n += 1;
    }
    if n < MIN_SAMPLES {
        return Err(Error::TooShort {
            len: n,
            min: MIN_SAMPLES,
        });
    }
    Ok(n)
}

fn measured_rate(first: f64, last: f64, n: usize) -> f64 {
    (n - 1) as f64 / (last - first)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Load-cell voltage samples with a recorded baseline offset.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceTrace {
    samples: Vec<ForceSample>,
    nominal_rate_hz: f64,
    measured_rate_hz: f64,
    baseline_v: f64,
    noise_sigma_v: f64,
}

impl ForceTrace {
    pub fn new(samples: Vec<ForceSample>, nominal_rate_hz: f64) -> Result<Self> {
        if !(nominal_rate_hz.is_finite() && nominal_rate_hz > 0.0) {
            return Err(Error::invalid("nominal rate must be positive"));
        }
        let n = check_times(samples.iter().map(|s| s.t_s))?;
        if let Some(bad) = samples.iter().position(|s| !s.voltage_v.is_finite()) {
            return Err(Error::invalid(format!("non-finite voltage at sample {bad}")));
        }
        let t0 = samples[0].t_s;
        let mut window: Vec<f64> = samples
            .iter()
            .take_while(|s| s.t_s - t0 < BASELINE_WINDOW_S)
            .map(|s| s.voltage_v)
            .collect();
        let baseline_v = median(&mut window);
        let mut deviations: Vec<f64> = window.iter().map(|v| (v - baseline_v).abs()).collect();
        // MAD scaled to a Gaussian standard deviation
        let noise_sigma_v = 1.4826 * median(&mut deviations);

        Ok(Self {
            measured_rate_hz: measured_rate(t0, samples[n - 1].t_s, n),
            samples,
            nominal_rate_hz,
            baseline_v,
            noise_sigma_v,
        })
    }

    pub fn samples(&self) -> &[ForceSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn nominal_rate_hz(&self) -> f64 {
        self.nominal_rate_hz
    }

    pub fn measured_rate_hz(&self) -> f64 {
        self.measured_rate_hz
    }

    pub fn is_irregular(&self) -> bool {
        (self.measured_rate_hz / self.nominal_rate_hz - 1.0).abs() > RATE_TOLERANCE
    }

    /// Median voltage over the first 0.1 s.
    pub fn baseline_v(&self) -> f64 {
        self.baseline_v
    }

    /// Robust noise estimate over the baseline window.
    pub fn noise_sigma_v(&self) -> f64 {
        self.noise_sigma_v
    }

    pub fn time_range(&self) -> (f64, f64) {
        (self.samples[0].t_s, self.samples[self.samples.len() - 1].t_s)
    }

    /// Voltages with the baseline removed.
    pub fn corrected(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.voltage_v - self.baseline_v).collect()
    }
}

/// Vertical marker position samples, mm.
#[derive(Debug, Clone, PartialEq)]
pub struct KinTrace {
    samples: Vec<KinSample>,
    nominal_rate_hz: f64,
    measured_rate_hz: f64,
}

impl KinTrace {
    pub fn new(samples: Vec<KinSample>, nominal_rate_hz: f64) -> Result<Self> {
        if !(nominal_rate_hz.is_finite() && nominal_rate_hz > 0.0) {
            return Err(Error::invalid("nominal rate must be positive"));
        }
        let n = check_times(samples.iter().map(|s| s.t_s))?;
        if let Some(bad) = samples.iter().position(|s| !s.z_mm.is_finite()) {
            return Err(Error::invalid(format!("non-finite position at sample {bad}")));
        }
        Ok(Self {
            measured_rate_hz: measured_rate(samples[0].t_s, samples[n - 1].t_s, n),
            samples,
            nominal_rate_hz,
        })
    }

    pub fn samples(&self) -> &[KinSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn nominal_rate_hz(&self) -> f64 {
        self.nominal_rate_hz
    }

    pub fn measured_rate_hz(&self) -> f64 {
        self.measured_rate_hz
    }

    pub fn is_irregular(&self) -> bool {
        (self.measured_rate_hz / self.nominal_rate_hz - 1.0).abs() > RATE_TOLERANCE
    }

    pub fn time_range(&self) -> (f64, f64) {
        (self.samples[0].t_s, self.samples[self.samples.len() - 1].t_s)
    }
}
