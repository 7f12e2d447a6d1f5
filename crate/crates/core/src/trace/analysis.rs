use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanics::{
    theoretical_impact_force, units, validation_error, ImpactInputs, RigCalibration,
};

use super::force::{classify_signature_with, contact_onset_before, peak_force, Signature, SignatureConfig};
use super::kinematics::{kinematic_summary, kinematic_summary_at_impact, KinSummary, KinematicsConfig};
use super::{ForceTrace, KinTrace};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub kinematics: KinematicsConfig,
    pub signature: SignatureConfig,
}

/// Rig-validation record for one drop: measured peak against the
/// energy-balance estimate, plus the force-signature verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialAnalysis {
    pub peak_force_n: f64,
    pub f_theoretical_n: f64,
    pub error_pct: f64,
    pub signature: Signature,
    pub kin_summary: KinSummary,
    /// Contact onset read from the force channel, if one was found.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impact_time_s: Option<f64>,
}

pub fn analyze_trial(
    force: &ForceTrace,
    kin: &KinTrace,
    mass_kg: f64,
    cal: &RigCalibration,
    cfg: &AnalysisConfig,
) -> Result<TrialAnalysis> {
    let (f0, f1) = force.time_range();
    let (k0, k1) = kin.time_range();
    if f1 < k0 || k1 < f0 {
        return Err(Error::Synchronization);
    }

    let peak_force_n = peak_force(force, cal)?;

    // The lowest point bounds the search for the contact that produced it.
    let t_lowest = kin
        .samples()
        .iter()
        .min_by(|a, b| a.z_mm.total_cmp(&b.z_mm))
        .map(|k| k.t_s)
        .expect("non-empty trace");
    let impact_time_s = contact_onset_before(force, cal, t_lowest);
    let kin_summary = match impact_time_s {
        Some(t_c) => kinematic_summary_at_impact(kin, &cfg.kinematics, t_c)?,
        None => kinematic_summary(kin, &cfg.kinematics)?,
    };
    if !(kin_summary.v_max_mm_s > 0.0) {
        return Err(Error::DegenerateKinematics("zero impact velocity".into()));
    }

    let f_theoretical_n = theoretical_impact_force(&ImpactInputs {
        mass_kg,
        max_velocity_m_s: units::mm_to_m(kin_summary.v_max_mm_s),
        stopping_distance_m: units::mm_to_m(kin_summary.d_stop_mm),
    })?;
    let error_pct = validation_error(f_theoretical_n, peak_force_n)?;
    let signature = classify_signature_with(force, &cfg.signature)?;

    Ok(TrialAnalysis {
        peak_force_n,
        f_theoretical_n,
        error_pct,
        signature,
        kin_summary,
        impact_time_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{ForceSample, KinSample};

    fn flat_force(t0: f64, n: usize) -> ForceTrace {
        let samples = (0..n)
            .map(|i| ForceSample {
                t_s: t0 + i as f64 / 2000.0,
                voltage_v: if i == n / 2 { 1.0 } else { 0.0 },
            })
            .collect();
        ForceTrace::new(samples, 2000.0).unwrap()
    }

    fn kin(t0: f64, n: usize) -> KinTrace {
        let samples = (0..n)
            .map(|i| KinSample {
                t_s: t0 + i as f64 / 200.0,
                z_mm: if i == n / 2 { 10.0 } else { 12.0 },
            })
            .collect();
        KinTrace::new(samples, 200.0).unwrap()
    }

    #[test]
    fn disjoint_clocks_are_rejected() {
        let cal = RigCalibration::default();
        let err = analyze_trial(&flat_force(0.0, 400), &kin(10.0, 100), 0.7, &cal, &Default::default());
        assert_eq!(err.unwrap_err(), Error::Synchronization);
    }

    #[test]
    fn motionless_basket_is_degenerate() {
        let cal = RigCalibration::default();
        let still = KinTrace::new(
            (0..100)
                .map(|i| KinSample {
                    t_s: i as f64 / 200.0,
                    z_mm: 700.0,
                })
                .collect(),
            200.0,
        )
        .unwrap();
        let err = analyze_trial(&flat_force(0.0, 400), &still, 0.7, &cal, &Default::default());
        assert!(matches!(err, Err(Error::DegenerateKinematics(_))));
    }

    #[test]
    fn report_field_names_are_stable() {
        let analysis = TrialAnalysis {
            peak_force_n: 75.6,
            f_theoretical_n: 89.0,
            error_pct: 17.7,
            signature: Signature::Intact,
            kin_summary: KinSummary {
                p_rest_mm: 690.489,
                p_lowest_mm: 687.429,
                d_stop_mm: 3.06,
                v_max_mm_s: 860.634,
                t_lowest_s: 0.4,
            },
            impact_time_s: None,
        };
        let json = serde_json::to_value(analysis).unwrap();
        for key in ["peak_force_n", "f_theoretical_n", "error_pct", "signature", "kin_summary"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["signature"], "intact");
        assert_eq!(json["kin_summary"]["d_stop_mm"], 3.06);
    }
}
