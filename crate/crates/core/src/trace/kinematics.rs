use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::KinTrace;

/// Which end of the kinematic trace holds the basket at rest on the load cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RestAnchor {
    #[default]
    Trailing,
    Leading,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicsConfig {
    pub rest_window_s: f64,
    pub rest_anchor: RestAnchor,
    /// Width of the centred moving average applied before differencing.
    pub smoothing_window: usize,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        Self {
            rest_window_s: 0.25,
            rest_anchor: RestAnchor::Trailing,
            smoothing_window: 5,
        }
    }
}

impl KinematicsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rest_window_s.is_finite() && self.rest_window_s > 0.0) {
            return Err(Error::invalid("rest window must be positive"));
        }
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            return Err(Error::invalid("smoothing window must be a positive odd count"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinSummary {
    pub p_rest_mm: f64,
    pub p_lowest_mm: f64,
    pub d_stop_mm: f64,
    pub v_max_mm_s: f64,
    pub t_lowest_s: f64,
}

/// Moving-average smoothed, central-difference velocity, mm/s.
///
/// Entries exist only where both the smoothing window and the difference
/// stencil fit inside the trace.
pub fn velocity_profile(kin: &KinTrace, smoothing_window: usize) -> Vec<(f64, f64)> {
    let s = kin.samples();
    let half = smoothing_window / 2;
    if s.len() < smoothing_window + 2 {
        return Vec::new();
    }
    let w = smoothing_window as f64;
    let smoothed: Vec<f64> = (half..s.len() - half)
        .map(|i| s[i - half..=i + half].iter().map(|k| k.z_mm).sum::<f64>() / w)
        .collect();
    (1..smoothed.len() - 1)
        .map(|j| {
            let i = j + half;
            let dt = s[i + 1].t_s - s[i - 1].t_s;
            (s[i].t_s, (smoothed[j + 1] - smoothed[j - 1]) / dt)
        })
        .collect()
}

pub fn kinematic_summary(kin: &KinTrace, cfg: &KinematicsConfig) -> Result<KinSummary> {
    summarize(kin, cfg, None)
}

/// Like [`kinematic_summary`], but with the instant of first contact known
/// from another channel (normally the force trace on the same clock).
pub fn kinematic_summary_at_impact(
    kin: &KinTrace,
    cfg: &KinematicsConfig,
    impact_t_s: f64,
) -> Result<KinSummary> {
    summarize(kin, cfg, Some(impact_t_s))
}

fn summarize(kin: &KinTrace, cfg: &KinematicsConfig, impact_t_s: Option<f64>) -> Result<KinSummary> {
    cfg.validate()?;
    let s = kin.samples();

    let (i_low, lowest) = s
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.z_mm.total_cmp(&b.1.z_mm))
        .map(|(i, k)| (i, k.z_mm))
        .expect("trace has at least MIN_SAMPLES samples");

    let (t_first, t_last) = kin.time_range();
    let rest: Vec<f64> = match cfg.rest_anchor {
        RestAnchor::Trailing => s
            .iter()
            .filter(|k| k.t_s >= t_last - cfg.rest_window_s)
            .map(|k| k.z_mm)
            .collect(),
        RestAnchor::Leading => s
            .iter()
            .filter(|k| k.t_s <= t_first + cfg.rest_window_s)
            .map(|k| k.z_mm)
            .collect(),
    };
    let p_rest = rest.iter().sum::<f64>() / rest.len() as f64;
    let d_stop = p_rest - lowest;
    if !(d_stop > 0.0) {
        return Err(Error::DegenerateKinematics(format!(
            "stopping distance {d_stop} mm is not positive"
        )));
    }

    let t_low = s[i_low].t_s;
    let profile = velocity_profile(kin, cfg.smoothing_window);
    let observed_max = profile
        .iter()
        .filter(|(t, _)| *t < t_low)
        .map(|(_, v)| v.abs())
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    let Some(observed_max) = observed_max else {
        return Err(Error::DegenerateKinematics(
            "no velocity estimate before the lowest point".into(),
        ));
    };

    let extrapolated = free_fall_velocity(kin, cfg, i_low, p_rest, impact_t_s);
    let v_max = extrapolated.map_or(observed_max, |v| v.max(observed_max));

    Ok(KinSummary {
        p_rest_mm: p_rest,
        p_lowest_mm: lowest,
        d_stop_mm: d_stop,
        v_max_mm_s: v_max,
        t_lowest_s: t_low,
    })
}

/// Speed at first contact, extrapolated from the descending segment that
/// precedes it.
///
/// At 200 Hz the compression stroke spans only one or two samples, so the
/// smoothed derivative near the impact mixes free fall with the stop. The
/// smoothed velocities whose stencil lies fully inside the fall are fitted
/// with a line (constant acceleration) and carried forward
/// to the contact instant: either the supplied impact time, or the moment the
/// fall reaches the rest position.
fn free_fall_velocity(
    kin: &KinTrace,
    cfg: &KinematicsConfig,
    i_low: usize,
    p_rest: f64,
    impact_t_s: Option<f64>,
) -> Option<f64> {
    let s = kin.samples();
    let in_flight = |i: usize| match impact_t_s {
        Some(t_c) => s[i].t_s < t_c,
        None => s[i].z_mm > p_rest,
    };
    let end = (0..i_low).rev().find(|&i| in_flight(i))?;
    let mut start = end;
    while start > 0 && s[start - 1].z_mm > s[start].z_mm {
        start -= 1;
    }
    if start > 0 {
        // the sample the descent starts from is the held position, not the fall
        start += 1;
    }

    let reach = cfg.smoothing_window / 2 + 1;
    let t_ref = s[end].t_s;
    let points: Vec<(f64, f64)> = velocity_profile(kin, cfg.smoothing_window)
        .into_iter()
        .enumerate()
        .map(|(j, (t, v))| (j + reach, t, v))
        .filter(|&(i, _, _)| i >= start + reach && i + reach <= end)
        .map(|(_, t, v)| (t - t_ref, v))
        .collect();
    if points.len() < 2 {
        return None;
    }

    let n = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_v = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_v)).sum();
    let accel = sxy / sxx;
    let v_at = |dt: f64| mean_v + accel * (dt - mean_t);

    let speed = match impact_t_s {
        Some(t_c) => v_at(t_c - t_ref).abs(),
        None => {
            let v_end = v_at(0.0);
            let drop = p_rest - s[end].z_mm;
            (v_end * v_end + 2.0 * accel * drop).max(v_end * v_end).sqrt()
        }
    };
    speed.is_finite().then_some(speed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::KinSample;

    fn trace(points: &[(f64, f64)]) -> KinTrace {
        KinTrace::new(
            points
                .iter()
                .map(|&(t_s, z_mm)| KinSample { t_s, z_mm })
                .collect(),
            200.0,
        )
        .unwrap()
    }

    /// Hold, parabolic fall reaching `rest` at `v_c` mm/s, a one-sample dip to
    /// `lowest`, then rest.
    fn drop_trace(rest: f64, lowest: f64, v_c: f64) -> KinTrace {
        let dt = 0.005;
        let g = 7000.0; // mm/s², reduced by rail losses
        let t_c = 0.4 + 0.002; // contact between samples
        let fall_time = v_c / g;
        let t_release = t_c - fall_time;
        let z_top = rest + 0.5 * g * fall_time * fall_time;
        let mut pts = Vec::new();
        let mut dipped = false;
        for i in 0..200 {
            let t = i as f64 * dt;
            let z = if t < t_release {
                z_top
            } else if t < t_c {
                z_top - 0.5 * g * (t - t_release).powi(2)
            } else if !dipped {
                dipped = true;
                lowest
            } else {
                rest
            };
            pts.push((t, z));
        }
        trace(&pts)
    }

    #[test]
    fn table_one_positions_give_stopping_distance() {
        let kin = drop_trace(690.489, 687.429, 860.634);
        let summary = kinematic_summary(&kin, &KinematicsConfig::default()).unwrap();
        assert!((summary.d_stop_mm - 3.060).abs() < 1e-9);
        assert_eq!(summary.p_lowest_mm, 687.429);
        assert!((summary.p_rest_mm - 690.489).abs() < 1e-9);
        assert!((summary.v_max_mm_s - 860.634).abs() < 1e-6);
    }

    #[test]
    fn constant_position_is_degenerate() {
        let pts: Vec<_> = (0..50).map(|i| (i as f64 * 0.005, 700.0)).collect();
        let kin = trace(&pts);
        assert!(velocity_profile(&kin, 5).iter().all(|&(_, v)| v == 0.0));
        assert!(matches!(
            kinematic_summary(&kin, &KinematicsConfig::default()),
            Err(Error::DegenerateKinematics(_))
        ));
    }

    #[test]
    fn leading_rest_anchor() {
        let mut pts: Vec<_> = (0..60).map(|i| (i as f64 * 0.005, 500.0)).collect();
        pts[55].1 = 497.0;
        let cfg = KinematicsConfig {
            rest_anchor: RestAnchor::Leading,
            ..Default::default()
        };
        let summary = kinematic_summary(&trace(&pts), &cfg).unwrap();
        assert_eq!(summary.d_stop_mm, 3.0);
    }

    #[test]
    fn velocity_profile_is_exact_on_a_line() {
        let pts: Vec<_> = (0..30).map(|i| (i as f64 * 0.005, 100.0 - 2.0 * i as f64)).collect();
        let profile = velocity_profile(&trace(&pts), 5);
        assert_eq!(profile.len(), 30 - 6);
        for (_, v) in profile {
            assert!((v + 400.0).abs() < 1e-9);
        }
    }

    #[test]
    fn impact_time_route_matches_rest_crossing_on_clean_data() {
        let kin = drop_trace(690.0, 686.0, 800.0);
        let cfg = KinematicsConfig::default();
        let by_rest = kinematic_summary(&kin, &cfg).unwrap();
        let by_time = kinematic_summary_at_impact(&kin, &cfg, 0.402).unwrap();
        assert!((by_rest.v_max_mm_s - 800.0).abs() < 1e-6);
        assert!((by_time.v_max_mm_s - 800.0).abs() < 1e-6);
    }

    #[test]
    fn even_smoothing_window_is_rejected() {
        let kin = drop_trace(690.0, 686.0, 800.0);
        let cfg = KinematicsConfig {
            smoothing_window: 4,
            ..Default::default()
        };
        assert!(kinematic_summary(&kin, &cfg).is_err());
    }
}
