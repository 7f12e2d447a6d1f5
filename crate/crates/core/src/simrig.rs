//! Synthetic drop rig.
//!
//! The basket is held, released down a rail that keeps a fraction `η` of the
//! free-fall speed, and lands on the load cell through a linear spring-damper
//! contact. The fall is evaluated in closed form; contact and any rebound are
//! integrated with a fixed-step symplectic Euler scheme and then resampled to
//! the sensor rates. Every run reports the exact quantities the analyzer is
//! supposed to recover.
//!
//! When a break threshold is set and the contact force reaches it, the part
//! fractures: the fragment keeps carrying a fraction of the threshold while it
//! is crushed, then the basket crosses a small gap and strikes the cell
//! directly, producing a second, larger peak.

use std::fs;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanics::GRAVITY;
use crate::trace::{
    force_trace_to_csv, kin_trace_to_csv, ForceSample, ForceTrace, KinSample, KinTrace,
};

/// Volts per newton of the simulated amplifier.
const VOLTS_PER_NEWTON: f64 = 1.0 / 20.0;
/// Share of the break threshold the fragment carries while it is crushed.
pub const BREAK_FRACTION: f64 = 0.4;
/// Lowest contact integration rate accepted.
pub const MIN_INTEGRATION_RATE_HZ: f64 = 20_000.0;
/// Largest `ω·dt` (and `c/m·dt`) the integrator accepts.
const STABILITY_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub mass_kg: f64,
    pub drop_height_cm: f64,
    /// Fraction of the ideal free-fall impact speed the rail preserves.
    pub rail_efficiency: f64,
    pub contact_stiffness_n_m: f64,
    pub contact_damping_ns_m: f64,
    #[serde(default)]
    pub part_break_threshold_n: Option<f64>,
    pub noise_sigma_v: f64,
    pub force_rate_hz: f64,
    pub kin_rate_hz: f64,
    pub integration_rate_hz: f64,
    pub seed: u64,
    /// Height of the basket at rest on the cell.
    pub rest_position_mm: f64,
    /// Time held before release.
    pub hold_s: f64,
    /// Time recorded after impact.
    pub record_s: f64,
    /// Travel between the fractured part and the basket striking the cell.
    pub break_gap_mm: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let mass_kg = 0.735;
        let k = 10_000.0;
        Self {
            mass_kg,
            drop_height_cm: 4.0,
            rail_efficiency: 0.85,
            contact_stiffness_n_m: k,
            contact_damping_ns_m: critical_damping(k, mass_kg) * 0.4,
            part_break_threshold_n: None,
            noise_sigma_v: 0.002,
            force_rate_hz: 2000.0,
            kin_rate_hz: 200.0,
            integration_rate_hz: 200_000.0,
            seed: 0,
            rest_position_mm: 690.0,
            hold_s: 0.2,
            record_s: 0.8,
            break_gap_mm: 3.0,
        }
    }
}

/// `2·√(k·m)`.
pub fn critical_damping(stiffness_n_m: f64, mass_kg: f64) -> f64 {
    2.0 * (stiffness_n_m * mass_kg).sqrt()
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let non_negative = |v: f64| v.is_finite() && v >= 0.0;
        let checks = [
            (positive(self.mass_kg), "mass must be positive"),
            (non_negative(self.drop_height_cm), "drop height must be non-negative"),
            (
                positive(self.rail_efficiency) && self.rail_efficiency <= 1.0,
                "rail efficiency must lie in (0, 1]",
            ),
            (positive(self.contact_stiffness_n_m), "contact stiffness must be positive"),
            (non_negative(self.contact_damping_ns_m), "contact damping must be non-negative"),
            (non_negative(self.noise_sigma_v), "noise sigma must be non-negative"),
            (
                positive(self.force_rate_hz) && positive(self.kin_rate_hz),
                "sample rates must be positive",
            ),
            (positive(self.record_s), "record time must be positive"),
            (non_negative(self.hold_s), "hold time must be non-negative"),
            (positive(self.break_gap_mm), "break gap must be positive"),
            (self.rest_position_mm.is_finite(), "rest position must be finite"),
            (
                self.part_break_threshold_n.is_none_or(positive),
                "break threshold must be positive",
            ),
        ];
        if let Some((_, msg)) = checks.iter().find(|(ok, _)| !ok) {
            return Err(Error::invalid(*msg));
        }
        if !(self.integration_rate_hz.is_finite()
            && self.integration_rate_hz >= MIN_INTEGRATION_RATE_HZ)
        {
            return Err(Error::invalid(format!(
                "integration rate must be at least {MIN_INTEGRATION_RATE_HZ} Hz"
            )));
        }
        let dt = 1.0 / self.integration_rate_hz;
        let omega = (self.contact_stiffness_n_m / self.mass_kg).sqrt();
        let damping_rate = self.contact_damping_ns_m / self.mass_kg;
        if omega * dt > STABILITY_LIMIT || damping_rate * dt > STABILITY_LIMIT {
            let needed = omega.max(damping_rate) / STABILITY_LIMIT;
            return Err(Error::Stability(format!(
                "a {:.0} Hz step is too coarse for this contact; use at least {:.0} Hz",
                self.integration_rate_hz,
                needed.ceil()
            )));
        }
        Ok(())
    }

    /// `η·√(2·g·h)`.
    pub fn impact_velocity_m_s(&self) -> f64 {
        self.rail_efficiency * (2.0 * GRAVITY * self.drop_height_cm / 100.0).sqrt()
    }
}

/// Exact internal quantities of one simulated drop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub v_impact_m_s: f64,
    pub peak_force_n: f64,
    pub broke: bool,
    /// Final rest position minus the lowest position reached.
    pub d_stop_m: f64,
    pub impact_time_s: f64,
    /// Largest spring compression before any fracture.
    pub max_compression_m: f64,
}

#[derive(Debug, Clone)]
pub struct SimRun {
    pub force: ForceTrace,
    pub kin: KinTrace,
    pub truth: SimTruth,
}

impl SimRun {
    pub fn truth_json(&self) -> String {
        serde_json::to_string_pretty(&self.truth).expect("truth serializes")
    }

    /// Writes `{stem}_force.csv`, `{stem}_kin.csv` and `{stem}_truth.json`.
    pub fn write_files(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{stem}_force.csv")), force_trace_to_csv(&self.force))?;
        fs::write(dir.join(format!("{stem}_kin.csv")), kin_trace_to_csv(&self.kin))?;
        fs::write(dir.join(format!("{stem}_truth.json")), self.truth_json())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Contact {
    Whole,
    /// Fractured at compression `at_m`.
    Broken { at_m: f64, threshold_n: f64 },
}

struct Contact1D<'a> {
    cfg: &'a SimConfig,
    state: Contact,
}

impl Contact1D<'_> {
    fn force(&self, x: f64, v: f64) -> f64 {
        let (k, c) = (self.cfg.contact_stiffness_n_m, self.cfg.contact_damping_ns_m);
        let spring = |x: f64| if x > 0.0 { (k * x + c * v).max(0.0) } else { 0.0 };
        match self.state {
            Contact::Whole => spring(x),
            Contact::Broken { at_m, threshold_n } => {
                let s = x - at_m;
                let gap = self.cfg.break_gap_mm / 1000.0;
                let fragment = if s >= 0.0 {
                    BREAK_FRACTION * threshold_n * (1.0 - s / (0.5 * gap)).max(0.0)
                } else {
                    0.0
                };
                fragment + spring(s - gap)
            }
        }
    }

    fn equilibrium_m(&self) -> f64 {
        let sag = self.cfg.mass_kg * GRAVITY / self.cfg.contact_stiffness_n_m;
        match self.state {
            Contact::Whole => sag,
            Contact::Broken { at_m, .. } => at_m + self.cfg.break_gap_mm / 1000.0 + sag,
        }
    }
}

/// Compression history after impact, one entry per integration step.
struct Integrated {
    x_m: Vec<f64>,
    force_n: Vec<f64>,
    contact: Contact,
    max_compression_m: f64,
}

fn integrate(cfg: &SimConfig, v0: f64, x0: f64) -> Integrated {
    let dt = 1.0 / cfg.integration_rate_hz;
    let steps = (cfg.record_s * cfg.integration_rate_hz).ceil() as usize + 2;
    let m = cfg.mass_kg;
    let eta2 = cfg.rail_efficiency * cfg.rail_efficiency;
    let mut model = Contact1D {
        cfg,
        state: Contact::Whole,
    };
    let (mut x, mut v) = (x0, v0);
    let mut x_m = Vec::with_capacity(steps);
    let mut force_n = Vec::with_capacity(steps);
    let mut max_compression_m = x0;

    for _ in 0..steps {
        let mut f = model.force(x, v);
        if let (Contact::Whole, Some(threshold_n)) = (model.state, cfg.part_break_threshold_n) {
            if f >= threshold_n {
                // The part cannot carry more than its strength.
                model.state = Contact::Broken { at_m: x, threshold_n };
                x_m.push(x);
                force_n.push(threshold_n);
                f = model.force(x, v);
                v += (GRAVITY - f / m) * dt;
                x += v * dt;
                continue;
            }
        }
        if matches!(model.state, Contact::Whole) {
            max_compression_m = max_compression_m.max(x);
        }
        x_m.push(x);
        force_n.push(f);
        let a = if f > 0.0 {
            GRAVITY - f / m
        } else if v > 0.0 {
            // Airborne on the rail: friction opposes motion.
            eta2 * GRAVITY
        } else {
            (2.0 - eta2) * GRAVITY
        };
        v += a * dt;
        x += v * dt;
    }
    Integrated {
        x_m,
        force_n,
        contact: model.state,
        max_compression_m,
    }
}

fn lerp(values: &[f64], pos: f64) -> f64 {
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match (values.get(i), values.get(i + 1)) {
        (Some(a), Some(b)) => a + (b - a) * frac,
        (Some(a), None) => *a,
        _ => *values.last().expect("integration produced samples"),
    }
}

/// Runs one drop and samples both sensor channels.
pub fn simulate_drop(cfg: &SimConfig) -> Result<SimRun> {
    cfg.validate()?;
    let m = cfg.mass_kg;
    let k = cfg.contact_stiffness_n_m;
    let h_m = cfg.drop_height_cm / 100.0;
    let accel = cfg.rail_efficiency.powi(2) * GRAVITY;
    let fall_s = (2.0 * h_m / accel).sqrt();
    let t_release = cfg.hold_s;
    let t_impact = t_release + fall_s;
    let v_impact = cfg.impact_velocity_m_s();

    // A zero-height drop is a quasi-static placement at equilibrium.
    let (x0, v0) = if h_m == 0.0 { (m * GRAVITY / k, 0.0) } else { (0.0, v_impact) };
    let run = integrate(cfg, v0, x0);

    let z_contact_mm = cfg.rest_position_mm + 1000.0 * m * GRAVITY / k;
    let z_top_mm = z_contact_mm + 1000.0 * h_m;
    let steps_per_s = cfg.integration_rate_hz;
    let end = t_impact + cfg.record_s;

    let kin: Vec<KinSample> = (0..)
        .map(|i| i as f64 / cfg.kin_rate_hz)
        .take_while(|&t| t <= end)
        .map(|t| {
            let z_mm = if t < t_release {
                z_top_mm
            } else if t < t_impact {
                z_top_mm - 500.0 * accel * (t - t_release).powi(2)
            } else {
                z_contact_mm - 1000.0 * lerp(&run.x_m, (t - t_impact) * steps_per_s)
            };
            KinSample { t_s: t, z_mm }
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_sigma_v).map_err(|e| Error::invalid(e.to_string()))?;
    let force: Vec<ForceSample> = (0..)
        .map(|i| i as f64 / cfg.force_rate_hz)
        .take_while(|&t| t <= end)
        .map(|t| {
            let newtons = if t < t_impact {
                0.0
            } else {
                lerp(&run.force_n, (t - t_impact) * steps_per_s)
            };
            ForceSample {
                t_s: t,
                voltage_v: newtons * VOLTS_PER_NEWTON + noise.sample(&mut rng),
            }
        })
        .collect();

    let model = Contact1D {
        cfg,
        state: run.contact,
    };
    let lowest = run.x_m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let truth = SimTruth {
        v_impact_m_s: if h_m == 0.0 { 0.0 } else { v_impact },
        peak_force_n: run.force_n.iter().copied().fold(0.0, f64::max),
        broke: matches!(run.contact, Contact::Broken { .. }),
        d_stop_m: (lowest - model.equilibrium_m()).max(0.0),
        impact_time_s: t_impact,
        max_compression_m: run.max_compression_m,
    };

    Ok(SimRun {
        force: ForceTrace::new(force, cfg.force_rate_hz)?,
        kin: KinTrace::new(kin, cfg.kin_rate_hz)?,
        truth,
    })
}

#[derive(Debug, Clone)]
pub struct FixtureTrial {
    pub height_cm: f64,
    /// Occurrence of this height within the requested list.
    pub index: u32,
    /// Strength of this particular part after scatter.
    pub strength_n: f64,
    pub run: SimRun,
}

impl FixtureTrial {
    pub fn file_stem(&self) -> String {
        format!("h{:.1}_t{}", self.height_cm, self.index)
    }
}

/// Part-to-part coefficient of variation of breaking strength.
pub const DEFAULT_STRENGTH_CV: f64 = 0.03;

/// One simulated drop per requested height. Each part's strength scatters
/// around `part_strength_n`; an infinite strength never breaks.
pub fn generate_campaign_fixture(
    part_strength_n: f64,
    template: &SimConfig,
    heights_cm: &[f64],
) -> Result<Vec<FixtureTrial>> {
    generate_campaign_fixture_with(part_strength_n, DEFAULT_STRENGTH_CV, template, heights_cm)
}

pub fn generate_campaign_fixture_with(
    part_strength_n: f64,
    strength_cv: f64,
    template: &SimConfig,
    heights_cm: &[f64],
) -> Result<Vec<FixtureTrial>> {
    if part_strength_n.is_nan() || part_strength_n <= 0.0 {
        return Err(Error::invalid("part strength must be positive"));
    }
    if !(strength_cv.is_finite() && strength_cv >= 0.0) {
        return Err(Error::invalid("strength scatter must be non-negative"));
    }
    if let Some(h) = heights_cm.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
        return Err(Error::invalid(format!("height {h} cm must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(template.seed);
    let scatter = Normal::new(1.0, strength_cv).map_err(|e| Error::invalid(e.to_string()))?;
    let mut seen: Vec<f64> = Vec::new();
    heights_cm
        .iter()
        .map(|&height_cm| {
            let index = seen.iter().filter(|&&h| h == height_cm).count() as u32;
            seen.push(height_cm);
            let strength_n = part_strength_n * scatter.sample(&mut rng).max(0.0);
            let cfg = SimConfig {
                drop_height_cm: height_cm,
                part_break_threshold_n: strength_n.is_finite().then_some(strength_n),
                seed: rng.next_u64(),
                ..template.clone()
            };
            Ok(FixtureTrial {
                height_cm,
                index,
                strength_n,
                run: simulate_drop(&cfg)?,
            })
        })
        .collect()
}
