//! Closed-form mechanics used across the toolkit: shaft section stresses,
//! Von Mises combination, load-cell voltage conversion, and the
//! energy-balance impact force estimate.
//!
//! Every function takes and returns SI units (m, kg, s, N, Pa). Conversions
//! to and from mm/cm live in [`units`] and are only applied at I/O edges.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;

/// Maximum permissible quasi-static force on the face (ISO 15066), N.
pub const FACE_CONTACT_LIMIT_N: f64 = 65.0;

/// Minimum strength needed to survive normal feeding loads, N.
pub const FUNCTIONAL_FLOOR_N: f64 = 25.0;

pub mod units {
    pub fn mm_to_m(mm: f64) -> f64 {
        mm / 1000.0
    }

    pub fn m_to_mm(m: f64) -> f64 {
        m * 1000.0
    }

    pub fn cm_to_m(cm: f64) -> f64 {
        cm / 100.0
    }

    pub fn m_to_cm(m: f64) -> f64 {
        m * 100.0
    }
}

/// Torque and bending moment acting on a circular section of diameter `diameter_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionLoad {
    pub torque_nm: f64,
    pub bending_moment_nm: f64,
    pub diameter_m: f64,
}

impl SectionLoad {
    fn checked_cube(&self) -> Result<f64> {
        if !(self.diameter_m.is_finite() && self.diameter_m > 0.0) {
            return Err(Error::invalid(format!(
                "diameter must be positive, got {}",
                self.diameter_m
            )));
        }
        Ok(self.diameter_m.powi(3))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneStress {
    pub sigma_x_pa: f64,
    pub sigma_y_pa: f64,
    pub tau_xy_pa: f64,
}

impl PlaneStress {
    pub fn uniaxial(sigma_pa: f64) -> Self {
        Self {
            sigma_x_pa: sigma_pa,
            sigma_y_pa: 0.0,
            tau_xy_pa: 0.0,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            sigma_x_pa: self.sigma_x_pa * k,
            sigma_y_pa: self.sigma_y_pa * k,
            tau_xy_pa: self.tau_xy_pa * k,
        }
    }
}

/// Inputs to the energy-balance impact estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactInputs {
    pub mass_kg: f64,
    pub max_velocity_m_s: f64,
    pub stopping_distance_m: f64,
}

/// Load-cell amplifier calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigCalibration {
    /// Newtons per volt of amplifier output.
    pub volts_to_newtons: f64,
    /// Display resolution of the amplifier, N.
    pub display_resolution_n: f64,
}

impl Default for RigCalibration {
    fn default() -> Self {
        Self {
            volts_to_newtons: 20.0,
            display_resolution_n: 0.01,
        }
    }
}

impl RigCalibration {
    pub fn new(volts_to_newtons: f64) -> Result<Self> {
        let cal = Self {
            volts_to_newtons,
            ..Self::default()
        };
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.volts_to_newtons.is_finite() && self.volts_to_newtons > 0.0) {
            return Err(Error::invalid(format!(
                "calibration scale must be positive, got {} N/V",
                self.volts_to_newtons
            )));
        }
        if !(self.display_resolution_n.is_finite() && self.display_resolution_n >= 0.0) {
            return Err(Error::invalid("display resolution must be non-negative"));
        }
        Ok(())
    }
}

/// τ = 16T / (π d³)
pub fn torsional_stress(load: &SectionLoad) -> Result<f64> {
    let d3 = load.checked_cube()?;
    Ok(16.0 * load.torque_nm / (PI * d3))
}

/// σ = 32M / (π d³)
pub fn bending_stress(load: &SectionLoad) -> Result<f64> {
    let d3 = load.checked_cube()?;
    Ok(32.0 * load.bending_moment_nm / (PI * d3))
}

/// Plane-stress Von Mises equivalent stress,
/// √(σx² − σxσy + σy² + 3τxy²).
pub fn von_mises(stress: &PlaneStress) -> Result<f64> {
    let PlaneStress {
        sigma_x_pa: sx,
        sigma_y_pa: sy,
        tau_xy_pa: txy,
    } = *stress;
    if !(sx.is_finite() && sy.is_finite() && txy.is_finite()) {
        return Err(Error::invalid("stress components must be finite"));
    }
    // The quadratic form is positive semi-definite, but rounding can push
    // it a hair below zero for near-hydrostatic states.
    let q = sx * sx - sx * sy + sy * sy + 3.0 * txy * txy;
    Ok(q.max(0.0).sqrt())
}

pub fn voltage_to_force(peak_voltage_v: f64, cal: &RigCalibration) -> Result<f64> {
    cal.validate()?;
    if !peak_voltage_v.is_finite() || peak_voltage_v < 0.0 {
        return Err(Error::invalid(format!(
            "peak voltage must be a non-negative baseline-corrected value, got {peak_voltage_v} V"
        )));
    }
    Ok(cal.volts_to_newtons * peak_voltage_v)
}

/// F = m v² / (2 d_stop): kinetic energy before impact equated to the work
/// done over the stopping distance, with no losses.
pub fn theoretical_impact_force(inp: &ImpactInputs) -> Result<f64> {
    if !(inp.mass_kg.is_finite() && inp.mass_kg > 0.0) {
        return Err(Error::invalid(format!(
            "mass must be positive, got {} kg",
            inp.mass_kg
        )));
    }
    if !inp.max_velocity_m_s.is_finite() || inp.max_velocity_m_s < 0.0 {
        return Err(Error::invalid("max velocity must be a non-negative speed"));
    }
    if !(inp.stopping_distance_m.is_finite() && inp.stopping_distance_m > 0.0) {
        return Err(Error::DegenerateKinematics(format!(
            "stopping distance must be positive, got {} m",
            inp.stopping_distance_m
        )));
    }
    let v = inp.max_velocity_m_s;
    Ok(inp.mass_kg * v * v / (2.0 * inp.stopping_distance_m))
}

/// Signed percentage error of the theoretical force relative to the measured
/// one. Positive when theory overestimates.
pub fn validation_error(f_theoretical_n: f64, f_actual_n: f64) -> Result<f64> {
    if !(f_actual_n.is_finite() && f_actual_n > 0.0) {
        return Err(Error::invalid(format!(
            "actual force must be positive, got {f_actual_n} N"
        )));
    }
    if !f_theoretical_n.is_finite() {
        return Err(Error::invalid("theoretical force must be finite"));
    }
    Ok(100.0 * (f_theoretical_n - f_actual_n) / f_actual_n)
}

/// Net-section bending screen for a slotted rectangular beam.
///
/// The applied force acts at `lever_arm_m` from the slot; the slot removes
/// `slot_depth_m` from the section height, leaving a rectangle of
/// `section_width_m × (section_height_m − slot_depth_m)`. Returns the
/// Von Mises stress of the resulting outer-fibre bending stress M·c/I.
pub fn slot_section_screen(
    applied_force_n: f64,
    lever_arm_m: f64,
    section_width_m: f64,
    section_height_m: f64,
    slot_depth_m: f64,
) -> Result<f64> {
    for (name, value) in [
        ("lever arm", lever_arm_m),
        ("section width", section_width_m),
        ("section height", section_height_m),
    ] {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::invalid(format!("{name} must be positive, got {value}")));
        }
    }
    if !slot_depth_m.is_finite() || slot_depth_m < 0.0 {
        return Err(Error::invalid(format!(
            "slot depth must be non-negative, got {slot_depth_m}"
        )));
    }
    if !applied_force_n.is_finite() || applied_force_n < 0.0 {
        return Err(Error::invalid("applied force must be a non-negative magnitude"));
    }
    if slot_depth_m >= section_height_m {
        return Err(Error::SeveredSection {
            slot_depth_m,
            section_height_m,
        });
    }

    let net_height = section_height_m - slot_depth_m;
    let moment = applied_force_n * lever_arm_m;
    let second_moment = section_width_m * net_height.powi(3) / 12.0;
    let fibre_distance = net_height / 2.0;
    von_mises(&PlaneStress::uniaxial(moment * fibre_distance / second_moment))
}
