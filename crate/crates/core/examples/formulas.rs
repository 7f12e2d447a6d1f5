//! Section stresses for a slotted attachment and the energy-balance impact
//! estimate.

use droptest::mechanics::{
    bending_stress, slot_section_screen, theoretical_impact_force, torsional_stress,
    validation_error, von_mises, ImpactInputs, PlaneStress, SectionLoad,
};

fn main() -> droptest::Result<()> {
    let load = SectionLoad {
        torque_nm: 0.2,
        bending_moment_nm: 0.5,
        diameter_m: 0.006,
    };
    let tau = torsional_stress(&load)?;
    let sigma = bending_stress(&load)?;
    let vm = von_mises(&PlaneStress {
        sigma_x_pa: sigma,
        sigma_y_pa: 0.0,
        tau_xy_pa: tau,
    })?;
    println!("shaft d = 6 mm: tau = {:.2} MPa, sigma = {:.2} MPa, von Mises = {:.2} MPa", tau / 1e6, sigma / 1e6, vm / 1e6);

    for slot_mm in [0.0, 1.0, 2.0] {
        let s = slot_section_screen(65.0, 0.02, 0.010, 0.004, slot_mm / 1000.0)?;
        println!("slot {slot_mm} mm under 65 N at 20 mm: {:.1} MPa", s / 1e6);
    }

    let f_th = theoretical_impact_force(&ImpactInputs {
        mass_kg: 0.735,
        max_velocity_m_s: 0.860634,
        stopping_distance_m: 0.00306,
    })?;
    let err = validation_error(f_th, 75.6)?;
    println!("F_theoretical = {f_th:.1} N against 75.6 N measured: {err:.1} %");
    Ok(())
}
