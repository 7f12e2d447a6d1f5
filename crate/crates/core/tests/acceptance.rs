//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use droptest::advisor::{builtin_table, recommend, validate_monotonicity};
use droptest::campaign::{
    CampaignConfig, CampaignEvent, CampaignState, Height, NextAction, Outcome, PartSpec,
    RefineStart, TrialInput,
};
use droptest::fixtures::{table_one_traces, table_two_config, table_two_part, table_two_trials};
use droptest::mechanics::{
    bending_stress, theoretical_impact_force, torsional_stress, validation_error,
    voltage_to_force, von_mises, ImpactInputs, PlaneStress, RigCalibration, SectionLoad, GRAVITY,
};
use droptest::simrig::{critical_damping, simulate_drop, SimConfig};
use droptest::trace::{analyze_trial, classify_signature, AnalysisConfig, Signature};
use droptest::Error;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn within_budget(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed < budget, || {
        format!("took {elapsed:?}, budget {budget:?}")
    })
}

fn table_one() -> Check {
    let start = Instant::now();
    let cal = RigCalibration::default();

    // Straight from the tabulated quantities.
    let f_th = theoretical_impact_force(&ImpactInputs {
        mass_kg: 0.735,
        max_velocity_m_s: 860.634 / 1000.0,
        stopping_distance_m: (690.489 - 687.429) / 1000.0,
    })
    .map_err(|e| e.to_string())?;
    let f_act = voltage_to_force(3.78, &cal).map_err(|e| e.to_string())?;
    let err = validation_error(f_th, f_act).map_err(|e| e.to_string())?;
    ensure((f_th - 89.0).abs() <= 0.1, || format!("F_theoretical {f_th}"))?;
    ensure(f_act == 75.6, || format!("F_actual {f_act}"))?;
    ensure((err - 17.7).abs() <= 0.1, || format!("error {err}"))?;

    // Through trace ingestion and analysis.
    let (force, kin) = table_one_traces();
    let a = analyze_trial(&force, &kin, 0.735, &cal, &AnalysisConfig::default())
        .map_err(|e| e.to_string())?;
    ensure((a.f_theoretical_n - 89.0).abs() <= 0.1, || {
        format!("analyzed F_theoretical {}", a.f_theoretical_n)
    })?;
    ensure(a.peak_force_n == 75.6, || format!("analyzed F_actual {}", a.peak_force_n))?;
    ensure((a.error_pct - 17.7).abs() <= 0.1, || format!("analyzed error {}", a.error_pct))?;
    within_budget(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "F_th {:.2} N, F_act {:.1} N, error {:.2} %",
        a.f_theoretical_n, a.peak_force_n, a.error_pct
    ))
}

fn table_two() -> Check {
    let mut state =
        CampaignState::new(table_two_part(), table_two_config()).map_err(|e| e.to_string())?;
    let mut actions = vec![state.next_action().map_err(|e| e.to_string())?];
    for input in table_two_trials() {
        state = state.record_trial(&input).map_err(|e| e.to_string())?;
        actions.push(state.next_action().map_err(|e| e.to_string())?);
    }
    let drop = |t| NextAction::Drop {
        height_cm: Height::from_tenths(t),
    };
    let mut expected = vec![drop(40), drop(50), drop(50), drop(50)];
    for t in [48, 46, 44, 42] {
        expected.extend([drop(t); 3]);
    }
    expected.push(NextAction::Finished);
    ensure(actions == expected, || format!("action sequence {actions:?}"))?;
    let h = state.breaking_height().map_err(|e| e.to_string())?;
    let f = state.breaking_force().map_err(|e| e.to_string())?;
    ensure(h == 4.4, || format!("breaking height {h}"))?;
    ensure(f == 65.0, || format!("breaking force {f}"))?;
    Ok(format!("breaking height {h} cm, breaking force {f} N, {} actions", actions.len()))
}

fn table_three() -> Check {
    let table = builtin_table();
    let violations = validate_monotonicity(&table);
    ensure(violations.is_empty(), || format!("violations {violations:?}"))?;
    let r = recommend(65.0, &table).map_err(|e| e.to_string())?;
    ensure(
        r.entry.slot_depth_mm == 1.0 && r.entry.wall_loops == 3 && r.entry.mean_breaking_force_n == 65.0,
        || format!("recommend(65) = {r:?}"),
    )?;
    match recommend(20.0, &table) {
        Err(Error::InfeasibleTarget { floor_n: 25.0, .. }) => {}
        other => return Err(format!("recommend(20) = {other:?}")),
    }
    Ok("monotone; 65 N -> d=1.0 mm, w=3; 20 N below the 25 N floor".into())
}

fn formulas() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let load = SectionLoad {
            torque_nm: rng.random_range(-50.0..50.0),
            bending_moment_nm: rng.random_range(-50.0..50.0),
            diameter_m: rng.random_range(0.001..0.05),
        };
        let lambda: f64 = rng.random_range(0.2..5.0);
        let a: f64 = rng.random_range(-10.0..10.0);
        let scaled_d = SectionLoad {
            diameter_m: load.diameter_m * lambda,
            ..load
        };
        let scaled_load = SectionLoad {
            torque_nm: load.torque_nm * a,
            bending_moment_nm: load.bending_moment_nm * a,
            ..load
        };
        for f in [torsional_stress, bending_stress] {
            let base = f(&load).map_err(|e| e.to_string())?;
            if base == 0.0 {
                continue;
            }
            let d_scaled = f(&scaled_d).map_err(|e| e.to_string())?;
            let lin = f(&scaled_load).map_err(|e| e.to_string())?;
            worst = worst
                .max(rel(d_scaled * lambda.powi(3), base))
                .max(rel(lin, a * base));
        }
        let s: f64 = rng.random_range(-1e8..1e8);
        let vm = von_mises(&PlaneStress::uniaxial(s)).map_err(|e| e.to_string())?;
        worst = worst.max(rel(vm, s.abs()));
        let shear = PlaneStress {
            sigma_x_pa: 0.0,
            sigma_y_pa: 0.0,
            tau_xy_pa: s,
        };
        let vm = von_mises(&shear).map_err(|e| e.to_string())?;
        worst = worst.max(rel(vm, 3f64.sqrt() * s.abs()));
    }
    ensure(worst < 1e-12, || format!("worst relative error {worst:e}"))?;
    Ok(format!("1000 inputs, worst relative error {worst:.1e}"))
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cal = RigCalibration::default();
    let (mut worst_f, mut worst_v, mut worst_e): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..50 {
        let mass_kg = rng.random_range(0.4..1.2);
        let k = rng.random_range(5_000.0..20_000.0);
        // Every fifth drop is undamped.
        let zeta = if i % 5 == 0 { 0.0 } else { rng.random_range(0.05..0.6) };
        let cfg = SimConfig {
            mass_kg,
            drop_height_cm: rng.random_range(2.0..10.0),
            contact_stiffness_n_m: k,
            contact_damping_ns_m: zeta * critical_damping(k, mass_kg),
            seed: i,
            ..SimConfig::default()
        };
        let run = simulate_drop(&cfg).map_err(|e| e.to_string())?;
        let a = analyze_trial(&run.force, &run.kin, mass_kg, &cal, &AnalysisConfig::default())
            .map_err(|e| format!("drop {i}: {e}"))?;
        let ef = rel(a.peak_force_n, run.truth.peak_force_n);
        let ev = rel(a.kin_summary.v_max_mm_s / 1000.0, run.truth.v_impact_m_s);
        ensure(ef <= 0.02 && ev <= 0.02, || {
            format!("drop {i} {cfg:?}: peak off {ef:.4}, velocity off {ev:.4}")
        })?;
        worst_f = worst_f.max(ef);
        worst_v = worst_v.max(ev);
        if zeta == 0.0 {
            let x = run.truth.max_compression_m;
            let v = run.truth.v_impact_m_s;
            let elastic = 0.5 * k * x * x;
            let supplied = 0.5 * mass_kg * v * v + mass_kg * GRAVITY * x;
            let ee = rel(elastic, supplied);
            ensure(ee <= 0.01, || format!("drop {i}: energy off {ee:.4}"))?;
            worst_e = worst_e.max(ee);
        }
    }
    let elapsed = start.elapsed();
    within_budget(elapsed, Duration::from_secs(30))?;
    Ok(format!(
        "50 drops, worst peak {:.2} %, worst velocity {:.2} %, worst undamped energy {:.3} %, {elapsed:.1?}",
        100.0 * worst_f,
        100.0 * worst_v,
        100.0 * worst_e
    ))
}

fn classifier() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut misclassified, mut uncertain) = (Vec::new(), 0);
    for i in 0..40u64 {
        let mass_kg = rng.random_range(0.5..1.0);
        let k = rng.random_range(5_000.0..20_000.0);
        let base = SimConfig {
            mass_kg,
            drop_height_cm: rng.random_range(3.0..10.0),
            contact_stiffness_n_m: k,
            contact_damping_ns_m: rng.random_range(0.0..0.6) * critical_damping(k, mass_kg),
            seed: 1000 + i,
            ..SimConfig::default()
        };
        let expected_peak = simulate_drop(&base).map_err(|e| e.to_string())?.truth.peak_force_n;
        let breaks = i % 2 == 0;
        let cfg = SimConfig {
            part_break_threshold_n: breaks
                .then(|| rng.random_range(0.2..0.5) * expected_peak),
            ..base
        };
        let run = simulate_drop(&cfg).map_err(|e| e.to_string())?;
        ensure(run.truth.broke == breaks, || format!("case {i}: truth {:?}", run.truth))?;
        let want = if breaks { Signature::Broke } else { Signature::Intact };
        match classify_signature(&run.force).map_err(|e| e.to_string())? {
            Signature::Uncertain => uncertain += 1,
            got if got != want => misclassified.push((i, got)),
            _ => {}
        }
    }
    ensure(misclassified.is_empty(), || format!("misclassified {misclassified:?}"))?;
    Ok(format!("40 cases, 0 misclassified, {uncertain} uncertain"))
}

/// Records a campaign whose break probability rises with height until it
/// completes, exhausts, or hits the trial budget.
fn random_campaign(rng: &mut ChaCha8Rng) -> (PartSpec, CampaignConfig, Vec<TrialInput>) {
    let part = PartSpec::new(rng.random_range(1..=8) as f64 * 0.5, rng.random_range(1..=8));
    let mut config = CampaignConfig::new(rng.random_range(5..=60) as f64 / 10.0, 0.735);
    config.trials_per_height = rng.random_range(1..=4);
    config.refine_start = if rng.random_bool(0.5) {
        RefineStart::AtBreak
    } else {
        RefineStart::BelowBreak
    };
    let midpoint: f64 = rng.random_range(2.0..12.0);
    let spread: f64 = rng.random_range(0.05..1.0);
    let mut state = CampaignState::new(part.clone(), config.clone()).expect("valid config");
    let mut inputs = Vec::new();
    while let Ok(NextAction::Drop { height_cm }) = state.next_action() {
        if inputs.len() >= 120 {
            break;
        }
        let h = height_cm.cm();
        let p_break = 1.0 / (1.0 + (-(h - midpoint) / spread).exp());
        let key = format!("k{}", inputs.len());
        let input = if rng.random_bool(p_break.clamp(0.0, 1.0)) {
            TrialInput::broke(h)
        } else {
            TrialInput::intact(h, rng.random_range(20.0..120.0))
        }
        .with_key(key);
        state = state.record_trial(&input).expect("follows the pending action");
        inputs.push(input);
    }
    (part, config, inputs)
}

fn event_sourcing() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut completed = 0;
    for c in 0..200 {
        let (part, config, inputs) = random_campaign(&mut rng);
        let mut direct = CampaignState::new(part.clone(), config.clone()).map_err(|e| e.to_string())?;
        let mut log = vec![CampaignEvent::Created {
            part: part.clone(),
            config: config.clone(),
        }];
        for input in &inputs {
            direct = direct.record_trial(input).map_err(|e| e.to_string())?;
            log.push(CampaignEvent::TrialRecorded(input.clone()));
        }
        // Through the serialized log, as a store would persist it.
        let ndjson: Vec<String> = log
            .iter()
            .map(|e| serde_json::to_string(e).expect("event serializes"))
            .collect();
        let parsed: Vec<CampaignEvent> = ndjson
            .iter()
            .map(|l| serde_json::from_str(l).expect("event parses"))
            .collect();
        let replayed = CampaignState::replay(&parsed).map_err(|e| e.to_string())?;
        let a = serde_json::to_vec(&direct).expect("state serializes");
        let b = serde_json::to_vec(&replayed).expect("state serializes");
        ensure(a == b, || format!("campaign {c}: replayed snapshot differs"))?;

        // Retrying every mutation changes nothing.
        let mut retried = direct.clone();
        for input in &inputs {
            retried = retried.record_trial(input).map_err(|e| e.to_string())?;
        }
        ensure(retried == direct, || format!("campaign {c}: retry changed state"))?;

        if direct.result.is_none() {
            continue;
        }
        completed += 1;
        // Shuffle refinement trials within each height. The coarse ascent,
        // up to and including the first break, stays in place.
        let coarse_break = direct
            .trials
            .iter()
            .position(|t| t.outcome == Outcome::Broke)
            .expect("a completed campaign broke at least once");
        let mut blocks: BTreeMap<Height, Vec<usize>> = BTreeMap::new();
        for (i, t) in direct.trials.iter().enumerate().skip(coarse_break + 1) {
            blocks.entry(t.height_cm).or_default().push(i);
        }
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        for idx in blocks.values() {
            let mut shuffled = idx.clone();
            shuffled.shuffle(&mut rng);
            for (&slot, &src) in idx.iter().zip(&shuffled) {
                order[slot] = src;
            }
        }
        let permuted: Vec<TrialInput> = order.iter().map(|&i| inputs[i].clone()).collect();
        let mut other = CampaignState::new(part, config).map_err(|e| e.to_string())?;
        for input in &permuted {
            other = other.record_trial(input).map_err(|e| format!("campaign {c}: {e}"))?;
        }
        let (r1, r2) = (direct.result.unwrap(), other.result);
        ensure(Some(r1) == r2, || {
            format!("campaign {c}: permutation moved the result {r1:?} -> {r2:?}")
        })?;
    }
    ensure(completed >= 100, || format!("only {completed} campaigns completed"))?;
    Ok(format!("200 campaigns replayed bit-identically, {completed} permuted without effect"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("table_one_reproduction", table_one),
        ("table_two_campaign_replay", table_two),
        ("table_three_advisor", table_three),
        ("formula_suite", formulas),
        ("oracle_equivalence", oracle_equivalence),
        ("classifier_property", classifier),
        ("event_sourcing_property", event_sourcing),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let ms = start.elapsed().as_millis();
        match result {
            Ok(detail) => println!("PASS {name}: {detail} [{ms} ms]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{ms} ms]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
