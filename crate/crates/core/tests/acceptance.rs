//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if any
//! criterion fails. Tolerances are pinned below.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use polscan::padm::{
    build_pad, build_pad_matrix, classify, extract_features, AngleSweep, Label, Thresholds,
};
use polscan::polarimetry::{
    cross_pol_power_closed, cross_pol_power_direct, fit_harmonics, harmonic_coefficients,
    harmonic_params, rotate_target, AngleSample, HarmonicParams, PolarizationAngle,
    ScatteringMatrix,
};
use polscan::spectral::{
    depth_spectrum, find_peaks, synthesize_point_power, synthesize_power, FrequencyGrid,
    PeakParams, PointScene, PowerTrace, SpectralParams, Window,
};
use polscan::stratified::{Layer, LayerStack, Permittivity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

// criterion 1
const CLOSED_FORM_SAMPLES: usize = 100_000;
const CLOSED_FORM_TOL: f64 = 1e-10;
const CLOSED_FORM_BUDGET: Duration = Duration::from_secs(10);
// criterion 2
const DIHEDRAL_TOL: f64 = 1e-12;
const DIHEDRAL_GRID: usize = 10_000;
// criterion 3
const ROTATION_SAMPLES: usize = 1_000;
const ROTATION_TOL: f64 = 1e-12;
// criterion 4
const FIT_SAMPLES: usize = 1_000;
const FIT_TOL: f64 = 1e-9;
/// Harmonics weaker than this carry no meaningful phase.
const FIT_PHASE_FLOOR: f64 = 1e-6;
// criteria 5–7
const PEAK_DEPTH_TOL_MM: f64 = 0.5;
const SLAB_MAGNITUDE_REL_TOL: f64 = 0.05;
const SLAB_PAIR_WEIGHT: f64 = 0.10944569617190066;
const POINT_WEIGHT_RATIO_REL_TOL: f64 = 0.05;
// criterion 8
const PARSEVAL_TRACES: usize = 1_000;
const PARSEVAL_TOL: f64 = 1e-12;
// criterion 9
const SIGNATURE_RATIO: f64 = 10.0;
const GENERATED_SCENES: usize = 25;
const SCENE_SEED: u64 = 0x5eed_2024;
// criterion 10
const ROUND_TRIP_TOL: f64 = 1e-12;
// criterion 11
const PADM_BUDGET: Duration = Duration::from_secs(1);

type Outcome = (bool, String);
type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);

fn wband() -> FrequencyGrid {
    FrequencyGrid::from_ghz(75.0, 110.0, 0.175).unwrap()
}

fn eps(re: f64) -> Permittivity {
    Permittivity::lossless(re).unwrap()
}

fn unit_disk(rng: &mut impl Rng) -> Complex64 {
    Complex64::from_polar(rng.gen::<f64>().sqrt(), rng.gen_range(0.0..2.0 * PI))
}

fn random_matrix(rng: &mut impl Rng) -> ScatteringMatrix {
    ScatteringMatrix::new(
        unit_disk(rng),
        unit_disk(rng),
        unit_disk(rng),
        unit_disk(rng),
    )
    .unwrap()
}

fn params_of(s: &ScatteringMatrix) -> HarmonicParams {
    harmonic_params(&harmonic_coefficients(s))
}

fn mm(m: f64) -> f64 {
    m * 1e3
}

fn closed_form_chain() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..CLOSED_FORM_SAMPLES {
        let s = random_matrix(&mut rng);
        let eta = PolarizationAngle::from_radians(rng.gen_range(0.0..PI));
        let d =
            (cross_pol_power_closed(&params_of(&s), eta) - cross_pol_power_direct(&s, eta)).abs();
        worst = worst.max(d / s.frobenius_sq().max(1.0));
    }
    let elapsed = start.elapsed();
    (
        worst <= CLOSED_FORM_TOL && elapsed < CLOSED_FORM_BUDGET,
        format!("max scaled |closed - direct| = {worst:.3e} (tol {CLOSED_FORM_TOL:e}), {CLOSED_FORM_SAMPLES} samples in {elapsed:.2?}"),
    )
}

fn quadrant_regression() -> Outcome {
    let s = ScatteringMatrix::dihedral();
    let p = params_of(&s);
    let param_err = p
        .amp2
        .abs()
        .max((p.amp4 - 0.5).abs())
        .max((p.phase4 - PI).abs())
        .max((p.offset - 0.5).abs());
    let mut curve_err = 0.0f64;
    for k in 0..DIHEDRAL_GRID {
        let eta = PolarizationAngle::from_radians(PI * k as f64 / DIHEDRAL_GRID as f64);
        let expect = (2.0 * eta.radians()).sin().powi(2);
        curve_err = curve_err
            .max((cross_pol_power_closed(&p, eta) - expect).abs())
            .max((cross_pol_power_direct(&s, eta) - expect).abs());
    }
    (
        param_err <= DIHEDRAL_TOL && curve_err <= DIHEDRAL_TOL,
        format!(
            "(A1, A2, B2, C) = ({:.3e}, {}, {}, {}), curve error {curve_err:.3e}",
            p.amp2, p.amp4, p.phase4, p.offset
        ),
    )
}

fn rotation_shift() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..ROTATION_SAMPLES {
        let s = random_matrix(&mut rng);
        let theta = rng.gen_range(-PI..PI);
        let eta = rng.gen_range(0.0..PI);
        let rotated = rotate_target(&s, theta);
        let lhs = cross_pol_power_direct(&rotated, PolarizationAngle::from_radians(eta));
        let rhs = cross_pol_power_direct(&s, PolarizationAngle::from_radians(eta + theta));
        let lhs_closed =
            cross_pol_power_closed(&params_of(&rotated), PolarizationAngle::from_radians(eta));
        worst = worst.max((lhs - rhs).abs()).max((lhs_closed - rhs).abs());
    }
    (
        worst <= ROTATION_TOL,
        format!("max |P_rot(eta) - P(eta + theta)| = {worst:.3e} over {ROTATION_SAMPLES} draws"),
    )
}

fn fit_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sweep = AngleSweep::default();
    let mut worst = 0.0f64;
    for _ in 0..FIT_SAMPLES {
        let s = random_matrix(&mut rng);
        let samples: Vec<AngleSample> = sweep
            .angles_deg()
            .into_iter()
            .map(|d| {
                let eta = PolarizationAngle::from_degrees(d);
                AngleSample::new(eta, cross_pol_power_direct(&s, eta)).unwrap()
            })
            .collect();
        let fitted = fit_harmonics(&samples).unwrap();
        worst = worst.max(fitted.max_abs_diff(&params_of(&s), FIT_PHASE_FLOOR));
    }
    (
        worst <= FIT_TOL,
        format!("max parameter error {worst:.3e} over {FIT_SAMPLES} matrices on the 19-angle grid"),
    )
}

fn peak_depths_mm(trace: &PowerTrace) -> (Vec<f64>, Vec<f64>) {
    let ds = depth_spectrum(trace, &SpectralParams::default()).unwrap();
    let peaks = find_peaks(&ds, &PeakParams::default());
    (
        peaks.iter().map(|p| mm(p.depth)).collect(),
        peaks.iter().map(|p| p.magnitude).collect(),
    )
}

fn slab_spectrum() -> Outcome {
    let stack = LayerStack::new(
        Permittivity::VACUUM,
        vec![Layer::new(eps(2.25), 0.010).unwrap()],
        eps(30.0),
    );
    let trace = synthesize_power(&stack, &wband(), None).unwrap();
    let (depths, mags) = peak_depths_mm(&trace);
    let ok = depths.len() == 1
        && (depths[0] - 15.0).abs() <= PEAK_DEPTH_TOL_MM
        && (mags[0] - SLAB_PAIR_WEIGHT).abs() <= SLAB_MAGNITUDE_REL_TOL * SLAB_PAIR_WEIGHT;
    (
        ok,
        format!("peaks at {depths:.3?} mm with magnitudes {mags:.5?} (expected one at 15 mm, {SLAB_PAIR_WEIGHT:.4})"),
    )
}

fn multilayer_pairs() -> Outcome {
    // optical thicknesses 1.5·10 mm = 15 mm and 2·4.5 mm = 9 mm
    let stack = LayerStack::new(
        Permittivity::VACUUM,
        vec![
            Layer::new(eps(2.25), 0.010).unwrap(),
            Layer::new(eps(4.0), 0.0045).unwrap(),
        ],
        eps(30.0),
    );
    let trace = synthesize_power(&stack, &wband(), None).unwrap();
    let (depths, _) = peak_depths_mm(&trace);
    let expected = [9.0, 15.0, 24.0];
    let ok = depths.len() == 3
        && depths
            .iter()
            .zip(expected)
            .all(|(d, e)| (d - e).abs() <= PEAK_DEPTH_TOL_MM);
    (
        ok,
        format!("peaks at {depths:.3?} mm, expected {expected:?} mm (9/15 mm separation is 1.4 resolution cells)"),
    )
}

fn point_model() -> Outcome {
    let one = Complex64::new(1.0, 0.0);
    let two = PointScene::from_pairs(&[(0.0, one), (0.05, one)]).unwrap();
    let (d2, m2) = peak_depths_mm(&synthesize_point_power(&two, &wband()).unwrap());
    // strongest structural peak; rectangular-window sidelobes may also qualify
    let strongest = m2
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| d2[i]);
    let pair_ok = strongest.is_some_and(|d| (d - 50.0).abs() <= PEAK_DEPTH_TOL_MM);

    let three = PointScene::from_pairs(&[(0.0, one), (0.05, one), (0.10, one)]).unwrap();
    let (d3, m3) = peak_depths_mm(&synthesize_point_power(&three, &wband()).unwrap());
    let near = |target: f64| {
        d3.iter()
            .position(|d| (d - target).abs() <= PEAK_DEPTH_TOL_MM)
            .map(|i| m3[i])
    };
    let ratio = match (near(50.0), near(100.0)) {
        (Some(a), Some(b)) => a / b,
        _ => f64::NAN,
    };
    let ratio_ok = (ratio - 2.0).abs() <= POINT_WEIGHT_RATIO_REL_TOL * 2.0;
    (
        pair_ok && ratio_ok,
        format!("strongest pair peak at {:.3} mm (all peaks {d2:.3?}); three-point lag weights 50/100 mm ratio {ratio:.4} (expected 2)", strongest.unwrap_or(f64::NAN)),
    )
}

fn parseval() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for i in 0..PARSEVAL_TRACES {
        let m = rng.gen_range(8..=400);
        let grid = FrequencyGrid::new(75e9, 75e9 + (m - 1) as f64 * 0.175e9, 0.175e9).unwrap();
        let p: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..10.0)).collect();
        let trace = PowerTrace::new(grid, p).unwrap();
        let params = SpectralParams {
            window: Window::Rectangular,
            pad_factor: rng.gen_range(1..=8),
            // both code paths of the τ = 0 bin are exercised
            isolate_dc: i % 2 == 0,
        };
        let ds = depth_spectrum(&trace, &params).unwrap();
        worst = worst.max(
            (ds.zero_lag() - Complex64::new(trace.mean(), 0.0)).norm() / trace.mean().max(1.0),
        );
    }
    (
        worst <= PARSEVAL_TOL,
        format!("max |s(0) - mean(p)| = {worst:.3e} over {PARSEVAL_TRACES} random traces"),
    )
}

fn bare_jones(r: f64, delta: f64) -> ScatteringMatrix {
    ScatteringMatrix::from_real(r, r * delta, r * delta, r)
}

fn bare_scene(eps_back: f64, delta: f64) -> LayerStack {
    let back = eps(eps_back);
    let r = (1.0 - eps_back.sqrt()) / (1.0 + eps_back.sqrt());
    LayerStack::half_space(back)
        .with_jones(vec![bare_jones(r, delta)])
        .unwrap()
}

/// Dihedral-like interface over a thin dielectric layer of ~15 mm optical thickness.
fn weapon_scene(
    eps_layer: f64,
    optical_mm: f64,
    eps_back: f64,
    g1: f64,
    g2: f64,
    phi: f64,
    skew: f64,
) -> LayerStack {
    let d = optical_mm * 1e-3 / eps_layer.sqrt();
    LayerStack::new(
        Permittivity::VACUUM,
        vec![Layer::new(eps(eps_layer), d).unwrap()],
        eps(eps_back),
    )
    .with_jones(vec![
        rotate_target(&ScatteringMatrix::dihedral(), phi).scaled(g1.into()),
        rotate_target(&ScatteringMatrix::dihedral(), phi + skew).scaled(g2.into()),
    ])
    .unwrap()
}

fn signature() -> Outcome {
    let grid = wband();
    let sweep = AngleSweep::default();
    let spectral = SpectralParams::default();
    let peaks = PeakParams::default();
    let features = |stack: &LayerStack| {
        let u = build_pad_matrix(stack, &grid, &sweep, &spectral).unwrap();
        extract_features(&u, &peaks).unwrap()
    };
    let bare = features(&bare_scene(30.0, 0.02));
    let weapon = features(&weapon_scene(
        2.25,
        15.0,
        30.0,
        0.6,
        0.5,
        0.0,
        10f64.to_radians(),
    ));
    let ratio = weapon.dc_magnitude / bare.dc_magnitude;
    let nominal_ok = ratio >= SIGNATURE_RATIO && weapon.peak_count >= 1 && bare.peak_count == 0;

    let baseline = Some(bare.dc_magnitude);
    let thresholds = Thresholds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SCENE_SEED);
    let mut errors = Vec::new();
    for i in 0..GENERATED_SCENES {
        let w = weapon_scene(
            rng.gen_range(2.0..3.0),
            rng.gen_range(14.0..16.0),
            rng.gen_range(25.0..40.0),
            rng.gen_range(0.3..0.9),
            rng.gen_range(0.3..0.9),
            rng.gen_range(0.0..PI),
            rng.gen_range(-20f64..20.0).to_radians(),
        );
        if classify(&features(&w), &thresholds, baseline)
            .unwrap()
            .label
            != Label::WeaponSuspect
        {
            errors.push(format!("weapon #{i}"));
        }
        let b = bare_scene(rng.gen_range(25.0..40.0), rng.gen_range(0.0..0.02));
        if classify(&features(&b), &thresholds, baseline)
            .unwrap()
            .label
            != Label::Clear
        {
            errors.push(format!("bare #{i}"));
        }
    }
    (
        nominal_ok && errors.is_empty(),
        format!(
            "profile max ratio {ratio:.1}, weapon peaks {}, bare peaks {}; {} misclassified of {} {:?}",
            weapon.peak_count,
            bare.peak_count,
            errors.len(),
            2 * GENERATED_SCENES,
            errors
        ),
    )
}

fn polscan(args: &[&str]) -> std::io::Result<std::process::Output> {
    Command::new(env!("CARGO_BIN_EXE_polscan"))
        .args(args)
        .output()
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = polscan(args).map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn matrix_of(path: &Path) -> Result<Vec<Vec<f64>>, String> {
    let doc: Value =
        serde_json::from_str(&std::fs::read_to_string(path).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    serde_json::from_value(doc["magnitude"].clone()).map_err(|e| e.to_string())
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn pipeline_round_trip() -> Result<Outcome, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t = tmp.path();
    let jones = |g: f64| json!({"hh": [g, 0], "hv": [0, 0], "vh": [0, 0], "vv": [-g, 0]});
    let sim_cfg = json!({
        "scene": {"type": "stratified", "layers": [[2.25, 0, 10]], "back": [30, 0], "jones": [jones(0.6), jones(0.4)]},
        "grid": {"f_start_ghz": 75, "f_stop_ghz": 110, "step_ghz": 0.175}
    });
    std::fs::write(t.join("sim.json"), sim_cfg.to_string()).unwrap();
    let s = |p: &str| t.join(p).display().to_string();
    run_cli(&["simulate", "--config", &s("sim.json"), "--out", &s("sim")])?;

    // unit reference on the exported grid
    let traces = std::fs::read_to_string(t.join("sim/traces.csv")).unwrap();
    let mut reference = String::from("freq_ghz,angle_deg,power\n");
    for line in traces.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let mut f = line.split(',');
        let freq = f.next().unwrap();
        if f.next() == Some("0") {
            reference.push_str(&format!("{freq},0,1\n"));
        }
    }
    std::fs::write(t.join("ref.csv"), reference).unwrap();
    let an_cfg = json!({
        "scene": {"type": "measured", "sweep": "sim/traces.csv", "reference": "ref.csv"},
        "baseline": {"magnitude": 1e-3}
    });
    std::fs::write(t.join("an.json"), an_cfg.to_string()).unwrap();
    run_cli(&["analyze", "--config", &s("an.json"), "--out", &s("an1")])?;
    run_cli(&["analyze", "--config", &s("an.json"), "--out", &s("an2")])?;
    run_cli(&["simulate", "--config", &s("sim.json"), "--out", &s("sim2")])?;

    let a = matrix_of(&t.join("sim/pad_matrix.json"))?;
    let b = matrix_of(&t.join("an1/pad_matrix.json"))?;
    let shape_ok = a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.len() == y.len());
    let worst = a
        .iter()
        .zip(&b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0f64, f64::max);
    let identical = dir_bytes(&t.join("an1")) == dir_bytes(&t.join("an2"))
        && dir_bytes(&t.join("sim")) == dir_bytes(&t.join("sim2"));
    Ok((
        shape_ok && worst <= ROUND_TRIP_TOL && identical,
        format!("max matrix difference {worst:.3e}, repeated runs byte-identical: {identical}"),
    ))
}

fn padm_performance() -> Outcome {
    let stack = weapon_scene(2.25, 15.0, 30.0, 0.6, 0.5, 0.3, 0.1);
    let grid = wband();
    let sweep = AngleSweep::default();
    let spectral = SpectralParams::default();
    let mut times: Vec<Duration> = (0..5)
        .map(|_| {
            let start = Instant::now();
            let b = build_pad(&stack, &grid, &sweep, &spectral).unwrap();
            assert_eq!(b.matrix.shape(), (19, 805));
            start.elapsed()
        })
        .collect();
    times.sort();
    let median = times[2];
    (
        median < PADM_BUDGET,
        format!(
            "19 x 201 build, pad 8: median {median:.2?} of 5 (worst {:.2?})",
            times[4]
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: Vec<Criterion> = vec![
        ("1 closed-form chain", Box::new(closed_form_chain)),
        ("2 quadrant regression", Box::new(quadrant_regression)),
        ("3 rotation shift", Box::new(rotation_shift)),
        ("4 harmonic fit recovery", Box::new(fit_recovery)),
        ("5 slab depth spectrum", Box::new(slab_spectrum)),
        ("6 multi-layer pairwise peaks", Box::new(multilayer_pairs)),
        ("7 point model", Box::new(point_model)),
        ("8 zero-lag contract", Box::new(parseval)),
        ("9 weapon signature and classifier", Box::new(signature)),
        (
            "10 pipeline round trip",
            Box::new(|| pipeline_round_trip().unwrap_or_else(|e| (false, e))),
        ),
        ("11 PADM performance", Box::new(padm_performance)),
    ];
    let mut failed = Vec::new();
    for (name, check) in &criteria {
        let (ok, detail) = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(_) => (false, "panicked".to_string()),
        };
        println!(
            "{} criterion {name}: {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            failed.push(*name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
