use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use super::*;
use crate::fock::{lowering, ProductSpace, State, C64, ZERO};
use crate::lindblad::{evolve, EvolveOptions, MasterEq};
use crate::ted::{detection_drive_frequency, EffectiveTed, Envelope, TedParams, Truncation};
use crate::units::{ghz_to_rad, MICRO};

fn cold(mut p: TedParams) -> TedParams {
    p.n_th = 0.0;
    p
}

// ---- closed forms and small helpers ----

#[test]
fn dark_count_examples() {
    let t1 = 81.0 * MICRO;
    assert!((dark_count_estimate(t1, 2.0 * MICRO, 4.0 * MICRO).unwrap() - 0.0715).abs() < 5e-4);
    assert!((dark_count_estimate(t1, 10.0 * MICRO, 4.0 * MICRO).unwrap() - 0.159).abs() < 5e-4);
    assert_eq!(dark_count_estimate(t1, 0.0, 0.0).unwrap(), 0.0);
    assert!(dark_count_estimate(0.0, 1.0, 1.0).is_err());
    assert!(dark_count_estimate(t1, -1.0, 1.0).is_err());
}

#[test]
fn intrinsic_dissipators_give_t1_and_t2() {
    let s = ProductSpace::from_dims(&[("d", 2)]).unwrap();
    let d = lowering(&s, "d").unwrap();
    let (t1, t2) = (81e-6, 41e-6);
    let mut meq = MasterEq::new(crate::fock::Op::zero(&s));
    add_intrinsic(&mut meq, &d, Some(t1), Some(t2)).unwrap();
    let plus = DVector::from_element(2, C64::from(std::f64::consts::FRAC_1_SQRT_2));
    let rho0 = State::ket(&s, plus).unwrap();
    let t = 30e-6;
    let tr = evolve(&meq, &rho0, (0.0, t), &EvolveOptions::default().with_tol(1e-10)).unwrap();
    let rho = tr.final_state.to_density();
    assert!((rho[(1, 1)].re - 0.5 * (-t / t1).exp()).abs() < 1e-8);
    assert!((rho[(0, 1)].norm() - 0.5 * (-t / t2).exp()).abs() < 1e-8);
    let mut bad = MasterEq::new(crate::fock::Op::zero(&s));
    assert!(add_intrinsic(&mut bad, &d, Some(10e-6), Some(30e-6)).is_err());
}

#[test]
fn protocol_json_round_trip_and_defaults() {
    let text = r#"{
        "initial": {"sted": 0.0, "mted": 0.0},
        "segments": [
            {"kind": "reset", "target": "sted", "duration_us": 2},
            {"kind": "pi-pulse", "target": "sted"},
            {"kind": "emission", "target": "sted", "duration_us": 2, "g_p_over_gamma": 0.472},
            {"kind": "detection-window", "target": "mted", "start_us": 1.5, "duration_us": 3},
            {"kind": "readout", "target": "mted", "duration_us": 4}
        ]
    }"#;
    let p: ProtocolSpec = serde_json::from_str(text).unwrap();
    let r = p.resolve().unwrap();
    assert_eq!(r[1].start, 2.0 * MICRO);
    assert!((r[2].start - 2.0 * MICRO).abs() < 1e-18 && (r[2].end - 4.0 * MICRO).abs() < 1e-18);
    assert!((r[4].start - 4.5 * MICRO).abs() < 1e-18);
    assert_eq!(r[3].g_p_over_gamma, 0.5);
    assert!((p.duration().unwrap() - 8.5 * MICRO).abs() < 1e-18);
    let back: ProtocolSpec = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
    assert_eq!(back.resolve().unwrap(), r);
}

#[test]
fn protocol_timeline_errors() {
    let overlap = ProtocolSpec {
        initial: Default::default(),
        segments: vec![
            Segment::new(SegmentKind::Reset, Target::Sted, 2e-6).at(0.0),
            Segment::new(SegmentKind::Emission, Target::Sted, 2e-6).at(1e-6),
        ],
    };
    assert!(matches!(overlap.resolve(), Err(Error::InvalidProtocol(_))));
    let gate_inside = ProtocolSpec {
        initial: Default::default(),
        segments: vec![
            Segment::new(SegmentKind::Reset, Target::Mted, 2e-6).at(0.0),
            Segment::new(SegmentKind::PiPulse, Target::Mted, 0.0).at(1e-6),
        ],
    };
    assert!(gate_inside.resolve().is_err());
    let zero = ProtocolSpec { initial: Default::default(), segments: vec![Segment::new(SegmentKind::Idle, Target::Sted, 0.0)] };
    assert!(zero.resolve().is_err());
    let timed_gate =
        ProtocolSpec { initial: Default::default(), segments: vec![Segment::new(SegmentKind::PiPulse, Target::Sted, 1e-6)] };
    assert!(timed_gate.resolve().is_err());
    let bad_init = ProtocolSpec {
        initial: spec::InitialPopulations { sted: 1.5, mted: 0.0 },
        segments: vec![Segment::new(SegmentKind::Idle, Target::Sted, 1e-6)],
    };
    assert!(bad_init.resolve().is_err());
    // Emission on the source inside the measurement window is allowed.
    let nested = ProtocolSpec::pitch_detect(2e-6, 10e-6, 2e-6, 5e-6, 4e-6);
    assert!(nested.resolve().is_ok());
}

#[test]
fn sweep_axes_parse_and_order() {
    let s: SweepSpec = serde_json::from_str(
        r#"{"axis1": {"name": "delta_omega_wm_MHz", "linspace": [-1, 1, 3]},
            "axis2": {"name": "g_pm_over_gamma", "values": [0.25, 0.5]}}"#,
    )
    .unwrap();
    assert_eq!(s.axis1.values, vec![-1.0, 0.0, 1.0]);
    let pts = s.points();
    assert_eq!(pts.len(), 6);
    assert_eq!(pts[1], vec![(SweepParam::DeltaOmegaWm, -1.0), (SweepParam::GpmOverGamma, 0.5)]);
    let log: Axis = serde_json::from_str(r#"{"name": "n_bar", "logspace": [0.001, 10, 5]}"#).unwrap();
    assert!((log.values[2] - 0.1).abs() < 1e-12);
    assert!(serde_json::from_str::<Axis>(r#"{"name": "n_bar", "values": []}"#).is_err());
    assert!(serde_json::from_str::<Axis>(r#"{"name": "n_bar", "values": [1], "linspace": [0, 1, 2]}"#).is_err());
    assert!(serde_json::from_str::<Axis>(r#"{"name": "bogus", "values": [1]}"#).is_err());
    let dup = SweepSpec::two(log.clone(), log);
    assert!(dup.validate().is_err());
}

#[test]
fn result_table_rows_and_files() {
    let mut t = ResultTable::new(&["x"], &["y", "z"]);
    t.push(&[1.0], Ok(vec![2.0, 3.0])).unwrap();
    t.push(&[2.0], Err("failed".into())).unwrap();
    assert!(t.push(&[3.0], Ok(vec![1.0])).is_err());
    assert_eq!(t.rows.len(), 2);
    assert!(t.rows[1][1].is_nan());
    assert_eq!(t.errors, vec![PointError { index: 1, message: "failed".into() }]);
    assert_eq!(t.argmax("y"), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let side = t.write(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("x,y,z\n"));
    assert_eq!(text.lines().count(), 3);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(side).unwrap()).unwrap();
    assert_eq!(meta["errors"][0]["index"], 1);
}

// ---- scattering ----

#[test]
fn scattering_regimes_of_a_two_level_emitter() {
    let ted = cold(TedParams::table_one_source());
    let r = |n: f64| reflection(&ted, n, 0.0, 2).unwrap().norm();
    assert!(r(1e-4) > 0.99);
    assert!(r(1.0 / 16.0) < 1e-6);
    assert!(r(100.0) > 0.98);
    // Closed form of the resonant two-level case.
    for n in [0.01, 0.2, 3.0] {
        assert!((r(n) - (1.0 - 2.0 / (1.0 + 16.0 * n)).abs()).abs() < 1e-8);
    }
    assert!(reflection(&ted, 0.0, 0.0, 2).is_err());
}

#[test]
fn thermal_population_reduces_elastic_reflection() {
    let cold_ted = cold(TedParams::table_one_source());
    let hot = TedParams { n_th: 0.015, ..cold_ted.clone() };
    let a = reflection(&cold_ted, 1e-3, 0.0, 3).unwrap().norm();
    let b = reflection(&hot, 1e-3, 0.0, 3).unwrap().norm();
    assert!(a - b > 0.01, "{a} vs {b}");
}

#[test]
fn scattering_sweep_table_shape() {
    let ted = TedParams::table_one_source();
    let t = scattering_sweep(&ted, &[0.01, 0.1], &[-1.0, 0.0, 1.0], &ScatterOptions::default(), &SweepOptions::default())
        .unwrap();
    assert_eq!(t.rows.len(), 6);
    assert_eq!(t.columns[..3], ["n_bar", "detuning_MHz", "r_abs"]);
    assert!(t.errors.is_empty());
    let bad = scattering_sweep(&ted, &[0.0], &[0.0], &ScatterOptions::default(), &SweepOptions::default()).unwrap();
    assert_eq!(bad.errors.len(), 1);
    assert!(scattering_sweep(&ted, &[], &[0.0], &ScatterOptions::default(), &SweepOptions::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn reflection_magnitude_is_bounded(log_n in -3.0f64..1.0, det in -20.0f64..20.0, levels in 2usize..5, nth in 0.0f64..0.05) {
        let ted = TedParams { n_th: nth, ..TedParams::table_one_source() };
        let r = reflection(&ted, 10f64.powf(log_n), crate::units::mhz_to_rad(det), levels).unwrap().norm();
        prop_assert!((0.0..=1.0 + 1e-6).contains(&r));
    }
}

// ---- reset and emission ----

#[test]
fn reset_reaches_thermal_floor() {
    let ted = TedParams::table_one_source();
    let p = simulate_reset(&reset_drive(&ted, 0.5).unwrap(), 2e-6, 0.12, &RunOptions::default()).unwrap();
    assert!((0.01..=0.02).contains(&p), "{p}");
}

#[test]
fn reset_leaves_equilibrium_unchanged() {
    let ted = TedParams::table_one_source();
    let eq = ted.n_th / (1.0 + 2.0 * ted.n_th);
    let p = simulate_reset(&reset_drive(&ted, 0.5).unwrap(), 20e-6, eq, &RunOptions::default()).unwrap();
    assert!((p - eq).abs() < 1e-3, "{p} vs {eq}");
}

#[test]
fn undriven_reset_does_nothing() {
    let ted = TedParams::table_one_source();
    let p = simulate_reset(&reset_drive(&ted, 0.0).unwrap(), 2e-6, 0.12, &RunOptions::default()).unwrap();
    assert!((p - 0.12).abs() < 1e-3);
    assert!(simulate_reset(&reset_drive(&ted, 0.5).unwrap(), 0.0, 0.12, &RunOptions::default()).is_err());
}

fn excited() -> DVector<C64> {
    DVector::from_vec(vec![ZERO, C64::from(1.0)])
}

#[test]
fn shaped_emission_releases_the_excitation() {
    let ted = TedParams::table_one_source();
    let eff = emission_drive(&ted, 0.472, 1e-6, 2e-6).unwrap();
    let out = simulate_emission(&eff, &excited(), (0.0, 2e-6), &RunOptions::default()).unwrap();
    // Regression baseline from this model: 0.0206.
    assert!(out.residual <= 0.05);
    assert!((out.residual - 0.0206).abs() < 1e-3, "{}", out.residual);
    assert!(out.bookkeeping_error().abs() < 1e-6);
    assert!(out.emitted > 0.95);
    let a = out.trajectory.record("a_out").unwrap();
    assert_eq!(a.len(), RunOptions::default().samples);
}

#[test]
fn ground_state_emits_nothing() {
    let ted = TedParams::table_one_source();
    let eff = emission_drive(&ted, 0.472, 1e-6, 2e-6).unwrap();
    let g = DVector::from_vec(vec![C64::from(1.0), ZERO]);
    let out = simulate_emission(&eff, &g, (0.0, 2e-6), &RunOptions::default()).unwrap();
    assert!(out.trajectory.record("a_out").unwrap().iter().all(|v| v.norm() < 1e-12));
}

fn coherent_power(rho_d: DMatrix<C64>) -> f64 {
    let ted = cold(TedParams::table_one_source());
    let eff = emission_drive(&ted, 0.472, 1e-6, 2e-6).unwrap();
    let opts = RunOptions { samples: 801, ..RunOptions::default() };
    let out = simulate_emission_mixed(&eff, &rho_d, (0.0, 3e-6), &opts).unwrap();
    let t = &out.trajectory.times;
    let a = out.trajectory.record("a_out").unwrap();
    (1..t.len()).map(|k| 0.5 * (a[k].norm_sqr() + a[k - 1].norm_sqr()) * (t[k] - t[k - 1])).sum()
}

#[test]
fn equal_superposition_maximizes_coherent_output() {
    // Half-excited states with coherence c: |c| ≤ 1/2, equality when pure.
    let state = |c: C64| DMatrix::from_row_slice(2, 2, &[C64::from(0.5), c, c.conj(), C64::from(0.5)]);
    let best = coherent_power(state(C64::from(0.5)));
    assert!(best > 0.0);
    for (mag, phase) in [(0.5, 1.3), (0.4, 0.0), (0.25, 2.0), (0.0, 0.0)] {
        let p = coherent_power(state(C64::from_polar(mag, phase)));
        assert!(p <= best * (1.0 + 1e-6), "|c|={mag}: {p} > {best}");
        assert!((p / best - (mag / 0.5f64).powi(2)).abs() < 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]
    #[test]
    fn emission_bookkeeping_closes(p in 0.0f64..1.0, peak in 0.1f64..0.6, nth in 0.0f64..0.03) {
        let ted = TedParams { n_th: nth, ..TedParams::table_one_source() };
        let eff = emission_drive(&ted, peak, 1e-6, 2e-6).unwrap();
        let rho = DMatrix::from_row_slice(2, 2, &[C64::from(1.0 - p), ZERO, ZERO, C64::from(p)]);
        let opts = RunOptions { intrinsic: true, samples: 11, ..RunOptions::default() };
        let out = simulate_emission_mixed(&eff, &rho, (0.0, 2.5e-6), &opts).unwrap();
        prop_assert!(out.bookkeeping_error().abs() < 1e-6);
    }
}

// ---- detection ----

#[test]
fn absorption_matches_closed_form() {
    let mted = TedParams::table_one_detector();
    let g = 0.37 * mted.gamma;
    let eff = EffectiveTed::from_carrier(&mted, detection_drive_frequency(&mted), Envelope::Constant { amplitude: g })
        .unwrap()
        .with_stark(false);
    let k = mted.gamma;
    for delta in [0.0, 0.3 * k, -1.1 * k, 4.0 * k] {
        let i = C64::new(0.0, 1.0);
        let r = 1.0 - k / (k / 2.0 - i * delta + 2.0 * g * g / (k - i * delta));
        let expect = 1.0 - r.norm_sqr();
        let got = absorption_efficiency(&eff, delta).unwrap();
        assert!((got - expect).abs() < 1e-10, "Δ={delta}: {got} vs {expect}");
    }
    let matched =
        EffectiveTed::from_carrier(&mted, detection_drive_frequency(&mted), Envelope::Constant { amplitude: 0.5 * k })
            .unwrap()
            .with_stark(false);
    assert!((absorption_efficiency(&matched, 0.0).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn no_input_leaves_detector_excited() {
    let mted = cold(TedParams::table_one_detector());
    let out = simulate_detection(&mted, &DetectionInput::Coherent { n_bar: 0.0 }, 5e-6, 0.5 * mted.gamma, &RunOptions::default())
        .unwrap();
    // Off-resonant terms of the pumped coupler leak a little.
    assert!((out.p_excited - 1.0).abs() < 5e-3);
    assert_eq!(out.p_detect, 0.0);
}

#[test]
fn detection_needs_the_second_waveguide_level() {
    let mted = TedParams::table_one_detector();
    let opts = RunOptions { trunc: Truncation { d: 2, c: 2, w: 2 }, ..RunOptions::default() };
    let r = simulate_detection(&mted, &DetectionInput::Coherent { n_bar: 0.1 }, 1e-6, 1e6, &opts);
    assert!(matches!(r, Err(Error::Truncation(_))));
}

#[test]
fn coherent_detection_surface_is_monotone() {
    let mted = cold(TedParams::table_one_detector());
    let g = 0.259 * mted.gamma;
    let mut grid = vec![];
    for n in [0.02, 0.05, 0.1] {
        let row: Vec<f64> = [1e-6, 2e-6, 4e-6]
            .iter()
            .map(|&w| simulate_detection(&mted, &DetectionInput::Coherent { n_bar: n }, w, g, &RunOptions::default()).unwrap().p_excited)
            .collect();
        assert!(row.windows(2).all(|x| x[1] < x[0]), "{row:?}");
        grid.push(row);
    }
    for k in 0..3 {
        assert!(grid[1][k] < grid[0][k] && grid[2][k] < grid[1][k]);
    }
}

#[test]
fn uncoupled_detector_never_clicks() {
    let mted = TedParams::table_one_detector();
    let out =
        simulate_detection(&mted, &DetectionInput::Coherent { n_bar: 0.1 }, 2e-6, 0.0, &RunOptions::default()).unwrap();
    assert!(out.p_detect < 1e-6);
    let params = NetworkParams::table_one();
    let mut proto = ProtocolSpec::pitch_detect(0.0, 3e-6, 2e-6, 1.5e-6, 0.0);
    proto.segments.retain(|s| s.duration > 0.0 || s.kind.is_gate());
    for s in proto.segments.iter_mut().filter(|s| s.kind == SegmentKind::DetectionWindow) {
        s.g_p_over_gamma = Some(0.0);
    }
    let d = detection_probability(&params, &proto, &NetworkOptions::default()).unwrap();
    assert!(d.p_detect < 1e-6, "{d:?}");
}

#[test]
fn network_photon_is_detected() {
    let det = TedParams::table_one_detector();
    let input = DetectionInput::Fock {
        source: Box::new(TedParams::table_one_source()),
        peak_over_gamma: 0.472,
        emission: 2e-6,
        arrival: 1.5e-6,
        eta: 0.0,
    };
    let out = simulate_detection(&det, &input, 3e-6, 0.5 * det.gamma, &RunOptions::default()).unwrap();
    assert!(out.p_detect >= 0.93, "{out:?}");
}

#[test]
fn detection_grows_with_window_length() {
    let params = NetworkParams::table_one();
    let mut last = -1.0;
    for w in [1.0, 1.5, 2.0, 2.5, 3.5] {
        let mut proto = ProtocolSpec::pitch_detect(0.0, w * MICRO, 2e-6, 1e-6, 0.0);
        proto.segments.retain(|s| s.duration > 0.0 || s.kind.is_gate());
        let p = detection_probability(&params, &proto, &NetworkOptions::default()).unwrap().p_detect;
        assert!((0.0..=1.0).contains(&p));
        assert!(p >= last - 1e-9, "window {w} μs: {p} < {last}");
        last = p;
    }
}

#[test]
fn clipping_with_no_absorber_is_total() {
    let c = clipping_estimate(
        &TedParams::table_one_source(),
        &TedParams::table_one_detector(),
        0.472,
        2e-6,
        0.0,
        &RunOptions::default(),
    )
    .unwrap();
    assert!(c.clipped > 0.999);
}

// ---- network protocols ----

fn bare(window: f64, arrival: f64) -> ProtocolSpec {
    let mut p = ProtocolSpec::pitch_detect(0.0, window, 2e-6, arrival, 0.0);
    p.segments.retain(|s| s.duration > 0.0 || s.kind.is_gate());
    p
}

#[test]
fn gates_prepare_data_qubits() {
    let params = NetworkParams::table_one();
    let proto = ProtocolSpec {
        initial: Default::default(),
        segments: vec![
            Segment::new(SegmentKind::PiPulse, Target::Sted, 0.0).at(0.0),
            Segment::new(SegmentKind::HalfPiPulse, Target::Mted, 0.0).at(0.0),
            Segment::new(SegmentKind::Idle, Target::Sted, 1e-7).at(0.0),
        ],
    };
    let out = run_protocol(&params, &proto, &NetworkOptions::default()).unwrap();
    assert!((out.n_ds - 1.0).abs() < 1e-9 && (out.n_dm - 0.5).abs() < 1e-9);
    let opts = NetworkOptions { detector: Truncation { d: 2, c: 2, w: 2 }, ..NetworkOptions::default() };
    assert!(matches!(run_protocol(&params, &bare(3e-6, 1.5e-6), &opts), Err(Error::Truncation(_))));
}

#[test]
fn fock_check_sign_pattern() {
    let t = fock_check_table(&NetworkParams::table_one(), &bare(3e-6, 1.5e-6), &NetworkOptions::default()).unwrap();
    let a = t.column("a01_photons").unwrap();
    let b = t.column("b12_photons").unwrap();
    // Rows: (0,0), (0,1), (1,0), (1,1).
    assert_eq!((a[0], b[0]), (0.0, 0.0));
    assert!(a[2] > 0.3 && b[2].abs() < 1e-3 * a[2]);
    assert!(a[3] > 0.3 && b[3] > 0.3);
    assert!(a[1].abs() < 1e-2 && b[1].abs() < 1e-3);
}

#[test]
fn spectra_follow_the_prepared_coherences() {
    let params = NetworkParams::table_one();
    let opts = NetworkOptions { samples: 3001, tol: 1e-6, ..NetworkOptions::default() };
    let spectra = |proto: &ProtocolSpec, o: &NetworkOptions| {
        let out = run_protocol(&params, proto, o).unwrap();
        spectral_records(&out.times, &[("a_out", out.record("a_out").unwrap()), ("b_out", out.record("b_out").unwrap())])
            .unwrap()
    };
    // Both data qubits excited: no mean field anywhere.
    let s = spectra(&bare(3e-6, 1.5e-6), &opts);
    assert!(s.peak("a_out").unwrap().1 < 1e-6 && s.peak("b_out").unwrap().1 < 1e-6);
    // Source in superposition, detector far detuned: a carrier at zero, no b.
    let mut p = bare(3e-6, 1.5e-6);
    for seg in p.segments.iter_mut().filter(|s| s.kind == SegmentKind::PiPulse && s.target == Target::Sted) {
        seg.kind = SegmentKind::HalfPiPulse;
    }
    let far = NetworkOptions { delta_omega_wm: ghz_to_rad(0.05), ..opts.clone() };
    let s = spectra(&p, &far);
    let (f, mag) = s.peak("a_out").unwrap();
    assert!(mag > 1.0 && f.abs() <= s.resolution_hz, "{f} {mag}");
    assert!(s.peak("b_out").unwrap().1 < 1e-4 * mag);
    // Detector in superposition: b carrier at the anharmonicity.
    let mut p = bare(3e-6, 1.5e-6);
    for seg in p.segments.iter_mut().filter(|s| s.kind == SegmentKind::PiPulse && s.target == Target::Mted) {
        seg.kind = SegmentKind::HalfPiPulse;
    }
    let s = spectra(&p, &opts);
    let (f, mag) = s.peak("b_out").unwrap();
    let nu = params.mted.nu_w / (2.0 * std::f64::consts::PI);
    assert!(mag > 1.0 && (f - nu).abs() <= 2.0 * s.resolution_hz, "{f} vs {nu}");
}

#[test]
fn spectral_records_locate_tones() {
    let dt = 1e-9;
    let times: Vec<f64> = (0..1000).map(|k| k as f64 * dt).collect();
    let f0 = 25e6;
    let x: Vec<C64> = times.iter().map(|t| C64::from_polar(1.0, -2.0 * std::f64::consts::PI * f0 * t)).collect();
    let s = spectral_records(&times, &[("x", &x)]).unwrap();
    assert_eq!(s.zero_pad, 4);
    assert!((s.resolution_hz - 1e6).abs() < 1.0);
    let (f, mag) = s.peak("x").unwrap();
    assert!((f - f0).abs() <= s.resolution_hz / 4.0 && (mag - 1.0).abs() < 1e-3);
    let mut bent = times.clone();
    bent[500] += 0.3 * dt;
    assert!(matches!(spectral_records(&bent, &[("x", &x)]), Err(Error::NonUniformSampling)));
}

#[test]
fn resonance_map_peaks_at_zero_detuning() {
    let params = NetworkParams::table_one();
    let sweep = SweepSpec::two(
        Axis::new(SweepParam::DeltaOmegaWm, vec![-1.0, 0.0, 1.0]).unwrap(),
        Axis::new(SweepParam::DeltaOmegaPm, vec![-1.0, 0.0, 1.0]).unwrap(),
    );
    let opts = NetworkOptions { tol: 1e-7, ..NetworkOptions::default() };
    let t = pitch_detect(&params, &bare(3e-6, 1.5e-6), &sweep, &opts, &SweepOptions::default()).unwrap();
    assert!(t.errors.is_empty());
    let best = t.argmax("p_detect").unwrap();
    assert_eq!((t.rows[best][0], t.rows[best][1]), (0.0, 0.0));
    let p = t.column("p_detect").unwrap();
    assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn sweep_rejects_single_device_axes() {
    let sweep = SweepSpec::one(Axis::new(SweepParam::NBar, vec![0.1]).unwrap());
    let r = pitch_detect(&NetworkParams::table_one(), &bare(3e-6, 1.5e-6), &sweep, &NetworkOptions::default(), &SweepOptions::default());
    assert!(r.is_err());
}

// ---- reduction oracles ----

#[test]
fn quadratic_fit_recovers_coefficient() {
    let xs = [1.0, 2.0, 3.0];
    let f = fit_quadratic(&xs, &[2.0, 8.0, 18.0]).unwrap();
    assert!((f.k - 2.0).abs() < 1e-12 && f.max_residual < 1e-12);
    assert!(fit_quadratic(&[0.0, 0.0], &[1.0, 1.0]).is_err());
}

#[test]
fn transfer_gap_matches_reduced_coupling() {
    let mut ted = TedParams::table_one_source();
    ted.g_c = 0.04 * (ted.omega_d - ted.omega_c).abs();
    let amp = 0.04 * (ted.omega_d - ted.omega_c).abs();
    let c = sw_transfer_check(&ted, amp).unwrap();
    assert!(c.relative_error < 0.02, "{c:?}");
    assert!((c.carrier - (ted.omega_w - ted.omega_d)).abs() < 0.01 * ted.omega_d);
    assert!(sw_transfer_check(&ted, 0.0).is_err());
    let swapped = TedParams { omega_w: ghz_to_rad(2.0), ..ted };
    assert!(sw_transfer_check(&swapped, amp).is_err());
}

#[test]
fn detection_sweep_matches_single_runs() {
    let mted = TedParams::table_one_detector();
    let t = coherent_detection_sweep(&mted, &[0.05, 0.1], &[1.0, 2.0], 0.5, &RunOptions::default(), &SweepOptions::default())
        .unwrap();
    assert_eq!(t.rows.len(), 4);
    assert_eq!((t.rows[1][0], t.rows[1][1]), (0.05, 2.0));
    let one = simulate_detection(&mted, &DetectionInput::Coherent { n_bar: 0.1 }, 2e-6, 0.5 * mted.gamma, &RunOptions::default())
        .unwrap();
    assert!((t.rows[3][4] - one.p_detect).abs() < 1e-12);
    let narrow = RunOptions { trunc: Truncation { d: 2, c: 2, w: 2 }, ..RunOptions::default() };
    assert!(coherent_detection_sweep(&mted, &[0.1], &[1.0], 0.5, &narrow, &SweepOptions::default()).is_err());
}
