//! Two-device protocols on the composed network.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{local_op, lowering, number, Op, State, C64, ONE, ZERO};
use crate::lindblad::{evolve, Diagnostics, EvolveOptions, OutputField};
use crate::slh::{build_pitch_detect, NetworkSpec};
use crate::ted::{detection_drive_frequency, EffectiveTed, Envelope, TedParams, Truncation};
use crate::units::{mhz_to_rad, MICRO};

use super::spec::{ProtocolSpec, ResolvedSegment, SegmentKind, SweepParam, SweepSpec, Target};
use super::{add_intrinsic, run_points, ResultTable, SweepOptions, DEFAULT_T1, DEFAULT_T2};

/// Device parameters and cabling of the two-device experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkParams {
    pub sted: TedParams,
    pub mted: TedParams,
    /// Amplitude lost per circulator pass.
    #[serde(default)]
    pub eta: f64,
    #[serde(default, rename = "phi_s_rad")]
    pub phi_s: f64,
    #[serde(default, rename = "phi_m_rad")]
    pub phi_m: f64,
}

impl NetworkParams {
    /// Lossless network of the two reference devices.
    pub fn table_one() -> Self {
        let mut mted = TedParams::table_one_detector();
        mted.t1 = Some(DEFAULT_T1);
        mted.t2 = Some(DEFAULT_T2);
        Self { sted: TedParams::table_one_source(), mted, eta: 0.0, phi_s: 0.0, phi_m: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.sted.validate()?;
        self.mted.validate()?;
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter(format!("loss parameter must lie in [0, 1], got {}", self.eta)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NetworkOptions {
    pub source: Truncation,
    pub detector: Truncation,
    pub tol: f64,
    /// Uniform record samples over the protocol; 0 keeps only totals.
    pub samples: usize,
    pub stark: bool,
    /// Add data-qubit T1/T2 dissipators.
    pub intrinsic: bool,
    /// Offset of the measurement waveguide mode (rad/s).
    pub delta_omega_wm: f64,
    /// Offset of the detection carrier (rad/s).
    pub delta_omega_pm: f64,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        Self {
            source: Truncation { d: 2, c: 2, w: 2 },
            detector: Truncation { d: 2, c: 2, w: 3 },
            tol: 1e-9,
            samples: 0,
            stark: true,
            intrinsic: false,
            delta_omega_wm: 0.0,
            delta_omega_pm: 0.0,
        }
    }
}

/// Records and totals of one protocol run.
#[derive(Clone, Debug)]
pub struct ProtocolOutcome {
    /// Uniform sample times (empty if no samples were requested).
    pub times: Vec<f64>,
    /// Named complex records at `times`: `a_out`, `b_out`, `n_ds`, `n_dm`.
    pub records: Vec<(String, Vec<C64>)>,
    /// Final data-qubit populations.
    pub n_ds: f64,
    pub n_dm: f64,
    /// `∫⟨a_out†a_out⟩dt` over the protocol, and the same restricted to the
    /// 0↔1 transitions, and `∫⟨b_out†b_out⟩dt`.
    pub a_out_photons: f64,
    pub a01_photons: f64,
    pub b_out_photons: f64,
    pub final_state: State,
    pub diagnostics: Diagnostics,
}

impl ProtocolOutcome {
    pub fn record(&self, name: &str) -> Option<&[C64]> {
        self.records.iter().find(|r| r.0 == name).map(|r| r.1.as_slice())
    }
}

struct Drive {
    carrier: f64,
    envelope: Envelope,
}

fn detuned(mted: &TedParams, opts: &NetworkOptions) -> TedParams {
    let mut p = mted.clone();
    p.omega_w += opts.delta_omega_wm;
    p
}

/// Drive active on `target` over `[a, b]`, which lies inside at most one
/// segment.
fn drive_on(segs: &[ResolvedSegment], target: Target, a: f64, b: f64, gamma: f64) -> Option<(SegmentKind, Envelope)> {
    let mid = 0.5 * (a + b);
    let s = segs.iter().find(|s| s.target == target && !s.kind.is_gate() && s.start <= mid && mid < s.end)?;
    let g = s.g_p_over_gamma * gamma;
    let env = match s.kind {
        SegmentKind::Reset | SegmentKind::DetectionWindow => Envelope::Constant { amplitude: g },
        SegmentKind::Emission => {
            Envelope::CosineSquared { amplitude: g, t0: 0.5 * (s.start + s.end), width: s.end - s.start }
        }
        _ => Envelope::zero(),
    };
    Some((s.kind, env))
}

fn gate(kind: SegmentKind, dim: usize) -> DMatrix<C64> {
    let mut u = DMatrix::identity(dim, dim);
    match kind {
        SegmentKind::PiPulse => {
            u[(0, 0)] = ZERO;
            u[(1, 1)] = ZERO;
            u[(0, 1)] = ONE;
            u[(1, 0)] = ONE;
        }
        SegmentKind::HalfPiPulse => {
            let h = C64::from(std::f64::consts::FRAC_1_SQRT_2);
            u[(0, 0)] = h;
            u[(1, 1)] = h;
            u[(0, 1)] = -h;
            u[(1, 0)] = h;
        }
        _ => {}
    }
    u
}

fn population_matrix(dim: usize, excited: f64) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(dim, dim);
    m[(0, 0)] = C64::from(1.0 - excited);
    m[(1, 1)] = C64::from(excited);
    m
}

fn vacuum(dim: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(dim, dim);
    m[(0, 0)] = ONE;
    m
}

/// Run a protocol on the two-device network.
pub fn run_protocol(params: &NetworkParams, protocol: &ProtocolSpec, opts: &NetworkOptions) -> Result<ProtocolOutcome> {
    params.validate()?;
    if opts.detector.w < 3 && protocol.segments.iter().any(|s| s.kind == SegmentKind::DetectionWindow) {
        return Err(Error::Truncation("detection needs at least three waveguide levels".into()));
    }
    let segs = protocol.resolve()?;
    let t_end = segs.iter().map(|s| s.end).fold(0.0, f64::max);
    if !(t_end > 0.0) {
        return Err(Error::InvalidProtocol("protocol has zero length".into()));
    }
    let mut cuts: Vec<f64> = vec![0.0, t_end];
    for s in &segs {
        cuts.push(s.start);
        cuts.push(s.end);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * t_end);

    let mted = detuned(&params.mted, opts);
    let frame = params.sted.omega_w;
    let detect_carrier = detection_drive_frequency(&params.mted) + opts.delta_omega_pm;
    let carriers = [params.sted.reset_drive_frequency(), mted.reset_drive_frequency()];
    let mut last_carrier = carriers;

    let space = crate::slh::network_space(&opts.source, &opts.detector)?;
    let mut rho = State::product(
        &space,
        &[
            population_matrix(opts.source.d, protocol.initial.sted),
            vacuum(opts.source.w),
            population_matrix(opts.detector.d, protocol.initial.mted),
            vacuum(opts.detector.w),
        ],
    )?;
    let grid: Vec<f64> = if opts.samples >= 2 {
        (0..opts.samples).map(|k| t_end * k as f64 / (opts.samples - 1) as f64).collect()
    } else {
        vec![]
    };
    let names = ["a_out", "b_out", "n_ds", "n_dm"];
    let mut records: Vec<(String, Vec<C64>)> = names.iter().map(|n| (n.to_string(), vec![])).collect();
    let mut times = Vec::new();
    let mut totals = [0.0f64; 3];
    let mut diagnostics = Diagnostics::default();
    let mut observables: Option<(Vec<(String, Op)>, Vec<(String, Op)>)> = None;

    for (k, win) in cuts.windows(2).enumerate() {
        let (a, b) = (win[0], win[1]);
        for s in segs.iter().filter(|s| s.kind.is_gate() && (s.start - a).abs() <= 1e-15 * t_end) {
            let (mode, dim) = match s.target {
                Target::Sted => ("ds", opts.source.d),
                Target::Mted => ("dm", opts.detector.d),
            };
            rho = rho.transform(&local_op(&space, mode, &gate(s.kind, dim))?)?;
        }
        let mut drives = Vec::with_capacity(2);
        for (slot, (target, ted)) in [(Target::Sted, &params.sted), (Target::Mted, &mted)].into_iter().enumerate() {
            let active = drive_on(&segs, target, a, b, ted.gamma);
            let carrier = match active.as_ref().map(|x| x.0) {
                Some(SegmentKind::DetectionWindow) => detect_carrier,
                Some(SegmentKind::Reset | SegmentKind::Emission) => carriers[slot],
                _ => last_carrier[slot],
            };
            last_carrier[slot] = carrier;
            drives.push(Drive { carrier, envelope: active.map_or(Envelope::zero(), |x| x.1) });
        }
        let eff = |ted: &TedParams, d: &Drive| -> Result<EffectiveTed> {
            Ok(EffectiveTed::from_carrier(ted, d.carrier, d.envelope.clone())?.with_frame(frame).with_stark(opts.stark))
        };
        let spec = NetworkSpec {
            sted: eff(&params.sted, &drives[0])?,
            mted: eff(&mted, &drives[1])?,
            eta: params.eta,
            phi_s: params.phi_s,
            phi_m: params.phi_m,
        };
        let net = build_pitch_detect(&spec, &opts.source, &opts.detector)?;
        let mut meq = net.meq;
        if opts.intrinsic {
            for (ted, mode) in [(&params.sted, "ds"), (&params.mted, "dm")] {
                let d = lowering(&space, mode)?;
                add_intrinsic(&mut meq, &d, Some(ted.t1.unwrap_or(DEFAULT_T1)), Some(ted.t2.unwrap_or(DEFAULT_T2)))?;
            }
        }
        if observables.is_none() {
            observables = Some(output_operators(&net.a_out, &net.b_out)?);
        }
        let (obs, ints) = observables.as_ref().expect("set above");
        let inside: Vec<f64> = grid.iter().copied().filter(|&t| t >= a && t <= b).collect();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * t_end;
        let mut samples = vec![a];
        samples.extend(inside.iter().copied().filter(|&t| !close(t, a) && !close(t, b)));
        samples.push(b);
        let mut eo = EvolveOptions::default().with_tol(opts.tol);
        eo.samples = samples;
        eo.observables = if grid.is_empty() { vec![] } else { obs.clone() };
        eo.integrals = ints.clone();
        if rho.min_eigenvalue() < 0.0 || (rho.trace() - 1.0).abs() > 1e-12 {
            rho = rho.repaired()?;
        }
        let tr = evolve(&meq, &rho, (a, b), &eo)?;
        for (i, &t) in tr.times.iter().enumerate() {
            let on_grid = inside.iter().any(|&g| close(g, t));
            let fresh = times.last().map_or(true, |&l: &f64| t > l);
            if on_grid && fresh {
                times.push(t);
                for (name, vals) in records.iter_mut() {
                    vals.push(tr.record(name).map_or(ZERO, |r| r[i]));
                }
            }
        }
        for (j, name) in ["a_out_power", "a01_power", "b_out_power"].iter().enumerate() {
            totals[j] += tr.last(name).map_or(0.0, |v| v.re);
        }
        if k == 0 {
            diagnostics = tr.diagnostics;
        } else {
            diagnostics.merge(&tr.diagnostics);
        }
        rho = tr.final_state;
    }
    // Gates placed at the very end still act.
    for s in segs.iter().filter(|s| s.kind.is_gate() && (s.start - t_end).abs() <= 1e-15 * t_end) {
        let (mode, dim) = match s.target {
            Target::Sted => ("ds", opts.source.d),
            Target::Mted => ("dm", opts.detector.d),
        };
        rho = rho.transform(&local_op(&space, mode, &gate(s.kind, dim))?)?;
    }
    let n_ds = crate::fock::expectation(&rho, &number(&space, "ds")?)?.re;
    let n_dm = crate::fock::expectation(&rho, &number(&space, "dm")?)?.re;
    Ok(ProtocolOutcome {
        times,
        records,
        n_ds,
        n_dm,
        a_out_photons: totals[0],
        a01_photons: totals[1],
        b_out_photons: totals[2],
        final_state: rho,
        diagnostics,
    })
}

type Named = Vec<(String, Op)>;

/// Recorded amplitudes and integrated powers of the two output fields.
fn output_operators(a_out: &OutputField, b_out: &OutputField) -> Result<(Named, Named)> {
    let space = a_out.terms[0].2.space().clone();
    let wm = lowering(&space, "wm")?;
    let mut a01 = a_out.clone();
    if let Some(last) = a01.terms.last_mut() {
        last.2 = wm.transition_part("wm", 1, 0)?;
    }
    let obs = vec![
        ("a_out".into(), a_out.operator(&space)?),
        ("b_out".into(), b_out.operator(&space)?),
        ("n_ds".into(), number(&space, "ds")?),
        ("n_dm".into(), number(&space, "dm")?),
    ];
    let ints = vec![
        ("a_out_power".into(), a_out.power_operator(&space)?),
        ("a01_power".into(), a01.power_operator(&space)?),
        ("b_out_power".into(), b_out.power_operator(&space)?),
    ];
    Ok((obs, ints))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetectionPoint {
    /// Final excited population of the measurement data qubit.
    pub p_dm: f64,
    /// The same without a photon.
    pub p_dm_reference: f64,
    /// `1 − p_dm/p_dm_reference`, clamped to [0, 1].
    pub p_detect: f64,
    /// Excitation that left the source data qubit.
    pub p_released: f64,
}

/// Same protocol with the source left in its ground state.
fn without_photon(protocol: &ProtocolSpec) -> ProtocolSpec {
    let mut p = protocol.clone();
    p.initial.sted = 0.0;
    p.segments.retain(|s| !(s.target == Target::Sted && s.kind.is_gate()));
    p
}

/// Run a protocol and its no-photon companion and normalize.
pub fn detection_probability(
    params: &NetworkParams,
    protocol: &ProtocolSpec,
    opts: &NetworkOptions,
) -> Result<DetectionPoint> {
    let with = run_protocol(params, protocol, opts)?;
    let without = run_protocol(params, &without_photon(protocol), opts)?;
    let p_ref = without.n_dm;
    let p_detect = if p_ref > 1e-12 { (1.0 - with.n_dm / p_ref).clamp(0.0, 1.0) } else { 0.0 };
    let start = source_excitation(protocol, opts.source.d);
    Ok(DetectionPoint { p_dm: with.n_dm, p_dm_reference: p_ref, p_detect, p_released: start - with.n_ds })
}

/// Source population right after its last gate, assuming the network has no
/// thermal input.
fn source_excitation(protocol: &ProtocolSpec, dim: usize) -> f64 {
    let mut rho = population_matrix(dim, protocol.initial.sted);
    let mut gates: Vec<_> = protocol.segments.iter().filter(|s| s.target == Target::Sted).collect();
    gates.retain(|s| s.kind.is_gate() || s.kind == SegmentKind::Reset);
    for s in gates {
        if s.kind == SegmentKind::Reset {
            rho = vacuum(dim);
        } else {
            let u = gate(s.kind, dim);
            rho = &u * rho * u.adjoint();
        }
    }
    rho[(1, 1)].re
}

/// Apply one sweep coordinate.
fn apply(
    params: &mut NetworkParams,
    protocol: &mut ProtocolSpec,
    opts: &mut NetworkOptions,
    name: SweepParam,
    value: f64,
) -> Result<()> {
    match name {
        SweepParam::Eta => params.eta = value,
        SweepParam::DeltaOmegaWm => opts.delta_omega_wm = mhz_to_rad(value),
        SweepParam::DeltaOmegaPm => opts.delta_omega_pm = mhz_to_rad(value),
        SweepParam::GpmOverGamma => {
            for s in protocol.segments.iter_mut() {
                if s.target == Target::Mted && s.kind == SegmentKind::DetectionWindow {
                    s.g_p_over_gamma = Some(value);
                }
            }
        }
        SweepParam::Window => {
            for s in protocol.segments.iter_mut() {
                if s.target == Target::Mted && s.kind == SegmentKind::DetectionWindow {
                    s.duration = value * MICRO;
                }
            }
        }
        SweepParam::Arrival => {
            let segs = protocol.resolve()?;
            let open = segs
                .iter()
                .find(|s| s.target == Target::Mted && s.kind == SegmentKind::DetectionWindow)
                .ok_or_else(|| Error::InvalidProtocol("arrival sweep needs a detection window".into()))?
                .start;
            let mut found = false;
            for s in protocol.segments.iter_mut() {
                if s.target == Target::Sted && s.kind == SegmentKind::Emission {
                    s.start = Some(open + value * MICRO - s.duration / 2.0);
                    found = true;
                }
            }
            if !found {
                return Err(Error::InvalidProtocol("arrival sweep needs an emission segment".into()));
            }
        }
        SweepParam::NBar | SweepParam::Detuning => {
            return Err(Error::InvalidParameter(format!("`{}` is not a network sweep parameter", name.column())))
        }
    }
    Ok(())
}

/// Detection probability over a one- or two-axis grid.
pub fn pitch_detect(
    params: &NetworkParams,
    protocol: &ProtocolSpec,
    sweep: &SweepSpec,
    opts: &NetworkOptions,
    sweep_opts: &SweepOptions,
) -> Result<ResultTable> {
    params.validate()?;
    sweep.validate()?;
    protocol.resolve()?;
    for ax in sweep.axes() {
        if matches!(ax.name, SweepParam::NBar | SweepParam::Detuning) {
            return Err(Error::InvalidParameter(format!("`{}` is not a network sweep parameter", ax.name.column())));
        }
    }
    let points = sweep.points();
    let results = run_points(points.len(), sweep_opts, |k| {
        let (mut p, mut pr, mut o) = (params.clone(), protocol.clone(), opts.clone());
        for &(name, v) in &points[k] {
            apply(&mut p, &mut pr, &mut o, name, v)?;
        }
        detection_probability(&p, &pr, &o)
    });
    let axes: Vec<&str> = sweep.axes().iter().map(|a| a.name.column()).collect();
    let mut table = ResultTable::new(&axes, &["p_dm", "p_dm_reference", "p_detect", "p_released"]);
    for (pt, r) in points.iter().zip(results) {
        let vals: Vec<f64> = pt.iter().map(|x| x.1).collect();
        table.push(
            &vals,
            r.map(|d| vec![d.p_dm, d.p_dm_reference, d.p_detect, d.p_released]).map_err(|e| e.to_string()),
        )?;
    }
    table.metadata = serde_json::json!({
        "kind": "pitch-detect",
        "network": params,
        "protocol": protocol,
        "sweep": sweep,
        "options": opts,
    });
    Ok(table)
}

/// Integrated output power for each combination of initial data-qubit
/// excitations, relative to both starting in the ground state.
pub fn fock_check_table(params: &NetworkParams, protocol: &ProtocolSpec, opts: &NetworkOptions) -> Result<ResultTable> {
    let combos = [(0u8, 0u8), (0, 1), (1, 0), (1, 1)];
    let runs: Vec<ProtocolOutcome> = combos
        .iter()
        .map(|&(s, m)| run_protocol(params, &with_initial(protocol, s == 1, m == 1), opts))
        .collect::<Result<_>>()?;
    let (a0, b0) = (runs[0].a01_photons, runs[0].b_out_photons);
    let mut table =
        ResultTable::new(&["ds0", "dm0"], &["a01_photons", "b12_photons", "a01_photons_raw", "b12_photons_raw"]);
    for ((s, m), r) in combos.iter().zip(&runs) {
        table.push(
            &[*s as f64, *m as f64],
            Ok(vec![r.a01_photons - a0, r.b_out_photons - b0, r.a01_photons, r.b_out_photons]),
        )?;
    }
    table.metadata = serde_json::json!({
        "kind": "fock-check",
        "network": params,
        "protocol": protocol,
        "options": opts,
    });
    Ok(table)
}

/// Keep a target's π pulses only if it should start excited; without a π
/// pulse the excitation is placed in the initial state.
fn with_initial(protocol: &ProtocolSpec, sted: bool, mted: bool) -> ProtocolSpec {
    let mut p = protocol.clone();
    for (target, on) in [(Target::Sted, sted), (Target::Mted, mted)] {
        let has_pi = p.segments.iter().any(|s| s.target == target && s.kind == SegmentKind::PiPulse);
        if !on {
            p.segments.retain(|s| !(s.target == target && s.kind.is_gate()));
        }
        let init = if on && !has_pi { 1.0 } else { 0.0 };
        match target {
            Target::Sted => p.initial.sted = init,
            Target::Mted => p.initial.mted = init,
        }
    }
    p
}
