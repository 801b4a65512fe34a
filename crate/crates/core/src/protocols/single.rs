//! Single-device reset, emission and detection runs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fock::{lowering, number, Op, ProductSpace, State, C64, I, ONE, ZERO};
use crate::lindblad::{evolve, rabi_from_power, EvolveOptions, MasterEq, Trajectory};
use crate::ted::{detection_drive_frequency, two_mode_space, EffectiveTed, Envelope, TedParams, Truncation};
use crate::units::MICRO;

use super::network::{detection_probability, NetworkOptions, NetworkParams};
use super::spec::{ProtocolSpec, Segment, SegmentKind, Target};
use super::{add_intrinsic, run_points, ResultTable, SweepOptions, DEFAULT_T1, DEFAULT_T2};

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub trunc: Truncation,
    pub tol: f64,
    /// Uniform record samples per run.
    pub samples: usize,
    /// Add data-qubit T1/T2 dissipators.
    pub intrinsic: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { trunc: Truncation { d: 2, c: 2, w: 3 }, tol: 1e-8, samples: 401, intrinsic: false }
    }
}

/// Constant drive on the |10⟩↔|01⟩ carrier, in the waveguide frame.
pub fn reset_drive(ted: &TedParams, g_over_gamma: f64) -> Result<EffectiveTed> {
    EffectiveTed::from_carrier(ted, ted.reset_drive_frequency(), Envelope::Constant { amplitude: g_over_gamma * ted.gamma })
}

/// Cosine-squared drive of full width `width` centred at `t0`.
pub fn emission_drive(ted: &TedParams, peak_over_gamma: f64, t0: f64, width: f64) -> Result<EffectiveTed> {
    let env = Envelope::CosineSquared { amplitude: peak_over_gamma * ted.gamma, t0, width };
    EffectiveTed::from_carrier(ted, ted.reset_drive_frequency(), env)
}

pub(crate) struct SingleModel {
    pub space: ProductSpace,
    pub meq: MasterEq,
    pub d: Op,
    pub w: Op,
}

pub(crate) fn single_model(eff: &EffectiveTed, trunc: &Truncation, intrinsic: bool) -> Result<SingleModel> {
    let space = two_mode_space(trunc)?;
    let d = lowering(&space, "d")?;
    let w = lowering(&space, "w")?;
    let mut meq = MasterEq::new(eff.hamiltonian_on(&space, "d", "w")?)
        .with_collapse(eff.gamma * (1.0 + eff.n_th), w.clone())?
        .with_thermal(eff.gamma * eff.n_th, w.dag())?;
    if intrinsic {
        add_intrinsic(&mut meq, &d, Some(eff.t1.unwrap_or(DEFAULT_T1)), Some(eff.t2.unwrap_or(DEFAULT_T2)))?;
    }
    meq.add_breakpoints(eff.breakpoints());
    Ok(SingleModel { space, meq, d, w })
}

/// Truncated Bose–Einstein populations with mean close to `n_th`.
pub(crate) fn thermal_diag(dim: usize, n_th: f64) -> DMatrix<C64> {
    let x = if n_th > 0.0 { n_th / (1.0 + n_th) } else { 0.0 };
    let weights: Vec<f64> = (0..dim).map(|k| x.powi(k as i32)).collect();
    let z: f64 = weights.iter().sum();
    DMatrix::from_fn(dim, dim, |i, j| if i == j { C64::from(weights[i] / z) } else { ZERO })
}

fn diag_excited(dim: usize, p: f64) -> Result<DMatrix<C64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidState(format!("excited probability {p} outside [0, 1]")));
    }
    let mut m = DMatrix::zeros(dim, dim);
    m[(0, 0)] = C64::from(1.0 - p);
    m[(1, 1)] = C64::from(p);
    Ok(m)
}

/// Excited population of the data qubit after a reset of `duration`,
/// starting from `initial_excited` with the waveguide mode thermal.
pub fn simulate_reset(eff: &EffectiveTed, duration: f64, initial_excited: f64, opts: &RunOptions) -> Result<f64> {
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter("reset duration must be positive".into()));
    }
    let m = single_model(eff, &opts.trunc, opts.intrinsic)?;
    let rho0 = State::product(&m.space, &[diag_excited(opts.trunc.d, initial_excited)?, thermal_diag(opts.trunc.w, eff.n_th)])?;
    let tr = evolve(&m.meq, &rho0, (0.0, duration), &EvolveOptions::default().with_tol(opts.tol))?;
    Ok(crate::fock::expectation(&tr.final_state, &(&m.d.dag() * &m.d))?.re)
}

#[derive(Clone, Debug)]
pub struct EmissionOutcome {
    /// Records `a_out` (= √(γ/2)⟨w⟩), `w`, `n_d`, `n_w` and running integrals
    /// `emitted`, `lost`.
    pub trajectory: Trajectory,
    /// ⟨d†d⟩ at the end.
    pub residual: f64,
    /// Net excitation carried into the waveguide.
    pub emitted: f64,
    /// Excitation left in the waveguide transmon or lost intrinsically.
    pub leakage: f64,
    /// ⟨d†d + w†w⟩ at the start.
    pub initial_excitation: f64,
}

impl EmissionOutcome {
    /// `initial − residual − leakage − emitted`; zero up to integration error.
    pub fn bookkeeping_error(&self) -> f64 {
        self.initial_excitation - self.residual - self.leakage - self.emitted
    }
}

/// Emission run from data-qubit state `initial` (a ket over its levels) with
/// the waveguide mode thermal.
pub fn simulate_emission(eff: &EffectiveTed, initial: &DVector<C64>, span: (f64, f64), opts: &RunOptions) -> Result<EmissionOutcome> {
    if (initial.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState("data-qubit ket is not normalized".into()));
    }
    simulate_emission_mixed(eff, &(initial * initial.adjoint()), span, opts)
}

/// As [`simulate_emission`], from a data-qubit density matrix.
pub fn simulate_emission_mixed(
    eff: &EffectiveTed,
    initial: &DMatrix<C64>,
    span: (f64, f64),
    opts: &RunOptions,
) -> Result<EmissionOutcome> {
    if initial.nrows() != opts.trunc.d || initial.ncols() != opts.trunc.d {
        return Err(Error::InvalidState(format!("data-qubit state must be {0}x{0}", opts.trunc.d)));
    }
    let m = single_model(eff, &opts.trunc, opts.intrinsic)?;
    let rho0 = State::product(&m.space, &[initial.clone(), thermal_diag(opts.trunc.w, eff.n_th)])?;
    let n_d = &m.d.dag() * &m.d;
    let n_w = number(&m.space, "w")?;
    // Net flux into the line and intrinsic loss, as operators whose
    // expectation gives the instantaneous rate.
    let emit = &(&m.w.dag() * &m.w).scale(eff.gamma * (1.0 + eff.n_th)) - &(&m.w * &m.w.dag()).scale(eff.gamma * eff.n_th);
    let mut lost = Op::zero(&m.space);
    for (rate, l) in m.meq.collapse() {
        if l.max_diff(&m.d) < 1e-15 {
            lost += &(&l.dag() * l).scale(*rate);
        }
    }
    let eo = EvolveOptions::default()
        .with_tol(opts.tol)
        .with_uniform_samples(span, opts.samples)
        .observe("a_out", m.w.scale((eff.gamma / 2.0).sqrt()))
        .observe("w", m.w.clone())
        .observe("n_d", n_d.clone())
        .observe("n_w", n_w.clone())
        .integrate("emitted", emit)
        .integrate("lost", lost);
    let n0 = crate::fock::expectation(&rho0, &(&n_d + &n_w))?.re;
    let tr = evolve(&m.meq, &rho0, span, &eo)?;
    let last = |k: &str| tr.last(k).map_or(0.0, |v| v.re);
    let residual = last("n_d");
    Ok(EmissionOutcome {
        residual,
        emitted: last("emitted"),
        leakage: last("n_w") + last("lost"),
        initial_excitation: n0,
        trajectory: tr,
    })
}

/// What arrives at the measurement device during its window.
#[derive(Clone, Debug)]
pub enum DetectionInput {
    /// Resonant coherent drive of `n_bar` photons per 1/γ.
    Coherent { n_bar: f64 },
    /// A photon emitted by `source` and carried through the network.
    Fock {
        source: Box<TedParams>,
        /// Peak g_p/γ of the cosine emission drive.
        peak_over_gamma: f64,
        /// Full width of the emission drive (s).
        emission: f64,
        /// Centre of the emission drive relative to the window start (s).
        arrival: f64,
        eta: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionOutcome {
    /// Final ⟨d†d⟩ with the input present.
    pub p_excited: f64,
    /// Final ⟨d†d⟩ without input.
    pub p_excited_reference: f64,
    /// `1 − p_excited/p_excited_reference`, clamped to [0, 1].
    pub p_detect: f64,
}

fn detection_single(mted: &TedParams, n_bar: f64, window: f64, g_p: f64, opts: &RunOptions) -> Result<f64> {
    let eff = EffectiveTed::from_carrier(mted, detection_drive_frequency(mted), Envelope::Constant { amplitude: g_p })?
        .with_frame(mted.omega_w)
        .with_rabi(Envelope::Constant { amplitude: rabi_from_power(n_bar, mted.gamma, mted.omega_w, mted.omega_w)? });
    let m = single_model(&eff, &opts.trunc, opts.intrinsic)?;
    let rho0 = State::product(&m.space, &[diag_excited(opts.trunc.d, 1.0)?, thermal_diag(opts.trunc.w, eff.n_th)])?;
    let tr = evolve(&m.meq, &rho0, (0.0, window), &EvolveOptions::default().with_tol(opts.tol))?;
    Ok(crate::fock::expectation(&tr.final_state, &(&m.d.dag() * &m.d))?.re)
}

/// Detection with the data qubit prepared excited and the |11⟩↔|02⟩
/// carrier held at `g_p` (rad/s) for `window`.
pub fn simulate_detection(
    mted: &TedParams,
    input: &DetectionInput,
    window: f64,
    g_p: f64,
    opts: &RunOptions,
) -> Result<DetectionOutcome> {
    if !(window > 0.0) {
        return Err(Error::InvalidParameter("detection window must be positive".into()));
    }
    if opts.trunc.w < 3 {
        return Err(Error::Truncation("detection needs at least three waveguide levels".into()));
    }
    let (p, p_ref) = match input {
        DetectionInput::Coherent { n_bar } => {
            (detection_single(mted, *n_bar, window, g_p, opts)?, detection_single(mted, 0.0, window, g_p, opts)?)
        }
        DetectionInput::Fock { source, peak_over_gamma, emission, arrival, eta } => {
            let params = NetworkParams { sted: (**source).clone(), mted: mted.clone(), eta: *eta, phi_s: 0.0, phi_m: 0.0 };
            let protocol = ProtocolSpec {
                initial: super::spec::InitialPopulations { sted: 1.0, mted: 1.0 },
                segments: vec![
                    Segment::new(SegmentKind::DetectionWindow, Target::Mted, window).at(0.0).drive(g_p / mted.gamma),
                    Segment::new(SegmentKind::Emission, Target::Sted, *emission)
                        .at(arrival - emission / 2.0)
                        .drive(*peak_over_gamma),
                ],
            };
            let nopts = NetworkOptions {
                source: Truncation { d: opts.trunc.d, c: 2, w: 2 },
                detector: opts.trunc,
                tol: opts.tol,
                intrinsic: opts.intrinsic,
                ..NetworkOptions::default()
            };
            let d = detection_probability(&params, &protocol, &nopts)?;
            (d.p_dm, d.p_dm_reference)
        }
    };
    let p_detect = if p_ref > 1e-12 { (1.0 - p / p_ref).clamp(0.0, 1.0) } else { 0.0 };
    Ok(DetectionOutcome { p_excited: p, p_excited_reference: p_ref, p_detect })
}

/// Coherent-drive detection over `n_bar × window_us` with the carrier held at
/// `g_over_gamma`. The reference run without input is shared per window.
pub fn coherent_detection_sweep(
    mted: &TedParams,
    n_bar: &[f64],
    window_us: &[f64],
    g_over_gamma: f64,
    opts: &RunOptions,
    sweep: &SweepOptions,
) -> Result<ResultTable> {
    mted.validate()?;
    if n_bar.is_empty() || window_us.is_empty() {
        return Err(Error::InvalidParameter("detection grids must be non-empty".into()));
    }
    if opts.trunc.w < 3 {
        return Err(Error::Truncation("detection needs at least three waveguide levels".into()));
    }
    let g = g_over_gamma * mted.gamma;
    let refs = run_points(window_us.len(), &SweepOptions { progress: None, ..sweep.clone() }, |k| {
        detection_single(mted, 0.0, window_us[k] * MICRO, g, opts)
    });
    let points: Vec<(f64, usize)> = n_bar.iter().flat_map(|&n| (0..window_us.len()).map(move |k| (n, k))).collect();
    let results = run_points(points.len(), sweep, |i| {
        let (n, k) = points[i];
        detection_single(mted, n, window_us[k] * MICRO, g, opts)
    });
    let mut table = ResultTable::new(&["n_bar", "window_us"], &["p_excited", "p_excited_reference", "p_detect"]);
    for ((n, k), r) in points.iter().zip(results) {
        let row = match (r, &refs[*k]) {
            (Ok(p), Ok(p_ref)) => {
                let d = if *p_ref > 1e-12 { (1.0 - p / p_ref).clamp(0.0, 1.0) } else { 0.0 };
                Ok(vec![p, *p_ref, d])
            }
            (Err(e), _) => Err(e.to_string()),
            (_, Err(e)) => Err(format!("reference run: {e}")),
        };
        table.push(&[*n, window_us[*k]], row)?;
    }
    table.metadata = serde_json::json!({
        "kind": "detect",
        "g_p_over_gamma": g_over_gamma,
        "truncation": opts.trunc,
        "tol": opts.tol,
        "device": mted,
    });
    Ok(table)
}

/// Fraction of a weak single-frequency photon absorbed by the measurement
/// device, from the single-excitation reflection coefficient with the drive
/// frozen at its t = 0 value. `detuning` is the photon frequency relative to
/// the model's frame (rad/s).
pub fn absorption_efficiency(mted: &EffectiveTed, detuning: f64) -> Result<f64> {
    let space = ProductSpace::from_dims(&[("d", 2), ("w", 3)])?;
    let h = mted.hamiltonian_on(&space, "d", "w")?.at(0.0);
    let w = lowering(&space, "w")?;
    let k = mted.gamma;
    let psi0 = space.index(&[1, 0])?;
    let e0 = h.get(psi0, psi0);
    let n = space.dim();
    let mut m = h.matrix() - (&w.dag() * &w).matrix() * C64::new(0.0, k / 2.0);
    for i in 0..n {
        m[(i, i)] -= e0 + detuning;
    }
    let m = m * I;
    let mut src = DVector::from_element(n, ZERO);
    src[psi0] = ONE;
    let src = w.matrix().adjoint() * src;
    // Solve only on the states the source reaches; the rest may be undamped.
    let mut reach: Vec<usize> = (0..n).filter(|&i| src[i] != ZERO).collect();
    let mut seen = vec![false; n];
    reach.iter().for_each(|&i| seen[i] = true);
    let mut head = 0;
    while head < reach.len() {
        let j = reach[head];
        head += 1;
        for i in 0..n {
            if !seen[i] && m[(i, j)] != ZERO {
                seen[i] = true;
                reach.push(i);
            }
        }
    }
    let sub = DMatrix::from_fn(reach.len(), reach.len(), |a, b| m[(reach[a], reach[b])]);
    let sub_src = DVector::from_fn(reach.len(), |a, _| src[reach[a]]);
    let y = sub.lu().solve(&sub_src).ok_or_else(|| Error::Unphysical("singular resolvent".into()))?;
    let mut x = DVector::from_element(n, ZERO);
    for (a, &i) in reach.iter().enumerate() {
        x[i] = y[a];
    }
    let r = ONE - C64::from(k) * (w.matrix() * x)[psi0];
    Ok((1.0 - r.norm_sqr()).max(0.0))
}
