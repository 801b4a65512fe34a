//! Rotating-frame model of a single emitter/detector and its two-mode
//! reduction with the coupler eliminated.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitParams, QuantizedTed};
use crate::error::{Error, Result};
use crate::fock::{lowering, number, Op, ProductSpace, C64, I};
use crate::timeop::TimeOp;
use crate::units::{ghz_to_rad, rad_to_ghz, MICRO};

/// Per-mode level counts for the data, coupler and waveguide transmons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub d: usize,
    pub c: usize,
    pub w: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { d: 3, c: 3, w: 4 }
    }
}

impl Truncation {
    pub fn new(d: usize, c: usize, w: usize) -> Result<Self> {
        let t = Self { d, c, w };
        for (name, n) in [("d", d), ("c", c), ("w", w)] {
            if n < 2 {
                return Err(Error::BadDimension { label: name.into(), dim: n });
            }
        }
        Ok(t)
    }
}

impl FromStr for Truncation {
    type Err = Error;
    /// Parses `d=3,c=3,w=4`; omitted modes keep their defaults.
    fn from_str(s: &str) -> Result<Self> {
        let mut t = Truncation::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("bad truncation entry `{part}`")))?;
            let n: usize =
                v.trim().parse().map_err(|_| Error::InvalidParameter(format!("bad level count `{v}`")))?;
            match k.trim() {
                "d" => t.d = n,
                "c" => t.c = n,
                "w" => t.w = n,
                other => return Err(Error::UnknownMode(other.to_string())),
            }
        }
        Truncation::new(t.d, t.c, t.w)
    }
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={},c={},w={}", self.d, self.c, self.w)
    }
}

/// Scalar time envelope in rad/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    Constant { amplitude: f64 },
    /// `amplitude` on `[start, end)`, zero elsewhere.
    Window { amplitude: f64, start: f64, end: f64 },
    /// `amplitude·cos²(π(t−t0)/width)` for `|t−t0| < width/2`.
    CosineSquared { amplitude: f64, t0: f64, width: f64 },
    /// Linear interpolation between `(t, value)` points, zero outside.
    Piecewise { points: Vec<(f64, f64)> },
}

impl Envelope {
    pub fn zero() -> Self {
        Envelope::Constant { amplitude: 0.0 }
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            Envelope::Constant { amplitude } => *amplitude,
            Envelope::Window { amplitude, start, end } => {
                if t >= *start && t < *end {
                    *amplitude
                } else {
                    0.0
                }
            }
            Envelope::CosineSquared { amplitude, t0, width } => {
                let x = t - t0;
                if x.abs() < width / 2.0 {
                    amplitude * (PI * x / width).cos().powi(2)
                } else {
                    0.0
                }
            }
            Envelope::Piecewise { points } => {
                if points.is_empty() || t < points[0].0 || t > points[points.len() - 1].0 {
                    return 0.0;
                }
                let k = points.partition_point(|p| p.0 <= t).max(1).min(points.len() - 1);
                let (t0, v0) = points[k - 1];
                let (t1, v1) = points[k];
                if t1 == t0 {
                    v1
                } else {
                    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                }
            }
        }
    }

    /// Largest magnitude reached.
    pub fn peak(&self) -> f64 {
        match self {
            Envelope::Constant { amplitude }
            | Envelope::Window { amplitude, .. }
            | Envelope::CosineSquared { amplitude, .. } => amplitude.abs(),
            Envelope::Piecewise { points } => points.iter().map(|p| p.1).fold(0.0, |a: f64, b| a.max(b.abs())),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Envelope::Piecewise { points } => points.iter().all(|p| p.1 == 0.0),
            _ => self.peak() == 0.0,
        }
    }

    pub fn scaled(&self, k: f64) -> Envelope {
        match self {
            Envelope::Constant { amplitude } => Envelope::Constant { amplitude: amplitude * k },
            Envelope::Window { amplitude, start, end } => {
                Envelope::Window { amplitude: amplitude * k, start: *start, end: *end }
            }
            Envelope::CosineSquared { amplitude, t0, width } => {
                Envelope::CosineSquared { amplitude: amplitude * k, t0: *t0, width: *width }
            }
            Envelope::Piecewise { points } => {
                Envelope::Piecewise { points: points.iter().map(|&(t, v)| (t, v * k)).collect() }
            }
        }
    }

    /// Times at which the envelope is not smooth; integrators should step
    /// onto them.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Envelope::Constant { .. } => vec![],
            Envelope::Window { start, end, .. } => vec![*start, *end],
            Envelope::CosineSquared { t0, width, .. } => vec![t0 - width / 2.0, t0 + width / 2.0],
            Envelope::Piecewise { points } => points.iter().map(|p| p.0).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Envelope::Constant { amplitude } => amplitude.is_finite(),
            Envelope::Window { amplitude, start, end } => amplitude.is_finite() && start < end,
            Envelope::CosineSquared { amplitude, t0, width } => {
                amplitude.is_finite() && t0.is_finite() && *width > 0.0
            }
            Envelope::Piecewise { points } => {
                !points.is_empty()
                    && points.iter().all(|p| p.0.is_finite() && p.1.is_finite())
                    && points.windows(2).all(|w| w[0].0 <= w[1].0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid envelope {self:?}")))
        }
    }
}

/// Lab-frame parameters of one device (SI).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TedParamsFile", into = "TedParamsFile")]
pub struct TedParams {
    pub omega_d: f64,
    pub omega_c: f64,
    pub omega_w: f64,
    pub nu_d: f64,
    pub nu_c: f64,
    pub nu_w: f64,
    pub g_c: f64,
    pub gamma: f64,
    pub n_th: f64,
    /// Intrinsic data-qubit relaxation and coherence times (s).
    pub t1: Option<f64>,
    pub t2: Option<f64>,
}

#[allow(non_snake_case)]
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TedParamsFile {
    pub omega_d_GHz: f64,
    pub omega_c_GHz: f64,
    pub omega_w_GHz: f64,
    pub nu_d_GHz: f64,
    pub nu_c_GHz: f64,
    pub nu_w_GHz: f64,
    pub g_C_GHz: f64,
    pub gamma_per_s: f64,
    #[serde(default)]
    pub n_th: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub T1_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub T2_us: Option<f64>,
}

impl TryFrom<TedParamsFile> for TedParams {
    type Error = Error;
    fn try_from(f: TedParamsFile) -> Result<Self> {
        let p = TedParams {
            omega_d: ghz_to_rad(f.omega_d_GHz),
            omega_c: ghz_to_rad(f.omega_c_GHz),
            omega_w: ghz_to_rad(f.omega_w_GHz),
            nu_d: ghz_to_rad(f.nu_d_GHz),
            nu_c: ghz_to_rad(f.nu_c_GHz),
            nu_w: ghz_to_rad(f.nu_w_GHz),
            g_c: ghz_to_rad(f.g_C_GHz),
            gamma: f.gamma_per_s,
            n_th: f.n_th,
            t1: f.T1_us.map(|t| t * MICRO),
            t2: f.T2_us.map(|t| t * MICRO),
        };
        p.validate()?;
        Ok(p)
    }
}

impl From<TedParams> for TedParamsFile {
    fn from(p: TedParams) -> Self {
        TedParamsFile {
            omega_d_GHz: rad_to_ghz(p.omega_d),
            omega_c_GHz: rad_to_ghz(p.omega_c),
            omega_w_GHz: rad_to_ghz(p.omega_w),
            nu_d_GHz: rad_to_ghz(p.nu_d),
            nu_c_GHz: rad_to_ghz(p.nu_c),
            nu_w_GHz: rad_to_ghz(p.nu_w),
            g_C_GHz: rad_to_ghz(p.g_c),
            gamma_per_s: p.gamma,
            n_th: p.n_th,
            T1_us: p.t1.map(|t| t / MICRO),
            T2_us: p.t2.map(|t| t / MICRO),
        }
    }
}

impl TedParams {
    /// Source device at its emission operating point.
    pub fn table_one_source() -> Self {
        Self {
            omega_d: ghz_to_rad(3.155),
            omega_c: ghz_to_rad(3.87),
            omega_w: ghz_to_rad(5.65811),
            nu_d: ghz_to_rad(-0.174),
            nu_c: ghz_to_rad(-0.169),
            nu_w: ghz_to_rad(-0.169),
            g_c: ghz_to_rad(0.07),
            gamma: 11.2e6,
            n_th: 0.015,
            t1: None,
            t2: None,
        }
    }

    /// Measurement device, frequency-matched to the source waveguide mode.
    pub fn table_one_detector() -> Self {
        Self { omega_d: ghz_to_rad(2.95), ..Self::table_one_source() }
    }

    /// Device model seeded from quantized circuit values. The waveguide
    /// decay rate and thermal occupation are not circuit outputs.
    pub fn from_quantized(q: &QuantizedTed, gamma: f64, n_th: f64) -> Result<Self> {
        let p = Self {
            omega_d: q.omega_d,
            omega_c: q.omega_c,
            omega_w: q.omega_w,
            nu_d: q.nu_d,
            nu_c: q.nu_c,
            nu_w: q.nu_w,
            g_c: q.g_c,
            gamma,
            n_th,
            t1: None,
            t2: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.omega_d,
            self.omega_c,
            self.omega_w,
            self.nu_d,
            self.nu_c,
            self.nu_w,
            self.g_c,
            self.gamma,
            self.n_th,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite device parameter".into()));
        }
        if self.gamma < 0.0 || self.n_th < 0.0 {
            return Err(Error::InvalidParameter("gamma and n_th must be non-negative".into()));
        }
        if self.omega_d == self.omega_w {
            return Err(Error::DegenerateModes("data and waveguide transmons share a frequency".into()));
        }
        for t in [self.t1, self.t2].into_iter().flatten() {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter("coherence times must be positive".into()));
            }
        }
        Ok(())
    }

    /// Carrier that makes |10⟩↔|01⟩ resonant.
    pub fn reset_drive_frequency(&self) -> f64 {
        (self.omega_w - self.omega_d).abs()
    }
}

/// Carrier that makes |11⟩↔|02⟩ resonant: |ω_w − ω_d| + ν_w.
pub fn detection_drive_frequency(ted: &TedParams) -> f64 {
    ted.reset_drive_frequency() + ted.nu_w
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriveSpec {
    /// Flux modulation at `omega`; the envelope is the coupler drive A(t).
    Parametric { omega: f64, envelope: Envelope },
    /// Waveguide drive at `omega`; the envelope is the Rabi rate Ω(t).
    Coherent { omega: f64, envelope: Envelope },
}

impl DriveSpec {
    /// Constant coherent drive whose power is `n_bar` photons per 1/γ.
    pub fn coherent_from_power(n_bar: f64, ted: &TedParams, omega_alpha: f64) -> Result<Self> {
        let amplitude = crate::lindblad::rabi_from_power(n_bar, ted.gamma, omega_alpha, ted.omega_w)?;
        Ok(DriveSpec::Coherent { omega: omega_alpha, envelope: Envelope::Constant { amplitude } })
    }
}

fn split_drives(drives: &[DriveSpec]) -> Result<(Option<(f64, &Envelope)>, Option<(f64, &Envelope)>)> {
    let mut par = None;
    let mut coh = None;
    for d in drives {
        match d {
            DriveSpec::Parametric { omega, envelope } => {
                if par.replace((*omega, envelope)).is_some() {
                    return Err(Error::UnsupportedDrives("at most one parametric drive".into()));
                }
            }
            DriveSpec::Coherent { omega, envelope } => {
                if coh.replace((*omega, envelope)).is_some() {
                    return Err(Error::UnsupportedDrives("at most one coherent drive".into()));
                }
            }
        }
        let env = match d {
            DriveSpec::Parametric { envelope, .. } | DriveSpec::Coherent { envelope, .. } => envelope,
        };
        env.validate()?;
    }
    Ok((par, coh))
}

/// `(ν/2) a†² a²` for the given lowering operator.
pub fn kerr(a: &Op, nu: f64) -> Op {
    let ad = a.dag();
    (&(&ad * &ad) * &(a * a)).scale(nu / 2.0)
}

/// Three-mode space with labels `d`, `c`, `w`.
pub fn three_mode_space(trunc: &Truncation) -> Result<ProductSpace> {
    ProductSpace::from_dims(&[("d", trunc.d), ("c", trunc.c), ("w", trunc.w)])
}

/// Two-mode space with labels `d`, `w`.
pub fn two_mode_space(trunc: &Truncation) -> Result<ProductSpace> {
    ProductSpace::from_dims(&[("d", trunc.d), ("w", trunc.w)])
}

/// Three-mode Hamiltonian (rad/s) in the frame rotating at ω_p on d and c
/// and at ω_α on all modes, with counter-rotating terms dropped.
pub fn rwa_time_op(ted: &TedParams, drives: &[DriveSpec], trunc: &Truncation) -> Result<TimeOp> {
    ted.validate()?;
    let (par, coh) = split_drives(drives)?;
    let omega_p = par.map_or(0.0, |p| p.0);
    let omega_a = coh.map_or(0.0, |c| c.0);
    let space = three_mode_space(trunc)?;
    let d = lowering(&space, "d")?;
    let c = lowering(&space, "c")?;
    let w = lowering(&space, "w")?;
    let mut h0 = &(&number(&space, "d")?.scale(ted.omega_d + omega_p - omega_a)
        + &number(&space, "c")?.scale(ted.omega_c + omega_p - omega_a))
        + &number(&space, "w")?.scale(ted.omega_w - omega_a);
    h0 += &kerr(&d, ted.nu_d);
    h0 += &kerr(&c, ted.nu_c);
    h0 += &kerr(&w, ted.nu_w);
    h0 += &(&(&c * &d.dag()) + &(&c.dag() * &d)).scale(ted.g_c);
    let mut h = TimeOp::constant(h0);
    if let Some((_, env)) = par {
        if !env.is_zero() {
            // A(t)(c†w − c w†)/2i
            let op = (&(&c.dag() * &w) - &(&c * &w.dag())).scale(C64::new(0.0, -0.5));
            let env = env.clone();
            h.push_fn(move |t| C64::from(env.at(t)), op)?;
        }
    }
    if let Some((_, env)) = coh {
        if !env.is_zero() {
            let op = (&w + &w.dag()).scale(0.5);
            let env = env.clone();
            h.push_fn(move |t| C64::from(env.at(t)), op)?;
        }
    }
    Ok(h.simplified())
}

pub fn rwa_hamiltonian(ted: &TedParams, drives: &[DriveSpec], trunc: &Truncation, t: f64) -> Result<Op> {
    Ok(rwa_time_op(ted, drives, trunc)?.at(t))
}

/// Two-mode model with the coupler eliminated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTed {
    /// Lab frequencies, kept for frame bookkeeping.
    pub omega_d: f64,
    pub omega_w: f64,
    /// Parametric carrier ω_p.
    pub omega_p: f64,
    /// ω_w − ω_α.
    pub delta: f64,
    /// Detuning of the carrier from |10⟩↔|01⟩, sign chosen to minimize |δ_p|.
    pub delta_p: f64,
    pub nu_d: f64,
    pub nu_w: f64,
    pub g_p: Envelope,
    /// Waveguide-mode shift per unit A².
    pub stark_coeff: f64,
    /// Drive amplitude A per unit g_p (zero when the coupler is absent).
    pub amp_per_gp: f64,
    /// Apply the A²-dependent waveguide shift.
    pub stark: bool,
    /// Second-order dispersive shift of the data qubit. Reported, not applied.
    pub d_shift: f64,
    /// Coherent waveguide drive Ω(t).
    pub rabi: Envelope,
    pub gamma: f64,
    pub n_th: f64,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
}

/// Sign s such that δ_p = ω_w − ω_d − s·ω_p has minimal magnitude.
fn carrier_sign(ted: &TedParams, omega_p: f64) -> f64 {
    let minus = (ted.omega_w - ted.omega_d - omega_p).abs();
    let plus = (ted.omega_w - ted.omega_d + omega_p).abs();
    if minus <= plus {
        1.0
    } else {
        -1.0
    }
}

/// Effective coupling per unit coupler drive at carrier `omega_p`.
pub fn coupling_per_drive(ted: &TedParams, omega_p: f64) -> Result<f64> {
    let det_dc = ted.omega_d - ted.omega_c;
    if det_dc.abs() < 1e-12 * ted.omega_d.abs().max(1.0) {
        return Err(Error::DegenerateModes("data and coupler transmons share a frequency".into()));
    }
    let s = carrier_sign(ted, omega_p);
    let det_wc = ted.omega_w - ted.omega_c - s * omega_p;
    if det_wc.abs() < 1e-12 * ted.omega_w.abs().max(1.0) {
        return Err(Error::DegenerateModes("dressed waveguide and coupler transmons coincide".into()));
    }
    Ok(ted.g_c / 4.0 * (1.0 / det_dc + 1.0 / det_wc))
}

impl EffectiveTed {
    /// Build the model for a given carrier and g_p(t), in the frame of the
    /// waveguide mode (δ = 0).
    pub fn from_carrier(ted: &TedParams, omega_p: f64, g_p: Envelope) -> Result<Self> {
        ted.validate()?;
        g_p.validate()?;
        let det_dc = ted.omega_d - ted.omega_c;
        if ted.g_c.abs() >= 0.1 * det_dc.abs() {
            log::warn!(
                "coupler elimination outside the dispersive regime: g_C/|ω_d−ω_c| = {:.3}",
                ted.g_c.abs() / det_dc.abs()
            );
        }
        let per_drive = coupling_per_drive(ted, omega_p)?;
        let s = carrier_sign(ted, omega_p);
        let det_wc = ted.omega_w - ted.omega_c - s * omega_p;
        Ok(Self {
            omega_d: ted.omega_d,
            omega_w: ted.omega_w,
            omega_p,
            delta: 0.0,
            delta_p: ted.omega_w - ted.omega_d - s * omega_p,
            nu_d: ted.nu_d,
            nu_w: ted.nu_w,
            g_p,
            stark_coeff: 1.0 / (4.0 * det_wc),
            amp_per_gp: if per_drive == 0.0 { 0.0 } else { 1.0 / per_drive },
            stark: true,
            d_shift: ted.g_c * ted.g_c / det_dc,
            rabi: Envelope::zero(),
            gamma: ted.gamma,
            n_th: ted.n_th,
            t1: ted.t1,
            t2: ted.t2,
        })
    }

    /// Move into the frame rotating at `omega_alpha`.
    pub fn with_frame(mut self, omega_alpha: f64) -> Self {
        self.delta = self.omega_w - omega_alpha;
        self
    }

    pub fn with_rabi(mut self, rabi: Envelope) -> Self {
        self.rabi = rabi;
        self
    }

    pub fn with_stark(mut self, on: bool) -> Self {
        self.stark = on;
        self
    }

    /// Peak A implied by the current g_p envelope.
    pub fn peak_drive(&self) -> f64 {
        self.g_p.peak() * self.amp_per_gp.abs()
    }

    /// Waveguide shift coefficient per unit g_p².
    pub fn stark_per_gp2(&self) -> f64 {
        if self.stark {
            self.stark_coeff * self.amp_per_gp * self.amp_per_gp
        } else {
            0.0
        }
    }

    /// Hamiltonian (rad/s) on the modes `d` and `w` of `space`.
    pub fn hamiltonian_on(&self, space: &ProductSpace, d: &str, w: &str) -> Result<TimeOp> {
        let a_d = lowering(space, d)?;
        let a_w = lowering(space, w)?;
        let n_w = number(space, w)?;
        let mut h0 = &number(space, d)?.scale(self.delta - self.delta_p) + &n_w.scale(self.delta);
        h0 += &kerr(&a_d, self.nu_d);
        h0 += &kerr(&a_w, self.nu_w);
        let mut h = TimeOp::constant(h0);
        if !self.g_p.is_zero() {
            let exchange = (&(&a_d.dag() * &a_w) - &(&a_d * &a_w.dag())).scale(-I);
            let env = self.g_p.clone();
            h.push_fn(move |t| C64::from(env.at(t)), exchange)?;
            let k = self.stark_per_gp2();
            if k != 0.0 {
                let env = self.g_p.clone();
                h.push_fn(move |t| C64::from(k * env.at(t).powi(2)), n_w)?;
            }
        }
        if !self.rabi.is_zero() {
            let env = self.rabi.clone();
            h.push_fn(move |t| C64::from(env.at(t)), (&a_w + &a_w.dag()).scale(0.5))?;
        }
        Ok(h.simplified())
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.g_p.breakpoints();
        b.extend(self.rabi.breakpoints());
        b
    }
}

pub fn schrieffer_wolff(ted: &TedParams, parametric: &DriveSpec) -> Result<EffectiveTed> {
    let DriveSpec::Parametric { omega, envelope } = parametric else {
        return Err(Error::UnsupportedDrives("coupler elimination needs a parametric drive".into()));
    };
    envelope.validate()?;
    let per_drive = coupling_per_drive(ted, *omega)?;
    let mut eff = EffectiveTed::from_carrier(ted, *omega, envelope.scaled(per_drive))?;
    if per_drive == 0.0 {
        eff.g_p = envelope.scaled(0.0);
    }
    Ok(eff)
}

/// Hamiltonian at time `t` on the default two-mode space.
pub fn effective_hamiltonian(eff: &EffectiveTed, trunc: &Truncation, t: f64) -> Result<Op> {
    let space = two_mode_space(trunc)?;
    Ok(eff.hamiltonian_on(&space, "d", "w")?.at(t))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Marginal,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignCondition {
    pub name: String,
    pub verdict: Verdict,
    /// Ratio of available to required; ≥ 1 satisfies the inequality.
    pub margin: f64,
}

/// Coherence/operability conditions. `drive` is the peak coupler drive A,
/// `circuit` enables the junction-energy cap.
pub fn design_check(ted: &TedParams, drive: Option<f64>, circuit: Option<&CircuitParams>) -> Vec<DesignCondition> {
    let det = (ted.omega_d - ted.omega_c).abs();
    let mut out = Vec::new();
    // 0.005|ω_d−ω_c| ≫ γ; an order of magnitude counts as "≫".
    let margin = if ted.gamma == 0.0 { f64::INFINITY } else { 0.005 * det / ted.gamma };
    let verdict = if margin >= 10.0 {
        Verdict::Pass
    } else if margin >= 1.0 {
        Verdict::Marginal
    } else {
        Verdict::Fail
    };
    out.push(DesignCondition { name: "bandwidth_vs_detuning".into(), verdict, margin });
    let margin = if ted.g_c == 0.0 { f64::INFINITY } else { 0.1 * det / ted.g_c.abs() };
    out.push(DesignCondition { name: "dispersive_coupling".into(), verdict: pass_if(margin), margin });
    if let Some(a) = drive {
        let margin = if a == 0.0 { f64::INFINITY } else { ted.g_c.abs() / 2.0 / a.abs() };
        out.push(DesignCondition { name: "drive_amplitude".into(), verdict: pass_if(margin), margin });
    }
    if let Some(p) = circuit {
        let margin = 0.2 * p.e_jc.min(p.e_jw) / p.e_jcw;
        out.push(DesignCondition { name: "coupler_junction_cap".into(), verdict: pass_if(margin), margin });
    }
    out
}

fn pass_if(margin: f64) -> Verdict {
    if margin >= 1.0 {
        Verdict::Pass
    } else {
        Verdict::Marginal
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{State, ZERO};
    use crate::units::mhz_to_rad;
    use proptest::prelude::*;

    fn src() -> TedParams {
        TedParams::table_one_source()
    }

    #[test]
    fn truncation_parsing() {
        let t: Truncation = "d=2, w=3".parse().unwrap();
        assert_eq!(t, Truncation { d: 2, c: 3, w: 3 });
        assert!("q=3".parse::<Truncation>().is_err());
        assert!("w=1".parse::<Truncation>().is_err());
        assert_eq!(Truncation::default().to_string(), "d=3,c=3,w=4");
    }

    #[test]
    fn cosine_envelope_shape() {
        let e = Envelope::CosineSquared { amplitude: 2.0, t0: 1.0, width: 2.0 };
        assert_eq!(e.at(1.0), 2.0);
        assert!(e.at(0.0).abs() < 1e-15);
        assert_eq!(e.at(-0.1), 0.0);
        assert!((e.at(0.5) - 1.0).abs() < 1e-12);
        let p = Envelope::Piecewise { points: vec![(0.0, 0.0), (1.0, 2.0), (2.0, 0.0)] };
        assert!((p.at(0.5) - 1.0).abs() < 1e-15);
        assert!((p.at(1.5) - 1.0).abs() < 1e-15);
        assert_eq!(p.at(3.0), 0.0);
    }

    #[test]
    fn undriven_diagonal_matches_ladder() {
        let t = Truncation::default();
        let h = rwa_hamiltonian(&TedParams { g_c: 0.0, ..src() }, &[], &t, 0.0).unwrap();
        let p = src();
        let space = three_mode_space(&t).unwrap();
        for i in 0..space.dim() {
            let lv = space.levels(i);
            let e = |w: f64, nu: f64, n: usize| w * n as f64 + nu * (n * n.saturating_sub(1)) as f64 / 2.0;
            let expect = e(p.omega_d, p.nu_d, lv[0]) + e(p.omega_c, p.nu_c, lv[1]) + e(p.omega_w, p.nu_w, lv[2]);
            assert!((h.get(i, i).re - expect).abs() < 1e-6 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn resonant_carrier_equalizes_frame_detunings() {
        let p = src();
        let wp = p.reset_drive_frequency();
        let wa = p.omega_w - mhz_to_rad(3.0);
        let drives = [
            DriveSpec::Parametric { omega: wp, envelope: Envelope::zero() },
            DriveSpec::Coherent { omega: wa, envelope: Envelope::zero() },
        ];
        let t = Truncation::default();
        let h = rwa_hamiltonian(&TedParams { g_c: 0.0, ..p.clone() }, &drives, &t, 0.0).unwrap();
        let h_d = h.element(&[1, 0, 0], &[1, 0, 0]).unwrap().re;
        let h_w = h.element(&[0, 0, 1], &[0, 0, 1]).unwrap().re;
        assert!((h_d - h_w).abs() < 1e-3);
        assert!((h_w - (p.omega_w - wa)).abs() < 1e-3);
    }

    #[test]
    fn no_direct_data_waveguide_element() {
        let p = src();
        let drives = [DriveSpec::Parametric {
            omega: p.reset_drive_frequency(),
            envelope: Envelope::Constant { amplitude: mhz_to_rad(20.0) },
        }];
        let h = rwa_hamiltonian(&p, &drives, &Truncation::default(), 0.0).unwrap();
        assert_eq!(h.element(&[1, 0, 0], &[0, 0, 1]).unwrap(), ZERO);
        assert!(h.is_hermitian());
    }

    #[test]
    fn two_parametric_drives_rejected() {
        let d = DriveSpec::Parametric { omega: 1.0, envelope: Envelope::zero() };
        let err = rwa_hamiltonian(&src(), &[d.clone(), d], &Truncation::default(), 0.0).unwrap_err();
        assert!(matches!(err, Error::UnsupportedDrives(_)));
    }

    #[test]
    fn effective_coupling_example() {
        // g_C/2π = 70 MHz, ω_d−ω_c = −2π·0.715 GHz, A/2π = 20 MHz, resonant carrier.
        let p = src();
        let drive = DriveSpec::Parametric {
            omega: p.reset_drive_frequency(),
            envelope: Envelope::Constant { amplitude: mhz_to_rad(20.0) },
        };
        let eff = schrieffer_wolff(&p, &drive).unwrap();
        let expect = 70.0 * 20.0 / (2.0 * 715.0);
        let got = eff.g_p.peak().abs() / (2.0 * PI * 1e6);
        assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
        assert!((got - 0.979).abs() < 5e-4);
        assert!(eff.delta_p.abs() < 1e-3);
    }

    #[test]
    fn resonant_bracket_reduces_to_single_denominator() {
        let p = src();
        let wp = p.reset_drive_frequency();
        let per = coupling_per_drive(&p, wp).unwrap();
        let single = p.g_c / (2.0 * (p.omega_d - p.omega_c));
        assert!((per - single).abs() < 1e-12 * single.abs());
        // Off resonance the two denominators differ.
        let off = coupling_per_drive(&p, wp + mhz_to_rad(200.0)).unwrap();
        assert!((off - single).abs() > 1e-3 * single.abs());
    }

    #[test]
    fn zero_drive_means_no_coupling_or_shift() {
        let p = src();
        let drive = DriveSpec::Parametric { omega: p.reset_drive_frequency(), envelope: Envelope::zero() };
        let eff = schrieffer_wolff(&p, &drive).unwrap();
        assert_eq!(eff.g_p.peak(), 0.0);
        assert_eq!(eff.peak_drive() * eff.peak_drive() * eff.stark_coeff, 0.0);
    }

    #[test]
    fn degenerate_coupler_is_an_error() {
        let p = TedParams { omega_c: src().omega_d, ..src() };
        let drive = DriveSpec::Parametric { omega: p.reset_drive_frequency(), envelope: Envelope::zero() };
        assert!(matches!(schrieffer_wolff(&p, &drive), Err(Error::DegenerateModes(_))));
    }

    #[test]
    fn detuning_sign_rule() {
        let p = src();
        for wp in [0.5, 2.5028, 2.7, 9.0] {
            let eff = EffectiveTed::from_carrier(&p, ghz_to_rad(wp), Envelope::zero()).unwrap();
            let a = (p.omega_w - p.omega_d + ghz_to_rad(wp)).abs();
            let b = (p.omega_w - p.omega_d - ghz_to_rad(wp)).abs();
            assert!(eff.delta_p.abs() <= a + 1e-6 && eff.delta_p.abs() <= b + 1e-6);
        }
    }

    #[test]
    fn effective_hamiltonian_examples() {
        let t = Truncation::new(3, 2, 3).unwrap();
        let mut eff = EffectiveTed::from_carrier(&src(), src().reset_drive_frequency(), Envelope::zero()).unwrap();
        eff.delta_p = 0.0;
        let h = effective_hamiltonian(&eff, &t, 0.0).unwrap();
        let space = two_mode_space(&t).unwrap();
        for i in 0..space.dim() {
            for j in 0..space.dim() {
                if i != j {
                    assert_eq!(h.get(i, j), ZERO);
                }
            }
        }
        assert!((h.element(&[2, 0], &[2, 0]).unwrap().re - eff.nu_d).abs() < 1e-6);
        let g = mhz_to_rad(1.0);
        eff.g_p = Envelope::Constant { amplitude: g };
        let h = effective_hamiltonian(&eff, &t, 0.0).unwrap();
        let e = h.element(&[1, 0], &[0, 1]).unwrap();
        assert!((e - C64::new(0.0, -g)).norm() < 1e-9);
        let e = h.element(&[1, 1], &[0, 2]).unwrap();
        assert!((e.norm() - 2f64.sqrt() * g).abs() < 1e-9);
    }

    #[test]
    fn detection_carrier_examples() {
        let p = src();
        let diff = rad_to_ghz(p.reset_drive_frequency() - detection_drive_frequency(&p));
        assert!((diff - 0.169).abs() < 1e-12);
        let flat = TedParams { nu_w: 0.0, ..p.clone() };
        assert_eq!(detection_drive_frequency(&flat), flat.reset_drive_frequency());
        // Measured carriers: 2.541 (reset) and 2.372 (detection) GHz differ by ν_w.
        let mted = TedParams { omega_w: ghz_to_rad(2.95 + 2.541), omega_d: ghz_to_rad(2.95), ..p };
        assert!((rad_to_ghz(detection_drive_frequency(&mted)) - 2.372).abs() < 1e-9);
    }

    #[test]
    fn quantized_values_seed_a_device() {
        let q = crate::circuit::quantize(&CircuitParams::table_one(), &crate::circuit::FluxPoint::dc(0.0)).unwrap();
        let p = TedParams::from_quantized(&q, 11.2e6, 0.015).unwrap();
        assert_eq!((p.omega_w, p.g_c, p.gamma), (q.omega_w, q.g_c, 11.2e6));
        assert!(TedParams::from_quantized(&q, -1.0, 0.0).is_err());
    }

    #[test]
    fn design_check_examples() {
        let p = src();
        let r = design_check(&p, None, None);
        assert_eq!(r[0].verdict, Verdict::Marginal);
        assert!((r[0].margin - 2.0).abs() < 0.05, "{}", r[0].margin);
        let r = design_check(&TedParams { gamma: 0.0, ..p.clone() }, None, None);
        assert_eq!(r[0].verdict, Verdict::Pass);
        let det = (p.omega_d - p.omega_c).abs();
        let r = design_check(&TedParams { g_c: 0.2 * det, ..p.clone() }, Some(0.0), None);
        assert_ne!(r[1].verdict, Verdict::Pass);
        let r = design_check(&p, Some(p.g_c), Some(&CircuitParams::table_one()));
        assert_ne!(r[2].verdict, Verdict::Pass);
        assert_eq!(r[3].verdict, Verdict::Pass);
    }

    #[test]
    fn json_round_trip() {
        let p = TedParams { t1: Some(81e-6), ..src() };
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("omega_w_GHz"));
        let back: TedParams = serde_json::from_str(&s).unwrap();
        assert!((back.omega_w - p.omega_w).abs() < 1e-3);
        assert!((back.t1.unwrap() - 81e-6).abs() < 1e-18);
    }

    #[test]
    fn initial_states_exist_on_default_space() {
        let s = two_mode_space(&Truncation::default()).unwrap();
        assert!(State::basis(&s, &[1, 0]).is_ok());
    }

    proptest! {
        #[test]
        fn hamiltonians_hermitian(t in 0.0..2e-6f64, amp in 0.0..50.0f64, omega in 0.0..1.0f64) {
            let p = src();
            let drives = [
                DriveSpec::Parametric {
                    omega: p.reset_drive_frequency(),
                    envelope: Envelope::CosineSquared { amplitude: mhz_to_rad(amp), t0: 1e-6, width: 2e-6 },
                },
                DriveSpec::Coherent { omega: p.omega_w, envelope: Envelope::Constant { amplitude: mhz_to_rad(omega) } },
            ];
            let trunc = Truncation::new(2, 2, 3).unwrap();
            let h = rwa_hamiltonian(&p, &drives, &trunc, t).unwrap();
            prop_assert!(h.hermiticity_error() <= 1e-12 * h.max_abs());
            let eff = schrieffer_wolff(&p, &drives[0]).unwrap()
                .with_rabi(Envelope::Constant { amplitude: mhz_to_rad(omega) });
            let h = effective_hamiltonian(&eff, &trunc, t).unwrap();
            prop_assert!(h.hermiticity_error() <= 1e-12 * h.max_abs().max(1.0));
        }
    }
}
