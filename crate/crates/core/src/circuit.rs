//! Lumped-element circuit model of one emitter/detector: capacitance and
//! inverse-inductance matrices, oscillator-basis mode parameters, flux
//! dispersion and the admittance estimate of data-qubit relaxation.

use std::f64::consts::PI;

use nalgebra::{Cholesky, Matrix2, Matrix3, SymmetricEigen, Vector2, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{
    ghz_to_joule, josephson_inductance, E_CHARGE, FEMTO, HBAR, PHI0_REDUCED, PICO, PLANCK,
};

/// Circuit parameters in SI units (J, F, H, Ω).
///
/// Serialized with the file-unit field names (`E_Jd_GHz`, `C_d_fF`, ...);
/// conversion happens in the serde adapter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircuitParamsFile", into = "CircuitParamsFile")]
pub struct CircuitParams {
    pub e_jd: f64,
    pub e_jc: f64,
    pub e_jw: f64,
    pub e_jcw: f64,
    pub c_d: f64,
    pub c_c: f64,
    pub c_w: f64,
    pub c_dc: f64,
    pub c_cw: f64,
    pub c_v: f64,
    pub m_d: f64,
    pub m_p: f64,
    /// Waveguide termination; `f64::INFINITY` is an open circuit.
    pub r_load: f64,
}

#[allow(non_snake_case)]
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitParamsFile {
    pub E_Jd_GHz: f64,
    pub E_Jc_GHz: f64,
    pub E_Jw_GHz: f64,
    pub E_Jcw_GHz: f64,
    pub C_d_fF: f64,
    pub C_c_fF: f64,
    pub C_w_fF: f64,
    pub C_dc_fF: f64,
    pub C_cw_fF: f64,
    pub C_v_fF: f64,
    #[serde(default)]
    pub M_d_pH: f64,
    #[serde(default)]
    pub M_p_pH: f64,
    /// `null` means an open termination.
    #[serde(default = "default_load")]
    pub R_load_ohm: Option<f64>,
}

fn default_load() -> Option<f64> {
    Some(50.0)
}

impl TryFrom<CircuitParamsFile> for CircuitParams {
    type Error = Error;
    fn try_from(f: CircuitParamsFile) -> Result<Self> {
        let p = CircuitParams {
            e_jd: ghz_to_joule(f.E_Jd_GHz),
            e_jc: ghz_to_joule(f.E_Jc_GHz),
            e_jw: ghz_to_joule(f.E_Jw_GHz),
            e_jcw: ghz_to_joule(f.E_Jcw_GHz),
            c_d: f.C_d_fF * FEMTO,
            c_c: f.C_c_fF * FEMTO,
            c_w: f.C_w_fF * FEMTO,
            c_dc: f.C_dc_fF * FEMTO,
            c_cw: f.C_cw_fF * FEMTO,
            c_v: f.C_v_fF * FEMTO,
            m_d: f.M_d_pH * PICO,
            m_p: f.M_p_pH * PICO,
            r_load: f.R_load_ohm.unwrap_or(f64::INFINITY),
        };
        p.validate()?;
        Ok(p)
    }
}

impl From<CircuitParams> for CircuitParamsFile {
    fn from(p: CircuitParams) -> Self {
        let ghz = |e: f64| e / PLANCK / 1e9;
        CircuitParamsFile {
            E_Jd_GHz: ghz(p.e_jd),
            E_Jc_GHz: ghz(p.e_jc),
            E_Jw_GHz: ghz(p.e_jw),
            E_Jcw_GHz: ghz(p.e_jcw),
            C_d_fF: p.c_d / FEMTO,
            C_c_fF: p.c_c / FEMTO,
            C_w_fF: p.c_w / FEMTO,
            C_dc_fF: p.c_dc / FEMTO,
            C_cw_fF: p.c_cw / FEMTO,
            C_v_fF: p.c_v / FEMTO,
            M_d_pH: p.m_d / PICO,
            M_p_pH: p.m_p / PICO,
            R_load_ohm: p.r_load.is_finite().then_some(p.r_load),
        }
    }
}

impl CircuitParams {
    /// The measured device used throughout the examples and tests.
    pub fn table_one() -> Self {
        CircuitParamsFile {
            E_Jd_GHz: 8.7,
            E_Jc_GHz: 13.0,
            E_Jw_GHz: 26.0,
            E_Jcw_GHz: 2.2,
            C_d_fF: 121.0,
            C_c_fF: 112.0,
            C_w_fF: 110.0,
            C_dc_fF: 3.8,
            C_cw_fF: 7.0,
            C_v_fF: 4.5,
            M_d_pH: 1.0,
            M_p_pH: 3.0,
            R_load_ohm: Some(50.0),
        }
        .try_into()
        .expect("built-in parameters are valid")
    }

    pub fn validate(&self) -> Result<()> {
        let caps = [
            ("C_d", self.c_d),
            ("C_c", self.c_c),
            ("C_w", self.c_w),
            ("C_dc", self.c_dc),
            ("C_cw", self.c_cw),
            ("C_v", self.c_v),
        ];
        let energies = [("E_Jd", self.e_jd), ("E_Jc", self.e_jc), ("E_Jw", self.e_jw), ("E_Jcw", self.e_jcw)];
        for (name, v) in caps.iter().chain(energies.iter()) {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::Unphysical(format!("{name} must be positive and finite, got {v:e}")));
            }
        }
        if !(self.r_load > 0.0) {
            return Err(Error::Unphysical(format!("R_load must be positive, got {}", self.r_load)));
        }
        Ok(())
    }

    /// Non-fatal design warnings.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let cap = 0.2 * self.e_jc.min(self.e_jw);
        if self.e_jcw > cap {
            out.push(format!(
                "E_Jcw = {:.3} GHz exceeds 0.2·min(E_Jc, E_Jw) = {:.3} GHz",
                self.e_jcw / PLANCK / 1e9,
                cap / PLANCK / 1e9
            ));
        }
        out
    }
}

/// Flux bias of the coupler loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxPoint {
    pub phi_bar: f64,
    #[serde(default)]
    pub amp: f64,
    #[serde(default)]
    pub omega_p: f64,
}

impl FluxPoint {
    pub fn dc(phi_bar: f64) -> Self {
        Self { phi_bar, amp: 0.0, omega_p: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amp >= 0.0) || !self.phi_bar.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid flux point {self:?}")));
        }
        if self.amp > 0.5 {
            log::warn!("flux modulation amplitude {} is outside the small-signal regime", self.amp);
        }
        Ok(())
    }
}

/// Oscillator-basis parameters of the three modes (SI: rad/s, Ω).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizedTed {
    pub omega_d: f64,
    pub omega_c: f64,
    pub omega_w: f64,
    pub nu_d: f64,
    pub nu_c: f64,
    pub nu_w: f64,
    pub z_d: f64,
    pub z_c: f64,
    pub z_w: f64,
    pub g_c: f64,
    /// Flux-independent prefactor √(Z_w Z_c)/2L_cw of the inductive coupling.
    pub g_l0: f64,
    pub g_l_bar: f64,
    pub a_amp: f64,
}

/// Node capacitance matrix (F), ordered (d, c, w).
pub fn capacitance_matrix(p: &CircuitParams) -> Result<Matrix3<f64>> {
    p.validate()?;
    let m = Matrix3::new(
        p.c_d + p.c_dc,
        -p.c_dc,
        0.0,
        -p.c_dc,
        p.c_c + p.c_dc + p.c_cw,
        -p.c_cw,
        0.0,
        -p.c_cw,
        p.c_w + p.c_cw + p.c_v,
    );
    if Cholesky::new(m).is_none() {
        return Err(Error::Unphysical("capacitance matrix is not positive definite".into()));
    }
    Ok(m)
}

/// Split an external loop flux over the (c, cw, w) branches so that no
/// charge is induced on the nodes. The three ratios are normalized to sum
/// to one.
pub fn branch_fluxes(p: &CircuitParams, phi_p: f64) -> Result<(f64, f64, f64)> {
    capacitance_matrix(p)?;
    let r_c = p.c_cw * p.c_w;
    let r_cw = p.c_c * p.c_w;
    let r_w = -p.c_cw * p.c_c;
    let sum = r_c + r_cw + r_w;
    if sum.abs() <= 1e-12 * (r_c.abs() + r_cw.abs() + r_w.abs()) {
        return Err(Error::Unphysical("flux allocation is singular".into()));
    }
    let phi_pc = phi_p * r_c / sum;
    let phi_pw = phi_p * r_w / sum;
    // Closing the sum exactly keeps φ_pc + φ_pcw + φ_pw = φ_p to rounding.
    let phi_pcw = phi_p - phi_pc - phi_pw;
    Ok((phi_pc, phi_pcw, phi_pw))
}

struct Inductances {
    l_d: f64,
    l_c: f64,
    l_w: f64,
    l_cw: f64,
}

fn inductances(p: &CircuitParams) -> Inductances {
    Inductances {
        l_d: josephson_inductance(p.e_jd),
        l_c: josephson_inductance(p.e_jc),
        l_w: josephson_inductance(p.e_jw),
        l_cw: josephson_inductance(p.e_jcw),
    }
}

/// Linearized inverse-inductance matrix (1/H) at a static loop flux.
pub fn inverse_inductance_matrix(p: &CircuitParams, phi_p: f64) -> Result<Matrix3<f64>> {
    let (phi_pc, phi_pcw, phi_pw) = branch_fluxes(p, phi_p)?;
    let l = inductances(p);
    let y_c = phi_pc.cos() / l.l_c;
    let y_cw = phi_pcw.cos() / l.l_cw;
    let y_w = phi_pw.cos() / l.l_w;
    let m = Matrix3::new(1.0 / l.l_d, 0.0, 0.0, 0.0, y_c + y_cw, -y_cw, 0.0, -y_cw, y_w + y_cw);
    for (k, name) in ["d", "c", "w"].iter().enumerate() {
        if m[(k, k)] <= 0.0 {
            return Err(Error::UnstableMode { mode: (*name).into(), flux: phi_p, value: m[(k, k)] });
        }
    }
    Ok(m)
}

pub fn quantize(p: &CircuitParams, flux: &FluxPoint) -> Result<QuantizedTed> {
    flux.validate()?;
    for w in p.warnings() {
        log::warn!("{w}");
    }
    let c = capacitance_matrix(p)?;
    let c_inv = c.try_inverse().ok_or_else(|| Error::Unphysical("singular capacitance matrix".into()))?;
    let l_inv = inverse_inductance_matrix(p, flux.phi_bar)?;
    let mut omega = [0.0; 3];
    let mut nu = [0.0; 3];
    let mut z = [0.0; 3];
    for q in 0..3 {
        z[q] = (c_inv[(q, q)] / l_inv[(q, q)]).sqrt();
        // Charging energy e²Č⁻¹/2 sets the quartic correction −E_C.
        nu[q] = -E_CHARGE * E_CHARGE * c_inv[(q, q)] / (2.0 * HBAR);
        omega[q] = (c_inv[(q, q)] * l_inv[(q, q)]).sqrt() + nu[q];
    }
    let g_c = c_inv[(0, 1)] / (2.0 * (z[0] * z[1]).sqrt());
    let l_cw = inductances(p).l_cw;
    let g_l0 = (z[2] * z[1]).sqrt() / (2.0 * l_cw);
    Ok(QuantizedTed {
        omega_d: omega[0],
        omega_c: omega[1],
        omega_w: omega[2],
        nu_d: nu[0],
        nu_c: nu[1],
        nu_w: nu[2],
        z_d: z[0],
        z_c: z[1],
        z_w: z[2],
        g_c,
        g_l0,
        g_l_bar: g_l0 * flux.phi_bar.cos(),
        a_amp: g_l0 * flux.amp * flux.phi_bar.sin(),
    })
}

/// One row of a flux-dispersion table. `None` marks a failed point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DispersionPoint {
    pub phi_bar: f64,
    /// (ω_d, ω_c, ω_w) in rad/s.
    pub omegas: Option<[f64; 3]>,
    pub error: Option<String>,
}

fn wrap_phase(phi: f64) -> f64 {
    let w = phi - 2.0 * PI * (phi / (2.0 * PI)).round();
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Classical minimum of the coupler potential −E_Jc cos φ_c − E_Jw cos φ_w
/// − E_Jcw cos(φ_w − φ_c + φ_p), found by damped Newton iteration.
/// Returns the Hessian (J) at the minimum.
fn potential_hessian(p: &CircuitParams, phi_p: f64) -> Result<Matrix2<f64>> {
    let (a, b, k) = (p.e_jc, p.e_jw, p.e_jcw);
    let energy = |x: &Vector2<f64>| -a * x[0].cos() - b * x[1].cos() - k * (x[1] - x[0] + phi_p).cos();
    let grad = |x: &Vector2<f64>| {
        let s = (x[1] - x[0] + phi_p).sin();
        Vector2::new(a * x[0].sin() - k * s, b * x[1].sin() + k * s)
    };
    let hess = |x: &Vector2<f64>| {
        let cth = (x[1] - x[0] + phi_p).cos();
        Matrix2::new(a * x[0].cos() + k * cth, -k * cth, -k * cth, b * x[1].cos() + k * cth)
    };
    let mut x = Vector2::zeros();
    let scale = a.max(b);
    for _ in 0..200 {
        let g = grad(&x);
        if g.norm() < 1e-15 * scale {
            break;
        }
        let h = hess(&x);
        let step = match Cholesky::new(h) {
            Some(ch) => -ch.solve(&g),
            None => -g / scale,
        };
        let e0 = energy(&x);
        let mut t = 1.0;
        while t > 1e-12 && energy(&(x + step * t)) > e0 + 1e-18 * scale {
            t *= 0.5;
        }
        x += step * t;
    }
    let h = hess(&x);
    if Cholesky::new(h).is_none() {
        return Err(Error::UnstableMode { mode: "c/w".into(), flux: phi_p, value: h.determinant() });
    }
    Ok(h)
}

/// Normal-mode 0→1 frequencies (rad/s), labelled (d, c, w), of the circuit
/// linearized about its static equilibrium at loop flux `phi_bar`.
pub fn normal_modes(p: &CircuitParams, phi_bar: f64) -> Result<[f64; 3]> {
    let c = capacitance_matrix(p)?;
    let hess = potential_hessian(p, wrap_phase(phi_bar))?;
    let phi0_sq = PHI0_REDUCED * PHI0_REDUCED;
    let l_d = inductances(p).l_d;
    let mut l_inv = Matrix3::zeros();
    l_inv[(0, 0)] = 1.0 / l_d;
    for i in 0..2 {
        for j in 0..2 {
            l_inv[(i + 1, j + 1)] = hess[(i, j)] / phi0_sq;
        }
    }
    // Ľ⁻¹ v = ω² Č v via Č = R Rᵀ.
    let chol = Cholesky::new(c).ok_or_else(|| Error::Unphysical("capacitance matrix is not positive definite".into()))?;
    let r = chol.l();
    let r_inv = r.try_inverse().ok_or_else(|| Error::Unphysical("singular capacitance factor".into()))?;
    let m = r_inv * l_inv * r_inv.transpose();
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let vecs = r_inv.transpose() * eig.eigenvectors;
    let mut overlap = [[0.0; 3]; 3];
    for k in 0..3 {
        let v: Vector3<f64> = vecs.column(k).into();
        let n = v.norm_squared();
        for q in 0..3 {
            overlap[k][q] = v[q] * v[q] / n;
        }
    }
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    // Eigen-index order sorted by frequency, used to break overlap ties.
    let mut by_freq = [0usize, 1, 2];
    by_freq.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut best: Option<([usize; 3], f64, bool)> = None;
    for perm in perms {
        // perm[q] = eigen index assigned to bare mode q
        let score: f64 = (0..3).map(|q| overlap[perm[q]][q]).sum();
        let freq_ordered = is_frequency_consistent(&perm, &by_freq, p);
        let better = match &best {
            None => true,
            Some((_, s, f)) => score > s + 1e-12 || ((score - s).abs() <= 1e-12 && freq_ordered && !f),
        };
        if better {
            best = Some((perm, score, freq_ordered));
        }
    }
    let perm = best.expect("six permutations").0;
    let c_inv = c.try_inverse().expect("positive definite");
    let mut out = [0.0; 3];
    for q in 0..3 {
        let lam = eig.eigenvalues[perm[q]];
        if lam <= 0.0 {
            return Err(Error::UnstableMode { mode: ["d", "c", "w"][q].into(), flux: phi_bar, value: lam });
        }
        let nu = -E_CHARGE * E_CHARGE * c_inv[(q, q)] / (2.0 * HBAR);
        out[q] = lam.sqrt() + nu;
    }
    Ok(out)
}

/// Whether the assignment orders the modes like their uncoupled frequencies.
fn is_frequency_consistent(perm: &[usize; 3], by_freq: &[usize; 3], p: &CircuitParams) -> bool {
    let bare = [p.e_jd / (p.c_d + p.c_dc), p.e_jc / p.c_c, p.e_jw / p.c_w];
    let mut bare_order = [0usize, 1, 2];
    bare_order.sort_by(|&i, &j| bare[i].total_cmp(&bare[j]));
    (0..3).all(|rank| perm[bare_order[rank]] == by_freq[rank])
}

/// Normal-mode frequencies on a grid of loop fluxes. Failed points are
/// reported in place and the sweep continues.
pub fn flux_dispersion(p: &CircuitParams, grid: &[f64]) -> Result<Vec<DispersionPoint>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("flux grid is empty".into()));
    }
    p.validate()?;
    Ok(grid
        .iter()
        .map(|&phi_bar| match normal_modes(p, phi_bar) {
            Ok(o) => DispersionPoint { phi_bar, omegas: Some(o), error: None },
            Err(e) => DispersionPoint { phi_bar, omegas: None, error: Some(e.to_string()) },
        })
        .collect())
}

fn parallel(a: C64, b: C64) -> C64 {
    let s = a + b;
    if s.norm() == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        a * b / s
    }
}

/// Admittance (S) from the data-qubit node to ground with the waveguide
/// replaced by the termination resistor.
pub fn node_admittance(p: &CircuitParams, omega: f64, flux: &FluxPoint) -> Result<C64> {
    p.validate()?;
    let (phi_pc, phi_pcw, phi_pw) = branch_fluxes(p, flux.phi_bar)?;
    let l = inductances(p);
    let iw = C64::new(0.0, omega);
    let g_load = C64::from(if p.r_load.is_finite() { 1.0 / p.r_load } else { 0.0 });
    let inductive = |l0: f64, phi: f64| C64::from(phi.cos()) / (iw * l0);
    let y_w = iw * p.c_w + inductive(l.l_w, phi_pw) + parallel(iw * p.c_v, g_load);
    // The c–w branch is the coupling capacitor in parallel with the coupler junction.
    let y_cw = iw * p.c_cw + inductive(l.l_cw, phi_pcw);
    let y_c = iw * p.c_c + inductive(l.l_c, phi_pc) + parallel(y_cw, y_w);
    Ok(iw * p.c_d + C64::from(1.0) / (iw * l.l_d) + parallel(iw * p.c_dc, y_c))
}

/// Relaxation rate (1/s) of the data qubit through the waveguide load.
pub fn purcell_rate(p: &CircuitParams, omega: f64, flux: &FluxPoint) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter(format!("frequency must be positive, got {omega}")));
    }
    let y = node_admittance(p, omega, flux)?;
    Ok(y.re / (p.c_d + p.c_dc))
}
