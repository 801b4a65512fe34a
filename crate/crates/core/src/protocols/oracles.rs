//! Checks of the two-mode reduction against the three-mode model.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::C64;
use crate::ted::{coupling_per_drive, rwa_hamiltonian, DriveSpec, Envelope, TedParams, Truncation};

/// Single-excitation block of the three-mode Hamiltonian at drive `amp` and
/// carrier `omega_p`, in the order |d⟩, |c⟩, |w⟩.
fn single_excitation_block(ted: &TedParams, amp: f64, omega_p: f64) -> Result<DMatrix<C64>> {
    let trunc = Truncation { d: 2, c: 2, w: 2 };
    let drive = DriveSpec::Parametric { omega: omega_p, envelope: Envelope::Constant { amplitude: amp } };
    let h = rwa_hamiltonian(ted, &[drive], &trunc, 0.0)?;
    let space = h.space().clone();
    let idx = [space.index(&[1, 0, 0])?, space.index(&[0, 1, 0])?, space.index(&[0, 0, 1])?];
    Ok(DMatrix::from_fn(3, 3, |i, j| h.get(idx[i], idx[j])))
}

/// Eigenvalues with the coupler weight of each eigenvector.
fn spectrum(block: DMatrix<C64>) -> Vec<(f64, f64)> {
    let eig = block.symmetric_eigen();
    (0..3).map(|k| (eig.eigenvalues[k], eig.eigenvectors[(1, k)].norm_sqr())).collect()
}

/// Splitting of the two levels that are not coupler-like.
fn splitting(ted: &TedParams, amp: f64, omega_p: f64) -> Result<f64> {
    let mut s = spectrum(single_excitation_block(ted, amp, omega_p)?);
    s.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok((s[0].0 - s[1].0).abs())
}

/// Energy of the coupler-like level.
fn coupler_level(ted: &TedParams, amp: f64, omega_p: f64) -> Result<f64> {
    let s = spectrum(single_excitation_block(ted, amp, omega_p)?);
    Ok(s.iter().max_by(|a, b| a.1.total_cmp(&b.1)).expect("three levels").0)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SwComparison {
    /// Carrier at the minimum splitting (rad/s).
    pub carrier: f64,
    /// Minimum d–w splitting of the three-mode model (rad/s).
    pub full_splitting: f64,
    /// `2|g_p|` from the reduced model at that carrier.
    pub effective_splitting: f64,
    pub relative_error: f64,
}

/// Compare the d–w avoided-crossing gap of the three-mode model, minimized
/// over the carrier, with `2|g_p|` of the reduced model.
pub fn sw_transfer_check(ted: &TedParams, amp: f64) -> Result<SwComparison> {
    ted.validate()?;
    if !(ted.omega_w > ted.omega_d) {
        return Err(Error::InvalidParameter("transfer check assumes ω_w > ω_d".into()));
    }
    if !(amp > 0.0) {
        return Err(Error::InvalidParameter("drive amplitude must be positive".into()));
    }
    let p0 = ted.omega_w - ted.omega_d;
    let g = (coupling_per_drive(ted, p0)? * amp).abs();
    let det = ted.omega_d - ted.omega_c;
    let shift = (ted.g_c * ted.g_c / det).abs() + (amp * amp / (4.0 * det)).abs();
    let (mut lo, mut hi) = (p0 - 3.0 * (shift + g), p0 + 3.0 * (shift + g));
    // Golden-section search; the gap is unimodal across the crossing.
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = splitting(ted, amp, x1)?;
    let mut f2 = splitting(ted, amp, x2)?;
    while hi - lo > 1e-9 * g.max(1.0) {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = splitting(ted, amp, x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = splitting(ted, amp, x2)?;
        }
    }
    let carrier = 0.5 * (lo + hi);
    let full = splitting(ted, amp, carrier)?;
    let eff = 2.0 * (coupling_per_drive(ted, carrier)? * amp).abs();
    Ok(SwComparison { carrier, full_splitting: full, effective_splitting: eff, relative_error: (full - eff).abs() / eff })
}

/// Drive-induced shift of the waveguide mode at amplitude `amp`, read from
/// the opposite shift of the coupler-like level.
pub fn stark_shift_three_mode(ted: &TedParams, amp: f64, omega_p: f64) -> Result<f64> {
    Ok(-(coupler_level(ted, amp, omega_p)? - coupler_level(ted, 0.0, omega_p)?))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuadraticFit {
    /// Coefficient of `y = k x²`.
    pub k: f64,
    /// Largest residual relative to the largest |y|.
    pub max_residual: f64,
}

/// Least-squares fit of `y = k x²`.
pub fn fit_quadratic(xs: &[f64], ys: &[f64]) -> Result<QuadraticFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter("fit needs at least two matching points".into()));
    }
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| y * x * x).sum();
    let den: f64 = xs.iter().map(|x| x.powi(4)).sum();
    if den == 0.0 {
        return Err(Error::InvalidParameter("fit abscissae are all zero".into()));
    }
    let k = num / den;
    let scale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    let worst = xs.iter().zip(ys).fold(0.0f64, |m, (x, y)| m.max((y - k * x * x).abs()));
    Ok(QuadraticFit { k, max_residual: if scale > 0.0 { worst / scale } else { 0.0 } })
}
