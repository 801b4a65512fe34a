//! Coherent backscatter off a driven waveguide transmon.

use crate::error::{Error, Result};
use crate::fock::{expectation, lowering, ProductSpace, C64};
use crate::lindblad::{rabi_from_power, steady_state, MasterEq};
use crate::ted::{kerr, TedParams};
use crate::units::mhz_to_rad;

use super::{run_points, ResultTable, SweepOptions};

#[derive(Clone, Copy, Debug)]
pub struct ScatterOptions {
    /// Levels kept for the waveguide transmon; 2 is the two-level limit.
    pub levels: usize,
}

impl Default for ScatterOptions {
    fn default() -> Self {
        Self { levels: 3 }
    }
}

/// Complex reflection `⟨a_out⟩/√(γn̄)` in steady state, for a drive of `n_bar`
/// photons per 1/γ detuned by `detuning` (rad/s, drive minus mode).
pub fn reflection(ted: &TedParams, n_bar: f64, detuning: f64, levels: usize) -> Result<C64> {
    if !(n_bar > 0.0) {
        return Err(Error::InvalidParameter(format!("drive power must be positive, got n̄ = {n_bar}")));
    }
    let space = ProductSpace::from_dims(&[("w", levels)])?;
    let w = lowering(&space, "w")?;
    let omega_a = ted.omega_w + detuning;
    let rabi = rabi_from_power(n_bar, ted.gamma, omega_a, ted.omega_w)?;
    let mut h = (&w.dag() * &w).scale(-detuning);
    h += &kerr(&w, ted.nu_w);
    h += &(&w - &w.dag()).scale(C64::new(0.0, rabi / 2.0));
    let meq = MasterEq::new(h)
        .with_collapse(ted.gamma * (1.0 + ted.n_th), w.clone())?
        .with_thermal(ted.gamma * ted.n_th, w.dag())?;
    let rho = steady_state(&meq)?;
    let a_in = (ted.gamma * n_bar).sqrt();
    Ok((a_in + (ted.gamma / 2.0).sqrt() * expectation(&rho, &w)?) / a_in)
}

/// |r| over an n̄ × detuning grid (detunings in MHz).
pub fn scattering_sweep(
    ted: &TedParams,
    n_bar: &[f64],
    detuning_mhz: &[f64],
    opts: &ScatterOptions,
    sweep: &SweepOptions,
) -> Result<ResultTable> {
    ted.validate()?;
    if n_bar.is_empty() || detuning_mhz.is_empty() {
        return Err(Error::InvalidParameter("scattering grids must be non-empty".into()));
    }
    let points: Vec<(f64, f64)> =
        n_bar.iter().flat_map(|&n| detuning_mhz.iter().map(move |&d| (n, d))).collect();
    let results = run_points(points.len(), sweep, |k| {
        let (n, d) = points[k];
        reflection(ted, n, mhz_to_rad(d), opts.levels)
    });
    let mut table = ResultTable::new(&["n_bar", "detuning_MHz"], &["r_abs", "r_re", "r_im"]);
    for ((n, d), r) in points.iter().zip(results) {
        table.push(&[*n, *d], r.map(|r| vec![r.norm(), r.re, r.im]).map_err(|e| e.to_string()))?;
    }
    table.metadata = serde_json::json!({
        "kind": "scatter",
        "levels": opts.levels,
        "device": ted,
    });
    Ok(table)
}
