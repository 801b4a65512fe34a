//! Experiment scripts: backscatter, reset, emission, detection and the
//! two-device pitch-detect demonstration.

mod network;
mod oracles;
mod scatter;
mod single;
mod spectrum;
mod spec;
mod table;

pub use network::{
    detection_probability, fock_check_table, pitch_detect, run_protocol, DetectionPoint, NetworkOptions, NetworkParams,
    ProtocolOutcome,
};
pub use oracles::{fit_quadratic, stark_shift_three_mode, sw_transfer_check, QuadraticFit, SwComparison};
pub use scatter::{reflection, scattering_sweep, ScatterOptions};
pub use single::{
    absorption_efficiency, coherent_detection_sweep, emission_drive, reset_drive, simulate_detection, simulate_emission, simulate_emission_mixed, simulate_reset,
    DetectionInput, DetectionOutcome, EmissionOutcome, RunOptions,
};
pub use spec::{Axis, ProtocolSpec, ResolvedSegment, Segment, SegmentKind, SweepParam, SweepSpec, Target};
pub use spectrum::{clipping_estimate, spectral_records, ClippingEstimate, Spectrum};
pub use table::{PointError, ResultTable};

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fock::Op;
use crate::lindblad::MasterEq;

/// Worker count and progress reporting for sweeps.
#[derive(Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
    /// Called with (completed, total) after each point.
    pub progress: Option<Arc<dyn Fn(usize, usize) + Send + Sync>>,
}

impl std::fmt::Debug for SweepOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SweepOptions").field("jobs", &self.jobs).finish_non_exhaustive()
    }
}

/// Evaluate `f` on indices `0..n` in parallel, results in index order.
pub(crate) fn run_points<T: Send>(n: usize, opts: &SweepOptions, f: impl Fn(usize) -> T + Send + Sync) -> Vec<T> {
    use rayon::prelude::*;
    let done = AtomicUsize::new(0);
    let work = || {
        (0..n)
            .into_par_iter()
            .map(|k| {
                let r = f(k);
                let c = done.fetch_add(1, Ordering::SeqCst) + 1;
                if let Some(p) = &opts.progress {
                    p(c, n);
                }
                r
            })
            .collect()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build() {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    }
}

/// Intrinsic data-qubit T1 and T2 used when a run asks for them.
pub const DEFAULT_T1: f64 = 81e-6;
pub const DEFAULT_T2: f64 = 41e-6;

/// Probability that the data qubit relaxes during the detection window and
/// readout: `1 − exp(−(window + readout)/T1)`.
pub fn dark_count_estimate(t1: f64, window: f64, readout: f64) -> Result<f64> {
    if !(t1 > 0.0) {
        return Err(Error::InvalidParameter(format!("T1 must be positive, got {t1}")));
    }
    if !(window >= 0.0 && readout >= 0.0) {
        return Err(Error::InvalidParameter("window and readout durations must be non-negative".into()));
    }
    Ok(1.0 - (-(window + readout) / t1).exp())
}

/// Add amplitude damping at 1/T1 and pure dephasing at 1/T2 − 1/(2T1) on
/// the data qubit with lowering operator `d`.
pub(crate) fn add_intrinsic(meq: &mut MasterEq, d: &Op, t1: Option<f64>, t2: Option<f64>) -> Result<()> {
    let g1 = t1.map_or(0.0, |t| 1.0 / t);
    if let Some(t) = t1 {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter("T1 must be positive".into()));
        }
    }
    meq.add_collapse(g1, d.clone())?;
    if let Some(t2) = t2 {
        let gphi = 1.0 / t2 - g1 / 2.0;
        if gphi < -1e-12 * g1 {
            return Err(Error::InvalidParameter(format!("T2 = {t2:e} s exceeds 2·T1")));
        }
        // 𝓛[n] at rate κ damps the 0–1 coherence at κ/2.
        let n = &d.dag() * d;
        meq.add_collapse(2.0 * gphi.max(0.0), n)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
