//! Spectra of output-field records and the photon/absorber overlap.

use std::f64::consts::PI;

use nalgebra::DVector;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{C64, ZERO};
use crate::ted::{detection_drive_frequency, EffectiveTed, Envelope, TedParams};

use super::single::{absorption_efficiency, emission_drive, simulate_emission, RunOptions};

const ZERO_PAD: usize = 4;

#[derive(Clone, Debug, Serialize)]
pub struct Spectrum {
    /// Bin frequencies (Hz), ascending, in the frame of the records.
    pub freq_hz: Vec<f64>,
    /// Per record, `|Σ w_k x_k e^{+2πi f t_k}| / Σ w_k`.
    pub magnitude: Vec<(String, Vec<f64>)>,
    pub resolution_hz: f64,
    pub window: &'static str,
    pub zero_pad: usize,
}

impl Spectrum {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.magnitude.iter().find(|m| m.0 == name).map(|m| m.1.as_slice())
    }

    /// Frequency of the largest bin of a record.
    pub fn peak(&self, name: &str) -> Option<(f64, f64)> {
        let m = self.get(name)?;
        let k = (0..m.len()).max_by(|&a, &b| m[a].total_cmp(&m[b]))?;
        Some((self.freq_hz[k], m[k]))
    }
}

fn check_uniform(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::NonUniformSampling);
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(Error::NonUniformSampling);
    }
    Ok(dt)
}

fn flat_top(n: usize) -> Vec<f64> {
    const A: [f64; 5] = [0.21557895, 0.41663158, 0.277263158, 0.083578947, 0.006947368];
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|k| {
            let x = 2.0 * PI * k as f64 / (n - 1) as f64;
            A[0] - A[1] * x.cos() + A[2] * (2.0 * x).cos() - A[3] * (3.0 * x).cos() + A[4] * (4.0 * x).cos()
        })
        .collect()
}

/// Transform with kernel `e^{+2πi k n/N}` so that a record `e^{−iωt}`
/// peaks at `+ω/2π`. Returns bins in ascending frequency order.
fn transform(x: &[C64], weights: &[f64], pad: usize) -> Vec<C64> {
    let n = x.len() * pad;
    let mut buf = vec![ZERO; n];
    for (k, (v, w)) in x.iter().zip(weights).enumerate() {
        buf[k] = v * w;
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let half = n / 2;
    buf.rotate_left(n - half);
    buf
}

fn bin_freqs(n: usize, dt: f64) -> Vec<f64> {
    let half = n / 2;
    (0..n).map(|k| (k as f64 - half as f64) / (n as f64 * dt)).collect()
}

/// Flat-top windowed spectra, zero-padded ×4, of uniformly sampled records.
pub fn spectral_records(times: &[f64], records: &[(&str, &[C64])]) -> Result<Spectrum> {
    let dt = check_uniform(times)?;
    let n = times.len();
    if let Some((name, _)) = records.iter().find(|r| r.1.len() != n) {
        return Err(Error::InvalidParameter(format!("record `{name}` length differs from the time axis")));
    }
    let w = flat_top(n);
    let norm: f64 = w.iter().sum();
    let magnitude = records
        .iter()
        .map(|(name, x)| (name.to_string(), transform(x, &w, ZERO_PAD).iter().map(|v| v.norm() / norm).collect()))
        .collect();
    Ok(Spectrum {
        freq_hz: bin_freqs(n * ZERO_PAD, dt),
        magnitude,
        resolution_hz: 1.0 / (n as f64 * dt),
        window: "flat-top",
        zero_pad: ZERO_PAD,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClippingEstimate {
    /// Fraction of the photon's spectral weight outside the absorber's band.
    pub clipped: f64,
    pub absorbed: f64,
    pub resolution_hz: f64,
}

/// Overlap of a source photon's spectrum with the measurement device's
/// absorption line. The photon is the emitted amplitude `⟨w⟩(t)` of a run
/// from `(|0⟩+|1⟩)/√2` at zero temperature; the absorber is held at
/// `g_pm` (rad/s) on its detection carrier.
pub fn clipping_estimate(
    sted: &TedParams,
    mted: &TedParams,
    peak_over_gamma: f64,
    width: f64,
    g_pm: f64,
    opts: &RunOptions,
) -> Result<ClippingEstimate> {
    let mut cold = sted.clone();
    cold.n_th = 0.0;
    let tail = 12.0 / sted.gamma;
    let span = (0.0, width + tail);
    let eff = emission_drive(&cold, peak_over_gamma, width / 2.0, width)?;
    let mut amp = DVector::from_element(opts.trunc.d, ZERO);
    amp[0] = C64::from(std::f64::consts::FRAC_1_SQRT_2);
    amp[1] = amp[0];
    let samples = ((span.1 / 2e-9).ceil() as usize).max(opts.samples);
    let run = simulate_emission(&eff, &amp, span, &RunOptions { samples, ..*opts })?;
    let xi = run.trajectory.record("w").expect("emission records w");
    let dt = check_uniform(&run.trajectory.times)?;
    let pad = 16;
    let ones = vec![1.0; xi.len()];
    let spec = transform(xi, &ones, pad);
    let freqs = bin_freqs(spec.len(), dt);
    let absorber = EffectiveTed::from_carrier(mted, detection_drive_frequency(mted), Envelope::Constant { amplitude: g_pm })?
        .with_frame(sted.omega_w);
    let power: Vec<f64> = spec.iter().map(|v| v.norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    let floor = 1e-14 * power.iter().cloned().fold(0.0, f64::max);
    let mut absorbed = 0.0;
    for (p, f) in power.iter().zip(&freqs) {
        if *p > floor {
            absorbed += p * absorption_efficiency(&absorber, 2.0 * PI * f)?;
        }
    }
    let absorbed = absorbed / total;
    Ok(ClippingEstimate { clipped: 1.0 - absorbed, absorbed, resolution_hz: 1.0 / (spec.len() as f64 * dt) })
}
