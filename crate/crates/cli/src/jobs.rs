//! The computations behind each subcommand.

use std::path::Path;
use std::sync::Arc;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use tedsim::circuit::{flux_dispersion, purcell_rate, quantize, CircuitParams, CircuitParamsFile, FluxPoint};
use tedsim::fock::{ONE, ZERO};
use tedsim::protocols::{
    coherent_detection_sweep, emission_drive, fock_check_table, pitch_detect, scattering_sweep, simulate_emission,
    spectral_records, Axis, NetworkOptions, NetworkParams, PointError, ProtocolSpec, ResultTable, RunOptions,
    ScatterOptions, SweepOptions, SweepParam, SweepSpec,
};
use tedsim::ted::{TedParams, TedParamsFile, Truncation};
use tedsim::units::{rad_to_ghz, MICRO};
use tedsim::C64;

use crate::failure::Failure;
use crate::inputs::{Doc, Inputs};

/// Numerical settings shared by all subcommands; `None` keeps the
/// command's own default.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Numerics {
    pub trunc: Option<Truncation>,
    pub tol: Option<f64>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct QuantizeOpts {
    /// Static loop flux φ̄ (rad).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phi_bar: f64,
    /// Flux modulation amplitude (rad).
    #[arg(long, default_value_t = 0.0)]
    pub amp: f64,
    /// Waveguide decay rate (1/s) written into the derived device model.
    #[arg(long, default_value_t = 11.2e6)]
    pub gamma: f64,
    /// Thermal occupation written into the derived device model.
    #[arg(long, default_value_t = 0.0)]
    pub n_th: f64,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct DispersionOpts {
    #[arg(long, default_value_t = -std::f64::consts::PI, allow_negative_numbers = true)]
    pub phi_min: f64,
    #[arg(long, default_value_t = std::f64::consts::PI, allow_negative_numbers = true)]
    pub phi_max: f64,
    #[arg(long, default_value_t = 121)]
    pub points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialQubit {
    Excited,
    Superposition,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct EmitOpts {
    /// Peak drive in units of γ.
    #[arg(long, default_value_t = 0.472)]
    pub peak_over_gamma: f64,
    /// Cosine-squared envelope width (μs).
    #[arg(long, default_value_t = 2.0)]
    pub width_us: f64,
    /// Time simulated after the envelope ends (μs).
    #[arg(long, default_value_t = 1.0)]
    pub tail_us: f64,
    #[arg(long, default_value_t = 401)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = InitialQubit::Excited)]
    pub initial: InitialQubit,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct DetectOpts {
    /// Detection carrier strength in units of γ.
    #[arg(long, default_value_t = 0.5)]
    pub g_over_gamma: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    Quantize(QuantizeOpts),
    Dispersion(DispersionOpts),
    Scatter,
    Emit(EmitOpts),
    Detect(DetectOpts),
    PitchDetect,
    FockCheck,
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Quantize(_) => "quantize",
            Job::Dispersion(_) => "dispersion",
            Job::Scatter => "scatter",
            Job::Emit(_) => "emit",
            Job::Detect(_) => "detect",
            Job::PitchDetect => "pitch-detect",
            Job::FockCheck => "fock-check",
        }
    }
}

/// What a job left behind.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<String>,
    pub resolved: Value,
    pub errors: Vec<PointError>,
}

pub struct Context<'a> {
    pub out: &'a Path,
    pub numerics: &'a Numerics,
    pub sweep: SweepOptions,
}

impl Context<'_> {
    fn write_table(&self, table: &ResultTable, name: &str, outcome: &mut Outcome) -> Result<(), Failure> {
        let path = self.out.join(name);
        let side = table.write(&path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        outcome.files.push(name.to_string());
        outcome.files.push(side.file_name().unwrap().to_string_lossy().into_owned());
        outcome.errors.extend(table.errors.iter().cloned());
        Ok(())
    }

    fn write_json(&self, value: &Value, name: &str, outcome: &mut Outcome) -> Result<(), Failure> {
        let path = self.out.join(name);
        let text = serde_json::to_string_pretty(value).map_err(Failure::io)?;
        std::fs::write(&path, text + "\n").map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        outcome.files.push(name.to_string());
        Ok(())
    }

    fn run_options(&self) -> RunOptions {
        let d = RunOptions::default();
        RunOptions { trunc: self.numerics.trunc.unwrap_or(d.trunc), tol: self.numerics.tol.unwrap_or(d.tol), ..d }
    }

    fn network_options(&self) -> NetworkOptions {
        let d = NetworkOptions::default();
        let detector = self.numerics.trunc.unwrap_or(d.detector);
        let source = Truncation { d: detector.d, c: detector.c, w: d.source.w };
        NetworkOptions { source, detector, tol: self.numerics.tol.unwrap_or(d.tol), ..d }
    }
}

/// Device model from a parameter file or from a `quantize` output.
fn device(doc: &Doc) -> Result<TedParams, Failure> {
    match doc.document.get("ted") {
        Some(ted) => TedParams::deserialize(ted).map_err(|e| Failure::config(format!("{}: invalid device model: {e}", doc.path))),
        None => doc.parse("device parameters"),
    }
}

/// Reset 2 μs, 3 μs window with the photon centred 1.5 μs in, 4 μs readout.
pub fn default_protocol() -> ProtocolSpec {
    ProtocolSpec::pitch_detect(2e-6, 3e-6, 2e-6, 1.5e-6, 4e-6)
}

fn protocol(inputs: &Inputs) -> Result<ProtocolSpec, Failure> {
    let p = match &inputs.protocol {
        Some(doc) => doc.parse::<ProtocolSpec>("protocol")?,
        None => default_protocol(),
    };
    p.resolve().map_err(Failure::config)?;
    Ok(p)
}

fn sweep(doc: &Doc) -> Result<SweepSpec, Failure> {
    let s: SweepSpec = doc.parse("sweep")?;
    s.validate().map_err(|e| Failure::config(format!("{}: {e}", doc.path)))?;
    Ok(s)
}

/// Values of the named axes; `None` for an absent optional axis. Any other
/// axis is a configuration error.
fn pick_axes(doc: &Doc, s: &SweepSpec, wanted: &[SweepParam]) -> Result<Vec<Option<Vec<f64>>>, Failure> {
    let axes: Vec<&Axis> = std::iter::once(&s.axis1).chain(s.axis2.as_ref()).collect();
    for a in &axes {
        if !wanted.contains(&a.name) {
            return Err(Failure::config(format!("{}: axis `{}` does not apply here", doc.path, a.name.column())));
        }
    }
    Ok(wanted.iter().map(|w| axes.iter().find(|a| a.name == *w).map(|a| a.values.clone())).collect())
}

pub fn execute(job: &Job, inputs: &Inputs, ctx: &Context) -> Result<Outcome, Failure> {
    let mut outcome = Outcome::default();
    match job {
        Job::Quantize(o) => {
            let circuit: CircuitParams = inputs.params()?.parse("circuit parameters")?;
            let flux = FluxPoint { phi_bar: o.phi_bar, amp: o.amp, omega_p: 0.0 };
            flux.validate().map_err(Failure::config)?;
            let q = quantize(&circuit, &flux).map_err(Failure::sim)?;
            let purcell = purcell_rate(&circuit, q.omega_d, &flux).map_err(Failure::sim)?;
            let ted = TedParams::from_quantized(&q, o.gamma, o.n_th).map_err(Failure::config)?;
            let doc = json!({
                "inputs": { "circuit": CircuitParamsFile::from(circuit.clone()), "flux": flux },
                "derived": {
                    "omega_d_GHz": rad_to_ghz(q.omega_d),
                    "omega_c_GHz": rad_to_ghz(q.omega_c),
                    "omega_w_GHz": rad_to_ghz(q.omega_w),
                    "nu_d_GHz": rad_to_ghz(q.nu_d),
                    "nu_c_GHz": rad_to_ghz(q.nu_c),
                    "nu_w_GHz": rad_to_ghz(q.nu_w),
                    "Z_d_ohm": q.z_d,
                    "Z_c_ohm": q.z_c,
                    "Z_w_ohm": q.z_w,
                    "g_C_GHz": rad_to_ghz(q.g_c),
                    "g_L0_GHz": rad_to_ghz(q.g_l0),
                    "g_L_bar_GHz": rad_to_ghz(q.g_l_bar),
                    "A_GHz": rad_to_ghz(q.a_amp),
                    "purcell_T1_ms": 1e3 / purcell,
                },
                "ted": TedParamsFile::from(ted),
            });
            ctx.write_json(&doc, "quantized.json", &mut outcome)?;
            outcome.resolved = json!({ "circuit": circuit, "flux": flux });
        }
        Job::Dispersion(o) => {
            let circuit: CircuitParams = inputs.params()?.parse("circuit parameters")?;
            if o.points < 2 || !(o.phi_max > o.phi_min) {
                return Err(Failure::config("flux grid needs at least two points and phi_max > phi_min"));
            }
            let step = (o.phi_max - o.phi_min) / (o.points - 1) as f64;
            let grid: Vec<f64> = (0..o.points).map(|k| o.phi_min + step * k as f64).collect();
            let rows = flux_dispersion(&circuit, &grid).map_err(Failure::sim)?;
            let mut table = ResultTable::new(&["phi_bar"], &["omega_d_GHz", "omega_c_GHz", "omega_w_GHz"]);
            for r in rows {
                let v = match (r.omegas, r.error) {
                    (Some(w), _) => Ok(w.iter().map(|&x| rad_to_ghz(x)).collect()),
                    (None, e) => Err(e.unwrap_or_else(|| "no solution".into())),
                };
                table.push(&[r.phi_bar], v).map_err(Failure::sim)?;
            }
            table.metadata = json!({ "kind": "dispersion", "circuit": circuit });
            ctx.write_table(&table, "dispersion.csv", &mut outcome)?;
            outcome.resolved = json!({ "circuit": circuit, "grid": grid });
        }
        Job::Scatter => {
            let ted = device(inputs.params()?)?;
            let doc = inputs.sweep()?;
            let s = sweep(doc)?;
            let axes = pick_axes(doc, &s, &[SweepParam::NBar, SweepParam::Detuning])?;
            let n_bar = axes[0].clone().ok_or_else(|| Failure::config(format!("{}: an `n_bar` axis is required", doc.path)))?;
            let detuning = axes[1].clone().unwrap_or_else(|| vec![0.0]);
            let levels = ctx.numerics.trunc.map_or(ScatterOptions::default().levels, |t| t.w);
            let table =
                scattering_sweep(&ted, &n_bar, &detuning, &ScatterOptions { levels }, &ctx.sweep).map_err(Failure::sim)?;
            ctx.write_table(&table, "scatter.csv", &mut outcome)?;
            outcome.resolved = json!({ "device": ted, "levels": levels });
        }
        Job::Emit(o) => {
            let ted = device(inputs.params()?)?;
            if !(o.width_us > 0.0 && o.tail_us >= 0.0 && o.samples >= 2) {
                return Err(Failure::config("emission needs a positive width, a non-negative tail and two samples"));
            }
            let width = o.width_us * MICRO;
            let eff = emission_drive(&ted, o.peak_over_gamma, width / 2.0, width).map_err(Failure::config)?;
            let opts = RunOptions { samples: o.samples, ..ctx.run_options() };
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let ket = match o.initial {
                InitialQubit::Excited => nalgebra::DVector::from_vec(vec![ZERO, ONE]),
                InitialQubit::Superposition => nalgebra::DVector::from_vec(vec![C64::from(h), C64::from(h)]),
            };
            let run = simulate_emission(&eff, &ket, (0.0, width + o.tail_us * MICRO), &opts).map_err(Failure::sim)?;
            let tr = &run.trajectory;
            let rec = |name: &str| tr.record(name).map(<[C64]>::to_vec).unwrap_or_default();
            let (a, nd, nw) = (rec("a_out"), rec("n_d"), rec("n_w"));
            let mut table = ResultTable::new(&["t_us"], &["a_out_re", "a_out_im", "n_d", "n_w"]);
            for k in 0..tr.times.len() {
                table.push(&[tr.times[k] / MICRO], Ok(vec![a[k].re, a[k].im, nd[k].re, nw[k].re])).map_err(Failure::sim)?;
            }
            table.metadata = json!({
                "kind": "emission",
                "residual": run.residual,
                "emitted": run.emitted,
                "leakage": run.leakage,
                "initial_excitation": run.initial_excitation,
                "bookkeeping_error": run.bookkeeping_error(),
                "diagnostics": tr.diagnostics,
            });
            ctx.write_table(&table, "emission.csv", &mut outcome)?;
            let spec = spectral_records(&tr.times, &[("a_out", &a)]).map_err(Failure::sim)?;
            let mut st = ResultTable::new(&["freq_MHz"], &["a_out_abs"]);
            let mag = spec.get("a_out").unwrap_or_default();
            for (f, m) in spec.freq_hz.iter().zip(mag) {
                st.push(&[f / 1e6], Ok(vec![*m])).map_err(Failure::sim)?;
            }
            st.metadata =
                json!({ "kind": "emission-spectrum", "resolution_MHz": spec.resolution_hz / 1e6, "window": spec.window, "zero_pad": spec.zero_pad });
            ctx.write_table(&st, "emission_spectrum.csv", &mut outcome)?;
            outcome.resolved = json!({ "device": ted, "truncation": opts.trunc, "tol": opts.tol });
        }
        Job::Detect(o) => {
            let ted = device(inputs.params()?)?;
            let doc = inputs.sweep()?;
            let s = sweep(doc)?;
            let axes = pick_axes(doc, &s, &[SweepParam::NBar, SweepParam::Window])?;
            let (Some(n_bar), Some(window)) = (axes[0].clone(), axes[1].clone()) else {
                return Err(Failure::config(format!("{}: `n_bar` and `window_us` axes are required", doc.path)));
            };
            let opts = ctx.run_options();
            let table =
                coherent_detection_sweep(&ted, &n_bar, &window, o.g_over_gamma, &opts, &ctx.sweep).map_err(Failure::sim)?;
            ctx.write_table(&table, "detect.csv", &mut outcome)?;
            outcome.resolved = json!({ "device": ted, "truncation": opts.trunc, "tol": opts.tol });
        }
        Job::PitchDetect => {
            let params: NetworkParams = inputs.params()?.parse("network parameters")?;
            params.validate().map_err(Failure::config)?;
            let proto = protocol(inputs)?;
            let s = match &inputs.sweep {
                Some(doc) => sweep(doc)?,
                None => SweepSpec::one(Axis::new(SweepParam::DeltaOmegaWm, vec![0.0]).map_err(Failure::config)?),
            };
            let opts = ctx.network_options();
            let table = pitch_detect(&params, &proto, &s, &opts, &ctx.sweep).map_err(Failure::sim)?;
            ctx.write_table(&table, "pitch_detect.csv", &mut outcome)?;
            outcome.resolved = json!({ "network": params, "protocol": proto, "sweep": s, "options": opts });
        }
        Job::FockCheck => {
            let params: NetworkParams = inputs.params()?.parse("network parameters")?;
            params.validate().map_err(Failure::config)?;
            let proto = protocol(inputs)?;
            let opts = ctx.network_options();
            let table = fock_check_table(&params, &proto, &opts).map_err(Failure::sim)?;
            ctx.write_table(&table, "fock_check.csv", &mut outcome)?;
            outcome.resolved = json!({ "network": params, "protocol": proto, "options": opts });
        }
    }
    Ok(outcome)
}

/// Progress to the error stream, one line per finished point.
pub fn progress(label: &'static str) -> Arc<dyn Fn(usize, usize) + Send + Sync> {
    Arc::new(move |done, total| eprintln!("{label}: point {done}/{total} done"))
}
