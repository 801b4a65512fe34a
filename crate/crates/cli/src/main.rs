//! `tedsim`: run device, emission, detection and network simulations from
//! JSON inputs and write CSV tables plus a manifest that can replay the run.

mod failure;
mod inputs;
mod jobs;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use tedsim::protocols::SweepOptions;

use failure::Failure;
use inputs::Inputs;
use jobs::{Context, DetectOpts, DispersionOpts, EmitOpts, Job, Numerics, QuantizeOpts};

const MANIFEST: &str = "manifest.json";

#[derive(Parser, Debug)]
#[command(name = "tedsim", version, about = "Transmon emitter/detector simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    numerics: GlobalNumerics,
}

#[derive(Args, Debug)]
struct IoArgs {
    /// Parameter file (circuit, device or network, depending on the command).
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    /// Protocol file; pitch-detect and fock-check fall back to the standard timing.
    #[arg(long, global = true)]
    protocol: Option<PathBuf>,
    /// Sweep file.
    #[arg(long, global = true)]
    sweep: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Suppress progress lines.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct GlobalNumerics {
    /// Level counts, e.g. `d=3,c=3,w=4`; omitted modes take 3, 3, 4.
    #[arg(long, global = true)]
    trunc: Option<String>,
    /// Integrator tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Quantize a circuit at one flux point.
    Quantize(QuantizeOpts),
    /// Normal-mode frequencies across a flux grid.
    Dispersion(DispersionOpts),
    /// Steady-state reflection of a coherent tone.
    Scatter,
    /// Shaped single-photon emission.
    Emit(EmitOpts),
    /// Detector excitation under a coherent input.
    Detect(DetectOpts),
    /// Source and detector in cascade.
    PitchDetect,
    /// Fock-state filtering check on the cascade.
    FockCheck,
    /// Run again from a manifest.
    Replay {
        /// A manifest written by an earlier run.
        manifest: PathBuf,
    },
}

/// Everything needed to run a job again.
#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    job: Job,
    numerics: Numerics,
    jobs: usize,
    inputs: Inputs,
    #[serde(default)]
    resolved: Value,
    #[serde(default)]
    outputs: Vec<String>,
    #[serde(default)]
    errors: Value,
    #[serde(default)]
    exit_code: i32,
    #[serde(default)]
    wall_time_s: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("tedsim: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<i32, Failure> {
    let (job, numerics, inputs) = match cli.command {
        Command::Replay { manifest } => {
            let doc = inputs::Doc::read(&manifest)?;
            let m: Manifest = doc.parse("manifest")?;
            (m.job, m.numerics, m.inputs)
        }
        other => {
            let trunc = cli.numerics.trunc.as_deref().map(str::parse).transpose().map_err(Failure::config)?;
            let numerics = Numerics { trunc, tol: cli.numerics.tol };
            let job = match other {
                Command::Quantize(o) => Job::Quantize(o),
                Command::Dispersion(o) => Job::Dispersion(o),
                Command::Scatter => Job::Scatter,
                Command::Emit(o) => Job::Emit(o),
                Command::Detect(o) => Job::Detect(o),
                Command::PitchDetect => Job::PitchDetect,
                Command::FockCheck => Job::FockCheck,
                Command::Replay { .. } => unreachable!(),
            };
            let io = &cli.io;
            let inputs = Inputs::load(io.params.as_deref(), io.protocol.as_deref(), io.sweep.as_deref())?;
            (job, numerics, inputs)
        }
    };
    if let Some(tol) = numerics.tol {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Failure::config(format!("--tol must lie in (0, 1), got {tol}")));
        }
    }
    execute(job, numerics, inputs, &cli.io)
}

fn execute(job: Job, numerics: Numerics, inputs: Inputs, io: &IoArgs) -> Result<i32, Failure> {
    let start = Instant::now();
    std::fs::create_dir_all(&io.out).map_err(|e| Failure::io(format!("{}: {e}", io.out.display())))?;
    let progress = (!io.quiet).then(|| jobs::progress(job.name()));
    let ctx = Context { out: &io.out, numerics: &numerics, sweep: SweepOptions { jobs: io.jobs, progress } };
    log::info!("running {} into {}", job.name(), io.out.display());

    let result = jobs::execute(&job, &inputs, &ctx);
    let (outcome, failure) = match result {
        Ok(o) => (o, None),
        // Configuration problems leave no manifest behind.
        Err(f @ Failure::Config(_)) => return Err(f),
        Err(f) => (jobs::Outcome::default(), Some(f)),
    };
    let exit_code = match &failure {
        Some(f) => f.exit_code(),
        None if !outcome.errors.is_empty() => 2,
        None => 0,
    };
    let manifest = Manifest {
        tool: "tedsim".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        job,
        numerics,
        jobs: io.jobs,
        inputs,
        resolved: outcome.resolved,
        outputs: outcome.files,
        errors: match &failure {
            Some(f) => json!([{ "message": f.to_string() }]),
            None => serde_json::to_value(&outcome.errors).map_err(Failure::io)?,
        },
        exit_code,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_manifest(&io.out, &manifest)?;
    match failure {
        Some(f) => Err(f),
        None => {
            if exit_code != 0 {
                eprintln!("tedsim: {} point(s) failed; see {}", outcome_errors(&manifest), io.out.join(MANIFEST).display());
            }
            Ok(exit_code)
        }
    }
}

fn outcome_errors(m: &Manifest) -> usize {
    m.errors.as_array().map_or(0, Vec::len)
}

fn write_manifest(out: &Path, m: &Manifest) -> Result<(), Failure> {
    let path = out.join(MANIFEST);
    let text = serde_json::to_string_pretty(m).map_err(Failure::io)?;
    std::fs::write(&path, text + "\n").map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}
