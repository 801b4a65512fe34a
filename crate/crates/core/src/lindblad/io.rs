//! Trajectory export: CSV records plus a JSON sidecar.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{Diagnostics, Trajectory};
use crate::error::Result;

/// Run metadata written next to a trajectory CSV.
#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryMeta {
    pub parameters: serde_json::Value,
    pub tol: f64,
    pub truncation: String,
    pub samples: usize,
    pub records: Vec<String>,
    pub diagnostics: Option<Diagnostics>,
}

/// Write `t_s, re_<name>, im_<name>, ...` to `path` and the metadata to
/// `path` with a `.json` extension. Returns the sidecar path.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, meta: &TrajectoryMeta) -> Result<PathBuf> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t_s".to_string()];
    for r in &traj.records {
        header.push(format!("re_{}", r.name));
        header.push(format!("im_{}", r.name));
    }
    w.write_record(&header)?;
    for (k, t) in traj.times.iter().enumerate() {
        let mut row = vec![format!("{t:.12e}")];
        for r in &traj.records {
            let v = r.values.get(k).copied().unwrap_or_default();
            row.push(format!("{:.12e}", v.re));
            row.push(format!("{:.12e}", v.im));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    let sidecar = path.with_extension("json");
    let mut meta = meta.clone();
    meta.samples = traj.times.len();
    meta.records = traj.records.iter().map(|r| r.name.clone()).collect();
    meta.diagnostics.get_or_insert(traj.diagnostics);
    std::fs::write(&sidecar, serde_json::to_string_pretty(&meta)?)?;
    Ok(sidecar)
}
