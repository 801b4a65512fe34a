//! Input documents. Files are read once into JSON values so that a manifest
//! can carry them verbatim and a replay sees exactly the same inputs.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::failure::Failure;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Doc {
    pub path: String,
    pub document: Value,
}

impl Doc {
    pub fn read(path: &Path) -> Result<Doc, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let document =
            serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: invalid JSON: {e}", path.display())))?;
        Ok(Doc { path: path.display().to_string(), document })
    }

    pub fn parse<T: DeserializeOwned>(&self, what: &str) -> Result<T, Failure> {
        T::deserialize(&self.document).map_err(|e| Failure::config(format!("{}: invalid {what}: {e}", self.path)))
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Inputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<Doc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub protocol: Option<Doc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Doc>,
}

impl Inputs {
    pub fn load(params: Option<&Path>, protocol: Option<&Path>, sweep: Option<&Path>) -> Result<Inputs, Failure> {
        Ok(Inputs {
            params: params.map(Doc::read).transpose()?,
            protocol: protocol.map(Doc::read).transpose()?,
            sweep: sweep.map(Doc::read).transpose()?,
        })
    }

    pub fn params(&self) -> Result<&Doc, Failure> {
        self.params.as_ref().ok_or_else(|| Failure::config("--params is required"))
    }

    pub fn sweep(&self) -> Result<&Doc, Failure> {
        self.sweep.as_ref().ok_or_else(|| Failure::config("--sweep is required"))
    }
}
