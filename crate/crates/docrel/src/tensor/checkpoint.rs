//! Checkpoint file: parameter names to shape + row-major data, with a
//! header recording the format version and the run seed. JSON on disk;
//! serde_json's shortest-roundtrip float encoding keeps it lossless.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Array, ParamSet, TensorError};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub seed: u64,
    pub params: BTreeMap<String, Array>,
}

impl Checkpoint {
    pub fn from_params(params: &ParamSet, seed: u64) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            seed,
            params: params.iter().map(|(n, a)| (n.clone(), a.clone())).collect(),
        }
    }

    /// Rebuild a ParamSet, requiring the name set to match `expected` when
    /// given (mismatches are listed in the error).
    pub fn into_params(self, expected: Option<&[String]>) -> Result<ParamSet, TensorError> {
        if let Some(expected) = expected {
            let have: Vec<&String> = self.params.keys().collect();
            let missing: Vec<&String> = expected
                .iter()
                .filter(|n| !self.params.contains_key(*n))
                .collect();
            let extra: Vec<&&String> = have.iter().filter(|n| !expected.contains(n)).collect();
            if !missing.is_empty() || !extra.is_empty() {
                return Err(TensorError::Checkpoint(format!(
                    "parameter mismatch; missing: {missing:?}, extra: {extra:?}"
                )));
            }
        }
        let mut set = ParamSet::new();
        for (name, arr) in self.params {
            set.insert(&name, arr);
        }
        Ok(set)
    }
}

pub fn save_checkpoint(path: &Path, params: &ParamSet, seed: u64) -> Result<(), TensorError> {
    let ckpt = Checkpoint::from_params(params, seed);
    let json = serde_json::to_string(&ckpt).map_err(|e| TensorError::Checkpoint(e.to_string()))?;
    std::fs::write(path, json).map_err(|e| TensorError::Checkpoint(e.to_string()))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, TensorError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| TensorError::Checkpoint(format!("{}: {e}", path.display())))?;
    let ckpt: Checkpoint =
        serde_json::from_str(&text).map_err(|e| TensorError::Checkpoint(e.to_string()))?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(TensorError::Checkpoint(format!(
            "unsupported checkpoint version {}",
            ckpt.version
        )));
    }
    Ok(ckpt)
}
