//! Flat JSON parameter checkpoints.
//!
//! Format: one top-level object mapping parameter name to
//! `{"shape": [...], "values": [...]}`. Keys are written in sorted order so
//! identical parameter sets serialize byte-identically.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct ParamRecord {
    shape: Vec<usize>,
    values: Vec<f64>,
}

/// Write named tensors to `path` as flat JSON.
pub fn save_params(path: &Path, params: &[(String, Tensor)]) -> Result<()> {
    let map: BTreeMap<&str, ParamRecord> = params
        .iter()
        .map(|(name, t)| {
            (name.as_str(), ParamRecord { shape: t.shape().to_vec(), values: t.to_vec() })
        })
        .collect();
    let text = serde_json::to_string_pretty(&map)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Load a checkpoint written by [`save_params`] into existing tensors.
///
/// Every tensor must be present in the file with a matching shape; extra
/// entries in the file are rejected so a stale checkpoint fails loudly.
pub fn load_params(path: &Path, params: &[(String, Tensor)]) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    let mut map: BTreeMap<String, ParamRecord> = serde_json::from_str(&text)?;
    for (name, t) in params {
        let rec = map.remove(name).ok_or_else(|| {
            Error::InvalidArgument(format!("checkpoint is missing parameter '{name}'"))
        })?;
        if rec.shape != t.shape() {
            return Err(Error::ShapeMismatch {
                op: "load_params".into(),
                details: format!(
                    "parameter '{name}' has shape {:?} in the checkpoint but {:?} in the model",
                    rec.shape,
                    t.shape()
                ),
            });
        }
        if rec.values.len() != t.numel() {
            return Err(Error::ShapeMismatch {
                op: "load_params".into(),
                details: format!(
                    "parameter '{name}': {} values for shape {:?}",
                    rec.values.len(),
                    rec.shape
                ),
            });
        }
        t.update_data(|d| d.copy_from_slice(&rec.values));
    }
    if let Some(extra) = map.keys().next() {
        return Err(Error::InvalidArgument(format!(
            "checkpoint contains unknown parameter '{extra}'"
        )));
    }
    Ok(())
}
