//! JSON model checkpoints.
//!
//! The document holds the dimensions, every tensor as `{rows, cols, data}`
//! in row-major order, alpha, the activation and the head. Floats are written
//! in shortest round-trip form, so save then load is bit-exact.

use std::fs;
use std::path::Path;

use brelu_core::training::Model;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const CHECKPOINT_FORMAT: &str = "brelu-checkpoint/1";

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    model: Model,
}

pub fn to_json(model: &Model) -> Result<String> {
    let doc = Checkpoint {
        format: CHECKPOINT_FORMAT.to_owned(),
        model: model.clone(),
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(s: &str) -> Result<Model> {
    let doc: Checkpoint = serde_json::from_str(s)?;
    if doc.format != CHECKPOINT_FORMAT {
        return Err(LabError::config(format!(
            "unsupported checkpoint format {:?}, expected {CHECKPOINT_FORMAT:?}",
            doc.format
        )));
    }
    let Model {
        params,
        activation,
        head,
    } = doc.model;
    Ok(Model::new(params, activation, head)?)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, to_json(model)?).map_err(|e| LabError::io(path, e))
}

pub fn load(path: &Path) -> Result<Model> {
    let s = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    from_json(&s).map_err(|e| match e {
        LabError::Json(j) => LabError::data(path, j.to_string()),
        LabError::Core(c) => LabError::data(path, c.to_string()),
        other => other,
    })
}
