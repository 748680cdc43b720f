//! Versioned JSON snapshots of the global model.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use mmfed_core::model::MultimodalModel;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT: &str = "mmfed-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub fold: usize,
    pub round: usize,
    pub model: MultimodalModel,
}

impl Checkpoint {
    pub fn new(fold: usize, round: usize, model: MultimodalModel) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            fold,
            round,
            model,
        }
    }
}

pub fn save(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, checkpoint).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let fail = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let ck: Checkpoint = serde_json::from_reader(BufReader::new(file)).map_err(|e| fail(e.to_string()))?;
    if ck.format != FORMAT {
        return Err(fail(format!("not a checkpoint (format `{}`)", ck.format)));
    }
    if ck.version != VERSION {
        return Err(fail(format!("unsupported checkpoint version {}", ck.version)));
    }
    ck.model.validate().map_err(|e| fail(e.to_string()))?;
    Ok(ck)
}
