//! Fitted predictors on disk: an 8-byte magic, a format version and a
//! bincode payload. Binary keeps infinite thresholds exact.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conformal::{ConformalPredictor, PredictionBox};
use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::numeric::Matrix;

const MAGIC: &[u8; 8] = b"CPCPCKPT";
const VERSION: u32 = 1;

/// A predictor together with the feature standardization it was fitted on,
/// so that raw feature vectors can be scored directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub standardizer: Standardizer,
    pub predictor: ConformalPredictor,
}

impl Checkpoint {
    pub fn feature_dim(&self) -> usize {
        self.standardizer.dim()
    }

    /// Prediction boxes for rows of raw (unstandardized) features.
    pub fn predict_raw(&self, raw_x: &Matrix) -> Result<Vec<PredictionBox>> {
        self.predictor.boxes(&self.standardizer.transform(raw_x)?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(1024);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        bincode::serialize_into(&mut out, self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let ckpt: Checkpoint =
            bincode::deserialize(&bytes[12..]).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ckpt.standardizer.dim() != ckpt.predictor.feature_dim() {
            return Err(Error::Checkpoint(
                "standardizer and predictor disagree on feature dimension".into(),
            ));
        }
        Ok(ckpt)
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let bytes = ckpt.to_bytes()?;
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
