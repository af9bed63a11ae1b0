//! Model file format.
//!
//! ```text
//! magic        8 bytes   b"DBNNMODL"
//! version      u32 LE
//! header_len   u64 LE
//! header       JSON: classes, binning schema, train config, cell count
//! counts       cell_count x u64 LE
//! weights      cell_count x f64 LE (IEEE-754 bits)
//! ```
//!
//! The file must end exactly after the weights.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binning::BinningSchema;
use crate::data::ClassSet;
use crate::error::{Error, Result};
use crate::model::{CountModel, TrainConfig, TrainedModel, WeightModel};

pub const MAGIC: &[u8; 8] = b"DBNNMODL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    classes: ClassSet,
    schema: BinningSchema,
    config: TrainConfig,
    cell_count: u64,
}

pub fn to_bytes(model: &TrainedModel) -> Vec<u8> {
    let counts = model.counts().cells();
    let weights = model.weights().cells();
    let header = Header {
        classes: model.classes().clone(),
        schema: model.schema().clone(),
        config: model.weights().config(),
        cell_count: counts.len() as u64,
    };
    let header = serde_json::to_vec(&header).expect("model header serializes");

    let mut out = Vec::with_capacity(20 + header.len() + 16 * counts.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for c in counts {
        out.extend_from_slice(&c.to_le_bytes());
    }
    for w in weights {
        out.extend_from_slice(&w.to_bits().to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::CorruptModel(format!("file truncated while reading {what}"))
        })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<TrainedModel> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(Error::CorruptModel("not a model file (bad magic)".into()));
    }
    let version = cur.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let header_len = usize::try_from(cur.u64("header length")?)
        .map_err(|_| Error::CorruptModel("header length overflows".into()))?;
    let header: Header = serde_json::from_slice(cur.take(header_len, "header")?)
        .map_err(|e| Error::CorruptModel(format!("bad header: {e}")))?;
    header.config.validate().map_err(|e| Error::CorruptModel(e.to_string()))?;

    let cells = usize::try_from(header.cell_count)
        .map_err(|_| Error::CorruptModel("cell count overflows".into()))?;
    let remaining = bytes.len() - cur.pos;
    if cells.checked_mul(16) != Some(remaining) {
        return Err(Error::CorruptModel(format!(
            "expected {} bytes of cell data, found {remaining}",
            cells.saturating_mul(16)
        )));
    }
    let counts: Vec<u64> = (0..cells)
        .map(|_| cur.u64("counts"))
        .collect::<Result<_>>()?;
    let weights: Vec<f64> = (0..cells)
        .map(|_| cur.u64("weights").map(f64::from_bits))
        .collect::<Result<_>>()?;
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::CorruptModel("non-positive or non-finite weight".into()));
    }

    let counts = CountModel::from_parts(header.schema, header.classes.len(), counts)?;
    TrainedModel::from_parts(
        header.classes,
        counts,
        WeightModel::from_parts(weights, header.config),
    )
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
