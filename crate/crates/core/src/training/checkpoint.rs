//! Single-file model container: an 8-byte magic, a little-endian `u64` header
//! length, a JSON header, then every parameter block as raw little-endian `f32`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;

use super::config::TrainConfig;
use super::model::{Framework, Model};

pub const MAGIC: &[u8; 8] = b"SGHCKPT\x01";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Training RNG position: the seed plus the ChaCha word position reached.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    /// Decimal `u128`, kept as a string so JSON readers never round it.
    pub word_pos: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset from the start of the data section.
    pub offset: u64,
    /// Element count.
    pub len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    tool_version: String,
    framework: Framework,
    epoch: usize,
    config: TrainConfig,
    rng: RngState,
    blocks: Vec<BlockInfo>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub framework: Framework,
    pub epoch: usize,
    pub config: TrainConfig,
    pub rng: RngState,
    pub tool_version: String,
    pub model: Model<f32>,
}

impl Checkpoint {
    pub fn new(config: TrainConfig, epoch: usize, rng: RngState, model: Model<f32>) -> Self {
        Checkpoint { framework: model.framework, epoch, config, rng, tool_version: TOOL_VERSION.into(), model }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut offset = 0u64;
        let named = self.model.named();
        let blocks = named
            .iter()
            .map(|(name, t)| {
                let b = BlockInfo { name: name.clone(), shape: t.shape.clone(), offset, len: t.len() };
                offset += 4 * t.len() as u64;
                b
            })
            .collect();
        let header = Header {
            tool_version: self.tool_version.clone(),
            framework: self.framework,
            epoch: self.epoch,
            config: self.config.clone(),
            rng: self.rng.clone(),
            blocks,
        };
        let json = serde_json::to_vec(&header).expect("checkpoint header serializes");
        let mut out = Vec::with_capacity(16 + json.len() + offset as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in named {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |msg: String| Error::format(path, msg);
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint (bad magic)".into()));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let data_start = 16usize.checked_add(hlen).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header".into()))?;
        let header: Header =
            serde_json::from_slice(&bytes[16..data_start]).map_err(|e| bad(format!("header: {e}")))?;
        let data = &bytes[data_start..];

        let mut model = Model::<f32>::zeros(header.framework, &header.config.encoder)?;
        let mut by_name: BTreeMap<&str, &BlockInfo> = BTreeMap::new();
        for b in &header.blocks {
            if by_name.insert(&b.name, b).is_some() {
                return Err(bad(format!("duplicate block {}", b.name)));
            }
        }
        let names: Vec<String> = model.named().into_iter().map(|(n, _)| n).collect();
        if names.len() != by_name.len() {
            return Err(bad(format!("expected {} blocks, found {}", names.len(), by_name.len())));
        }
        for (name, t) in names.iter().zip(model.tensors_mut(true)) {
            let b = by_name.get(name.as_str()).ok_or_else(|| bad(format!("missing block {name}")))?;
            if b.shape != t.shape || b.len != t.len() {
                return Err(bad(format!("block {name} has shape {:?}, expected {:?}", b.shape, t.shape)));
            }
            let start = b.offset as usize;
            let end = start.checked_add(4 * b.len).filter(|&e| e <= data.len());
            let end = end.ok_or_else(|| bad(format!("block {name} runs past the end of the file")))?;
            fill(t, &data[start..end]);
        }
        Ok(Checkpoint {
            framework: header.framework,
            epoch: header.epoch,
            config: header.config,
            rng: header.rng,
            tool_version: header.tool_version,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

fn fill(t: &mut Tensor<f32>, raw: &[u8]) {
    for (v, c) in t.data.iter_mut().zip(raw.chunks_exact(4)) {
        *v = f32::from_le_bytes(c.try_into().unwrap());
    }
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
