//! Binary checkpoints: magic, format version, a JSON metadata block, then
//! little-endian f32 tensors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::TrainError;
use crate::policy::Td3Policy;
use crate::td3::Td3Config;

const MAGIC: &[u8; 8] = b"ADVSIMCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub step: usize,
    pub config_hash: String,
    pub seed: u64,
    pub learner: Td3Config,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn encode_checkpoint(policy: &Td3Policy, meta: &CheckpointMeta) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    let json = serde_json::to_vec(meta).expect("metadata serializes");
    put_u32(&mut out, json.len() as u32);
    out.extend_from_slice(&json);
    let tensors = policy.learner.tensors();
    put_u32(&mut out, tensors.len() as u32);
    for (shape, data) in &tensors {
        put_u32(&mut out, shape.len() as u32);
        for d in shape {
            put_u32(&mut out, *d as u32);
        }
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], String> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or("truncated")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(Td3Policy, CheckpointMeta), String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    let n = r.u32()? as usize;
    let meta: CheckpointMeta = serde_json::from_slice(r.take(n)?).map_err(|e| e.to_string())?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let len: usize = shape.iter().product();
        let raw = r.take(len * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        tensors.push((shape, data));
    }
    if r.pos != bytes.len() {
        return Err("trailing bytes".into());
    }
    let mut policy = Td3Policy::new(meta.learner.clone(), meta.seed);
    policy.learner.load_tensors(&tensors)?;
    Ok((policy, meta))
}

pub fn save_checkpoint(path: impl AsRef<Path>, policy: &Td3Policy, meta: &CheckpointMeta) -> Result<(), TrainError> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(policy, meta)).map_err(|source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Td3Policy, CheckpointMeta), TrainError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_checkpoint(&bytes).map_err(|reason| TrainError::Checkpoint {
        path: path.to_path_buf(),
        reason,
    })
}
