//! Versioned checkpoint files: magic, version byte, little-endian `u32`
//! manifest length, JSON manifest, then every tensor as packed
//! little-endian `f32`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Mat;
use crate::config::PolicyConfig;
use crate::model::Policy;
use crate::params::PolicyParams;
use crate::train::EpochRecord;
use crate::PolicyError;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PFSSCKPT";
pub const CHECKPOINT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
    /// Offset into the blob, in `f32` elements.
    offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    version: u8,
    config: PolicyConfig,
    epoch: usize,
    metrics: Option<EpochRecord>,
    tensors: Vec<TensorEntry>,
}

/// A policy plus the training progress it was saved at.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub policy: Policy,
    pub epoch: usize,
    pub metrics: Option<EpochRecord>,
}

fn stat_tensors(params: &PolicyParams) -> Vec<(String, Vec<f64>)> {
    let mut out = Vec::new();
    for (l, s) in params.stats.iter().enumerate() {
        out.push((format!("stats.layer{l}.node.mean"), s.node.mean.clone()));
        out.push((format!("stats.layer{l}.node.var"), s.node.var.clone()));
        out.push((format!("stats.layer{l}.edge.mean"), s.edge.mean.clone()));
        out.push((format!("stats.layer{l}.edge.var"), s.edge.var.clone()));
    }
    out
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>, PolicyError> {
    let params = &ckpt.policy.params;
    let mut entries = Vec::new();
    let mut blob: Vec<u8> = Vec::new();
    let mut offset = 0;
    let mut push = |name: String, shape: [usize; 2], values: &mut dyn Iterator<Item = f64>| {
        entries.push(TensorEntry { name, shape, offset });
        for v in values {
            blob.extend_from_slice(&(v as f32).to_le_bytes());
        }
        offset += shape[0] * shape[1];
    };
    for (name, t) in params.names.iter().zip(&params.tensors) {
        push(name.clone(), [t.nrows(), t.ncols()], &mut t.iter().copied());
    }
    for (name, v) in stat_tensors(params) {
        push(name, [1, v.len()], &mut v.into_iter());
    }
    let manifest = Manifest {
        version: CHECKPOINT_VERSION,
        config: ckpt.policy.config.clone(),
        epoch: ckpt.epoch,
        metrics: ckpt.metrics.clone(),
        tensors: entries,
    };
    let header = serde_json::to_vec(&manifest)?;
    let mut out = Vec::with_capacity(13 + header.len() + blob.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&blob);
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, PolicyError> {
    let corrupt = |msg: &str| PolicyError::Checkpoint(msg.to_string());
    if bytes.len() < 13 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(corrupt("not a checkpoint file"));
    }
    if bytes[8] != CHECKPOINT_VERSION {
        return Err(PolicyError::Checkpoint(format!("version {} (expected {CHECKPOINT_VERSION})", bytes[8])));
    }
    let len = u32::from_le_bytes(bytes[9..13].try_into().expect("four bytes")) as usize;
    let header = bytes.get(13..13 + len).ok_or_else(|| corrupt("truncated manifest"))?;
    let manifest: Manifest = serde_json::from_slice(header)?;
    let blob = &bytes[13 + len..];
    let read = |e: &TensorEntry| -> Result<Vec<f64>, PolicyError> {
        let count = e.shape[0] * e.shape[1];
        let raw = blob.get(4 * e.offset..4 * (e.offset + count)).ok_or_else(|| corrupt("truncated tensor data"))?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("four bytes")) as f64).collect())
    };
    let mut params = PolicyParams::init(&manifest.config, 0);
    let find = |name: &str| manifest.tensors.iter().find(|e| e.name == name).ok_or_else(|| PolicyError::Checkpoint(format!("missing tensor {name}")));
    for (name, t) in params.names.clone().iter().zip(params.tensors.iter_mut()) {
        let e = find(name)?;
        if e.shape != [t.nrows(), t.ncols()] {
            return Err(PolicyError::Checkpoint(format!("tensor {name} has shape {:?}", e.shape)));
        }
        *t = Mat::from_shape_vec((e.shape[0], e.shape[1]), read(e)?).expect("shape checked");
    }
    let dim = manifest.config.hidden_dim;
    for (l, s) in params.stats.iter_mut().enumerate() {
        for (site, stats) in [("node", &mut s.node), ("edge", &mut s.edge)] {
            for (kind, target) in [("mean", &mut stats.mean), ("var", &mut stats.var)] {
                let e = find(&format!("stats.layer{l}.{site}.{kind}"))?;
                let v = read(e)?;
                if v.len() != dim {
                    return Err(corrupt("running statistics have the wrong width"));
                }
                *target = v;
            }
        }
    }
    let policy = Policy::from_parts(manifest.config, params)?;
    Ok(Checkpoint { policy, epoch: manifest.epoch, metrics: manifest.metrics })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<(), PolicyError> {
    std::fs::write(path, encode_checkpoint(ckpt)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, PolicyError> {
    decode_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let cfg = PolicyConfig { hidden_dim: 8, heads: 2, layers: 2, machines: 3, ..Default::default() };
        let mut policy = Policy::new(cfg, 9).unwrap();
        policy.params.stats[1].edge.mean[3] = 0.25;
        policy.params.stats[0].node.var[0] = 2.5;
        let metrics = EpochRecord { epoch: 4, train_loss: 1.5, val_gap: Some(3.25), elapsed_s: 12.0 };
        Checkpoint { policy, epoch: 4, metrics: Some(metrics) }
    }

    #[test]
    fn round_trip_stores_f32_values() {
        let ckpt = sample();
        let back = decode_checkpoint(&encode_checkpoint(&ckpt).unwrap()).unwrap();
        assert_eq!(back.epoch, 4);
        assert_eq!(back.metrics, ckpt.metrics);
        assert_eq!(back.policy.config, ckpt.policy.config);
        for (a, b) in ckpt.policy.params.tensors.iter().zip(&back.policy.params.tensors) {
            assert!(a.iter().zip(b).all(|(x, y)| (*x as f32) as f64 == *y));
        }
        assert_eq!(back.policy.params.stats[1].edge.mean[3], 0.25);
        assert_eq!(back.policy.params.stats[0].node.var[0], 2.5);
        // a second trip is lossless
        let again = decode_checkpoint(&encode_checkpoint(&back).unwrap()).unwrap();
        assert_eq!(again, back);
    }

    #[test]
    fn rejects_bad_headers() {
        let mut bytes = encode_checkpoint(&sample()).unwrap();
        bytes[8] = 7;
        assert!(decode_checkpoint(&bytes).is_err());
        assert!(decode_checkpoint(b"PFSSDATA").is_err());
        let good = encode_checkpoint(&sample()).unwrap();
        assert!(decode_checkpoint(&good[..good.len() - 4]).is_err());
    }
}
