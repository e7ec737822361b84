use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{init_params, EncoderConfig, EncoderParameters, RelationEmbeddingTables};
use crate::error::{Error, Result};
use crate::manifest::RunManifest;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Wire {
    format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    manifest: Option<RunManifest>,
    config: EncoderConfig,
    tensors: Vec<NamedTensor>,
}

/// Encoder configuration with its parameters and relation tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: Option<RunManifest>,
    pub config: EncoderConfig,
    pub params: EncoderParameters,
    pub tables: RelationEmbeddingTables,
}

/// JSON document of named tensors in a fixed order. Floats round-trip exactly.
pub fn save_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let tensors = ckpt
        .params
        .tensors()
        .into_iter()
        .chain(ckpt.tables.tensors())
        .map(|(name, view)| NamedTensor {
            name,
            shape: view.shape().to_vec(),
            data: view.iter().copied().collect(),
        })
        .collect();
    let wire = Wire {
        format_version: CHECKPOINT_FORMAT_VERSION,
        manifest: ckpt.manifest.clone(),
        config: ckpt.config.clone(),
        tensors,
    };
    let mut out = serde_json::to_vec(&wire).expect("checkpoint serializes");
    out.push(b'\n');
    out
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let wire: Wire =
        serde_json::from_slice(bytes).map_err(|e| Error::Parse(format!("checkpoint: {e}")))?;
    if wire.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported checkpoint format_version {}",
            wire.format_version
        )));
    }
    wire.config.validate()?;
    let (mut params, mut tables) = init_params(&wire.config);

    let mut by_name: BTreeMap<String, NamedTensor> = BTreeMap::new();
    for t in wire.tensors {
        if by_name.contains_key(&t.name) {
            return Err(Error::Validation(format!("duplicate tensor '{}'", t.name)));
        }
        by_name.insert(t.name.clone(), t);
    }
    let targets = params
        .tensors_mut()
        .into_iter()
        .chain(tables.tensors_mut());
    for (name, mut view) in targets {
        let t = by_name
            .remove(&name)
            .ok_or_else(|| Error::Validation(format!("checkpoint lacks tensor '{name}'")))?;
        if t.shape != view.shape() || t.data.len() != view.len() {
            return Err(Error::Shape(format!(
                "tensor '{name}' has shape {:?} ({} values), expected {:?}",
                t.shape,
                t.data.len(),
                view.shape()
            )));
        }
        if t.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("tensor '{name}'")));
        }
        for (dst, src) in view.iter_mut().zip(t.data) {
            *dst = src;
        }
    }
    if let Some(extra) = by_name.keys().next() {
        return Err(Error::Validation(format!("unexpected tensor '{extra}'")));
    }
    Ok(Checkpoint {
        manifest: wire.manifest,
        config: wire.config,
        params,
        tables,
    })
}
