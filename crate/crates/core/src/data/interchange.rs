//! Embedding interchange format: `manifest.json` plus `tensors.bin`.
//!
//! `tensors.bin` is the magic `STGE`, a u32 version (1), then one record per
//! example: u32 seq_len, u32 hidden_dim, and seq_len × hidden_dim f32 values
//! in row-major order. All integers and floats are little-endian. Manifest
//! offsets point at each record's seq_len field.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::example::{Dataset, EmbeddedExample, Label, Split, SplitCounts};
use crate::error::{Error, LoadError, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"STGE";
pub const VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TENSORS_FILE: &str = "tensors.bin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub sentence_key: String,
    pub aspect: String,
    pub label: Label,
    pub split: Split,
    pub byte_offset: u64,
    pub seq_len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub hidden_dim: usize,
    pub counts: SplitCounts,
    pub examples: Vec<ManifestEntry>,
}

/// Paths of the two interchange files inside a dataset directory.
pub fn dataset_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join(MANIFEST_FILE), dir.join(TENSORS_FILE))
}

/// Serializes a dataset; values are narrowed to f32.
pub fn encode(dataset: &Dataset) -> Result<(DatasetManifest, Vec<u8>)> {
    let h = dataset.hidden_dim;
    let mut bin = Vec::new();
    bin.extend_from_slice(MAGIC);
    bin.extend_from_slice(&VERSION.to_le_bytes());
    let mut entries = Vec::with_capacity(dataset.examples.len());
    for ex in &dataset.examples {
        if ex.hidden_dim() != h {
            return Err(Error::dim("write_dataset", ex.seq.shape(), &[ex.seq_len(), h]));
        }
        entries.push(ManifestEntry {
            id: ex.id.clone(),
            sentence_key: ex.sentence_key.clone(),
            aspect: ex.aspect.clone(),
            label: ex.label,
            split: ex.split,
            byte_offset: bin.len() as u64,
            seq_len: ex.seq_len(),
        });
        bin.extend_from_slice(&(ex.seq_len() as u32).to_le_bytes());
        bin.extend_from_slice(&(h as u32).to_le_bytes());
        for &v in ex.seq.data() {
            bin.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let manifest = DatasetManifest {
        name: dataset.name.clone(),
        hidden_dim: h,
        counts: dataset.counts(),
        examples: entries,
    };
    Ok((manifest, bin))
}

pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (manifest, bin) = encode(dataset)?;
    let (mpath, tpath) = dataset_paths(dir);
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    fs::write(&mpath, json).map_err(|e| Error::io(&mpath, e))?;
    fs::write(&tpath, bin).map_err(|e| Error::io(&tpath, e))?;
    Ok(())
}

fn read_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at.checked_add(4)?)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
}

/// Materializes every manifest entry from the raw tensor bytes.
pub fn decode(manifest: &DatasetManifest, bin: &[u8], tensor_path: &Path) -> Result<Dataset> {
    if bin.len() < 4 || &bin[..4] != MAGIC {
        return Err(LoadError::BadMagic {
            path: tensor_path.to_path_buf(),
            found: bin.iter().take(4).copied().collect(),
        }
        .into());
    }
    let version = read_u32(bin, 4).ok_or_else(|| LoadError::Manifest("tensor file has no version".into()))?;
    if version != VERSION {
        return Err(LoadError::Version(version).into());
    }
    let h = manifest.hidden_dim;
    let mut examples = Vec::with_capacity(manifest.examples.len());
    let mut prev_offset: Option<u64> = None;
    for entry in &manifest.examples {
        let record_err = |detail: String| LoadError::Record {
            id: entry.id.clone(),
            detail,
        };
        if prev_offset.is_some_and(|p| entry.byte_offset <= p) || entry.byte_offset < 8 {
            return Err(record_err(format!("byte offset {} is not strictly increasing", entry.byte_offset)).into());
        }
        prev_offset = Some(entry.byte_offset);
        let at = usize::try_from(entry.byte_offset).map_err(|_| record_err("offset overflow".into()))?;
        let truncated = || LoadError::Truncated { id: entry.id.clone() };
        let seq_len = read_u32(bin, at).ok_or_else(truncated)? as usize;
        let width = read_u32(bin, at + 4).ok_or_else(truncated)? as usize;
        if seq_len != entry.seq_len || width != h {
            return Err(record_err(format!(
                "record header ({seq_len}, {width}) disagrees with manifest ({}, {h})",
                entry.seq_len
            ))
            .into());
        }
        let start = at + 8;
        let end = start + seq_len * width * 4;
        let raw = bin.get(start..end).ok_or_else(truncated)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect();
        let seq = Tensor::new(vec![seq_len, width], data).map_err(|e| record_err(e.to_string()))?;
        let ex = EmbeddedExample::new(
            entry.id.clone(),
            entry.sentence_key.clone(),
            entry.aspect.clone(),
            entry.label,
            entry.split,
            seq,
        )
        .map_err(|e| record_err(e.to_string()))?;
        examples.push(ex);
    }
    let dataset = Dataset {
        name: manifest.name.clone(),
        hidden_dim: h,
        examples,
    };
    let tally = dataset.counts();
    if tally != manifest.counts {
        return Err(LoadError::CountMismatch {
            detail: format!("manifest says {:?}, examples tally {:?}", manifest.counts, tally),
        }
        .into());
    }
    Ok(dataset)
}

pub fn load_dataset(manifest_path: &Path, tensor_path: &Path) -> Result<Dataset> {
    let text = fs::read(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: DatasetManifest =
        serde_json::from_slice(&text).map_err(|e| LoadError::Manifest(format!("{}: {e}", manifest_path.display())))?;
    let bin = fs::read(tensor_path).map_err(|e| Error::io(tensor_path, e))?;
    decode(&manifest, &bin, tensor_path)
}

/// Loads `manifest.json` and `tensors.bin` from `dir`.
pub fn load_dir(dir: &Path) -> Result<Dataset> {
    let (m, t) = dataset_paths(dir);
    load_dataset(&m, &t)
}
