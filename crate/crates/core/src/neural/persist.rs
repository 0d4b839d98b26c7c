//! On-disk form of a trained network: a JSON manifest (config, provenance,
//! history, tensor table) next to a binary blob. The blob holds each tensor
//! in declaration order as `u32 ndims`, `u32` dims, then little-endian values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::NetConfig;
use super::network::{Network, Param};
use super::train::{EpochRecord, TrainedNet};
use crate::datamodel::ModelProvenance;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::ingest::sha256_hex;
use crate::scalar::Scalar;

pub const NET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub dims: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetManifest {
    pub format_version: u32,
    pub dtype: String,
    pub config: NetConfig,
    pub provenance: ModelProvenance,
    pub validation_augmented: bool,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub history: Vec<EpochRecord>,
    pub tensors: Vec<TensorEntry>,
    /// File name of the blob, relative to the manifest.
    pub blob: String,
    pub blob_sha256: String,
}

pub fn encode_params<T: Scalar>(params: &[Param<T>]) -> Vec<u8> {
    let mut out = Vec::new();
    for p in params {
        out.extend_from_slice(&(p.dims.len() as u32).to_le_bytes());
        for &d in &p.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &p.data {
            v.write_le(&mut out);
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Decode {
                offset: self.bytes.len(),
                message: format!("parameter blob truncated, {n} more bytes expected at {}", self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

/// Decodes a blob against the expected tensor table.
pub fn decode_params<T: Scalar>(bytes: &[u8], table: &[TensorEntry]) -> Result<Vec<Param<T>>> {
    let mut r = Reader { bytes, pos: 0 };
    let mut params = Vec::with_capacity(table.len());
    for entry in table {
        let at = r.pos;
        let ndims = r.u32()?;
        let dims = (0..ndims).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        if dims != entry.dims {
            return Err(Error::Decode {
                offset: at,
                message: format!("tensor {} has dims {dims:?}, manifest says {:?}", entry.name, entry.dims),
            });
        }
        let n: usize = dims.iter().product();
        let raw = r.take(n * T::BYTES)?;
        let data = raw.chunks_exact(T::BYTES).map(T::read_le).collect();
        params.push(Param {
            name: entry.name.clone(),
            dims,
            data,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Decode {
            offset: r.pos,
            message: format!("{} trailing bytes after the last tensor", bytes.len() - r.pos),
        });
    }
    Ok(params)
}

fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

impl<T: Scalar> TrainedNet<T> {
    /// Writes `<path>` (manifest) and `<path stem>.bin` (parameters).
    pub fn save(&self, path: &Path) -> Result<()> {
        let blob = encode_params(self.network.params());
        let blob_file = blob_path(path);
        let manifest = NetManifest {
            format_version: NET_FORMAT_VERSION,
            dtype: T::DTYPE.to_string(),
            config: self.config().clone(),
            provenance: self.provenance,
            validation_augmented: self.validation_augmented,
            best_epoch: self.best_epoch,
            best_val_accuracy: self.best_val_accuracy,
            history: self.history.clone(),
            tensors: self
                .network
                .params()
                .iter()
                .map(|p| TensorEntry {
                    name: p.name.clone(),
                    dims: p.dims.clone(),
                })
                .collect(),
            blob: blob_file
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            blob_sha256: sha256_hex(&blob),
        };
        write_atomic(&blob_file, &blob)?;
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let manifest: NetManifest = serde_json::from_slice(&std::fs::read(path)?)?;
        if manifest.format_version != NET_FORMAT_VERSION {
            return Err(Error::validation(format!(
                "unsupported network format version {}",
                manifest.format_version
            )));
        }
        if manifest.dtype != T::DTYPE {
            return Err(Error::validation(format!(
                "network stored as {}, requested {}",
                manifest.dtype,
                T::DTYPE
            )));
        }
        let blob_file = path.parent().unwrap_or(Path::new(".")).join(&manifest.blob);
        let bytes = std::fs::read(&blob_file)?;
        if sha256_hex(&bytes) != manifest.blob_sha256 {
            return Err(Error::validation(format!(
                "{} does not match the checksum in the manifest",
                blob_file.display()
            )));
        }
        let params = decode_params(&bytes, &manifest.tensors)?;
        Ok(TrainedNet {
            network: Network::from_params(&manifest.config, params)?,
            history: manifest.history,
            best_epoch: manifest.best_epoch,
            best_val_accuracy: manifest.best_val_accuracy,
            provenance: manifest.provenance,
            validation_augmented: manifest.validation_augmented,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> Vec<Param<f64>> {
        vec![
            Param {
                name: "a".into(),
                dims: vec![1, 2],
                data: vec![1.5, -2.0],
            },
            Param {
                name: "b".into(),
                dims: vec![1],
                data: vec![0.1],
            },
        ]
    }

    fn table() -> Vec<TensorEntry> {
        params()
            .iter()
            .map(|p| TensorEntry {
                name: p.name.clone(),
                dims: p.dims.clone(),
            })
            .collect()
    }

    #[test]
    fn blob_layout() {
        let b = encode_params(&params());
        assert_eq!(&b[..12], &[2, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&b[12..20], &1.5f64.to_le_bytes());
        assert_eq!(b.len(), 12 + 16 + 8 + 8);
        assert_eq!(decode_params::<f64>(&b, &table()).unwrap(), params());
    }

    #[test]
    fn malformed_blobs_are_rejected() {
        let b = encode_params(&params());
        assert!(matches!(decode_params::<f64>(&b[..b.len() - 1], &table()), Err(Error::Decode { .. })));
        let mut long = b.clone();
        long.push(0);
        assert!(matches!(decode_params::<f64>(&long, &table()), Err(Error::Decode { .. })));
        let mut t = table();
        t[1].dims = vec![2];
        assert!(matches!(decode_params::<f64>(&b, &t), Err(Error::Decode { .. })));
    }
}
