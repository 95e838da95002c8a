//! Checkpoint container: a versioned JSON manifest (dims, seed, theta,
//! tensor directory) followed by raw little-endian f64 tensor data.
//! Reloading reproduces parameters bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::params::VerifierParams;

const MAGIC: &[u8; 4] = b"TVCP";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("tensor {name}: expected {want} values, manifest says {got}")]
    Shape {
        name: String,
        want: usize,
        got: usize,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    dim_f: usize,
    dim_d: usize,
    layers: usize,
    types: usize,
    theta: f64,
    seed: u64,
    /// Encoder settings the parameters were trained against.
    encoder_seed: u64,
    encoder_dim: usize,
    tensors: Vec<TensorEntry>,
}

/// Encoder identity carried inside a checkpoint so evaluation can rebuild
/// the featurizer the parameters were trained with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderStamp {
    pub seed: u64,
    pub dim: usize,
}

pub fn save(
    params: &VerifierParams,
    encoder: EncoderStamp,
    path: &Path,
) -> Result<(), CheckpointError> {
    let tensors = params.named_tensors();
    let manifest = Manifest {
        version: FORMAT_VERSION,
        dim_f: params.dim_f,
        dim_d: params.dim_d,
        layers: params.n_layers(),
        types: params.n_types,
        theta: params.theta,
        seed: params.seed,
        encoder_seed: encoder.seed,
        encoder_dim: encoder.dim,
        tensors: tensors
            .iter()
            .map(|(name, data)| TensorEntry {
                name: name.clone(),
                len: data.len(),
            })
            .collect(),
    };
    let manifest_bytes =
        serde_json::to_vec(&manifest).map_err(|e| CheckpointError::Manifest(e.to_string()))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(manifest_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&manifest_bytes)?;
    for (_, data) in tensors {
        for x in data {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(VerifierParams, EncoderStamp), CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != FORMAT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    r.read_exact(&mut u32buf)?;
    let manifest_len = u32::from_le_bytes(u32buf) as usize;
    let mut manifest_bytes = vec![0u8; manifest_len];
    r.read_exact(&mut manifest_bytes)?;
    let manifest: Manifest = serde_json::from_slice(&manifest_bytes)
        .map_err(|e| CheckpointError::Manifest(e.to_string()))?;
    if manifest.dim_d != 3 * manifest.dim_f || manifest.types != 2 {
        return Err(CheckpointError::Manifest(format!(
            "inconsistent dims f={} d={} types={}",
            manifest.dim_f, manifest.dim_d, manifest.types
        )));
    }

    let mut params = VerifierParams::init(
        manifest.dim_f,
        manifest.layers,
        manifest.theta,
        manifest.seed,
    );
    {
        let views = params.named_tensors_mut();
        if views.len() != manifest.tensors.len() {
            return Err(CheckpointError::Manifest(format!(
                "expected {} tensors, manifest lists {}",
                views.len(),
                manifest.tensors.len()
            )));
        }
        for ((name, data), entry) in views.into_iter().zip(&manifest.tensors) {
            if name != entry.name || data.len() != entry.len {
                return Err(CheckpointError::Shape {
                    name: entry.name.clone(),
                    want: data.len(),
                    got: entry.len,
                });
            }
            let mut buf = [0u8; 8];
            for x in data.iter_mut() {
                r.read_exact(&mut buf)?;
                *x = f64::from_le_bytes(buf);
            }
        }
    }
    Ok((
        params,
        EncoderStamp {
            seed: manifest.encoder_seed,
            dim: manifest.encoder_dim,
        },
    ))
}
