//! Tensor and instance files.
//!
//! A tensor is either an inline JSON object `{"sizes": [..], "data": [..]}`
//! (at most [`INLINE_LIMIT`] entries) or a manifest
//! `{"m": .., "sizes": [..], "dtype": "f64le", "data_file": ".."}` next to a
//! flat little-endian f64 file in row-major order. A relative `data_file` is
//! resolved against the manifest's directory. Marginals are a JSON array of
//! arrays.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{MotError, Result};
use crate::regmot::MotInstance;
use crate::tensor::{DenseTensor, Shape};

pub const INLINE_LIMIT: usize = 100_000;
pub const DTYPE_F64LE: &str = "f64le";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorManifest {
    pub m: usize,
    pub sizes: Vec<usize>,
    pub dtype: String,
    pub data_file: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InlineTensor {
    pub sizes: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TensorFile {
    Inline(InlineTensor),
    Manifest(TensorManifest),
}

pub fn parse_inline_tensor(json: &str) -> Result<DenseTensor<f64>> {
    let t: InlineTensor = serde_json::from_str(json)?;
    inline_to_tensor(t)
}

fn inline_to_tensor(t: InlineTensor) -> Result<DenseTensor<f64>> {
    if t.data.len() > INLINE_LIMIT {
        return Err(MotError::Parse(format!(
            "inline tensor has {} entries, limit is {INLINE_LIMIT}",
            t.data.len()
        )));
    }
    DenseTensor::from_vec(Shape::new(t.sizes)?, t.data)
}

pub fn read_tensor(path: &Path) -> Result<DenseTensor<f64>> {
    let text = fs::read_to_string(path)?;
    match serde_json::from_str::<TensorFile>(&text)
        .map_err(|e| MotError::Parse(format!("{}: not a tensor file ({e})", path.display())))?
    {
        TensorFile::Inline(t) => inline_to_tensor(t),
        TensorFile::Manifest(man) => {
            if man.dtype != DTYPE_F64LE {
                return Err(MotError::Parse(format!("unsupported dtype {:?}", man.dtype)));
            }
            if man.m != man.sizes.len() {
                return Err(MotError::Parse(format!("m = {} but {} sizes given", man.m, man.sizes.len())));
            }
            let shape = Shape::new(man.sizes)?;
            let data_path = match path.parent() {
                Some(dir) if man.data_file.is_relative() => dir.join(&man.data_file),
                _ => man.data_file.clone(),
            };
            let bytes = fs::read(&data_path)?;
            if bytes.len() != shape.len() * 8 {
                return Err(MotError::Parse(format!(
                    "{} holds {} bytes, expected {}",
                    data_path.display(),
                    bytes.len(),
                    shape.len() * 8
                )));
            }
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            DenseTensor::from_vec(shape, data)
        }
    }
}

/// Write `tensor` inline when small enough, otherwise as a manifest plus a
/// sibling `.bin` file. Returns the paths written.
pub fn write_tensor(path: &Path, tensor: &DenseTensor<f64>) -> Result<Vec<PathBuf>> {
    if tensor.shape().len() <= INLINE_LIMIT {
        let t = InlineTensor {
            sizes: tensor.shape().sizes().to_vec(),
            data: tensor.data().to_vec(),
        };
        fs::write(path, serde_json::to_string(&t)? + "\n")?;
        return Ok(vec![path.to_path_buf()]);
    }
    write_tensor_binary(path, tensor)
}

pub fn write_tensor_binary(path: &Path, tensor: &DenseTensor<f64>) -> Result<Vec<PathBuf>> {
    let bin = path.with_extension("bin");
    let name = bin
        .file_name()
        .ok_or_else(|| MotError::Parse(format!("bad tensor path {}", path.display())))?;
    let man = TensorManifest {
        m: tensor.order(),
        sizes: tensor.shape().sizes().to_vec(),
        dtype: DTYPE_F64LE.into(),
        data_file: PathBuf::from(name),
    };
    let bytes: Vec<u8> = tensor.data().iter().flat_map(|x| x.to_le_bytes()).collect();
    fs::write(&bin, bytes)?;
    fs::write(path, serde_json::to_string_pretty(&man)? + "\n")?;
    Ok(vec![path.to_path_buf(), bin])
}

pub fn read_marginals(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_marginals(path: &Path, marginals: &[Vec<f64>]) -> Result<()> {
    fs::write(path, serde_json::to_string(marginals)? + "\n")?;
    Ok(())
}

/// Load and validate an instance from a cost tensor file and a marginals file.
pub fn read_instance(cost: &Path, marginals: &Path) -> Result<MotInstance<f64>> {
    MotInstance::new(read_tensor(cost)?, read_marginals(marginals)?)
}
