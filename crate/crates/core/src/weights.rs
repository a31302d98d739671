//! Weight checkpoint format.
//!
//! Layout (all integers little-endian):
//! magic `"MSIW"`, `u32` version = 1, `u32` tensor count, then per tensor:
//! `u16` name length, UTF-8 name, `u8` rank, rank x `u32` extents,
//! extent-product x `f32` values in row-major order.
//!
//! Values are stored in single precision; save -> load -> save reproduces the
//! file bytes exactly.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"MSIW";
pub const VERSION: u32 = 1;

pub fn serialize(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(model.params().len() as u32).to_le_bytes());
    for (name, tensor) in model.params() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(tensor.shape().len() as u8);
        for &e in tensor.shape() {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn save_weights(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, serialize(model)).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint into a built model, matching tensors by name.
///
/// With `partial = false` the file must cover every model parameter; with
/// `partial = true` a subset (e.g. encoder-only) is accepted and the rest
/// keeps its current values. Names unknown to the model and shape conflicts
/// are rejected either way.
pub fn load_weights(model: &mut Model, path: impl AsRef<Path>, partial: bool) -> Result<()> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    load_from_bytes(model, &bytes, partial)
}

pub fn load_from_bytes(model: &mut Model, bytes: &[u8], partial: bool) -> Result<()> {
    let mut r = io::Cursor::new(bytes);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    if magic != MAGIC {
        return Err(Error::WeightBadMagic { found: magic });
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::WeightBadVersion {
            found: version,
            expected: VERSION,
        });
    }
    let count = read_u32(&mut r)? as usize;

    let mut loaded: Vec<(String, Tensor)> = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u16(&mut r)? as usize;
        let mut name_buf = vec![0u8; name_len];
        read_exact(&mut r, &mut name_buf)?;
        let name = String::from_utf8(name_buf).map_err(|_| truncated("tensor name not UTF-8"))?;
        let rank = {
            let mut b = [0u8; 1];
            read_exact(&mut r, &mut b)?;
            b[0] as usize
        };
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(&mut r)? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        let mut buf = [0u8; 4];
        for _ in 0..numel {
            read_exact(&mut r, &mut buf)?;
            data.push(f32::from_le_bytes(buf) as f64);
        }

        let current = model
            .params()
            .get(&name)
            .ok_or_else(|| Error::WeightUnknownTensor { name: name.clone() })?;
        if current.shape() != shape {
            return Err(Error::WeightShapeConflict {
                name,
                file: shape,
                model: current.shape().to_vec(),
            });
        }
        loaded.push((name, Tensor::from_vec(&shape, data)?));
    }

    if !partial {
        for name in model.params().keys() {
            if !loaded.iter().any(|(n, _)| n == name) {
                return Err(Error::WeightMissingTensor { name: name.clone() });
            }
        }
    }
    for (name, tensor) in loaded {
        *model.param_mut(&name).unwrap() = tensor;
    }
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| truncated("unexpected end of data"))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let mut b = [0u8; 2];
    read_exact(r, &mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn truncated(detail: &str) -> Error {
    Error::MalformedFile {
        what: "weight",
        path: String::new(),
        detail: detail.to_string(),
    }
}

/// Writes `bytes` to `path` atomically (temp file + rename).
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn tiny() -> ModelConfig {
        ModelConfig {
            channel_scale: 0.125,
            input_size: (16, 16),
            seed: 5,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.msiw");
        let model = Model::new(tiny()).unwrap();
        save_weights(&model, &path).unwrap();
        let first = std::fs::read(&path).unwrap();

        let mut reloaded = Model::build(tiny()).unwrap();
        load_weights(&mut reloaded, &path, false).unwrap();
        let second = serialize(&reloaded);
        assert_eq!(first, second);
    }

    #[test]
    fn scale_mismatch_is_a_shape_conflict() {
        let full = Model::new(ModelConfig::default()).unwrap();
        let bytes = serialize(&full);
        let mut small = Model::build(tiny()).unwrap();
        let err = load_from_bytes(&mut small, &bytes, false).unwrap_err();
        assert!(matches!(err, Error::WeightShapeConflict { .. }), "{err}");
    }

    #[test]
    fn partial_load_keeps_other_groups_initialized() {
        let donor = Model::new(tiny()).unwrap();
        // Write an encoder-only file by hand from the donor's payload.
        let mut clipped = Vec::new();
        clipped.extend_from_slice(&MAGIC);
        clipped.extend_from_slice(&VERSION.to_le_bytes());
        let encoder: Vec<_> = donor
            .params()
            .iter()
            .filter(|(n, _)| n.starts_with("encoder."))
            .collect();
        clipped.extend_from_slice(&(encoder.len() as u32).to_le_bytes());
        for (name, tensor) in encoder {
            clipped.extend_from_slice(&(name.len() as u16).to_le_bytes());
            clipped.extend_from_slice(name.as_bytes());
            clipped.push(tensor.shape().len() as u8);
            for &e in tensor.shape() {
                clipped.extend_from_slice(&(e as u32).to_le_bytes());
            }
            for &v in tensor.data() {
                clipped.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }

        let mut cfg = tiny();
        cfg.seed = 99;
        let mut target = Model::new(cfg.clone()).unwrap();
        let aspp_before = target.params()["aspp.fuse.weight"].data().to_vec();

        // Without the flag the incomplete file is rejected.
        let err = load_from_bytes(&mut target, &clipped, false).unwrap_err();
        assert!(matches!(err, Error::WeightMissingTensor { .. }));

        load_from_bytes(&mut target, &clipped, true).unwrap();
        assert_eq!(target.params()["aspp.fuse.weight"].data(), &aspp_before[..]);
        let want: Vec<f64> = donor.params()["encoder.conv1_1.weight"]
            .data()
            .iter()
            .map(|&v| v as f32 as f64)
            .collect();
        assert_eq!(target.params()["encoder.conv1_1.weight"].data(), &want[..]);
    }

    #[test]
    fn bad_magic_version_and_unknown_names_are_distinct() {
        let mut model = Model::build(tiny()).unwrap();
        let err = load_from_bytes(&mut model, b"XSIW\x01\x00\x00\x00\x00\x00\x00\x00", false)
            .unwrap_err();
        assert!(matches!(err, Error::WeightBadMagic { .. }));

        let mut bytes = Vec::new();
        bytes.extend_from_slice(&MAGIC);
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        let err = load_from_bytes(&mut model, &bytes, false).unwrap_err();
        assert!(matches!(err, Error::WeightBadVersion { found: 2, .. }));

        let mut bytes = Vec::new();
        bytes.extend_from_slice(&MAGIC);
        bytes.extend_from_slice(&VERSION.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&(7u16).to_le_bytes());
        bytes.extend_from_slice(b"no.such");
        bytes.push(1);
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        let err = load_from_bytes(&mut model, &bytes, true).unwrap_err();
        assert!(matches!(err, Error::WeightUnknownTensor { .. }));
    }
}
