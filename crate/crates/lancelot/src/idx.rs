//! MNIST-format IDX files: big-endian header, unsigned-byte payload.

use std::path::Path;

use lancelot_core::fl::Dataset;

use crate::error::{Error, Result};

const UBYTE: u8 = 0x08;

/// Dimensions and payload of one IDX file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

pub fn parse_idx(bytes: &[u8]) -> std::result::Result<IdxArray, &'static str> {
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err("bad magic");
    }
    if bytes[2] != UBYTE {
        return Err("only unsigned-byte payloads are supported");
    }
    let rank = bytes[3] as usize;
    if rank == 0 || bytes.len() < 4 + 4 * rank {
        return Err("truncated header");
    }
    let dims: Vec<usize> = bytes[4..4 + 4 * rank]
        .chunks_exact(4)
        .map(|d| u32::from_be_bytes([d[0], d[1], d[2], d[3]]) as usize)
        .collect();
    let count = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or("dimensions overflow")?;
    let payload = &bytes[4 + 4 * rank..];
    if payload.len() != count {
        return Err("payload length does not match the header");
    }
    Ok(IdxArray { dims, data: payload.to_vec() })
}

pub fn encode_idx(array: &IdxArray) -> Vec<u8> {
    let mut out = vec![0, 0, UBYTE, array.dims.len() as u8];
    for &d in &array.dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(&array.data);
    out
}

fn read(path: &Path) -> Result<IdxArray> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx(&bytes).map_err(|reason| Error::Idx { path: path.to_path_buf(), reason })
}

/// Loads an image/label pair as a classification set with pixels scaled
/// to `[0, 1]`. The class count is one more than the largest label.
pub fn load_pair(images: &Path, labels: &Path) -> Result<Dataset> {
    let img = read(images)?;
    let lab = read(labels)?;
    if lab.dims.len() != 1 {
        return Err(Error::Idx { path: labels.to_path_buf(), reason: "labels must be one-dimensional" });
    }
    let count = img.dims[0];
    if count != lab.dims[0] {
        return Err(Error::Idx { path: labels.to_path_buf(), reason: "image and label counts differ" });
    }
    if count == 0 {
        return Err(Error::Core(lancelot_core::Error::EmptyData));
    }
    let dim = img.data.len() / count;
    let classes = *lab.data.iter().max().unwrap() as usize + 1;
    let features = img.data.iter().map(|&p| p as f64 / 255.0).collect();
    let targets = lab.data.iter().map(|&y| y as f64).collect();
    Ok(Dataset::new(dim, classes, features, targets)?)
}
