//! Checkpoint container: one line of compact JSON manifest, a LF, then
//! the parameters as a little-endian f32 blob. Manifest offsets are
//! relative to the first blob byte.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ParamSet, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub dtype: String,
    pub params: Vec<ParamEntry>,
    /// Model-specific metadata (config, statistics, encoder identity).
    pub meta: serde_json::Value,
}

pub fn write_checkpoint<W: Write>(mut out: W, params: &ParamSet, meta: serde_json::Value) -> Result<()> {
    let mut entries = Vec::with_capacity(params.len());
    let mut offset = 0u64;
    for p in params.iter() {
        entries.push(ParamEntry {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            offset,
        });
        offset += 4 * p.value.len() as u64;
    }
    let manifest = Manifest {
        version: CHECKPOINT_VERSION,
        dtype: "f32".into(),
        params: entries,
        meta,
    };
    let header = serde_json::to_string(&manifest).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut blob = Vec::with_capacity(offset as usize);
    for p in params.iter() {
        for v in p.value.data() {
            blob.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    let io = |e| Error::io("<checkpoint>", e);
    out.write_all(header.as_bytes()).map_err(io)?;
    out.write_all(b"\n").map_err(io)?;
    out.write_all(&blob).map_err(io)?;
    out.flush().map_err(io)
}

pub fn read_checkpoint<R: BufRead>(mut input: R) -> Result<(Manifest, Vec<(String, Tensor)>)> {
    let io = |e| Error::io("<checkpoint>", e);
    let mut header = Vec::new();
    input.read_until(b'\n', &mut header).map_err(io)?;
    if header.last() != Some(&b'\n') {
        return Err(Error::Checkpoint("truncated manifest line".into()));
    }
    header.pop();
    let manifest: Manifest =
        serde_json::from_slice(&header).map_err(|e| Error::Checkpoint(format!("bad manifest: {e}")))?;
    if manifest.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            manifest.version
        )));
    }
    if manifest.dtype != "f32" {
        return Err(Error::Checkpoint(format!("unsupported dtype `{}`", manifest.dtype)));
    }
    let mut blob = Vec::new();
    input.read_to_end(&mut blob).map_err(io)?;

    let mut tensors = Vec::with_capacity(manifest.params.len());
    for entry in &manifest.params {
        let len: usize = entry.shape.iter().product();
        let start = entry.offset as usize;
        let end = start + 4 * len;
        let bytes = blob.get(start..end).ok_or_else(|| {
            Error::Checkpoint(format!("blob too short for parameter `{}`", entry.name))
        })?;
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        tensors.push((entry.name.clone(), Tensor::from_vec(&entry.shape, data)));
    }
    Ok((manifest, tensors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParamSet {
        let mut ps = ParamSet::new();
        ps.add("a", Tensor::from_vec(&[2, 2], vec![1.0, -2.5, 0.1, 3.0])).unwrap();
        ps.add("b", Tensor::vector(vec![0.25])).unwrap();
        ps
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let meta = serde_json::json!({"kind": "test", "z": [1.5, 2.0]});
        let mut first = Vec::new();
        write_checkpoint(&mut first, &sample(), meta).unwrap();
        let (manifest, tensors) = read_checkpoint(first.as_slice()).unwrap();
        let mut ps = sample();
        ps.load_values(tensors).unwrap();
        let mut second = Vec::new();
        write_checkpoint(&mut second, &ps, manifest.meta).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn values_round_trip_through_f32() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample(), serde_json::Value::Null).unwrap();
        let (manifest, tensors) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(manifest.params[1].offset, 16);
        assert_eq!(tensors[0].1.data()[1], -2.5);
        assert_eq!(tensors[0].1.data()[2], 0.1f32 as f64);
    }

    #[test]
    fn missing_parameter_is_named() {
        let mut small = ParamSet::new();
        small.add("a", Tensor::from_vec(&[2, 2], vec![0.0; 4])).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &small, serde_json::Value::Null).unwrap();
        let (_, tensors) = read_checkpoint(buf.as_slice()).unwrap();
        let err = sample().load_values(tensors).unwrap_err();
        assert!(err.to_string().contains("`b`") || err.to_string().contains(" b"), "{err}");
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample(), serde_json::Value::Null).unwrap();
        buf.truncate(buf.len() - 2);
        assert!(matches!(read_checkpoint(buf.as_slice()), Err(Error::Checkpoint(_))));
    }
}
