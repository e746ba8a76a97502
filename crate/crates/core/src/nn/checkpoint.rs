//! Binary tensor container.
//!
//! Layout:
//!
//! ```text
//! b"SMAE1"                       magic
//! u64 little-endian              manifest length in bytes
//! manifest                       UTF-8 JSON (see `Manifest`)
//! payload                        f32 little-endian tensors, back to back
//! ```
//!
//! Tensor offsets in the manifest are byte offsets into the payload.
//! Values are stored as binary32; a store whose values are already
//! f32-representable round-trips bit for bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 5] = b"SMAE1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub dtype: String,
    pub offset: usize,
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tensors: Vec<TensorRecord>,
    /// Free-form metadata stored with the tensors (model config, logs).
    pub meta: serde_json::Value,
}

pub fn write_container(store: &ParamStore, meta: serde_json::Value, mut out: impl Write) -> Result<()> {
    let mut tensors = Vec::with_capacity(store.len());
    let mut payload = Vec::new();
    for (name, entry) in store.iter() {
        tensors.push(TensorRecord {
            name: name.to_string(),
            shape: entry.value.shape(),
            dtype: "f32".into(),
            offset: payload.len(),
            trainable: entry.trainable,
        });
        for &v in entry.value.data() {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let manifest = serde_json::to_vec(&Manifest { tensors, meta })?;
    out.write_all(MAGIC)?;
    out.write_all(&(manifest.len() as u64).to_le_bytes())?;
    out.write_all(&manifest)?;
    out.write_all(&payload)?;
    Ok(())
}

pub fn read_container(mut input: impl Read) -> Result<(ParamStore, serde_json::Value)> {
    let mut magic = [0u8; 5];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic; not an SMAE1 checkpoint".into()));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = usize::try_from(u64::from_le_bytes(len)).map_err(|_| Error::Checkpoint("manifest too large".into()))?;
    let mut manifest = vec![0u8; len];
    input.read_exact(&mut manifest)?;
    let manifest: Manifest = serde_json::from_slice(&manifest)?;
    let mut payload = Vec::new();
    input.read_to_end(&mut payload)?;

    let mut store = ParamStore::new();
    for rec in manifest.tensors {
        if rec.dtype != "f32" {
            return Err(Error::Checkpoint(format!("unsupported dtype '{}' for {}", rec.dtype, rec.name)));
        }
        let count = rec.shape[0] * rec.shape[1];
        let end = rec.offset + 4 * count;
        let bytes = payload.get(rec.offset..end).ok_or_else(|| Error::Checkpoint(format!("tensor {} runs past the payload", rec.name)))?;
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
        let t = Tensor::from_vec(rec.shape[0], rec.shape[1], data)?;
        if store.contains(&rec.name) {
            return Err(Error::Checkpoint(format!("duplicate tensor {}", rec.name)));
        }
        if rec.trainable {
            store.insert(rec.name, t);
        } else {
            store.insert_buffer(rec.name, t);
        }
    }
    Ok((store, manifest.meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact_for_f32_values() {
        let mut store = ParamStore::new();
        store.insert("a.weight", Tensor::from_vec(2, 2, vec![0.1, -3.5, 1e-30, 7.0]).unwrap());
        store.insert_buffer("a.running_mean", Tensor::from_vec(1, 2, vec![0.25, -0.0]).unwrap());
        store.round_to_f32();
        let meta = serde_json::json!({"note": "x"});
        let mut buf = Vec::new();
        write_container(&store, meta.clone(), &mut buf).unwrap();
        assert_eq!(&buf[..5], MAGIC);
        let (back, meta_back) = read_container(buf.as_slice()).unwrap();
        assert_eq!(meta_back, meta);
        for (name, e) in store.iter() {
            let b = back.entry(name).unwrap();
            assert_eq!(b.trainable, e.trainable);
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&b.value), bits(&e.value));
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_container(&b"NOPE1xxxxxxxx"[..]).is_err());
        let mut buf = Vec::new();
        write_container(&ParamStore::new(), serde_json::Value::Null, &mut buf).unwrap();
        buf.truncate(10);
        assert!(read_container(buf.as_slice()).is_err());
    }
}
