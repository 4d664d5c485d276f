//! Named-weight checkpoint file.
//!
//! Layout: the 8-byte magic `PW2SSCKP`, a little-endian `u32` format
//! version, a little-endian `u64` manifest length, the JSON manifest, then
//! every tensor as little-endian `f64` values. Manifest offsets are in
//! elements from the start of the blob section.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::error::{mismatch, NnError, Result};
use crate::optim::AdamW;
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"PW2SSCKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub params: Vec<BlobEntry>,
    /// Present when AdamW moments were saved: `(m, v)` entries in parameter order.
    pub optimizer_state: bool,
    pub optimizer_step: u64,
    pub config: Json,
    pub meta: Json,
}

/// Decoded checkpoint contents, independent of any model.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: Vec<(String, Tensor<f64>)>,
    /// `(m, v)` per parameter, in `params` order.
    pub moments: Option<Vec<(Tensor<f64>, Tensor<f64>)>>,
    pub optimizer_step: u64,
    pub config: Json,
    pub meta: Json,
}

fn to_f64<S: Scalar>(t: &Tensor<S>) -> Tensor<f64> {
    Tensor::new(t.shape().to_vec(), t.data().iter().map(|v| v.as_f64()).collect()).expect("same shape")
}

fn from_f64<S: Scalar>(t: &Tensor<f64>) -> Tensor<S> {
    Tensor::new(t.shape().to_vec(), t.data().iter().map(|&v| S::lit(v)).collect()).expect("same shape")
}

impl Checkpoint {
    /// Snapshot of a store and, optionally, its optimizer.
    pub fn capture<S: Scalar>(store: &ParamStore<S>, opt: Option<&AdamW<S>>, config: Json, meta: Json) -> Self {
        let params = store.iter().map(|(_, p)| (p.name.clone(), to_f64(&p.value))).collect();
        let moments = opt.map(|o| {
            store
                .iter()
                .map(|(id, p)| match (o.m.get(id.0), o.v.get(id.0)) {
                    (Some(m), Some(v)) => (to_f64(m), to_f64(v)),
                    _ => (Tensor::zeros(p.value.shape()), Tensor::zeros(p.value.shape())),
                })
                .collect()
        });
        Self {
            params,
            moments,
            optimizer_step: opt.map_or(0, |o| o.t),
            config,
            meta,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut entries = Vec::new();
        let mut blobs: Vec<&Tensor<f64>> = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, t: &Tensor<f64>| {
            entries.push(BlobEntry {
                name,
                shape: t.shape().to_vec(),
                offset,
            });
            offset += t.len();
        };
        for (name, t) in &self.params {
            push(name.clone(), t);
            blobs.push(t);
        }
        if let Some(moments) = &self.moments {
            for ((name, _), (m, v)) in self.params.iter().zip(moments) {
                push(format!("{name}#m"), m);
                blobs.push(m);
                push(format!("{name}#v"), v);
                blobs.push(v);
            }
        }
        let manifest = Manifest {
            params: entries,
            optimizer_state: self.moments.is_some(),
            optimizer_step: self.optimizer_step,
            config: self.config.clone(),
            meta: self.meta.clone(),
        };
        let json = serde_json::to_vec(&manifest).expect("manifest serializes");
        let mut out = Vec::with_capacity(20 + json.len() + offset * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in blobs {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| NnError::MalformedCheckpoint(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("missing PW2SSCKP magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(NnError::VersionMismatch {
                expected: FORMAT_VERSION,
                found: version,
            });
        }
        let mlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let body = bytes.get(20..20 + mlen).ok_or_else(|| bad("truncated manifest"))?;
        let manifest: Manifest = serde_json::from_slice(body).map_err(|e| bad(&e.to_string()))?;
        let blob = &bytes[20 + mlen..];
        if blob.len() % 8 != 0 {
            return Err(bad("blob section is not a whole number of f64 values"));
        }
        let read = |e: &BlobEntry| -> Result<Tensor<f64>> {
            let n: usize = e.shape.iter().product();
            let bytes = blob
                .get(e.offset * 8..(e.offset + n) * 8)
                .ok_or_else(|| bad(&format!("blob for `{}` out of range", e.name)))?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Tensor::new(e.shape.clone(), data)
        };
        let n_params = if manifest.optimizer_state {
            if manifest.params.len() % 3 != 0 {
                return Err(bad("optimizer state without matching moment entries"));
            }
            manifest.params.len() / 3
        } else {
            manifest.params.len()
        };
        let mut params = Vec::with_capacity(n_params);
        for e in &manifest.params[..n_params] {
            params.push((e.name.clone(), read(e)?));
        }
        let moments = if manifest.optimizer_state {
            let mut ms = Vec::with_capacity(n_params);
            for pair in manifest.params[n_params..].chunks_exact(2) {
                ms.push((read(&pair[0])?, read(&pair[1])?));
            }
            Some(ms)
        } else {
            None
        };
        Ok(Self {
            params,
            moments,
            optimizer_step: manifest.optimizer_step,
            config: manifest.config,
            meta: manifest.meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|source| NnError::IoFailure {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| NnError::IoFailure {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<f64>> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Copies every parameter of `store` from the checkpoint by name.
    /// Extra checkpoint entries are ignored.
    pub fn load_into<S: Scalar>(&self, store: &mut ParamStore<S>) -> Result<()> {
        let ids: Vec<_> = store.ids().collect();
        for id in &ids {
            let name = &store.get(*id).name;
            let t = self.get(name).ok_or_else(|| NnError::MissingParameter(name.clone()))?;
            if t.shape() != store.get(*id).value.shape() {
                return Err(mismatch("load_checkpoint", store.get(*id).value.shape(), t.shape()));
            }
        }
        for id in ids {
            let t = from_f64(self.get(&store.get(id).name).unwrap());
            store.assign(id, t)?;
        }
        Ok(())
    }

    /// Restores optimizer moments for `store`, matched by parameter name.
    pub fn restore_optimizer<S: Scalar>(&self, store: &ParamStore<S>, opt: &mut AdamW<S>) -> Result<()> {
        let Some(moments) = &self.moments else {
            return Ok(());
        };
        opt.m.clear();
        opt.v.clear();
        for (_, p) in store.iter() {
            let pos = self
                .params
                .iter()
                .position(|(n, _)| *n == p.name)
                .ok_or_else(|| NnError::MissingParameter(p.name.clone()))?;
            opt.m.push(from_f64(&moments[pos].0));
            opt.v.push(from_f64(&moments[pos].1));
        }
        opt.t = self.optimizer_step;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::OptimizerConfig;

    fn store() -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.add("a", Tensor::new(vec![2, 2], vec![0.1, -2.5e-300, f64::MIN_POSITIVE, 7.0]).unwrap())
            .unwrap();
        s.add("head.b", Tensor::vector(vec![1.0 / 3.0]).unwrap()).unwrap();
        s
    }

    #[test]
    fn round_trip_is_bitwise() {
        let s = store();
        let mut opt = AdamW::new(OptimizerConfig::default());
        let ids: Vec<_> = s.ids().collect();
        let mut s2 = s.clone();
        for id in ids {
            s2.get_mut(id).grad = s.value(id).map(|v| v * 0.5);
        }
        opt.step(&mut s2, 1e-3);
        let ck = Checkpoint::capture(&s2, Some(&opt), serde_json::json!({"d": 4}), Json::Null);
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back, ck);
        let mut s3 = store();
        back.load_into(&mut s3).unwrap();
        for ((_, p), (_, q)) in s2.iter().zip(s3.iter()) {
            let a: Vec<u64> = p.value.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = q.value.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
        let mut opt2 = AdamW::new(OptimizerConfig::default());
        back.restore_optimizer(&s3, &mut opt2).unwrap();
        assert_eq!(opt2.t, 1);
        assert_eq!(opt2.m, opt.m);
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = Checkpoint::capture(&store(), None, Json::Null, Json::Null).to_bytes();
        bytes[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(NnError::VersionMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn missing_parameter_is_named() {
        let mut small = ParamStore::<f64>::new();
        small.add("a", Tensor::zeros(&[2, 2])).unwrap();
        let ck = Checkpoint::capture(&small, None, Json::Null, Json::Null);
        let mut full = store();
        match ck.load_into(&mut full) {
            Err(NnError::MissingParameter(name)) => assert_eq!(name, "head.b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(
            Checkpoint::from_bytes(b"not a checkpoint at all"),
            Err(NnError::MalformedCheckpoint(_))
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let ck = Checkpoint::capture(&store(), None, Json::Null, serde_json::json!({"epochs": 0}));
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
        assert!(matches!(
            Checkpoint::load(dir.path().join("nope")),
            Err(NnError::IoFailure { .. })
        ));
    }
}
