//! `ARTCTXM1` checkpoints: a list of named `f32` tensors.
//!
//! ```text
//! magic   "ARTCTXM1"
//! count   u32
//! count × { name_len u16, name, rank u32, rank × dim u32, product(dims) × f32 }
//! ```

use std::path::Path;

use indexmap::IndexMap;

use super::dense::{Dense, Matrix, Parameterized};
use crate::binio::ByteReader;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ARTCTXM1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub tensors: IndexMap<String, Tensor>,
}

impl Checkpoint {
    pub fn insert(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Result<()> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::DimMismatch {
                expected,
                actual: data.len(),
            });
        }
        self.tensors.insert(name.into(), Tensor { shape, data });
        Ok(())
    }

    pub fn insert_scalars(&mut self, name: impl Into<String>, values: &[f64]) {
        let data: Vec<f32> = values.iter().map(|&v| v as f32).collect();
        self.tensors.insert(
            name.into(),
            Tensor {
                shape: vec![data.len()],
                data,
            },
        );
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Ingest(format!("checkpoint has no tensor `{name}`")))
    }

    pub fn scalars(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.get(name)?.data.iter().map(|&v| f64::from(v)).collect())
    }

    /// Stores every layer of `model` as `<layer>.weight` and `<layer>.bias`.
    pub fn add_model<M: Parameterized + ?Sized>(&mut self, model: &M) {
        for layer in model.layers() {
            self.add_layer(layer);
        }
    }

    pub fn add_layer(&mut self, layer: &Dense) {
        let narrow = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<_>>();
        self.tensors.insert(
            format!("{}.weight", layer.name),
            Tensor {
                shape: vec![layer.weight.rows, layer.weight.cols],
                data: narrow(&layer.weight.data),
            },
        );
        self.tensors.insert(
            format!("{}.bias", layer.name),
            Tensor {
                shape: vec![layer.bias.len()],
                data: narrow(&layer.bias),
            },
        );
    }

    /// Rebuilds the named dense layer.
    pub fn layer(&self, name: &str) -> Result<Dense> {
        let w = self.get(&format!("{name}.weight"))?;
        let b = self.get(&format!("{name}.bias"))?;
        if w.shape.len() != 2 || b.shape.len() != 1 {
            return Err(Error::Ingest(format!("layer `{name}` has malformed tensor ranks")));
        }
        let weight = Matrix {
            rows: w.shape[0],
            cols: w.shape[1],
            data: w.data.iter().map(|&v| f64::from(v)).collect(),
        };
        Dense::from_parts(name, weight, b.data.iter().map(|&v| f64::from(v)).collect())
    }

    /// Names of layers stored under `prefix.`, in insertion order.
    pub fn layer_names(&self, prefix: &str) -> Vec<String> {
        let start = format!("{prefix}.");
        self.tensors
            .keys()
            .filter_map(|k| k.strip_suffix(".weight"))
            .filter(|k| k.starts_with(&start))
            .map(str::to_owned)
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let magic = r.take(8, "magic")?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::BadMagic {
                expected: "ARTCTXM1".into(),
                found: magic.to_vec(),
            });
        }
        let count = r.u32("tensor count")?;
        let mut ckpt = Checkpoint::default();
        for _ in 0..count {
            let len = r.u16("name length")? as usize;
            let name = std::str::from_utf8(r.take(len, "tensor name")?)
                .map_err(|_| Error::Ingest("tensor name is not UTF-8".into()))?
                .to_owned();
            let rank = r.u32("rank")? as usize;
            let shape = (0..rank)
                .map(|_| r.u32("dim").map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n = shape.iter().product();
            let data = r.f32s(n, "tensor payload")?;
            ckpt.tensors.insert(name, Tensor { shape, data });
        }
        if !r.is_done() {
            return Err(Error::Ingest("trailing bytes after checkpoint".into()));
        }
        Ok(ckpt)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layer_round_trip_and_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let layer = Dense::new("trunk", 3, 2, &mut rng);
        let mut ckpt = Checkpoint::default();
        ckpt.add_layer(&layer);
        ckpt.insert_scalars("meta.lambda", &[0.25, 0.75]);
        let bytes = ckpt.to_bytes();
        assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ckpt);
        let rebuilt = back.layer("trunk").unwrap();
        for (a, b) in rebuilt.weight.data.iter().zip(&layer.weight.data) {
            assert_eq!(*a, f64::from(*b as f32));
        }
        assert_eq!(back.scalars("meta.lambda").unwrap(), [0.25, 0.75]);
        assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Truncated(_))));
        assert!(matches!(Checkpoint::from_bytes(b"ARTCTXF1\0\0\0\0"), Err(Error::BadMagic { .. })));
        assert!(ckpt.insert("x", vec![2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn layer_names_by_prefix() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut ckpt = Checkpoint::default();
        ckpt.add_layer(&Dense::new("head.type", 2, 2, &mut rng));
        ckpt.add_layer(&Dense::new("trunk", 2, 2, &mut rng));
        ckpt.add_layer(&Dense::new("head.school", 2, 2, &mut rng));
        assert_eq!(ckpt.layer_names("head"), ["head.type", "head.school"]);
    }
}
