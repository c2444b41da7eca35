//! Binary container for id-keyed float vectors.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes   "ARTCTXF1" (features) or "ARTCTXE1" (node embeddings)
//! count      u32
//! dim        u32
//! count × {
//!     id_len u16
//!     id     id_len bytes of UTF-8
//!     values dim × f32
//! }
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;

use crate::binio::ByteReader;
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 8] = b"ARTCTXF1";
pub const EMBEDDING_MAGIC: &[u8; 8] = b"ARTCTXE1";

/// Id-keyed table of equal-length `f32` vectors, kept in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable {
    dim: usize,
    entries: IndexMap<String, Vec<f32>>,
}

/// Precomputed visual features, one vector per painting id.
pub type FeatureStore = VectorTable;

/// Node embeddings keyed by `family/key`.
pub type EmbeddingTable = VectorTable;

impl VectorTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("vector dim must be positive".into()));
        }
        Ok(Self {
            dim,
            entries: IndexMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts or replaces a vector. Rejects wrong lengths and non-finite values.
    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("vector `{id}`")));
        }
        if id.len() > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!(
                "id longer than {} bytes",
                u16::MAX
            )));
        }
        self.entries.insert(id, vector);
        Ok(())
    }

    /// Inserts an `f64` vector, narrowing to `f32`.
    pub fn insert_f64(&mut self, id: impl Into<String>, vector: &[f64]) -> Result<()> {
        self.insert(id, vector.iter().map(|&v| v as f32).collect())
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    /// Vector widened to `f64`.
    pub fn get_f64(&self, id: &str) -> Option<Vec<f64>> {
        self.get(id).map(|v| v.iter().map(|&x| f64::from(x)).collect())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn to_bytes(&self, magic: &[u8; 8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.entries.len() * (self.dim * 4 + 16));
        out.extend_from_slice(magic);
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for (id, values) in &self.entries {
            out.extend_from_slice(&(id.len() as u16).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], magic: &[u8; 8]) -> Result<Self> {
        let mut reader = ByteReader::new(bytes);
        let found = reader.take(8, "magic")?;
        if found != magic {
            return Err(Error::BadMagic {
                expected: String::from_utf8_lossy(magic).into_owned(),
                found: found.to_vec(),
            });
        }
        let count = reader.u32("entry count")? as usize;
        let dim = reader.u32("dim")? as usize;
        let mut table = VectorTable::new(dim)?;
        for i in 0..count {
            let id_len = reader.u16("id length")? as usize;
            let id = std::str::from_utf8(reader.take(id_len, "id")?)
                .map_err(|_| Error::Ingest(format!("entry {i}: id is not UTF-8")))?
                .to_owned();
            let values = reader.f32s(dim, "vector payload")?;
            if table.contains(&id) {
                return Err(Error::Ingest(format!("duplicate id `{id}`")));
            }
            table.insert(id, values)?;
        }
        if !reader.is_done() {
            return Err(Error::Ingest(format!(
                "{} trailing bytes after {count} entries",
                reader.remaining()
            )));
        }
        Ok(table)
    }

    pub fn write(&self, path: &Path, magic: &[u8; 8]) -> Result<()> {
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&self.to_bytes(magic))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path, magic: &[u8; 8]) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, magic)
    }

    /// Plain-text export: one `id v1 v2 ...` line per entry.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, values) in &self.entries {
            out.push_str(id);
            for v in values {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

pub fn read_features(path: &Path) -> Result<FeatureStore> {
    VectorTable::read(path, FEATURE_MAGIC)
}

pub fn write_features(store: &FeatureStore, path: &Path) -> Result<()> {
    store.write(path, FEATURE_MAGIC)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingTable> {
    VectorTable::read(path, EMBEDDING_MAGIC)
}

pub fn write_embeddings(table: &EmbeddingTable, path: &Path) -> Result<()> {
    table.write(path, EMBEDDING_MAGIC)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn store(entries: &[(&str, Vec<f32>)]) -> FeatureStore {
        let mut s = VectorTable::new(entries[0].1.len()).unwrap();
        for (id, v) in entries {
            s.insert(*id, v.clone()).unwrap();
        }
        s
    }

    #[test]
    fn round_trip_small_store() {
        let s = store(&[("p1", vec![1.0, 2.0])]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        write_features(&s, &path).unwrap();
        assert_eq!(read_features(&path).unwrap(), s);
    }

    #[test]
    fn truncated_file_is_reported() {
        let s = store(&[("p1", vec![1.0, 2.0]), ("p2", vec![3.0, 4.0])]);
        let bytes = s.to_bytes(FEATURE_MAGIC);
        let err = VectorTable::from_bytes(&bytes[..bytes.len() - 3], FEATURE_MAGIC).unwrap_err();
        assert!(matches!(err, Error::Truncated(_)), "{err}");
        let err = VectorTable::from_bytes(&bytes[..10], FEATURE_MAGIC).unwrap_err();
        assert!(matches!(err, Error::Truncated(_)), "{err}");
    }

    #[test]
    fn wrong_magic_is_reported() {
        let s = store(&[("p1", vec![1.0])]);
        let bytes = s.to_bytes(EMBEDDING_MAGIC);
        let err = VectorTable::from_bytes(&bytes, FEATURE_MAGIC).unwrap_err();
        assert!(matches!(err, Error::BadMagic { .. }));
    }

    #[test]
    fn dim_mismatch_on_insert() {
        let mut s = VectorTable::new(2).unwrap();
        let err = s.insert("a", vec![1.0]).unwrap_err();
        assert!(matches!(err, Error::DimMismatch { expected: 2, actual: 1 }));
        assert!(s.insert("b", vec![f32::NAN, 0.0]).is_err());
    }

    #[test]
    fn header_layout_is_exact() {
        let s = store(&[("ab", vec![1.0])]);
        let bytes = s.to_bytes(FEATURE_MAGIC);
        assert_eq!(&bytes[..8], b"ARTCTXF1");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1u32.to_le_bytes());
        assert_eq!(&bytes[16..18], &2u16.to_le_bytes());
        assert_eq!(&bytes[18..20], b"ab");
        assert_eq!(&bytes[20..24], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 24);
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            dim in 1usize..6,
            raw in proptest::collection::vec(
                ("[a-z0-9/_]{1,12}", proptest::collection::vec(-1e30f32..1e30f32, 6)),
                0..20,
            ),
        ) {
            let mut s = VectorTable::new(dim).unwrap();
            for (id, v) in raw {
                s.insert(id, v[..dim].to_vec()).unwrap();
            }
            let back = VectorTable::from_bytes(&s.to_bytes(FEATURE_MAGIC), FEATURE_MAGIC).unwrap();
            prop_assert_eq!(back.len(), s.len());
            for ((ia, va), (ib, vb)) in s.iter().zip(back.iter()) {
                prop_assert_eq!(ia, ib);
                let ba: Vec<u32> = va.iter().map(|x| x.to_bits()).collect();
                let bb: Vec<u32> = vb.iter().map(|x| x.to_bits()).collect();
                prop_assert_eq!(ba, bb);
            }
        }
    }
}
