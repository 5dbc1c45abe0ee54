//! Binary embedding files.
//!
//! Layout (little-endian): magic `TRIEMB1\0`, u32 version (1), u32 dim,
//! u64 count, then `count` records of u16 id length, UTF-8 id bytes and
//! `dim` f32 values.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::EncodeError;

const MAGIC: &[u8; 8] = b"TRIEMB1\0";
const VERSION: u32 = 1;

/// Vectors of one modality keyed by id, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> EmbeddingStore {
        EmbeddingStore {
            dim,
            ids: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<(), EncodeError> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(EncodeError::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if self.index.contains_key(&id) {
            return Err(EncodeError::DuplicateId(id));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.vectors.push(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&i| self.vectors[i].as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids.iter().map(String::as_str).zip(self.vectors.iter().map(Vec::as_slice))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EncodeError + '_ {
    move |source| EncodeError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Values are narrowed to f32 on disk.
pub fn write_embeddings(store: &EmbeddingStore, path: &Path) -> Result<(), EncodeError> {
    if store.is_empty() {
        return Err(EncodeError::EmptyStore);
    }
    let mut buf = Vec::with_capacity(24 + store.len() * (store.dim * 4 + 16));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(store.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(store.len() as u64).to_le_bytes());
    for (id, v) in store.iter() {
        let len = u16::try_from(id.len()).map_err(|_| EncodeError::IdTooLong(id.to_string()))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
        for &x in v {
            buf.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(io_err(path))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Option<&[u8]> {
        let s = self.bytes.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }
}

/// Reads a store written by [`write_embeddings`]; floats widen to f64.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingStore, EncodeError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    let truncated = |record| EncodeError::TruncatedFile {
        path: path.to_path_buf(),
        record,
    };
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(EncodeError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    r.pos = 8;
    let header = r.take(16).ok_or_else(|| truncated(0))?;
    let version = u32::from_le_bytes(header[0..4].try_into().unwrap());
    if version != VERSION {
        return Err(EncodeError::BadVersion {
            path: path.to_path_buf(),
            version,
        });
    }
    let dim = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let mut store = EmbeddingStore::new(dim);
    for record in 0..count {
        let len = r.take(2).ok_or_else(|| truncated(record))?;
        let len = u16::from_le_bytes([len[0], len[1]]) as usize;
        let id = r.take(len).ok_or_else(|| truncated(record))?;
        let id = std::str::from_utf8(id)
            .map_err(|_| EncodeError::BadId {
                path: path.to_path_buf(),
                record,
            })?
            .to_string();
        let raw = r.take(dim * 4).ok_or_else(|| truncated(record))?;
        let v = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        store.insert(id, v)?;
    }
    Ok(store)
}

/// Which store a vector belongs to in an embedding directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Smiles,
    Text,
    Hta,
    /// Functional-group structure, keyed by library id.
    FgPattern,
    /// Functional-group description, keyed by library id.
    FgText,
}

impl Modality {
    pub const ALL: [Modality; 5] = [
        Modality::Smiles,
        Modality::Text,
        Modality::Hta,
        Modality::FgPattern,
        Modality::FgText,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            Modality::Smiles => "smiles.emb",
            Modality::Text => "text.emb",
            Modality::Hta => "hta.emb",
            Modality::FgPattern => "fg_pattern.emb",
            Modality::FgText => "fg_text.emb",
        }
    }
}

/// One store per [`Modality`], read from or written to a directory.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBundle {
    pub smiles: EmbeddingStore,
    pub text: EmbeddingStore,
    pub hta: EmbeddingStore,
    pub fg_pattern: EmbeddingStore,
    pub fg_text: EmbeddingStore,
}

impl EmbeddingBundle {
    pub fn new(dim: usize) -> EmbeddingBundle {
        EmbeddingBundle {
            smiles: EmbeddingStore::new(dim),
            text: EmbeddingStore::new(dim),
            hta: EmbeddingStore::new(dim),
            fg_pattern: EmbeddingStore::new(dim),
            fg_text: EmbeddingStore::new(dim),
        }
    }

    pub fn store(&self, m: Modality) -> &EmbeddingStore {
        match m {
            Modality::Smiles => &self.smiles,
            Modality::Text => &self.text,
            Modality::Hta => &self.hta,
            Modality::FgPattern => &self.fg_pattern,
            Modality::FgText => &self.fg_text,
        }
    }

    pub fn store_mut(&mut self, m: Modality) -> &mut EmbeddingStore {
        match m {
            Modality::Smiles => &mut self.smiles,
            Modality::Text => &mut self.text,
            Modality::Hta => &mut self.hta,
            Modality::FgPattern => &mut self.fg_pattern,
            Modality::FgText => &mut self.fg_text,
        }
    }

    /// Writes every non-empty store into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, EncodeError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut written = Vec::new();
        for m in Modality::ALL {
            if self.store(m).is_empty() {
                continue;
            }
            let path = dir.join(m.file_name());
            write_embeddings(self.store(m), &path)?;
            written.push(path);
        }
        Ok(written)
    }

    /// Loads all five stores from `dir`; each must have dimension `dim`.
    pub fn load(dir: &Path, dim: usize) -> Result<EmbeddingBundle, EncodeError> {
        let mut bundle = EmbeddingBundle::new(dim);
        for m in Modality::ALL {
            let store = load_embeddings(&dir.join(m.file_name()))?;
            if store.dim() != dim {
                return Err(EncodeError::DimensionMismatch {
                    expected: dim,
                    found: store.dim(),
                });
            }
            *bundle.store_mut(m) = store;
        }
        Ok(bundle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EmbeddingStore {
        let mut s = EmbeddingStore::new(3);
        s.insert("a", vec![0.5, -1.25, 3.0]).unwrap();
        s.insert("béta", vec![1e-3f32 as f64, 0.0, -7.5]).unwrap();
        s
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.emb");
        let s = sample();
        write_embeddings(&s, &path).unwrap();
        let back = load_embeddings(&path).unwrap();
        assert_eq!(back, s);
        for ((_, a), (_, b)) in back.iter().zip(s.iter()) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.emb");
        write_embeddings(&sample(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();

        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        fs::write(&path, &wrong).unwrap();
        assert!(matches!(load_embeddings(&path), Err(EncodeError::BadMagic { .. })));

        fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(
            load_embeddings(&path),
            Err(EncodeError::TruncatedFile { record: 1, .. })
        ));
        fs::write(&path, &bytes[..12]).unwrap();
        assert!(matches!(load_embeddings(&path), Err(EncodeError::TruncatedFile { .. })));
    }

    #[test]
    fn duplicate_and_dimension_errors() {
        let mut s = sample();
        assert!(matches!(s.insert("a", vec![0.0; 3]), Err(EncodeError::DuplicateId(_))));
        assert!(matches!(
            s.insert("z", vec![0.0; 2]),
            Err(EncodeError::DimensionMismatch { expected: 3, found: 2 })
        ));

        // duplicate ids inside a file
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.emb");
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&2u64.to_le_bytes());
        for _ in 0..2 {
            bytes.extend_from_slice(&1u16.to_le_bytes());
            bytes.push(b'q');
            bytes.extend_from_slice(&1.0f32.to_le_bytes());
        }
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_embeddings(&path), Err(EncodeError::DuplicateId(_))));
    }

    #[test]
    fn empty_store_not_written() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            write_embeddings(&EmbeddingStore::new(4), &dir.path().join("e.emb")),
            Err(EncodeError::EmptyStore)
        ));
    }

    #[test]
    fn bundle_dimension_check() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = EmbeddingBundle::new(3);
        for m in Modality::ALL {
            b.store_mut(m).insert("k", vec![1.0, 2.0, 3.0]).unwrap();
        }
        b.write(dir.path()).unwrap();
        assert_eq!(EmbeddingBundle::load(dir.path(), 3).unwrap(), b);
        assert!(matches!(
            EmbeddingBundle::load(dir.path(), 768),
            Err(EncodeError::DimensionMismatch { .. })
        ));
    }
}
