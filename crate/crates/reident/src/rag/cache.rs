//! Binary sidecar caching chunk embeddings between runs.
//!
//! Entries are keyed by (embedder id, SHA-256 of the chunk text); a cache
//! written by one embedder is invisible to another. Layout, all integers
//! little-endian:
//!
//! ```text
//! magic      4 bytes  "RIDX"
//! version    u32      currently 1
//! id_len     u32      length of the embedder id in bytes
//! id         id_len   UTF-8 embedder id
//! dimension  u32      vector width (0 until the first entry)
//! count      u64      number of entries
//! entry      repeated: hash (32 bytes) + dimension × f32
//! ```

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::RagError;

const MAGIC: &[u8; 4] = b"RIDX";
const VERSION: u32 = 1;

pub struct EmbeddingCache {
    embedder_id: String,
    dimension: usize,
    entries: HashMap<[u8; 32], Vec<f32>>,
}

fn text_hash(text: &str) -> [u8; 32] {
    Sha256::digest(text.as_bytes()).into()
}

impl EmbeddingCache {
    pub fn new(embedder_id: &str) -> Self {
        EmbeddingCache {
            embedder_id: embedder_id.to_owned(),
            dimension: 0,
            entries: HashMap::new(),
        }
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, text: &str) -> Option<&[f32]> {
        self.entries.get(&text_hash(text)).map(Vec::as_slice)
    }

    pub fn insert(&mut self, text: &str, vector: Vec<f32>) {
        if self.dimension == 0 {
            self.dimension = vector.len();
        }
        self.entries.insert(text_hash(text), vector);
    }

    pub fn load(path: &Path) -> Result<Self, RagError> {
        let mut file = std::fs::File::open(path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let mut cursor = 0usize;

        let take = |cursor: &mut usize, n: usize| -> Result<&[u8], RagError> {
            let slice = bytes
                .get(*cursor..*cursor + n)
                .ok_or_else(|| RagError::Cache("truncated file".into()))?;
            *cursor += n;
            Ok(slice)
        };

        if take(&mut cursor, 4)? != MAGIC {
            return Err(RagError::Cache("bad magic".into()));
        }
        let version = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap());
        if version != VERSION {
            return Err(RagError::Cache(format!("unsupported version {version}")));
        }
        let id_len = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
        let embedder_id = String::from_utf8(take(&mut cursor, id_len)?.to_vec())
            .map_err(|_| RagError::Cache("embedder id is not UTF-8".into()))?;
        let dimension = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()) as usize;

        let mut entries = HashMap::with_capacity(count);
        for _ in 0..count {
            let hash: [u8; 32] = take(&mut cursor, 32)?.try_into().unwrap();
            let raw = take(&mut cursor, dimension * 4)?;
            let vector: Vec<f32> = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            entries.insert(hash, vector);
        }
        Ok(EmbeddingCache {
            embedder_id,
            dimension,
            entries,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), RagError> {
        let mut out: Vec<u8> = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.embedder_id.len() as u32).to_le_bytes());
        out.extend_from_slice(self.embedder_id.as_bytes());
        out.extend_from_slice(&(self.dimension as u32).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        // sorted for stable output
        let mut keys: Vec<&[u8; 32]> = self.entries.keys().collect();
        keys.sort();
        for key in keys {
            out.extend_from_slice(key);
            for v in &self.entries[key] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&out)?;
        Ok(())
    }
}
