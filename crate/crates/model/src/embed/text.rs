//! Text embedders: a deterministic hashed-trigram default and a lookup
//! table of precomputed vectors.

use std::collections::HashMap;

use pw2ss_core::pixel::category_name;
use serde::Deserialize;

use crate::error::{ModelError, Result};

pub const DEFAULT_TEXT_DIM: usize = 384;

pub trait TextEmbedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, s: &str) -> Vec<f64>;
}

/// Lowercased character trigrams (with one space of padding on each side)
/// counted into `dim` FNV-1a buckets, then L2-normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HashedTrigramEmbedder {
    pub dim: usize,
}

impl Default for HashedTrigramEmbedder {
    fn default() -> Self {
        Self { dim: DEFAULT_TEXT_DIM }
    }
}

fn fnv1a(chars: &[char]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut buf = [0u8; 4];
    for c in chars {
        for &b in c.encode_utf8(&mut buf).as_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

fn l2_normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

impl TextEmbedder for HashedTrigramEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, s: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let words: Vec<String> = s.split_whitespace().map(str::to_lowercase).collect();
        if words.is_empty() {
            return v;
        }
        let mut chars = vec![' '];
        chars.extend(words.join(" ").chars());
        chars.push(' ');
        for w in chars.windows(3) {
            v[(fnv1a(w) % self.dim as u64) as usize] += 1.0;
        }
        l2_normalize(&mut v);
        v
    }
}

/// Exact-string lookup into precomputed vectors, hashed trigrams otherwise.
#[derive(Clone, Debug)]
pub struct FileEmbedder {
    table: HashMap<String, Vec<f64>>,
    fallback: HashedTrigramEmbedder,
}

#[derive(Deserialize)]
struct Entry {
    text: String,
    vec: Vec<f64>,
}

impl FileEmbedder {
    /// Parses JSONL lines `{"text": str, "vec": [reals]}`; all vectors share one width.
    pub fn from_jsonl(contents: &str) -> Result<Self> {
        let mut table = HashMap::new();
        let mut dim = None;
        for (i, line) in contents.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: Entry = serde_json::from_str(line)
                .map_err(|err| ModelError::EmbeddingFile(format!("line {}: {err}", i + 1)))?;
            if *dim.get_or_insert(e.vec.len()) != e.vec.len() || e.vec.is_empty() {
                return Err(ModelError::EmbeddingFile(format!("line {}: inconsistent vector width", i + 1)));
            }
            if e.vec.iter().any(|x| !x.is_finite()) {
                return Err(ModelError::EmbeddingFile(format!("line {}: non-finite value", i + 1)));
            }
            table.insert(e.text, e.vec);
        }
        let dim = dim.ok_or_else(|| ModelError::EmbeddingFile("no entries".into()))?;
        Ok(Self {
            table,
            fallback: HashedTrigramEmbedder { dim },
        })
    }
}

impl TextEmbedder for FileEmbedder {
    fn dim(&self) -> usize {
        self.fallback.dim
    }

    fn embed(&self, s: &str) -> Vec<f64> {
        self.table.get(s).cloned().unwrap_or_else(|| self.fallback.embed(s))
    }
}

/// Embedding of a graphic's category name, underscores read as spaces.
pub fn embed_graphic(category: usize, embedder: &dyn TextEmbedder) -> Vec<f64> {
    let name = category_name(category).unwrap_or("other");
    embedder.embed(&name.replace('_', " "))
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
