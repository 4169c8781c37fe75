//! Portable per-layer token embedding files and IDF weights.
//!
//! Layout (little-endian throughout):
//!
//! ```text
//! magic        4 bytes  "SEMB"
//! version      u16      1
//! model_name   u32 byte length + UTF-8
//! layers       u32 count + count * u16
//! hidden_dim   u32
//! entries      u32 count, then per entry:
//!   text_id    u32 byte length + UTF-8
//!   tokens     u32 count + count * (u32 byte length + UTF-8)
//!   vectors    u64 element count + count * f32, laid out [layer][token][dim]
//! ```
//!
//! The element count must equal `layers * tokens * hidden_dim` and the file
//! must end exactly after the last entry.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Error;

pub const MAGIC: &[u8; 4] = b"SEMB";
pub const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: expected \"SEMB\", found {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0} (expected {VERSION})")]
    UnsupportedVersion(u16),
    #[error("truncated file while reading {field}")]
    Truncated { field: &'static str },
    #[error("invalid utf-8 in {field}")]
    InvalidUtf8 { field: &'static str },
    #[error("shape mismatch in entry {entry}: {declared} vector elements declared, layers x tokens x dim = {expected}")]
    ShapeMismatch {
        entry: usize,
        declared: u64,
        expected: u64,
    },
    #[error("entry {entry} ({text_id}) has no tokens")]
    EmptyTokens { entry: usize, text_id: String },
    #[error("entry {entry} ({text_id}) disagrees with the file header on {field}")]
    HeaderMismatch {
        entry: usize,
        text_id: String,
        field: &'static str,
    },
    #[error("{0} trailing bytes after the last entry")]
    TrailingBytes(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Tokens of one text with their vectors for every exported layer.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedText {
    pub text_id: String,
    pub tokens: Vec<String>,
    pub layer_indices: Vec<u16>,
    pub hidden_dim: usize,
    /// Flattened `[layer][token][dim]`.
    pub vectors: Vec<f32>,
}

impl EmbeddedText {
    pub fn new(
        text_id: impl Into<String>,
        tokens: Vec<String>,
        layer_indices: Vec<u16>,
        hidden_dim: usize,
        vectors: Vec<f32>,
    ) -> Result<Self, Error> {
        let text = EmbeddedText {
            text_id: text_id.into(),
            tokens,
            layer_indices,
            hidden_dim,
            vectors,
        };
        text.validate(0)?;
        Ok(text)
    }

    fn expected_len(&self) -> u64 {
        self.layer_indices.len() as u64 * self.tokens.len() as u64 * self.hidden_dim as u64
    }

    fn validate(&self, entry: usize) -> Result<(), FormatError> {
        if self.tokens.is_empty() {
            return Err(FormatError::EmptyTokens {
                entry,
                text_id: self.text_id.clone(),
            });
        }
        if self.vectors.len() as u64 != self.expected_len() {
            return Err(FormatError::ShapeMismatch {
                entry,
                declared: self.vectors.len() as u64,
                expected: self.expected_len(),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn layer_position(&self, layer: u16) -> Option<usize> {
        self.layer_indices.iter().position(|&l| l == layer)
    }

    /// Row-major `[token][dim]` block of one layer.
    pub fn layer(&self, layer: u16) -> Result<&[f32], Error> {
        let pos = self.layer_position(layer).ok_or_else(|| Error::MissingLayer {
            layer,
            available: self.layer_indices.clone(),
        })?;
        let block = self.tokens.len() * self.hidden_dim;
        Ok(&self.vectors[pos * block..(pos + 1) * block])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub model_name: String,
    pub layer_indices: Vec<u16>,
    pub hidden_dim: usize,
    pub entries: Vec<EmbeddedText>,
}

impl EmbeddingFile {
    /// Checks that every entry is well-shaped and agrees with the header.
    pub fn validate(&self) -> Result<(), FormatError> {
        for (idx, entry) in self.entries.iter().enumerate() {
            let mismatch = |field| FormatError::HeaderMismatch {
                entry: idx,
                text_id: entry.text_id.clone(),
                field,
            };
            if entry.layer_indices != self.layer_indices {
                return Err(mismatch("layer_indices"));
            }
            if entry.hidden_dim != self.hidden_dim {
                return Err(mismatch("hidden_dim"));
            }
            entry.validate(idx)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, FormatError> {
        self.validate()?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, &self.model_name);
        put_u32(&mut out, self.layer_indices.len());
        for layer in &self.layer_indices {
            out.extend_from_slice(&layer.to_le_bytes());
        }
        put_u32(&mut out, self.hidden_dim);
        put_u32(&mut out, self.entries.len());
        for entry in &self.entries {
            put_str(&mut out, &entry.text_id);
            put_u32(&mut out, entry.tokens.len());
            for tok in &entry.tokens {
                put_str(&mut out, tok);
            }
            out.extend_from_slice(&(entry.vectors.len() as u64).to_le_bytes());
            for v in &entry.vectors {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
        if &magic != MAGIC {
            return Err(FormatError::BadMagic(magic));
        }
        let version = r.u16("version")?;
        if version != VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let model_name = r.string("model_name")?;
        let layer_count = r.u32("layer count")?;
        let layer_indices = (0..layer_count)
            .map(|_| r.u16("layer index"))
            .collect::<Result<Vec<_>, _>>()?;
        let hidden_dim = r.u32("hidden_dim")?;
        let entry_count = r.u32("entry count")?;

        let mut entries = Vec::with_capacity(entry_count.min(1 << 16));
        for idx in 0..entry_count {
            let text_id = r.string("text_id")?;
            let token_count = r.u32("token count")?;
            let tokens = (0..token_count)
                .map(|_| r.string("token"))
                .collect::<Result<Vec<_>, _>>()?;
            let declared = r.u64("vector count")?;
            let expected = (layer_indices.len() as u64)
                .saturating_mul(token_count as u64)
                .saturating_mul(hidden_dim as u64);
            if declared != expected {
                return Err(FormatError::ShapeMismatch {
                    entry: idx,
                    declared,
                    expected,
                });
            }
            let byte_len = usize::try_from(declared)
                .ok()
                .and_then(|n| n.checked_mul(4))
                .ok_or(FormatError::Truncated { field: "vectors" })?;
            let raw = r.take(byte_len, "vectors")?;
            let vectors = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let entry = EmbeddedText {
                text_id,
                tokens,
                layer_indices: layer_indices.clone(),
                hidden_dim,
                vectors,
            };
            entry.validate(idx)?;
            entries.push(entry);
        }
        if r.pos != bytes.len() {
            return Err(FormatError::TrailingBytes(bytes.len() - r.pos));
        }
        Ok(EmbeddingFile {
            model_name,
            layer_indices,
            hidden_dim,
            entries,
        })
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            model: self.model_name.clone(),
            layers: self.layer_indices.clone(),
            dim: self.hidden_dim,
            count: self.entries.len(),
        }
    }

    /// Entries keyed by text id.
    pub fn by_id(&self) -> HashMap<&str, &EmbeddedText> {
        self.entries.iter().map(|e| (e.text_id.as_str(), e)).collect()
    }
}

/// Human-readable summary written next to every embedding file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub model: String,
    pub layers: Vec<u16>,
    pub dim: usize,
    pub count: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Writes the binary file and its `<path>.json` sidecar.
pub fn write_embeddings(path: impl AsRef<Path>, file: &EmbeddingFile) -> Result<(), Error> {
    let path = path.as_ref();
    let bytes = file.to_bytes()?;
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| Error::Io { path: p, source }
    };
    fs::write(path, bytes).map_err(io_err(path))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&file.sidecar()).expect("sidecar serializes");
    fs::write(&side, json + "\n").map_err(io_err(&side))?;
    Ok(())
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingFile, Error> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(EmbeddingFile::from_bytes(&bytes)?)
}

fn put_u32(out: &mut Vec<u8>, n: usize) {
    let n = u32::try_from(n).expect("length exceeds u32");
    out.extend_from_slice(&n.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8], FormatError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or(FormatError::Truncated { field })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u16(&mut self, field: &'static str) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2, field)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, field: &'static str) -> Result<usize, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self, field: &'static str) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8, field)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self, field: &'static str) -> Result<String, FormatError> {
        let len = self.u32(field)?;
        let raw = self.take(len, field)?;
        String::from_utf8(raw.to_vec()).map_err(|_| FormatError::InvalidUtf8 { field })
    }
}

/// Smoothed inverse document frequency: `ln((1 + N) / (1 + df))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    weights: HashMap<String, f64>,
    corpus_size: usize,
}

impl IdfTable {
    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    /// Weight of `token`; unseen tokens get `ln(1 + N)`.
    pub fn get(&self, token: &str) -> f64 {
        self.weights
            .get(token)
            .copied()
            .unwrap_or_else(|| ((1 + self.corpus_size) as f64).ln())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Document frequency counts presence, not multiplicity.
pub fn compute_idf<D, T>(corpus: &[D]) -> Result<IdfTable, Error>
where
    D: AsRef<[T]>,
    T: AsRef<str>,
{
    if corpus.is_empty() {
        return Err(Error::invalid("IDF corpus is empty"));
    }
    let mut df: HashMap<String, usize> = HashMap::new();
    for doc in corpus {
        let unique: HashSet<&str> = doc.as_ref().iter().map(AsRef::as_ref).collect();
        for tok in unique {
            *df.entry(tok.to_owned()).or_insert(0) += 1;
        }
    }
    let n = corpus.len();
    let weights = df
        .into_iter()
        .map(|(tok, d)| (tok, ((1 + n) as f64 / (1 + d) as f64).ln()))
        .collect();
    Ok(IdfTable {
        weights,
        corpus_size: n,
    })
}
