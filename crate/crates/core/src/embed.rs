//! Vocabularies, integer encoding and the three embedding sources.
//!
//! # CEMB format
//!
//! Frozen per-token contextual vectors are exchanged as a little-endian
//! binary file:
//!
//! ```text
//! magic   b"CEMB"
//! version u32 = 1
//! dim     u32
//! count   u64
//! count × { id_len u16, id [u8; id_len] (UTF-8), tokens u32, [f32; tokens × dim] }
//! ```

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const DEFAULT_EMBEDDING_DIM: usize = 100;
pub const DEFAULT_MAX_LEN: usize = 128;

pub const CEMB_MAGIC: &[u8; 4] = b"CEMB";
pub const CEMB_VERSION: u32 = 1;

/// Token ↔ id mapping with PAD at 0 and UNK at 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::from_tokens(Vec::<String>::new())
    }
}

impl Vocab {
    /// Builds a vocab from ordinary tokens; they receive ids 2, 3, ... in order.
    pub fn from_tokens(tokens: impl IntoIterator<Item = impl Into<String>>) -> Self {
        let mut all = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        all.extend(tokens.into_iter().map(Into::into));
        let index = all
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab { tokens: all, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Ordinary tokens (without PAD/UNK) in id order.
    pub fn words(&self) -> &[String] {
        &self.tokens[2..]
    }

    /// SHA-256 over the id-ordered token list.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update((t.len() as u64).to_le_bytes());
            h.update(t.as_bytes());
        }
        h.finalize().into()
    }
}

/// Tokens with frequency ≥ `min_count`, ordered by (frequency desc, token asc).
pub fn build_vocab<S: AsRef<str>>(corpus: &[Vec<S>], min_count: usize) -> Result<Vocab> {
    if min_count == 0 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for seq in corpus {
        for tok in seq {
            *freq.entry(tok.as_ref()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = freq
        .into_iter()
        .filter(|&(t, c)| c >= min_count && t != PAD_TOKEN && t != UNK_TOKEN)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(Vocab::from_tokens(kept.into_iter().map(|(t, _)| t)))
}

/// Maps tokens to ids, truncating at the tail or right-padding with PAD to
/// exactly `max_len`.
pub fn encode<S: AsRef<str>>(tokens: &[S], vocab: &Vocab, max_len: usize) -> Vec<u32> {
    let mut ids: Vec<u32> = tokens
        .iter()
        .take(max_len)
        .map(|t| vocab.id(t.as_ref()).unwrap_or(UNK_ID))
        .collect();
    ids.resize(max_len, PAD_ID);
    ids
}

/// Encodes a batch of token sequences, logging how many were truncated.
pub fn encode_all<S: AsRef<str>>(
    sequences: &[Vec<S>],
    vocab: &Vocab,
    max_len: usize,
) -> Vec<Vec<u32>> {
    let truncated = sequences.iter().filter(|s| s.len() > max_len).count();
    if truncated > 0 {
        log::info!(
            "truncated {truncated} of {} sequences to {max_len} tokens",
            sequences.len()
        );
    }
    sequences
        .iter()
        .map(|s| encode(s, vocab, max_len))
        .collect()
}

/// Dense `rows × dim` table. Row 0 (PAD) is all-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub values: Vec<f32>,
    pub rows: usize,
    pub dim: usize,
    pub trainable: bool,
}

impl EmbeddingMatrix {
    pub fn row(&self, id: usize) -> &[f32] {
        &self.values[id * self.dim..(id + 1) * self.dim]
    }
}

/// Reads a whitespace-separated `word v1 ... vD` table, keeping rows for
/// words in `vocab`. Words not in the file get zero rows.
pub fn load_pretrained_table(path: impl AsRef<Path>, vocab: &Vocab) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    parse_pretrained_table(reader, vocab, &path.display().to_string())
}

pub fn parse_pretrained_table<R: BufRead>(
    reader: R,
    vocab: &Vocab,
    provenance: &str,
) -> Result<EmbeddingMatrix> {
    let mut dim: Option<usize> = None;
    let mut values: Vec<f32> = Vec::new();
    let mut found = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let location = format!("{provenance}:{}", i + 1);
        let fields: Vec<&str> = parts.collect();
        let d = *dim.get_or_insert_with(|| {
            values = vec![0.0; vocab.len() * fields.len()];
            fields.len()
        });
        if d == 0 || fields.len() != d {
            return Err(Error::format(
                location,
                format!("expected {d} values, found {}", fields.len()),
            ));
        }
        let Some(id) = vocab.id(word) else { continue };
        if id == PAD_ID {
            continue;
        }
        let row = &mut values[id as usize * d..(id as usize + 1) * d];
        for (slot, f) in row.iter_mut().zip(&fields) {
            *slot = f
                .parse()
                .map_err(|_| Error::format(&location, format!("bad number `{f}`")))?;
        }
        found += 1;
    }
    let dim = dim.ok_or_else(|| Error::format(provenance, "empty embedding table"))?;
    log::info!(
        "pretrained table {provenance}: {found} of {} vocab words found, dim {dim}",
        vocab.len() - 2
    );
    Ok(EmbeddingMatrix {
        values,
        rows: vocab.len(),
        dim,
        trainable: false,
    })
}

/// Per-token vectors of one example, `len × dim` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualEntry {
    pub len: usize,
    pub data: Vec<f32>,
}

/// Frozen contextual vectors keyed by example id, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualStore {
    dim: usize,
    entries: IndexMap<String, ContextualEntry>,
}

impl ContextualStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("contextual dimension must be positive".into()));
        }
        Ok(ContextualStore {
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

    pub fn get(&self, id: &str) -> Option<&ContextualEntry> {
        self.entries.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ContextualEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn insert(&mut self, id: impl Into<String>, data: Vec<f32>) -> Result<()> {
        let id = id.into();
        if id.len() > u16::MAX as usize {
            return Err(Error::Config(format!("id of {} bytes is too long", id.len())));
        }
        if data.is_empty() || !data.len().is_multiple_of(self.dim) {
            return Err(Error::Shape(format!(
                "entry `{id}` has {} values, not a positive multiple of {}",
                data.len(),
                self.dim
            )));
        }
        if self.entries.contains_key(&id) {
            return Err(Error::Duplicate(id));
        }
        let len = data.len() / self.dim;
        self.entries.insert(id, ContextualEntry { len, data });
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CEMB_MAGIC)?;
        w.write_all(&CEMB_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for (id, entry) in &self.entries {
            w.write_all(&(id.len() as u16).to_le_bytes())?;
            w.write_all(id.as_bytes())?;
            w.write_all(&(entry.len as u32).to_le_bytes())?;
            for v in &entry.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CEMB_MAGIC {
            return Err(Error::format("CEMB header", "bad magic"));
        }
        let version = read_u32(&mut r)?;
        if version != CEMB_VERSION {
            return Err(Error::format(
                "CEMB header",
                format!("unsupported version {version}"),
            ));
        }
        let dim = read_u32(&mut r)? as usize;
        if dim == 0 {
            return Err(Error::format("CEMB header", "dimension 0"));
        }
        let count = read_u64(&mut r)?;
        let mut store = ContextualStore::new(dim)?;
        let mut buf = Vec::new();
        for rec in 0..count {
            let mut id_len = [0u8; 2];
            r.read_exact(&mut id_len)?;
            let mut id = vec![0u8; u16::from_le_bytes(id_len) as usize];
            r.read_exact(&mut id)?;
            let id = String::from_utf8(id)
                .map_err(|_| Error::format(format!("CEMB record {rec}"), "id is not UTF-8"))?;
            let tokens = read_u32(&mut r)? as usize;
            if tokens == 0 {
                return Err(Error::format(
                    format!("CEMB record {rec} (`{id}`)"),
                    "zero tokens",
                ));
            }
            buf.resize(tokens * dim * 4, 0);
            r.read_exact(&mut buf)?;
            let data = buf
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if store.entries.contains_key(&id) {
                return Err(Error::Duplicate(id));
            }
            store.entries.insert(id, ContextualEntry { len: tokens, data });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::format("CEMB trailer", "unexpected bytes after last record"));
        }
        Ok(store)
    }
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn load_contextual(path: impl AsRef<Path>) -> Result<ContextualStore> {
    let bytes = fs::read(path)?;
    ContextualStore::read_from(bytes.as_slice())
}
