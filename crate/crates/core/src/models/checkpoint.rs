//! Versioned binary checkpoint: spec text, vocabulary and its hash, and
//! every parameter tensor. All integers little-endian.
//!
//! ```text
//! "EXCK" | version u32 | precision u8 (bytes per value)
//! spec_len u64 | spec text (UTF-8)
//! input_dim u64
//! has_vocab u8 | vocab hash [32] | n_tokens u64 | (len u32, bytes)*
//! n_params u32 | (name_len u32, name, rank u32, dims u64*, values)*
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::embed::Vocab;
use crate::error::{Error, Result};
use crate::tensornet::{ParamStore, Scalar, Tensor};

use super::model::{allocate, Model};
use super::spec::ModelSpec;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"EXCK";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_u32(out, b.len() as u32);
    out.extend_from_slice(b);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::format(format!("checkpoint byte {}", self.pos), "truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::format("checkpoint", "size overflow"))
    }

    fn string(&mut self, len: usize) -> Result<String> {
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::format(format!("checkpoint byte {}", self.pos), "invalid UTF-8"))
    }
}

impl<S: Scalar> Model<S> {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, CHECKPOINT_VERSION);
        out.push(S::BYTES as u8);
        let spec = self.spec.to_text();
        put_u64(&mut out, spec.len() as u64);
        out.extend_from_slice(spec.as_bytes());
        put_u64(&mut out, self.input_dim as u64);
        match &self.vocab {
            Some(v) => {
                out.push(1);
                out.extend_from_slice(&v.hash());
                put_u64(&mut out, v.words().len() as u64);
                for w in v.words() {
                    put_bytes(&mut out, w.as_bytes());
                }
            }
            None => {
                out.push(0);
                out.extend_from_slice(&[0; 32]);
                put_u64(&mut out, 0);
            }
        }
        put_u32(&mut out, self.params.len() as u32);
        for (_, p) in self.params.iter() {
            put_bytes(&mut out, p.name.as_bytes());
            put_u32(&mut out, p.value.rank() as u32);
            for &d in p.value.shape() {
                put_u64(&mut out, d as u64);
            }
            for &v in p.value.data() {
                v.write_le(&mut out);
            }
        }
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::format("checkpoint", "bad magic"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::format("checkpoint", format!("unsupported version {version}")));
        }
        let precision = r.u8()? as usize;
        if precision != S::BYTES {
            return Err(Error::Config(format!(
                "checkpoint holds {}-byte values, loader expects {}",
                precision,
                S::BYTES
            )));
        }
        let spec_len = r.usize()?;
        let spec = ModelSpec::parse(&r.string(spec_len)?)?;
        let input_dim = r.usize()?;
        let has_vocab = r.u8()? == 1;
        let hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let n_tokens = r.usize()?;
        let mut words = Vec::with_capacity(n_tokens.min(1 << 20));
        for _ in 0..n_tokens {
            let len = r.u32()? as usize;
            words.push(r.string(len)?);
        }
        let vocab = if has_vocab {
            let v = Vocab::from_tokens(words);
            if v.hash() != hash {
                return Err(Error::format("checkpoint", "vocabulary hash mismatch"));
            }
            Some(v)
        } else {
            None
        };
        if has_vocab != spec.embedding.uses_vocab() {
            return Err(Error::format("checkpoint", "vocabulary presence disagrees with spec"));
        }
        let n_params = r.u32()? as usize;
        let mut stored = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            let len = r.u32()? as usize;
            let name = r.string(len)?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(S::BYTES).ok_or_else(|| Error::format("checkpoint", "size overflow"))?)?;
            let data = raw.chunks_exact(S::BYTES).map(S::read_le).collect();
            stored.push((name, Tensor::new(shape, data)?));
        }
        if r.pos != bytes.len() {
            return Err(Error::format("checkpoint", "trailing bytes"));
        }
        let rows = vocab.as_ref().map_or(0, Vocab::len);
        let mut params = ParamStore::new();
        let mut next = stored.into_iter();
        let layout = allocate(&spec, input_dim, rows, &mut params, |name, _| {
            let (stored_name, t) = next
                .next()
                .ok_or_else(|| Error::format("checkpoint", format!("missing parameter {name}")))?;
            if stored_name != name {
                return Err(Error::format(
                    "checkpoint",
                    format!("expected parameter {name}, found {stored_name}"),
                ));
            }
            Ok(t)
        })?;
        if next.next().is_some() {
            return Err(Error::format("checkpoint", "extra parameters"));
        }
        Ok(Model {
            spec,
            params,
            layout,
            vocab,
            input_dim,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_checkpoint_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut buf = Vec::new();
        fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_checkpoint_bytes(&buf)
    }
}
