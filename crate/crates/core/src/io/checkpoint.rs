//! Binary checkpoint layout (all integers and floats little-endian):
//!
//! ```text
//! "PESC" | version u32 | V u32 | D u32 | E: V*D f32 | W: D*D f32 | V x (len u32, utf-8 bytes)
//! ```

use std::fs;
use std::path::Path;

use crate::corpus::Vocabulary;
use crate::encoder::ReferenceEncoderParams;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"PESC";
pub const CHECKPOINT_VERSION: u32 = 1;
/// Bytes before the matrix data.
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub params: ReferenceEncoderParams,
    pub vocab: Vocabulary,
}

pub fn encode_checkpoint(params: &ReferenceEncoderParams, vocab: &Vocabulary) -> Result<Vec<u8>> {
    if vocab.len() != params.vocab_size() {
        return Err(Error::Shape(format!(
            "vocabulary has {} entries but the encoder has {} rows",
            vocab.len(),
            params.vocab_size()
        )));
    }
    let to_u32 = |n: usize| {
        u32::try_from(n).map_err(|_| Error::Shape(format!("{n} does not fit the checkpoint header")))
    };
    let floats = params.embeddings().len() + params.projection().len();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * floats);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&to_u32(params.vocab_size())?.to_le_bytes());
    out.extend_from_slice(&to_u32(params.dim())?.to_le_bytes());
    for &v in params.embeddings().iter().chain(params.projection()) {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    for token in vocab.tokens() {
        out.extend_from_slice(&to_u32(token.len())?.to_le_bytes());
        out.extend_from_slice(token.as_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::CorruptCheckpoint(format!("truncated while reading {what} at byte {}", self.pos))
        })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::CorruptCheckpoint(format!("{what} too large")))?, what)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 {
        return Err(Error::CorruptCheckpoint("file shorter than the magic bytes".into()));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::IncompatibleCheckpoint(format!("bad magic {:?}", &bytes[..4])));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::IncompatibleCheckpoint(format!(
            "version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let v = r.u32("vocabulary size")? as usize;
    let d = r.u32("dimension")? as usize;
    let e = r.f32s(v.saturating_mul(d), "embedding matrix")?;
    let w = r.f32s(d.saturating_mul(d), "projection matrix")?;
    let mut tokens = Vec::with_capacity(v);
    for i in 0..v {
        let len = r.u32("vocabulary entry length")? as usize;
        let raw = r.take(len, "vocabulary entry")?;
        let s = std::str::from_utf8(raw)
            .map_err(|_| Error::CorruptCheckpoint(format!("vocabulary entry {i} is not UTF-8")))?;
        tokens.push(s.to_string());
    }
    if r.pos != bytes.len() {
        return Err(Error::CorruptCheckpoint(format!(
            "{} trailing bytes after the vocabulary",
            bytes.len() - r.pos
        )));
    }
    let params = ReferenceEncoderParams::new(v, d, e, w)
        .map_err(|err| Error::CorruptCheckpoint(err.to_string()))?;
    let vocab = Vocabulary::from_ordered(tokens)
        .map_err(|err| Error::CorruptCheckpoint(err.to_string()))?;
    Ok(Checkpoint {
        version,
        params,
        vocab,
    })
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &ReferenceEncoderParams, vocab: &Vocabulary) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(params, vocab)?;
    fs::write(path, bytes).map_err(|e| Error::file(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    decode_checkpoint(&bytes)
}
