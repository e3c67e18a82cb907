//! Model file format.
//!
//! ```text
//! magic        8 bytes  "L3DCNN1\n"
//! version      u32      FORMAT_VERSION
//! sigma        f64
//! block count  u32
//! per block:
//!   in_ch, out_ch   u32 x 2
//!   depthwise       f64 x in_ch*9     [in_ch][ky][kx]
//!   pointwise       f64 x out_ch*in_ch [out_ch][in_ch]
//!   bias            f64 x out_ch
//! crc32        u32      CRC-32 (IEEE) of every byte after the magic
//! ```
//!
//! All integers and floats are little endian.

use std::fs;
use std::path::Path;

use super::model::{CnnModel, SeparableBlock};
use super::CnnError;

pub const MAGIC: &[u8; 8] = b"L3DCNN1\n";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_model(model: &CnnModel) -> Vec<u8> {
    let mut payload = Vec::new();
    payload.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    payload.extend_from_slice(&model.sigma.to_le_bytes());
    payload.extend_from_slice(&(model.blocks.len() as u32).to_le_bytes());
    for b in &model.blocks {
        payload.extend_from_slice(&(b.in_ch as u32).to_le_bytes());
        payload.extend_from_slice(&(b.out_ch as u32).to_le_bytes());
        for v in b.depthwise.iter().chain(&b.pointwise).chain(&b.bias) {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&payload);
    let mut out = Vec::with_capacity(MAGIC.len() + payload.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CnnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(CnnError::Truncated)?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CnnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CnnError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CnnError> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<CnnModel, CnnError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CnnError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + 4 {
        return Err(CnnError::Truncated);
    }
    let body = &bytes[MAGIC.len()..];
    let mut r = Reader { bytes: body, pos: 0 };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(CnnError::UnsupportedVersion(version));
    }
    let sigma = r.f64()?;
    let count = r.u32()? as usize;
    if count != 4 {
        return Err(CnnError::ShapeMismatch(format!("{count} blocks, expected 4")));
    }
    let mut blocks = Vec::with_capacity(count);
    for _ in 0..count {
        let in_ch = r.u32()? as usize;
        let out_ch = r.u32()? as usize;
        if in_ch > 64 || out_ch > 64 {
            return Err(CnnError::ShapeMismatch(format!("block {in_ch}->{out_ch} exceeds channel plan")));
        }
        let depthwise = r.f64s(in_ch * 9)?;
        let pointwise = r.f64s(in_ch * out_ch)?;
        let bias = r.f64s(out_ch)?;
        blocks.push(SeparableBlock { in_ch, out_ch, depthwise, pointwise, bias });
    }
    let payload_len = r.pos;
    let stored = r.u32()?;
    if r.pos != body.len() {
        return Err(CnnError::TrailingBytes(body.len() - r.pos));
    }
    let actual = crc32fast::hash(&body[..payload_len]);
    if stored != actual {
        return Err(CnnError::ChecksumMismatch { stored, actual });
    }
    let model = CnnModel { sigma, blocks };
    model.validate_shape()?;
    if !model.sigma.is_finite() || model.tensors().flatten().any(|v| !v.is_finite()) {
        return Err(CnnError::ShapeMismatch("non-finite parameter".into()));
    }
    Ok(model)
}

pub fn save_model(model: &CnnModel, path: impl AsRef<Path>) -> Result<(), CnnError> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)).map_err(|source| CnnError::Io { path: path.to_owned(), source })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CnnModel, CnnError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CnnError::Io { path: path.to_owned(), source })?;
    decode_model(&bytes)
}
