//! Versioned binary container for trained models.
//!
//! Byte layout (all integers and floats little-endian):
//!
//! | offset | size    | field                                   |
//! |--------|---------|-----------------------------------------|
//! | 0      | 8       | magic `"MSMODEL\0"`                     |
//! | 8      | 4       | format version (`u32`), currently 1     |
//! | 12     | 1       | kind tag (0 svm, 1 dnn, 2 cnn, 3 xgb, 4 random) |
//! | 13     | 1       | input mode (0 frame, 1 window)          |
//! | 14     | 4       | normalization dim (`u32`, 11)           |
//! | 18     | dim*8   | per-dimension means (`f64`)             |
//! | ...    | dim*8   | per-dimension stds (`f64`)              |
//! | ...    | dim     | zero-variance flags (`u8`)              |
//! | ...    | 8       | payload length (`u64`)                  |
//! | ...    | n       | kind-specific parameter blob            |
//!
//! Trailing bytes after the payload are rejected, as are short reads and a
//! foreign magic. A version other than [`FORMAT_VERSION`] fails naming both
//! versions.

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"MSMODEL\0";
pub const FORMAT_VERSION: u32 = 1;

/// Append-only little-endian byte sink.
#[derive(Debug, Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn put_bytes(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f64_slice(&mut self, vs: &[f64]) {
        for v in vs {
            self.put_f64(*v);
        }
    }
}

/// Bounds-checked little-endian byte source.
#[derive(Debug)]
pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Format(format!(
                "truncated model file: wanted {n} bytes, {} left",
                self.remaining()
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn get_u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn get_u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn get_u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.get_f64()?);
        }
        Ok(out)
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Format(format!(
                "trailing data: {} unexpected bytes after payload",
                self.remaining()
            )));
        }
        Ok(())
    }
}

/// Validates magic and version, returning a reader positioned at the kind tag.
pub fn open_container<'a>(bytes: &'a [u8]) -> Result<ByteReader<'a>> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(MAGIC.len())?;
    if magic != MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let version = r.get_u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Version { found: version, supported: FORMAT_VERSION });
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_primitives() {
        let mut w = ByteWriter::new();
        w.put_u8(7);
        w.put_u32(0xdead_beef);
        w.put_u64(u64::MAX - 3);
        w.put_f64(-0.15625);
        let bytes = w.into_bytes();
        let mut r = ByteReader::new(&bytes);
        assert_eq!(r.get_u8().unwrap(), 7);
        assert_eq!(r.get_u32().unwrap(), 0xdead_beef);
        assert_eq!(r.get_u64().unwrap(), u64::MAX - 3);
        assert_eq!(r.get_f64().unwrap().to_bits(), (-0.15625f64).to_bits());
        r.expect_end().unwrap();
    }

    #[test]
    fn short_reads_are_format_errors() {
        let mut r = ByteReader::new(&[1, 2]);
        assert!(matches!(r.get_u32(), Err(Error::Format(_))));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let err = open_container(b"NOTMODEL........").unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn future_version_names_both_versions() {
        let mut w = ByteWriter::new();
        w.put_bytes(MAGIC);
        w.put_u32(FORMAT_VERSION + 1);
        let bytes = w.into_bytes();
        let err = open_container(&bytes).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(&(FORMAT_VERSION + 1).to_string()), "{msg}");
        assert!(msg.contains(&FORMAT_VERSION.to_string()), "{msg}");
        assert!(matches!(
            err,
            Error::Version { found, supported }
                if found == FORMAT_VERSION + 1 && supported == FORMAT_VERSION
        ));
    }
}
