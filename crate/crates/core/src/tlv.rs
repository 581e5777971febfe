//! Minimal canonical TLV: one-byte type, LEB128 length, value.
//!
//! Lengths must use the shortest LEB128 form; anything else is rejected so
//! that every value has exactly one encoding.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TlvError {
    #[error("buffer truncated")]
    TruncatedBuffer,
    #[error("unknown or unexpected tag 0x{0:02x}")]
    UnknownTag(u8),
    #[error("{0} trailing bytes after value")]
    TrailingBytes(usize),
    #[error("length varint is not minimal or overflows")]
    BadLength,
    #[error("invalid field: {0}")]
    InvalidField(&'static str),
}

pub fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

pub fn put_tlv(out: &mut Vec<u8>, tag: u8, value: &[u8]) {
    out.push(tag);
    put_varint(out, value.len() as u64);
    out.extend_from_slice(value);
}

/// Cursor over a TLV buffer.
#[derive(Debug, Clone)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn peek_tag(&self) -> Option<u8> {
        self.buf.get(self.pos).copied()
    }

    fn varint(&mut self) -> Result<u64, TlvError> {
        let mut value: u64 = 0;
        for i in 0..10 {
            let byte = *self.buf.get(self.pos).ok_or(TlvError::TruncatedBuffer)?;
            self.pos += 1;
            let bits = u64::from(byte & 0x7f);
            if i == 9 && bits > 1 {
                return Err(TlvError::BadLength);
            }
            value |= bits << (7 * i);
            if byte & 0x80 == 0 {
                // a zero final byte after the first means a padded encoding
                if i > 0 && byte == 0 {
                    return Err(TlvError::BadLength);
                }
                return Ok(value);
            }
        }
        Err(TlvError::BadLength)
    }

    /// Reads any TLV, returning its tag and value.
    pub fn any(&mut self) -> Result<(u8, &'a [u8]), TlvError> {
        let tag = *self.buf.get(self.pos).ok_or(TlvError::TruncatedBuffer)?;
        self.pos += 1;
        let len = usize::try_from(self.varint()?).map_err(|_| TlvError::BadLength)?;
        let end = self.pos.checked_add(len).ok_or(TlvError::BadLength)?;
        if end > self.buf.len() {
            return Err(TlvError::TruncatedBuffer);
        }
        let value = &self.buf[self.pos..end];
        self.pos = end;
        Ok((tag, value))
    }

    /// Reads a TLV that must carry `tag`.
    pub fn expect(&mut self, tag: u8) -> Result<&'a [u8], TlvError> {
        match self.peek_tag() {
            None => Err(TlvError::TruncatedBuffer),
            Some(t) if t != tag => Err(TlvError::UnknownTag(t)),
            Some(_) => Ok(self.any()?.1),
        }
    }

    pub fn finish(&self) -> Result<(), TlvError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(TlvError::TrailingBytes(n)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn varint_boundaries() {
        for v in [0u64, 1, 127, 128, 255, 300, 16_383, 16_384, u64::from(u32::MAX), u64::MAX] {
            let mut out = Vec::new();
            put_varint(&mut out, v);
            out.insert(0, 0x01);
            // wrap as a bogus TLV header followed by nothing: parse just the length
            let mut r = Reader::new(&out);
            r.pos = 1;
            assert_eq!(r.varint().unwrap(), v);
            assert!(r.is_empty());
        }
    }

    #[test]
    fn padded_varint_rejected() {
        // 0x80 0x00 encodes zero in two bytes
        let buf = [0x08, 0x80, 0x00];
        assert_eq!(Reader::new(&buf).any().unwrap_err(), TlvError::BadLength);
    }

    #[test]
    fn truncated_value() {
        let buf = [0x08, 0x03, b'a', b'b'];
        assert_eq!(Reader::new(&buf).any().unwrap_err(), TlvError::TruncatedBuffer);
    }
}
