//! Hierarchical names: ordered lists of opaque byte-string components.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::tlv::{self, Reader, TlvError};

pub const MAX_COMPONENT_LEN: usize = 255;
pub const MAX_COMPONENTS: usize = 32;

pub(crate) const TLV_NAME: u8 = 0x07;
pub(crate) const TLV_COMPONENT: u8 = 0x08;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NameError {
    #[error("name URI must start with '/'")]
    MissingLeadingSlash,
    #[error("malformed %XX escape at byte {0}")]
    MalformedEscape(usize),
    #[error("component of {0} bytes exceeds the {MAX_COMPONENT_LEN}-byte limit")]
    ComponentTooLong(usize),
    #[error("empty name component")]
    EmptyComponent,
    #[error("more than {MAX_COMPONENTS} components")]
    TooManyComponents,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Name {
    components: Vec<Vec<u8>>,
}

fn check_component(c: &[u8]) -> Result<(), NameError> {
    match c.len() {
        0 => Err(NameError::EmptyComponent),
        n if n > MAX_COMPONENT_LEN => Err(NameError::ComponentTooLong(n)),
        _ => Ok(()),
    }
}

impl Name {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_components<I, C>(components: I) -> Result<Self, NameError>
    where
        I: IntoIterator<Item = C>,
        C: Into<Vec<u8>>,
    {
        let mut name = Name::new();
        for c in components {
            name.push(c)?;
        }
        Ok(name)
    }

    /// Parses a `/`-delimited URI with `%XX` escapes.
    pub fn parse(uri: &str) -> Result<Self, NameError> {
        let bytes = uri.as_bytes();
        if bytes.first() != Some(&b'/') {
            return Err(NameError::MissingLeadingSlash);
        }
        let mut name = Name::new();
        if bytes.len() == 1 {
            return Ok(name);
        }
        let mut current = Vec::new();
        let mut i = 1;
        while i <= bytes.len() {
            if i == bytes.len() || bytes[i] == b'/' {
                name.push(std::mem::take(&mut current))?;
                i += 1;
                continue;
            }
            if bytes[i] == b'%' {
                let hi = bytes.get(i + 1).and_then(|b| (*b as char).to_digit(16));
                let lo = bytes.get(i + 2).and_then(|b| (*b as char).to_digit(16));
                match (hi, lo) {
                    (Some(hi), Some(lo)) => current.push((hi * 16 + lo) as u8),
                    _ => return Err(NameError::MalformedEscape(i)),
                }
                i += 3;
            } else {
                current.push(bytes[i]);
                i += 1;
            }
            if current.len() > MAX_COMPONENT_LEN {
                return Err(NameError::ComponentTooLong(current.len()));
            }
        }
        Ok(name)
    }

    pub fn push(&mut self, component: impl Into<Vec<u8>>) -> Result<(), NameError> {
        let component = component.into();
        check_component(&component)?;
        if self.components.len() >= MAX_COMPONENTS {
            return Err(NameError::TooManyComponents);
        }
        self.components.push(component);
        Ok(())
    }

    /// Returns a copy with `component` appended.
    pub fn child(&self, component: impl Into<Vec<u8>>) -> Result<Self, NameError> {
        let mut n = self.clone();
        n.push(component)?;
        Ok(n)
    }

    pub fn join(&self, other: &Name) -> Result<Self, NameError> {
        let mut n = self.clone();
        for c in &other.components {
            n.push(c.clone())?;
        }
        Ok(n)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[Vec<u8>] {
        &self.components
    }

    pub fn get(&self, i: usize) -> Option<&[u8]> {
        self.components.get(i).map(Vec::as_slice)
    }

    pub fn last(&self) -> Option<&[u8]> {
        self.components.last().map(Vec::as_slice)
    }

    /// The first `n` components.
    pub fn prefix(&self, n: usize) -> Name {
        Name {
            components: self.components[..n.min(self.len())].to_vec(),
        }
    }

    /// Components `[from, to)` as a name.
    pub fn slice(&self, from: usize, to: usize) -> Name {
        Name {
            components: self.components[from..to].to_vec(),
        }
    }

    /// True iff every component of `self` equals the corresponding leading
    /// component of `other`.
    pub fn is_prefix_of(&self, other: &Name) -> bool {
        self.len() <= other.len()
            && self
                .components
                .iter()
                .zip(&other.components)
                .all(|(a, b)| a == b)
    }

    /// Renders as a URI; bytes outside printable ASCII, `/` and `%` are escaped.
    pub fn to_uri(&self) -> String {
        if self.components.is_empty() {
            return "/".to_string();
        }
        let mut out = String::new();
        for c in &self.components {
            out.push('/');
            for &b in c {
                if b.is_ascii_graphic() && b != b'/' && b != b'%' {
                    out.push(b as char);
                } else {
                    out.push_str(&format!("%{b:02X}"));
                }
            }
        }
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        let mut inner = Vec::with_capacity(self.components.iter().map(|c| c.len() + 2).sum());
        for c in &self.components {
            tlv::put_tlv(&mut inner, TLV_COMPONENT, c);
        }
        tlv::put_tlv(out, TLV_NAME, &inner);
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }

    pub(crate) fn decode_value(value: &[u8]) -> Result<Self, TlvError> {
        let mut r = Reader::new(value);
        let mut name = Name::new();
        while !r.is_empty() {
            let c = r.expect(TLV_COMPONENT)?;
            name.push(c.to_vec()).map_err(|e| match e {
                NameError::TooManyComponents => TlvError::InvalidField("too many name components"),
                NameError::ComponentTooLong(_) => TlvError::InvalidField("name component too long"),
                _ => TlvError::InvalidField("empty name component"),
            })?;
        }
        Ok(name)
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self, TlvError> {
        let value = r.expect(TLV_NAME)?;
        Self::decode_value(value)
    }

    /// Decodes a standalone name TLV.
    pub fn decode(buf: &[u8]) -> Result<Self, TlvError> {
        let mut r = Reader::new(buf);
        let n = Self::read(&mut r)?;
        r.finish()?;
        Ok(n)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_uri())
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Name({})", self.to_uri())
    }
}

impl FromStr for Name {
    type Err = NameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Name::parse(s)
    }
}
