use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::RuntimeError;

#[derive(Debug, Clone)]
pub struct HeaderLayout {
    pub name: String,
    pub fields: Vec<(String, u32)>,
    pub metadata: bool,
    field_index: HashMap<String, usize>,
}

impl HeaderLayout {
    pub(crate) fn new(name: &str, fields: Vec<(String, u32)>, metadata: bool) -> Self {
        let field_index = fields
            .iter()
            .enumerate()
            .map(|(i, (n, _))| (n.clone(), i))
            .collect();
        HeaderLayout {
            name: name.to_string(),
            fields,
            metadata,
            field_index,
        }
    }

    pub fn bit_width(&self) -> u32 {
        self.fields.iter().map(|(_, w)| w).sum()
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.field_index.get(name).copied()
    }
}

/// Header and metadata instances of a program, indexed densely.
#[derive(Debug, Clone)]
pub struct Layout {
    pub headers: Vec<HeaderLayout>,
    index: HashMap<String, usize>,
}

impl Layout {
    pub(crate) fn new(headers: Vec<HeaderLayout>) -> Self {
        let index = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.name.clone(), i))
            .collect();
        Layout { headers, index }
    }

    pub fn header_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn resolve(&self, header: &str, field: &str) -> Option<(usize, usize, u32)> {
        let h = self.header_index(header)?;
        let f = self.headers[h].field_index(field)?;
        Some((h, f, self.headers[h].fields[f].1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderValue {
    pub valid: bool,
    pub fields: Vec<u64>,
}

/// A packet in flight through the pipeline: header instances (with validity),
/// metadata blocks and the unparsed payload.
#[derive(Clone)]
pub struct PacketInstance {
    layout: Arc<Layout>,
    pub(crate) headers: Vec<HeaderValue>,
    pub payload: Vec<u8>,
}

impl PartialEq for PacketInstance {
    fn eq(&self, other: &Self) -> bool {
        self.headers == other.headers && self.payload == other.payload
    }
}

impl Eq for PacketInstance {}

impl fmt::Debug for PacketInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (l, v) in self.layout.headers.iter().zip(&self.headers) {
            if !v.valid {
                continue;
            }
            let fields: Vec<String> = l
                .fields
                .iter()
                .zip(&v.fields)
                .map(|((n, _), x)| format!("{n}={x}"))
                .collect();
            m.entry(&l.name, &fields.join(" "));
        }
        m.entry(&"payload", &hex::encode(&self.payload));
        m.finish()
    }
}

impl PacketInstance {
    /// No packet headers valid; metadata valid and zeroed.
    pub fn empty(layout: Arc<Layout>) -> Self {
        let headers = layout
            .headers
            .iter()
            .map(|h| HeaderValue {
                valid: h.metadata,
                fields: vec![0; h.fields.len()],
            })
            .collect();
        PacketInstance {
            layout,
            headers,
            payload: Vec::new(),
        }
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn locate(&self, path: &str) -> Result<(usize, usize, u32), RuntimeError> {
        let (h, f) = path
            .split_once('.')
            .ok_or_else(|| RuntimeError::Evaluation(format!("bad field path {path:?}")))?;
        self.layout
            .resolve(h, f)
            .ok_or_else(|| RuntimeError::Evaluation(format!("unknown field {path}")))
    }

    /// Reads `"header.field"`. Reading an invalid header is an error.
    pub fn get(&self, path: &str) -> Result<u64, RuntimeError> {
        let (h, f, _) = self.locate(path)?;
        self.read(h, f)
    }

    /// Writes `"header.field"`, truncating to the declared width.
    pub fn set(&mut self, path: &str, value: u64) -> Result<(), RuntimeError> {
        let (h, f, w) = self.locate(path)?;
        self.headers[h].fields[f] = truncate(value, w);
        Ok(())
    }

    pub fn is_valid(&self, header: &str) -> bool {
        self.layout
            .header_index(header)
            .is_some_and(|h| self.headers[h].valid)
    }

    /// Marks a header valid (fields zeroed) or invalid.
    pub fn set_valid(&mut self, header: &str, valid: bool) -> Result<(), RuntimeError> {
        let h = self
            .layout
            .header_index(header)
            .ok_or_else(|| RuntimeError::Evaluation(format!("unknown header {header}")))?;
        self.set_valid_at(h, valid);
        Ok(())
    }

    pub(crate) fn set_valid_at(&mut self, h: usize, valid: bool) {
        let hv = &mut self.headers[h];
        if valid && !hv.valid {
            hv.fields.iter_mut().for_each(|x| *x = 0);
        }
        hv.valid = valid || self.layout.headers[h].metadata;
    }

    pub(crate) fn read(&self, h: usize, f: usize) -> Result<u64, RuntimeError> {
        let hv = &self.headers[h];
        if !hv.valid {
            return Err(RuntimeError::Evaluation(format!(
                "read of {}.{} from an invalid header",
                self.layout.headers[h].name, self.layout.headers[h].fields[f].0
            )));
        }
        Ok(hv.fields[f])
    }

    pub(crate) fn write(&mut self, h: usize, f: usize, width: u32, v: u64) {
        self.headers[h].fields[f] = truncate(v, width);
    }

    /// Names of valid non-metadata headers.
    pub fn valid_headers(&self) -> Vec<&str> {
        self.layout
            .headers
            .iter()
            .zip(&self.headers)
            .filter(|(l, v)| v.valid && !l.metadata)
            .map(|(l, _)| l.name.as_str())
            .collect()
    }

    /// Clears every metadata block to zero.
    pub fn reset_metadata(&mut self) {
        for (l, v) in self.layout.headers.iter().zip(self.headers.iter_mut()) {
            if l.metadata {
                v.fields.iter_mut().for_each(|x| *x = 0);
            }
        }
    }
}

#[inline]
pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

#[inline]
pub fn truncate(v: u64, width: u32) -> u64 {
    v & mask(width)
}

pub(crate) struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() * 8 - self.pos
    }

    pub(crate) fn byte_pos(&self) -> usize {
        self.pos.div_ceil(8)
    }

    /// MSB-first read of `n <= 64` bits. Caller checks `remaining`.
    pub(crate) fn read(&mut self, n: u32) -> u64 {
        let mut v = 0u64;
        for _ in 0..n {
            let byte = self.bytes[self.pos / 8];
            let bit = (byte >> (7 - (self.pos % 8))) & 1;
            v = (v << 1) | bit as u64;
            self.pos += 1;
        }
        v
    }
}

#[derive(Default)]
pub(crate) struct BitWriter {
    bytes: Vec<u8>,
    pos: usize,
}

impl BitWriter {
    pub(crate) fn write(&mut self, v: u64, n: u32) {
        for i in (0..n).rev() {
            if self.pos.is_multiple_of(8) {
                self.bytes.push(0);
            }
            let bit = ((v >> i) & 1) as u8;
            let last = self.bytes.len() - 1;
            self.bytes[last] |= bit << (7 - (self.pos % 8));
            self.pos += 1;
        }
    }

    pub(crate) fn finish(self) -> Vec<u8> {
        self.bytes
    }
}
