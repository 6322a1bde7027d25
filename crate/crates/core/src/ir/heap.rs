//! Heap images: the memory and arguments an entry function is invoked with.
//!
//! ```text
//! region data 32 0100000000000000020000000000000003000000000000000400000000000000
//! region out 16
//! arg 0 = data
//! arg 1 = 4
//! input                ; starts the next image in the same file
//! ```
//!
//! Missing hex bytes are zero-filled. Regions are laid out in declaration
//! order after an 8-byte null guard.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::{Literal, Type, Value};

/// Width of every scalar in memory (64-bit little-endian encoding).
pub const SLOT_BYTES: u64 = 8;
/// Addresses below this are never valid; `null` is address 0.
pub const NULL_GUARD: u64 = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArgSpec {
    Lit(Literal),
    Region(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HeapImage {
    pub regions: Vec<Region>,
    pub args: BTreeMap<usize, ArgSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct HeapParseError {
    pub line: usize,
    pub message: String,
}

/// A flat, bounds-checked byte arena.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Memory {
    pub(crate) bytes: Vec<u8>,
}

impl Memory {
    pub fn new() -> Memory {
        Memory { bytes: vec![0; NULL_GUARD as usize] }
    }

    pub fn len(&self) -> u64 {
        self.bytes.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.len() as u64 <= NULL_GUARD
    }

    /// Appends a region and returns its base address.
    pub fn push_region(&mut self, bytes: &[u8]) -> u64 {
        let base = self.len();
        self.bytes.extend_from_slice(bytes);
        base
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub(crate) fn in_bounds(&self, addr: u64) -> bool {
        addr >= NULL_GUARD && addr.checked_add(SLOT_BYTES).is_some_and(|end| end <= self.len())
    }

    pub(crate) fn read(&self, addr: u64) -> Option<u64> {
        if !self.in_bounds(addr) {
            return None;
        }
        let a = addr as usize;
        Some(u64::from_le_bytes(self.bytes[a..a + 8].try_into().unwrap()))
    }

    pub(crate) fn write(&mut self, addr: u64, raw: u64) -> bool {
        if !self.in_bounds(addr) {
            return false;
        }
        let a = addr as usize;
        self.bytes[a..a + 8].copy_from_slice(&raw.to_le_bytes());
        true
    }

    pub(crate) fn truncate(&mut self, len: u64) {
        self.bytes.truncate(len as usize);
    }

    pub(crate) fn grow_zeroed(&mut self, n: u64) -> u64 {
        let base = self.len();
        self.bytes.resize((base + n) as usize, 0);
        base
    }
}

impl Default for Memory {
    fn default() -> Self {
        Memory::new()
    }
}

fn parse_hex(s: &str) -> Option<Vec<u8>> {
    if s.len() % 2 != 0 {
        return None;
    }
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(&s[i..i + 2], 16).ok()).collect()
}

fn parse_literal(s: &str) -> Option<Literal> {
    match s {
        "true" => return Some(Literal::Bool(true)),
        "false" => return Some(Literal::Bool(false)),
        "null" => return Some(Literal::Null),
        _ => {}
    }
    if let Ok(v) = s.parse::<i64>() {
        return Some(Literal::Int(v));
    }
    s.parse::<f64>().ok().map(Literal::Float)
}

impl HeapImage {
    /// Parses a file holding one or more images separated by `input` lines.
    pub fn parse_many(src: &str) -> Result<Vec<HeapImage>, HeapParseError> {
        let mut images = vec![HeapImage::default()];
        let mut touched = false;
        for (lno, raw) in src.lines().enumerate() {
            let line = raw.split(';').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| HeapParseError { line: lno + 1, message };
            let words: Vec<&str> = line.split_whitespace().collect();
            match words[0] {
                "input" => {
                    if touched {
                        images.push(HeapImage::default());
                        touched = false;
                    }
                }
                "region" => {
                    let (name, len, hex) = match words.as_slice() {
                        [_, n, l] => (*n, *l, ""),
                        [_, n, l, h] => (*n, *l, *h),
                        _ => return Err(err("expected `region <name> <byte-length> [hex-bytes]`".into())),
                    };
                    let len: usize = len.parse().map_err(|_| err(format!("bad byte length `{len}`")))?;
                    let mut bytes = parse_hex(hex).ok_or_else(|| err("malformed hex bytes".into()))?;
                    if bytes.len() > len {
                        return Err(err(format!("{} hex bytes exceed declared length {len}", bytes.len())));
                    }
                    bytes.resize(len, 0);
                    let img = images.last_mut().unwrap();
                    if img.regions.iter().any(|r| r.name == name) {
                        return Err(err(format!("duplicate region `{name}`")));
                    }
                    img.regions.push(Region { name: name.to_owned(), bytes });
                    touched = true;
                }
                "arg" => {
                    let [_, idx, "=", value] = words.as_slice() else {
                        return Err(err("expected `arg <index> = <literal | region-name>`".into()));
                    };
                    let idx: usize = idx.parse().map_err(|_| err(format!("bad argument index `{idx}`")))?;
                    let spec = match parse_literal(value) {
                        Some(l) => ArgSpec::Lit(l),
                        None => ArgSpec::Region((*value).to_owned()),
                    };
                    images.last_mut().unwrap().args.insert(idx, spec);
                    touched = true;
                }
                other => return Err(err(format!("unknown directive `{other}`"))),
            }
        }
        if !touched && images.len() > 1 {
            images.pop();
        }
        Ok(images)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.regions {
            let hex: String = r.bytes.iter().map(|b| format!("{b:02x}")).collect();
            let _ = writeln!(out, "region {} {} {}", r.name, r.bytes.len(), hex);
        }
        for (i, a) in &self.args {
            match a {
                ArgSpec::Lit(l) => {
                    let _ = writeln!(out, "arg {i} = {l}");
                }
                ArgSpec::Region(n) => {
                    let _ = writeln!(out, "arg {i} = {n}");
                }
            }
        }
        out
    }

    /// Lays the regions out in a fresh arena and resolves the argument list
    /// against the entry signature.
    pub fn instantiate(&self, params: &[Type]) -> Result<(Memory, Vec<Value>), String> {
        let mut mem = Memory::new();
        let mut bases = BTreeMap::new();
        for r in &self.regions {
            bases.insert(r.name.as_str(), mem.push_region(&r.bytes));
        }
        let mut args = Vec::with_capacity(params.len());
        for (i, ty) in params.iter().enumerate() {
            let spec = self.args.get(&i).ok_or_else(|| format!("missing `arg {i}`"))?;
            let v = match spec {
                ArgSpec::Region(name) => {
                    let base = bases.get(name.as_str()).ok_or_else(|| format!("unknown region `{name}`"))?;
                    if *ty != Type::Ptr {
                        return Err(format!("arg {i}: region `{name}` passed for a {ty} parameter"));
                    }
                    Value::Ptr(*base)
                }
                ArgSpec::Lit(l) => Value::from_literal(*l, *ty).ok_or_else(|| format!("arg {i}: {l} is not a {ty}"))?,
            };
            args.push(v);
        }
        if let Some(extra) = self.args.keys().find(|k| **k >= params.len()) {
            return Err(format!("arg {extra} beyond the entry's {} parameter(s)", params.len()));
        }
        Ok((mem, args))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_multiple_images() {
        let src = "region a 16 0100000000000000\narg 0 = a\narg 1 = 2\ninput\nregion b 8\narg 0 = b\narg 1 = -1\n";
        let imgs = HeapImage::parse_many(src).unwrap();
        assert_eq!(imgs.len(), 2);
        assert_eq!(imgs[0].regions[0].bytes.len(), 16);
        assert_eq!(imgs[0].regions[0].bytes[0], 1);
        let (mem, args) = imgs[0].instantiate(&[Type::Ptr, Type::I32]).unwrap();
        assert_eq!(args, vec![Value::Ptr(NULL_GUARD), Value::I32(2)]);
        assert_eq!(mem.read(NULL_GUARD), Some(1));
        assert_eq!(mem.read(0), None);
        assert_eq!(HeapImage::parse_many(&imgs[1].to_text()).unwrap()[0], imgs[1]);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(HeapImage::parse_many("region a 1 0102").is_err());
        assert!(HeapImage::parse_many("arg x = 1").is_err());
        assert!(HeapImage::parse_many("bogus").is_err());
        let img = &HeapImage::parse_many("arg 0 = nowhere").unwrap()[0];
        assert!(img.instantiate(&[Type::Ptr]).is_err());
    }
}
