//! Binary tensor container and named archives.
//!
//! Container layout, all integers little-endian:
//!
//! ```text
//! "F16T" | version: u32 = 1 | rank: u32 | dims: rank × u32 | payload: f32 × product(dims)
//! ```
//!
//! A named archive is a plain concatenation of records
//! `name_len: u32 | name: UTF-8 | container`, read until end of file.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::Tensor;

pub const MAGIC: &[u8; 4] = b"F16T";
pub const VERSION: u32 = 1;
const MAX_RANK: u32 = 3;
const MAX_NAME_LEN: u32 = 1 << 16;

pub fn write_tensor<W: Write>(out: &mut W, t: &Tensor<f32>) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(t.rank() as u32).to_le_bytes())?;
    for &d in t.dims() {
        let d = u32::try_from(d).map_err(|_| Error::format(format!("dim {d} exceeds u32")))?;
        out.write_all(&d.to_le_bytes())?;
    }
    for v in t.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> io::Result<u32> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn read_tensor<R: Read>(input: &mut R) -> Result<Tensor<f32>> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::format(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = read_u32(input)?;
    if version != VERSION {
        return Err(Error::format(format!(
            "unsupported container version {version}, expected version {VERSION}"
        )));
    }
    let rank = read_u32(input)?;
    if rank == 0 || rank > MAX_RANK {
        return Err(Error::format(format!("rank {rank} outside 1..={MAX_RANK}")));
    }
    let mut dims = Vec::with_capacity(rank as usize);
    let mut len: usize = 1;
    for _ in 0..rank {
        let d = read_u32(input)? as usize;
        len = len
            .checked_mul(d)
            .ok_or_else(|| Error::format("element count overflows"))?;
        dims.push(d);
    }
    let mut bytes = vec![0u8; len * 4];
    input.read_exact(&mut bytes)?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Tensor::new(dims, data).map_err(|e| Error::format(e.to_string()))
}

/// Ordered list of named tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NamedArchive {
    records: Vec<(String, Tensor<f32>)>,
}

impl NamedArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record, replacing any existing record of the same name in place.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<f32>) {
        let name = name.into();
        match self.records.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = tensor,
            None => self.records.push((name, tensor)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.records.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor<f32>> {
        self.get(name)
            .ok_or_else(|| Error::format(format!("archive has no record named {name:?}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn merge(&mut self, other: NamedArchive) {
        for (name, t) in other.records {
            self.insert(name, t);
        }
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        for (name, t) in &self.records {
            out.write_all(&(name.len() as u32).to_le_bytes())?;
            out.write_all(name.as_bytes())?;
            write_tensor(out, t)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self> {
        let mut archive = Self::new();
        loop {
            let mut len_buf = [0u8; 4];
            let got = read_fully(input, &mut len_buf)?;
            if got == 0 {
                break;
            }
            if got < 4 {
                return Err(io::Error::new(
                    io::ErrorKind::UnexpectedEof,
                    "truncated record header",
                )
                .into());
            }
            let name_len = u32::from_le_bytes(len_buf);
            if name_len > MAX_NAME_LEN {
                return Err(Error::format(format!(
                    "record name length {name_len} too large"
                )));
            }
            let mut name = vec![0u8; name_len as usize];
            input.read_exact(&mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::format("record name is not valid UTF-8"))?;
            if archive.get(&name).is_some() {
                return Err(Error::format(format!("duplicate record {name:?}")));
            }
            let tensor = read_tensor(input)?;
            archive.records.push((name, tensor));
        }
        Ok(archive)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut input = BufReader::new(File::open(path)?);
        Self::read_from(&mut input)
    }
}

/// Reads until `buf` is full or end of input; returns the byte count.
fn read_fully<R: Read>(input: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}
