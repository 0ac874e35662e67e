//! Little-endian binary container of named tensors.
//!
//! ```text
//! "MGAN"            4-byte magic
//! version: u32
//! repeated until EOF:
//!   name_len: u32, name: [u8; name_len] (UTF-8)
//!   rank: u32, extents: [u64; rank]
//!   values: [f64; product(extents)]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MGAN";
pub const VERSION: u32 = 1;

// Upper bounds that keep a corrupt header from triggering huge allocations.
const MAX_NAME: usize = 4096;
const MAX_RANK: usize = 8;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    entries: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Checkpoint::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.entries.push((name.into(), tensor));
    }

    pub fn extend(&mut self, entries: impl IntoIterator<Item = (String, Tensor)>) {
        self.entries.extend(entries);
    }

    /// Drops every entry whose name starts with `prefix`.
    pub fn remove_prefix(&mut self, prefix: &str) {
        self.entries.retain(|(n, _)| !n.starts_with(prefix));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        self.get(name)
            .and_then(|t| t.data().first().copied())
            .ok_or_else(|| Error::Checkpoint(format!("missing entry `{name}`")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        for (name, t) in &self.entries {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(t.rank() as u32).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in t.data() {
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

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let mut ckpt = Checkpoint::new();
        while cur.pos < bytes.len() {
            let name_len = cur.u32()? as usize;
            if name_len > MAX_NAME {
                return Err(Error::Checkpoint(format!("name length {name_len} at byte {}", cur.pos)));
            }
            let name = std::str::from_utf8(cur.take(name_len)?)
                .map_err(|_| Error::Checkpoint(format!("non UTF-8 name before byte {}", cur.pos)))?
                .to_string();
            let rank = cur.u32()? as usize;
            if rank > MAX_RANK {
                return Err(Error::Checkpoint(format!("`{name}`: rank {rank} too large")));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(cur.u64()? as usize);
            }
            let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let n = n
                .filter(|&n| n.checked_mul(8).is_some_and(|b| b <= bytes.len() - cur.pos))
                .ok_or_else(|| Error::Checkpoint(format!("`{name}`: truncated values")))?;
            let raw = cur.take(n * 8)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            let t = Tensor::new(shape, data).map_err(|e| Error::Checkpoint(format!("`{name}`: {e}")))?;
            ckpt.entries.push((name, t));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        Checkpoint::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint(format!("unexpected end of data at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let mut c = Checkpoint::new();
        c.push("ab", Tensor::new(vec![1, 2], vec![1.0, -2.0]).unwrap());
        let b = c.to_bytes();
        assert_eq!(&b[..4], b"MGAN");
        assert_eq!(&b[4..8], &1u32.to_le_bytes());
        assert_eq!(&b[8..12], &2u32.to_le_bytes());
        assert_eq!(&b[12..14], b"ab");
        assert_eq!(&b[14..18], &2u32.to_le_bytes());
        assert_eq!(&b[18..26], &1u64.to_le_bytes());
        assert_eq!(&b[26..34], &2u64.to_le_bytes());
        assert_eq!(&b[34..42], &1.0f64.to_le_bytes());
        assert_eq!(b.len(), 50);
    }

    #[test]
    fn roundtrip_is_byte_identical() {
        let mut c = Checkpoint::new();
        c.push("scalar", Tensor::scalar(3.25));
        c.push("w", Tensor::new(vec![2, 2], vec![0.1, 0.2, 0.3, -0.4]).unwrap());
        let b1 = c.to_bytes();
        let back = Checkpoint::from_bytes(&b1).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), b1);
    }

    #[test]
    fn truncation_and_bad_magic_rejected() {
        let mut c = Checkpoint::new();
        c.push("w", Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
        let b = c.to_bytes();
        assert!(Checkpoint::from_bytes(&b[..b.len() - 3]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
    }
}
