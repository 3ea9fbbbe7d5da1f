//! Self-describing binary model container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic  b"STXMODEL"            8 bytes
//! version u32                   format revision, currently 1
//! kind    u32 len + utf8        model family tag ("detector", "recognizer")
//! meta    u32 count, then per entry: key (u32 len + utf8), value i64
//! tensors u32 count, then per entry:
//!         name (u32 len + utf8), rank u32, dims u32 each,
//!         values f64 bit patterns as u64
//! ```
//!
//! Weights are stored as raw f64 bits, so save/load round-trips bit-exactly.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"STXMODEL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelContainer {
    pub kind: String,
    pub meta: BTreeMap<String, i64>,
    pub tensors: Vec<(String, Tensor<f64>)>,
}

impl ModelContainer {
    pub fn new(kind: &str) -> Self {
        ModelContainer {
            kind: kind.to_string(),
            meta: BTreeMap::new(),
            tensors: Vec::new(),
        }
    }

    pub fn meta_value(&self, key: &str) -> Result<i64> {
        self.meta
            .get(key)
            .copied()
            .ok_or_else(|| Error::ModelFormat(format!("missing meta key {key}")))
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor<f64>> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::ModelFormat(format!("missing tensor {name}")))
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        write_str(w, &self.kind)?;
        w.write_all(&(self.meta.len() as u32).to_le_bytes())?;
        for (k, v) in &self.meta {
            write_str(w, k)?;
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, t) in &self.tensors {
            write_str(w, name)?;
            w.write_all(&(t.rank() as u32).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            for &v in t.data() {
                w.write_all(&v.to_bits().to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::ModelFormat("bad magic".into()));
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let kind = read_str(r)?;
        let mut meta = BTreeMap::new();
        for _ in 0..read_u32(r)? {
            let k = read_str(r)?;
            let mut buf = [0u8; 8];
            read_exact(r, &mut buf)?;
            meta.insert(k, i64::from_le_bytes(buf));
        }
        let n_tensors = read_u32(r)?;
        let mut tensors = Vec::with_capacity(n_tensors as usize);
        for _ in 0..n_tensors {
            let name = read_str(r)?;
            let rank = read_u32(r)? as usize;
            if rank > 8 {
                return Err(Error::ModelFormat(format!("implausible rank {rank}")));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(read_u32(r)? as usize);
            }
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n);
            let mut buf = [0u8; 8];
            for _ in 0..n {
                read_exact(r, &mut buf)?;
                data.push(f64::from_bits(u64::from_le_bytes(buf)));
            }
            tensors.push((name, Tensor::new(shape, data)?));
        }
        Ok(ModelContainer {
            kind,
            meta,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        self.write_to(&mut f)
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::read_from(&mut f)
    }
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::ModelFormat(format!("truncated container: {e}")))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(Error::ModelFormat(format!("implausible string length {len}")));
    }
    let mut buf = vec![0u8; len];
    read_exact(r, &mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::ModelFormat("non-utf8 string".into()))
}
