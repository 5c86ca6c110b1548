//! Flat binary parameter container.
//!
//! Layout (all integers and doubles in the byte order named by the flag):
//!
//! ```text
//! b"WUGLABCK"  magic
//! u8           byte order flag, b'L' or b'B'
//! u8           format version (1)
//! u32          tensor count
//! per tensor:  u32 name length, UTF-8 name, u32 rank, rank × u64 extents
//! per tensor:  row-major f64 values
//! ```

use std::io::{Read, Write};

use super::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"WUGLABCK";
const VERSION: u8 = 1;

fn native_flag() -> u8 {
    if cfg!(target_endian = "little") {
        b'L'
    } else {
        b'B'
    }
}

pub fn write_checkpoint<W: Write>(mut w: W, names: &[String], tensors: &[Tensor]) -> Result<()> {
    if names.len() != tensors.len() {
        return Err(Error::Argument("one name per tensor required".into()));
    }
    w.write_all(MAGIC)?;
    w.write_all(&[native_flag(), VERSION])?;
    w.write_all(&(tensors.len() as u32).to_ne_bytes())?;
    for (name, t) in names.iter().zip(tensors) {
        w.write_all(&(name.len() as u32).to_ne_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_ne_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_ne_bytes())?;
        }
    }
    for t in tensors {
        let mut buf = Vec::with_capacity(t.numel() * 8);
        for v in t.data() {
            buf.extend_from_slice(&v.to_ne_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn checkpoint_bytes(names: &[String], tensors: &[Tensor]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_checkpoint(&mut out, names, tensors)?;
    Ok(out)
}

struct Reader<R> {
    inner: R,
    swap: bool,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
        if self.swap {
            b.reverse();
        }
        Ok(b)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_ne_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_ne_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_ne_bytes(self.bytes()?))
    }
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(Vec<String>, Vec<Tensor>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| Error::Checkpoint("file too short".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let mut head = [0u8; 2];
    r.read_exact(&mut head).map_err(|_| Error::Checkpoint("file too short".into()))?;
    let swap = match head[0] {
        b'L' | b'B' => head[0] != native_flag(),
        other => return Err(Error::Checkpoint(format!("unknown byte order flag {other}"))),
    };
    if head[1] != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", head[1])));
    }
    let mut rd = Reader { inner: r, swap };
    let count = rd.u32()? as usize;
    let mut names = Vec::with_capacity(count);
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let len = rd.u32()? as usize;
        let mut name = vec![0u8; len];
        rd.inner.read_exact(&mut name).map_err(|_| Error::Checkpoint("truncated name".into()))?;
        names.push(String::from_utf8(name).map_err(|_| Error::Checkpoint("name is not UTF-8".into()))?);
        let rank = rd.u32()? as usize;
        let shape = (0..rank).map(|_| rd.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        shapes.push(shape);
    }
    let mut tensors = Vec::with_capacity(count);
    for shape in shapes {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rd.f64()).collect::<Result<Vec<_>>>()?;
        tensors.push(Tensor::new(shape, data).map_err(|e| Error::Checkpoint(e.to_string()))?);
    }
    let mut rest = [0u8; 1];
    if rd.inner.read(&mut rest)? != 0 {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok((names, tensors))
}
