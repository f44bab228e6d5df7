//! Binary checkpoint format, little-endian:
//!
//! ```text
//! magic "CMTK" | version u32
//! base_filters u32 | depth u32 | in_channels u32 | out_channels u32 | recurrent u32
//! tensor_count u32
//! per tensor: name_len u32 | name utf-8 | rank u32 | dims u32 x rank | values f32 x prod(dims)
//! adam_step u64
//! ```
//!
//! Parameters come first, then their Adam moments named `<param>.m` and
//! `<param>.v`. Values are stored as `f32`, so `f32` networks round-trip
//! bit-exactly.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{AdamState, NetConfig, Network, Param};

pub const MAGIC: &[u8; 4] = b"CMTK";
pub const VERSION: u32 = 1;

fn put_u32<W: Write>(w: &mut W, v: usize) -> io::Result<()> {
    let v = u32::try_from(v).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "value exceeds u32"))?;
    w.write_all(&v.to_le_bytes())
}

fn put_tensor<W: Write, T: Scalar>(w: &mut W, name: &str, dims: &[usize], values: &[T]) -> io::Result<()> {
    put_u32(w, name.len())?;
    w.write_all(name.as_bytes())?;
    put_u32(w, dims.len())?;
    for &d in dims {
        put_u32(w, d)?;
    }
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    w.write_all(&buf)
}

/// Serializes a network into `w`.
pub fn write_checkpoint<W: Write, T: Scalar>(net: &Network<T>, mut w: W) -> io::Result<()> {
    let c = net.config();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [c.base_filters, c.depth, c.in_channels, c.out_channels, c.recurrent as usize] {
        put_u32(&mut w, v)?;
    }
    let params = net.params();
    put_u32(&mut w, params.len() * 3)?;
    for p in params {
        put_tensor(&mut w, &p.name, &p.dims, &p.value)?;
    }
    let adam = net.adam();
    for (p, m) in params.iter().zip(&adam.m) {
        put_tensor(&mut w, &format!("{}.m", p.name), &p.dims, m)?;
    }
    for (p, v) in params.iter().zip(&adam.v) {
        put_tensor(&mut w, &format!("{}.v", p.name), &p.dims, v)?;
    }
    w.write_all(&adam.step.to_le_bytes())?;
    w.flush()
}

pub fn save_checkpoint<T: Scalar>(net: &Network<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_checkpoint(net, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        if self.data.len() - self.pos < n {
            return Err(format!("truncated at byte {}", self.pos));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<usize, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

struct RawTensor<T> {
    name: String,
    dims: Vec<usize>,
    values: Vec<T>,
}

fn read_tensor<T: Scalar>(cur: &mut Cursor<'_>) -> std::result::Result<RawTensor<T>, String> {
    let len = cur.u32()?;
    let name = String::from_utf8(cur.take(len)?.to_vec()).map_err(|_| "tensor name is not utf-8".to_string())?;
    let rank = cur.u32()?;
    if rank > 8 {
        return Err(format!("tensor {name}: rank {rank}"));
    }
    let dims = (0..rank).map(|_| cur.u32()).collect::<std::result::Result<Vec<_>, _>>()?;
    let count = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or("tensor size overflows")?;
    let bytes = cur.take(count.checked_mul(4).ok_or("tensor size overflows")?)?;
    let values = bytes
        .chunks_exact(4)
        .map(|b| T::of(f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64))
        .collect();
    Ok(RawTensor { name, dims, values })
}

/// Parses a checkpoint. Tensor shapes are validated against the stored config.
pub fn read_checkpoint<R: Read, T: Scalar>(mut r: R, origin: &Path) -> Result<Network<T>> {
    let fail = |message: String| Error::Checkpoint { path: origin.to_path_buf(), message };
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let mut cur = Cursor { data: &data, pos: 0 };
    if cur.take(4).map_err(fail)? != MAGIC {
        return Err(fail("bad magic bytes".into()));
    }
    let version = cur.u32().map_err(fail)?;
    if version != VERSION as usize {
        return Err(fail(format!("unsupported version {version}")));
    }
    let mut head = [0usize; 5];
    for v in &mut head {
        *v = cur.u32().map_err(fail)?;
    }
    if head[4] > 1 {
        return Err(fail(format!("recurrent flag {}", head[4])));
    }
    let config = NetConfig {
        base_filters: head[0],
        depth: head[1],
        in_channels: head[2],
        out_channels: head[3],
        recurrent: head[4] == 1,
    };
    config.validate()?;
    let count = cur.u32().map_err(fail)?;
    if count % 3 != 0 {
        return Err(fail(format!("tensor count {count} is not a multiple of 3")));
    }
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        tensors.push(read_tensor::<T>(&mut cur).map_err(fail)?);
    }
    let step = cur.u64().map_err(fail)?;
    if cur.pos != data.len() {
        return Err(fail(format!("{} trailing bytes", data.len() - cur.pos)));
    }
    let n = count / 3;
    let mut moments = tensors.split_off(n);
    let second = moments.split_off(n);
    for (suffix, group) in [(".m", &moments), (".v", &second)] {
        for (p, t) in tensors.iter().zip(group) {
            if t.name != format!("{}{suffix}", p.name) || t.dims != p.dims {
                return Err(Error::Shape(format!("optimizer tensor {} does not match {}", t.name, p.name)));
            }
        }
    }
    let params = tensors.into_iter().map(|t| Param { name: t.name, dims: t.dims, value: t.values }).collect();
    let adam = AdamState {
        m: moments.into_iter().map(|t| t.values).collect(),
        v: second.into_iter().map(|t| t.values).collect(),
        step,
    };
    Network::from_parts(config, params, adam)
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<Network<T>> {
    let path = path.as_ref();
    let file = fs::File::open(path)?;
    read_checkpoint(io::BufReader::new(file), path)
}

/// Loads a checkpoint and insists that it was written for `expected`.
pub fn load_checkpoint_as<T: Scalar>(path: impl AsRef<Path>, expected: &NetConfig) -> Result<Network<T>> {
    let net: Network<T> = load_checkpoint(path)?;
    if net.config() != expected {
        return Err(Error::Shape(format!("checkpoint holds {:?}, expected {expected:?}", net.config())));
    }
    Ok(net)
}
