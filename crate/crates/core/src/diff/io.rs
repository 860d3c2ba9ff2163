//! Binary tensor blocks.
//!
//! Layout (little endian): magic `b"TNSR"`, `u32` rank, `rank` x `u64` dims,
//! then the row-major values as `f64`. Single-precision tensors are widened
//! on write and rounded on read.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use crate::Scalar;

pub const TENSOR_MAGIC: &[u8; 4] = b"TNSR";
const MAX_RANK: u32 = 8;

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

pub fn write_tensor<T: Scalar, W: Write>(w: &mut W, a: &ArrayD<T>) -> io::Result<()> {
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&(a.ndim() as u32).to_le_bytes())?;
    for &d in a.shape() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for &v in a.as_standard_layout().iter() {
        w.write_all(&v.as_f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor<T: Scalar, R: Read>(r: &mut R) -> io::Result<ArrayD<T>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != TENSOR_MAGIC {
        return Err(invalid("not a tensor block (bad magic)"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let rank = u32::from_le_bytes(b4);
    if rank > MAX_RANK {
        return Err(invalid(format!("tensor rank {rank} exceeds {MAX_RANK}")));
    }
    let mut dims = Vec::with_capacity(rank as usize);
    let mut b8 = [0u8; 8];
    for _ in 0..rank {
        r.read_exact(&mut b8)?;
        dims.push(u64::from_le_bytes(b8) as usize);
    }
    let len = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| invalid("tensor size overflows"))?;
    let mut values = Vec::with_capacity(len.min(1 << 24));
    for _ in 0..len {
        r.read_exact(&mut b8)?;
        values.push(T::of(f64::from_le_bytes(b8)));
    }
    ArrayD::from_shape_vec(IxDyn(&dims), values).map_err(|e| invalid(e.to_string()))
}

pub fn save_tensor<T: Scalar>(path: impl AsRef<Path>, a: &ArrayD<T>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, a)?;
    w.flush()
}

pub fn load_tensor<T: Scalar>(path: impl AsRef<Path>) -> io::Result<ArrayD<T>> {
    let mut r = BufReader::new(File::open(path)?);
    let a = read_tensor(&mut r)?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(invalid("trailing bytes after tensor block"));
    }
    Ok(a)
}
