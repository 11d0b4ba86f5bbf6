//! Field export.
//!
//! CSV: header `x1,x2,t,value`, one row per admissible node and recorded
//! slice, floats in shortest round-trip form.
//!
//! Slab (little endian):
//!
//! ```text
//! offset  size  field
//!  0       4    magic "HJPL"
//!  4       2    u16 version (1)
//!  6       1    u8 ndims (3: x1, x2, slice)
//!  7       1    u8 reserved (0)
//!  8       8    f64 h
//! 16       8    f64 dt
//! 24       8    f64 epsilon (0 for limit fields)
//! 32    4*3     u32 nx, ny, nslices
//! 44    8*2     f64 origin x1, x2
//! 60    4*ns    u32 step of each slice
//! ...   8*n     f64 values, slice major, x1 fastest
//! ```
//!
//! Exterior nodes hold whatever the field stores there (`NaN` or `inf`).

use std::path::Path;

use crate::geometry::Point;
use crate::hj_solver::ValueField;
use crate::{Error, Result};

pub const SLAB_MAGIC: &[u8; 4] = b"HJPL";
pub const SLAB_VERSION: u16 = 1;

pub fn field_csv(field: &ValueField) -> String {
    let mut s = String::from("x1,x2,t,value\n");
    for slice in &field.slices {
        let t = slice.step as f64 * field.dt;
        for (i, v) in slice.values.iter().enumerate() {
            if !field.classes[i].is_admissible() {
                continue;
            }
            let x = field.grid.node(i);
            s.push_str(&format!("{:?},{:?},{:?},{:?}\n", x[0], x[1], t, v));
        }
    }
    s
}

pub fn field_slab(field: &ValueField) -> Vec<u8> {
    let n = field.grid.len();
    let mut b = Vec::with_capacity(60 + 4 * field.slices.len() + 8 * n * field.slices.len());
    b.extend_from_slice(SLAB_MAGIC);
    b.extend_from_slice(&SLAB_VERSION.to_le_bytes());
    b.push(3);
    b.push(0);
    for v in [field.grid.h, field.dt, field.epsilon] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    for d in [field.grid.nx, field.grid.ny, field.slices.len()] {
        b.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in field.grid.origin {
        b.extend_from_slice(&v.to_le_bytes());
    }
    for s in &field.slices {
        b.extend_from_slice(&(s.step as u32).to_le_bytes());
    }
    for s in &field.slices {
        for v in &s.values {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    b
}

/// A decoded slab.
#[derive(Clone, Debug, PartialEq)]
pub struct Slab {
    pub h: f64,
    pub dt: f64,
    pub epsilon: f64,
    pub nx: usize,
    pub ny: usize,
    pub origin: Point,
    pub steps: Vec<usize>,
    pub values: Vec<Vec<f64>>,
}

pub fn read_slab(bytes: &[u8]) -> Result<Slab> {
    let bad = |m: &str| Error::Query(format!("slab: {m}"));
    let take = |at: usize, n: usize| bytes.get(at..at + n).ok_or_else(|| bad("truncated"));
    let f64_at = |at: usize| -> Result<f64> { Ok(f64::from_le_bytes(take(at, 8)?.try_into().unwrap())) };
    let u32_at = |at: usize| -> Result<usize> { Ok(u32::from_le_bytes(take(at, 4)?.try_into().unwrap()) as usize) };
    if take(0, 4)? != SLAB_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u16::from_le_bytes(take(4, 2)?.try_into().unwrap());
    if version != SLAB_VERSION || take(6, 1)?[0] != 3 {
        return Err(bad("unsupported version or dimension count"));
    }
    let (nx, ny, ns) = (u32_at(32)?, u32_at(36)?, u32_at(40)?);
    let origin = [f64_at(44)?, f64_at(52)?];
    let steps = (0..ns).map(|i| u32_at(60 + 4 * i)).collect::<Result<Vec<_>>>()?;
    let base = 60 + 4 * ns;
    let n = nx * ny;
    if bytes.len() != base + 8 * n * ns {
        return Err(bad("length does not match the header"));
    }
    let values = (0..ns)
        .map(|s| (0..n).map(|i| f64_at(base + 8 * (s * n + i))).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(Slab { h: f64_at(8)?, dt: f64_at(16)?, epsilon: f64_at(24)?, nx, ny, origin, steps, values })
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}
