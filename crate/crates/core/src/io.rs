//! Binary field snapshots.
//!
//! `CHNSF1` block: the 6 magic bytes, `u32 nx`, `u32 ny`, `f64 lx`, `f64 ly`
//! (little endian), then `nx * ny` little-endian `f64` values, row-major
//! with `y` outer. A face field is two `CHNSV1` blocks of the same layout:
//! x-components with dimensions `(nx + 1, ny)`, then y-components with
//! `(nx, ny + 1)`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{ChnsError, Result};
use crate::field::{FaceVectorField, ScalarField};
use crate::grid::Grid2D;
use crate::scalar::{to_f64, Real};

pub const SCALAR_MAGIC: &[u8; 6] = b"CHNSF1";
pub const VECTOR_MAGIC: &[u8; 6] = b"CHNSV1";
const HEADER: usize = 6 + 4 + 4 + 8 + 8;

fn encode_block<T: Real>(out: &mut Vec<u8>, magic: &[u8; 6], nx: usize, ny: usize, lx: T, ly: T, values: &[T]) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&(nx as u32).to_le_bytes());
    out.extend_from_slice(&(ny as u32).to_le_bytes());
    out.extend_from_slice(&to_f64(lx).to_le_bytes());
    out.extend_from_slice(&to_f64(ly).to_le_bytes());
    for &v in values {
        out.extend_from_slice(&to_f64(v).to_le_bytes());
    }
}

struct Block {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    values: Vec<f64>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(ChnsError::Format(format!(
                "truncated file: {what} needs bytes {}..{} but the file ends at byte offset {}",
                self.pos,
                self.pos + n,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn block(&mut self, magic: &[u8; 6]) -> Result<Block> {
        let at = self.pos;
        let m = self.take(6, "magic")?;
        if m != magic {
            return Err(ChnsError::Format(format!(
                "bad magic at byte offset {at}: expected {:?}, found {:?}",
                String::from_utf8_lossy(magic),
                String::from_utf8_lossy(m)
            )));
        }
        let u32_at = |r: &mut Self, what| -> Result<usize> {
            Ok(u32::from_le_bytes(r.take(4, what)?.try_into().expect("4 bytes")) as usize)
        };
        let f64_at = |r: &mut Self, what| -> Result<f64> {
            Ok(f64::from_le_bytes(r.take(8, what)?.try_into().expect("8 bytes")))
        };
        let nx = u32_at(self, "nx")?;
        let ny = u32_at(self, "ny")?;
        let lx = f64_at(self, "Lx")?;
        let ly = f64_at(self, "Ly")?;
        let n = nx
            .checked_mul(ny)
            .ok_or_else(|| ChnsError::Format("dimensions overflow".into()))?;
        let raw = self.take(8 * n, "values")?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Block { nx, ny, lx, ly, values })
    }
}

fn check_dims<T: Real>(b: &Block, nx: usize, ny: usize, grid: &Grid2D<T>, what: &str) -> Result<()> {
    if b.nx != nx || b.ny != ny {
        return Err(ChnsError::Format(format!(
            "{what} dimensions {}x{} do not match the expected {nx}x{ny}",
            b.nx, b.ny
        )));
    }
    if b.lx != to_f64(grid.lx()) || b.ly != to_f64(grid.ly()) {
        return Err(ChnsError::Format(format!(
            "{what} domain {}x{} does not match the expected {}x{}",
            b.lx,
            b.ly,
            grid.lx(),
            grid.ly()
        )));
    }
    Ok(())
}

pub fn encode_scalar<T: Real>(f: &ScalarField<T>) -> Vec<u8> {
    let g = f.grid();
    let mut out = Vec::with_capacity(HEADER + 8 * f.len());
    encode_block(&mut out, SCALAR_MAGIC, g.nx(), g.ny(), g.lx(), g.ly(), f.values());
    out
}

pub fn encode_vector<T: Real>(f: &FaceVectorField<T>) -> Vec<u8> {
    let g = f.grid();
    let mut out = Vec::with_capacity(2 * HEADER + 8 * f.len());
    encode_block(&mut out, VECTOR_MAGIC, g.nx() + 1, g.ny(), g.lx(), g.ly(), f.xvals());
    encode_block(&mut out, VECTOR_MAGIC, g.nx(), g.ny() + 1, g.lx(), g.ly(), f.yvals());
    out
}

/// Decodes a scalar snapshot; the header must describe `grid`.
pub fn decode_scalar<T: Real>(bytes: &[u8], grid: &Grid2D<T>) -> Result<ScalarField<T>> {
    let mut r = Reader { bytes, pos: 0 };
    let b = r.block(SCALAR_MAGIC)?;
    check_dims(&b, grid.nx(), grid.ny(), grid, "scalar field")?;
    trailing(&r)?;
    ScalarField::from_values(grid, b.values.into_iter().map(crate::scalar::lit).collect())
}

pub fn decode_vector<T: Real>(bytes: &[u8], grid: &Grid2D<T>) -> Result<FaceVectorField<T>> {
    let mut r = Reader { bytes, pos: 0 };
    let bx = r.block(VECTOR_MAGIC)?;
    check_dims(&bx, grid.nx() + 1, grid.ny(), grid, "x-component block")?;
    let by = r.block(VECTOR_MAGIC)?;
    check_dims(&by, grid.nx(), grid.ny() + 1, grid, "y-component block")?;
    trailing(&r)?;
    let conv = |v: Vec<f64>| v.into_iter().map(crate::scalar::lit).collect();
    FaceVectorField::from_parts(grid, conv(bx.values), conv(by.values))
}

/// Reads the grid described by a scalar snapshot header.
pub fn peek_scalar_grid(bytes: &[u8]) -> Result<Grid2D<f64>> {
    let mut r = Reader { bytes, pos: 0 };
    let b = r.block(SCALAR_MAGIC)?;
    Grid2D::new(b.nx, b.ny, b.lx, b.ly)
}

fn trailing(r: &Reader<'_>) -> Result<()> {
    if r.pos != r.bytes.len() {
        return Err(ChnsError::Format(format!(
            "{} unexpected trailing bytes after byte offset {}",
            r.bytes.len() - r.pos,
            r.pos
        )));
    }
    Ok(())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

pub fn write_field<T: Real>(path: &Path, f: &ScalarField<T>) -> Result<()> {
    write_bytes(path, &encode_scalar(f))
}

pub fn read_field<T: Real>(path: &Path, grid: &Grid2D<T>) -> Result<ScalarField<T>> {
    decode_scalar(&fs::read(path)?, grid)
}

pub fn write_vector_field<T: Real>(path: &Path, f: &FaceVectorField<T>) -> Result<()> {
    write_bytes(path, &encode_vector(f))
}

pub fn read_vector_field<T: Real>(path: &Path, grid: &Grid2D<T>) -> Result<FaceVectorField<T>> {
    decode_vector(&fs::read(path)?, grid)
}
