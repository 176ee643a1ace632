//! CHBF1 snapshot format: a 32-byte ASCII header `CHBF1 nx ny t` padded
//! with spaces and terminated by a newline, followed by `nx * ny` 64-bit
//! little-endian floats, row-major. Velocity snapshots store the two face
//! arrays consecutively, each with its own header carrying the face
//! dimensions.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{ChbError, Result};
use crate::field::{ScalarField, VelocityField};
use crate::grid::GridSpec;

const HEADER_LEN: usize = 32;
const MAGIC: &str = "CHBF1";

fn encode_header(nx: usize, ny: usize, t: f64) -> Result<[u8; HEADER_LEN]> {
    let text = format!("{MAGIC} {nx} {ny} {t:.9e}");
    if text.len() > HEADER_LEN - 1 {
        return Err(ChbError::FormatError(format!("header too long: `{text}`")));
    }
    let mut out = [b' '; HEADER_LEN];
    out[..text.len()].copy_from_slice(text.as_bytes());
    out[HEADER_LEN - 1] = b'\n';
    Ok(out)
}

fn decode_header(buf: &[u8; HEADER_LEN]) -> Result<(usize, usize, f64)> {
    if buf[HEADER_LEN - 1] != b'\n' {
        return Err(ChbError::FormatError("header missing newline terminator".to_string()));
    }
    let text = std::str::from_utf8(&buf[..HEADER_LEN - 1])
        .map_err(|_| ChbError::FormatError("header is not ASCII".to_string()))?;
    let mut parts = text.split_whitespace();
    let magic = parts.next().unwrap_or("");
    if magic != MAGIC {
        return Err(ChbError::FormatError(format!("bad magic `{magic}`, expected `{MAGIC}`")));
    }
    let nx: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ChbError::FormatError("unreadable nx".to_string()))?;
    let ny: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ChbError::FormatError("unreadable ny".to_string()))?;
    let t: f64 = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ChbError::FormatError("unreadable time stamp".to_string()))?;
    Ok((nx, ny, t))
}

fn write_block(w: &mut impl Write, nx: usize, ny: usize, t: f64, values: &[f64]) -> Result<()> {
    debug_assert_eq!(values.len(), nx * ny);
    w.write_all(&encode_header(nx, ny, t)?)?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_block(r: &mut impl Read) -> Result<(usize, usize, f64, Vec<f64>)> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|_| ChbError::FormatError("truncated header".to_string()))?;
    let (nx, ny, t) = decode_header(&header)?;
    let mut bytes = vec![0u8; nx * ny * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| ChbError::FormatError(format!("truncated payload for {nx}x{ny} block")))?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((nx, ny, t, values))
}

pub fn write_scalar(field: &ScalarField, t: f64, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_block(&mut w, field.grid.nx, field.grid.ny, t, &field.values)?;
    w.flush()?;
    Ok(())
}

/// Read a scalar snapshot onto the given grid; dimensions must match.
pub fn read_scalar(grid: &GridSpec, path: &Path) -> Result<(ScalarField, f64)> {
    let mut r = BufReader::new(File::open(path)?);
    let (nx, ny, t, values) = read_block(&mut r)?;
    if nx != grid.nx || ny != grid.ny {
        return Err(ChbError::FormatError(format!(
            "scalar snapshot is {nx}x{ny}, expected {}x{}",
            grid.nx, grid.ny
        )));
    }
    Ok((ScalarField::from_values(grid, values)?, t))
}

pub fn write_velocity(v: &VelocityField, t: f64, path: &Path) -> Result<()> {
    let (nx, ny) = (v.grid.nx, v.grid.ny);
    let mut w = BufWriter::new(File::create(path)?);
    write_block(&mut w, nx + 1, ny, t, &v.ux)?;
    write_block(&mut w, nx, ny + 1, t, &v.uy)?;
    w.flush()?;
    Ok(())
}

pub fn read_velocity(grid: &GridSpec, path: &Path) -> Result<(VelocityField, f64)> {
    let mut r = BufReader::new(File::open(path)?);
    let (nx1, ny1, t, ux) = read_block(&mut r)?;
    if nx1 != grid.nx + 1 || ny1 != grid.ny {
        return Err(ChbError::FormatError(format!(
            "x-face block is {nx1}x{ny1}, expected {}x{}",
            grid.nx + 1,
            grid.ny
        )));
    }
    let (nx2, ny2, _, uy) = read_block(&mut r)?;
    if nx2 != grid.nx || ny2 != grid.ny + 1 {
        return Err(ChbError::FormatError(format!(
            "y-face block is {nx2}x{ny2}, expected {}x{}",
            grid.nx,
            grid.ny + 1
        )));
    }
    let mut v = VelocityField::zeros(grid);
    v.ux = ux;
    v.uy = uy;
    Ok((v, t))
}
