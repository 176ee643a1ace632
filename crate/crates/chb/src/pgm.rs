//! 8-bit binary PGM emission for quick visual inspection of scalar fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{ChbError, Result};
use crate::field::ScalarField;

/// Linear scaling of `[lo, hi]` onto `0..=255` with clamping and
/// round-half-up; the image's top row is the domain's top row.
pub fn emit_pgm(field: &ScalarField, path: &Path, lo: f64, hi: f64) -> Result<()> {
    if !(lo < hi) {
        return Err(ChbError::config("pgm.range", "need lo < hi"));
    }
    let (nx, ny) = (field.grid.nx, field.grid.ny);
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{nx} {ny}\n255\n")?;
    let mut row = vec![0u8; nx];
    for j in (0..ny).rev() {
        for (i, px) in row.iter_mut().enumerate() {
            *px = scale_pixel(field.at(i, j), lo, hi);
        }
        w.write_all(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn scale_pixel(v: f64, lo: f64, hi: f64) -> u8 {
    let x = ((v - lo) / (hi - lo) * 255.0).clamp(0.0, 255.0);
    (x + 0.5).floor() as u8
}
