//! Text and image export of fields and numbers.

use std::io::{self, Write};

use crate::torus::ScalarField;

/// Formats `x` with 12 significant digits in plain decimal notation.
///
/// Used for every floating-point value written to disk or stdout so that
/// regression diffs are byte-stable.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-6..=15).contains(&mag) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // A value like 9.9999999999995 can round up a digit; that is harmless here.
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Writes a field as CSV.
///
/// D=1: a single comma-separated line. D=2: one line per axis-0 slice.
/// D>=3: a header `D,L,order=row-major` followed by one value per line.
pub fn write_field_csv<W: Write>(field: &ScalarField, mut out: W) -> io::Result<()> {
    let shape = field.shape();
    let vals = field.values();
    match shape.dim() {
        1 | 2 => {
            let row_len = if shape.dim() == 1 { vals.len() } else { shape.len() };
            for row in vals.chunks(row_len) {
                let line: Vec<String> = row.iter().map(|&v| fmt_sig(v)).collect();
                writeln!(out, "{}", line.join(","))?;
            }
        }
        d => {
            writeln!(out, "{},{},order=row-major", d, shape.len())?;
            for &v in vals {
                writeln!(out, "{}", fmt_sig(v))?;
            }
        }
    }
    Ok(())
}

/// Writes a 2-D field as a binary 8-bit PGM. Value `v` maps to grey level
/// `round(255 * (1 - v))`, so a fully erased section is black.
///
/// Panics if the field is not two-dimensional.
pub fn write_field_pgm<W: Write>(field: &ScalarField, mut out: W) -> io::Result<()> {
    let shape = field.shape();
    assert_eq!(shape.dim(), 2, "PGM export needs a 2-D field");
    write!(out, "P5\n{} {}\n255\n", shape.len(), shape.len())?;
    let pixels: Vec<u8> = field.values().iter().map(|&v| grey_level(v)).collect();
    out.write_all(&pixels)
}

pub fn grey_level(v: f64) -> u8 {
    (255.0 * (1.0 - v.clamp(0.0, 1.0))).round() as u8
}
