//! Heatmap output: 16-bit binary PGM with a sidecar scale file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Result, SsctError};

/// Encodes a row-major `rows x cols` map as a 16-bit PGM, min-max scaled to
/// `0..=65535`. Non-finite entries map to 0. Returns the bytes and the
/// `(min, max)` used for scaling.
pub fn encode_pgm16(values: &[f64], rows: usize, cols: usize) -> Result<(Vec<u8>, f64, f64)> {
    if values.len() != rows * cols || rows == 0 || cols == 0 {
        return Err(SsctError::Dimension(format!(
            "{} values for a {rows}x{cols} image",
            values.len()
        )));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values.iter().filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        lo = 0.0;
        hi = 0.0;
    }
    let span = hi - lo;
    let mut out = format!("P5\n{cols} {rows}\n65535\n").into_bytes();
    out.reserve(values.len() * 2);
    for &v in values {
        let level = if v.is_finite() && span > 0.0 {
            ((v - lo) / span * 65535.0).round() as u16
        } else {
            0
        };
        out.extend_from_slice(&level.to_be_bytes());
    }
    Ok((out, lo, hi))
}

/// Path of the scale file written next to `pgm`.
pub fn scale_path(pgm: &Path) -> PathBuf {
    let mut name = pgm.as_os_str().to_owned();
    name.push(".scale.txt");
    PathBuf::from(name)
}

/// Writes `path` and its `.scale.txt` sidecar holding `min` and `max`.
pub fn write_pgm16(path: &Path, values: &[f64], rows: usize, cols: usize) -> Result<()> {
    let (bytes, lo, hi) = encode_pgm16(values, rows, cols)?;
    fs::write(path, bytes)?;
    let mut f = fs::File::create(scale_path(path))?;
    writeln!(f, "min={lo:.16e}")?;
    writeln!(f, "max={hi:.16e}")?;
    Ok(())
}

/// Parses a file written by [`write_pgm16`] back into levels.
pub fn read_pgm16(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>)> {
    let bad = |m: &str| SsctError::Format(format!("PGM: {m}"));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields
            .push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not text"))?);
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(bad("expected a 16-bit P5 image"));
    }
    let cols: usize = fields[1].parse().map_err(|_| bad("bad width"))?;
    let rows: usize = fields[2].parse().map_err(|_| bad("bad height"))?;
    let data = bytes.get(pos..).unwrap_or(&[]);
    if data.len() != rows * cols * 2 {
        return Err(bad("pixel data length does not match the header"));
    }
    let levels = data
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((rows, cols, levels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scales_to_full_range() {
        let (bytes, lo, hi) = encode_pgm16(&[1.0, 2.0, 3.0, f64::NAN], 2, 2).unwrap();
        assert_eq!((lo, hi), (1.0, 3.0));
        let (rows, cols, levels) = read_pgm16(&bytes).unwrap();
        assert_eq!((rows, cols), (2, 2));
        assert_eq!(levels, vec![0, 32768, 65535, 0]);
    }

    #[test]
    fn constant_map_is_black() {
        let (bytes, lo, hi) = encode_pgm16(&[5.0; 6], 2, 3).unwrap();
        assert_eq!((lo, hi), (5.0, 5.0));
        assert_eq!(read_pgm16(&bytes).unwrap().2, vec![0; 6]);
    }

    #[test]
    fn writes_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("map.pgm");
        write_pgm16(&p, &[0.0, 0.5], 1, 2).unwrap();
        let scale = std::fs::read_to_string(scale_path(&p)).unwrap();
        assert!(scale.starts_with("min=0.0") && scale.contains("max=5.0"));
        assert!(encode_pgm16(&[0.0], 1, 2).is_err());
    }
}
