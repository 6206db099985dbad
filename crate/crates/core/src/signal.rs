//! Periodic 2D fields on the unit square, the isometric DFT pair, boundary
//! tapering and the SSCT raw grid format.
//!
//! A field of side `L` samples `x = (n1/L, n2/L)` in row-major order (`n1`
//! is the row). Its spectrum lives on the centered integer grid
//! `xi in [-L/2, L/2)^2`; the spectrum buffer is stored with row index
//! `xi1 + L/2` and column index `xi2 + L/2`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Result, SsctError};
use crate::fft::Fft2;

/// Smallest side length accepted by the transform.
pub const MIN_SIDE: usize = 16;

const MAGIC: &[u8; 4] = b"SSCT";
const FORMAT_VERSION: u16 = 1;
const DTYPE_REAL: u16 = 1;
const DTYPE_COMPLEX: u16 = 2;
const HEADER_LEN: usize = 16;

/// An `L x L` periodic image sampled on the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField {
    side: usize,
    values: Vec<Complex64>,
    is_real: bool,
}

impl SpatialField {
    pub fn new(side: usize, values: Vec<Complex64>) -> Result<Self> {
        check_square(side, values.len())?;
        Ok(Self {
            side,
            values,
            is_real: false,
        })
    }

    /// Builds a field from real samples; the imaginary parts are exactly zero.
    pub fn from_real(side: usize, values: &[f64]) -> Result<Self> {
        check_square(side, values.len())?;
        Ok(Self {
            side,
            values: values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            is_real: true,
        })
    }

    pub fn zeros(side: usize) -> Result<Self> {
        Self::new(side, vec![Complex64::new(0.0, 0.0); side * side])
    }

    /// Samples `f(x1, x2)` on the grid `x = (n1/L, n2/L)`.
    pub fn from_fn(side: usize, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let mut values = Vec::with_capacity(side * side);
        for n1 in 0..side {
            for n2 in 0..side {
                values.push(f(n1 as f64 / side as f64, n2 as f64 / side as f64));
            }
        }
        Self::new(side, values)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        // Writing through this handle may break the real-valued invariant.
        self.is_real = false;
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn get(&self, n1: usize, n2: usize) -> Complex64 {
        self.values[n1 * self.side + n2]
    }

    /// Sum of squared magnitudes (the squared discrete l2 norm).
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.energy().sqrt()
    }

    /// Drops the imaginary parts and marks the field real.
    pub fn real_part(&self) -> Self {
        Self {
            side: self.side,
            values: self
                .values
                .iter()
                .map(|v| Complex64::new(v.re, 0.0))
                .collect(),
            is_real: true,
        }
    }

    /// Multiplies every sample by `c`; a real scale keeps the real flag.
    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            side: self.side,
            values: self.values.iter().map(|v| v * c).collect(),
            is_real: self.is_real && c.im == 0.0,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &Self,
        op: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        if self.side != other.side {
            return Err(SsctError::Dimension(format!(
                "side mismatch: {} vs {}",
                self.side, other.side
            )));
        }
        Ok(Self {
            side: self.side,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| op(a, b))
                .collect(),
            is_real: self.is_real && other.is_real,
        })
    }

    /// `||self - other|| / ||other||`.
    pub fn relative_error(&self, reference: &Self) -> Result<f64> {
        let diff = self.sub(reference)?;
        let denom = reference.norm();
        if denom == 0.0 {
            return Ok(diff.norm());
        }
        Ok(diff.norm() / denom)
    }
}

/// Spectrum on the centered Fourier grid `xi in [-L/2, L/2)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumField {
    side: usize,
    values: Vec<Complex64>,
}

impl SpectrumField {
    pub fn new(side: usize, values: Vec<Complex64>) -> Result<Self> {
        check_square(side, values.len())?;
        Ok(Self { side, values })
    }

    pub fn zeros(side: usize) -> Result<Self> {
        Self::new(side, vec![Complex64::new(0.0, 0.0); side * side])
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Value at integer frequency `xi`; `None` outside the grid.
    pub fn at(&self, xi: [i64; 2]) -> Option<Complex64> {
        freq_index(self.side, xi).map(|k| self.values[k])
    }

    pub fn set(&mut self, xi: [i64; 2], value: Complex64) -> Result<()> {
        let k = freq_index(self.side, xi)
            .ok_or_else(|| SsctError::Index(format!("frequency {xi:?} outside the grid")))?;
        self.values[k] = value;
        Ok(())
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

fn check_square(side: usize, len: usize) -> Result<()> {
    if side == 0 || len == 0 {
        return Err(SsctError::Dimension("empty field".into()));
    }
    if side * side != len {
        return Err(SsctError::Dimension(format!(
            "expected {side}x{side} = {} samples, got {len}",
            side * side
        )));
    }
    Ok(())
}

/// Lowest frequency on an axis of length `side`: `-floor(side/2)`.
pub fn freq_min(side: usize) -> i64 {
    -((side / 2) as i64)
}

/// All frequencies of one axis in storage order.
pub fn freq_axis(side: usize) -> impl Iterator<Item = i64> {
    let lo = freq_min(side);
    (0..side as i64).map(move |k| lo + k)
}

/// Storage index of the centered frequency `xi`.
pub fn freq_index(side: usize, xi: [i64; 2]) -> Option<usize> {
    let lo = freq_min(side);
    let hi = lo + side as i64;
    if xi.iter().any(|&c| c < lo || c >= hi) {
        return None;
    }
    Some(((xi[0] - lo) as usize) * side + (xi[1] - lo) as usize)
}

/// Centered frequency of a storage index.
pub fn index_freq(side: usize, k: usize) -> [i64; 2] {
    let lo = freq_min(side);
    [lo + (k / side) as i64, lo + (k % side) as i64]
}

/// Isometric forward DFT, `f^(xi) = (1/L) sum_x exp(-2 pi i x.xi) f(x)`.
pub fn dft2(f: &SpatialField) -> Result<SpectrumField> {
    let side = f.side;
    if side < MIN_SIDE {
        return Err(SsctError::Dimension(format!(
            "side {side} below the minimum of {MIN_SIDE}"
        )));
    }
    let mut buf = f.values.clone();
    Fft2::new(side).forward(&mut buf);
    let scale = 1.0 / side as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); side * side];
    for (k, slot) in out.iter_mut().enumerate() {
        let [x1, x2] = index_freq(side, k);
        let src = wrap(x1, side) * side + wrap(x2, side);
        *slot = buf[src] * scale;
    }
    SpectrumField::new(side, out)
}

/// Isometric inverse DFT, `g(x) = (1/L) sum_xi exp(2 pi i x.xi) g(xi)`.
pub fn idft2(g: &SpectrumField) -> Result<SpatialField> {
    let side = g.side;
    if side < MIN_SIDE {
        return Err(SsctError::Dimension(format!(
            "side {side} below the minimum of {MIN_SIDE}"
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); side * side];
    for (k, v) in g.values.iter().enumerate() {
        let [x1, x2] = index_freq(side, k);
        buf[wrap(x1, side) * side + wrap(x2, side)] = *v;
    }
    Fft2::new(side).inverse(&mut buf);
    let scale = 1.0 / side as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    SpatialField::new(side, buf)
}

pub(crate) fn wrap(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Raised-cosine taper weight for sample `n` of an axis of length `side`.
///
/// Equal to 1 at distance `>= margin * side` from both edges and
/// `0.5 (1 - cos(pi d / (margin * side)))` at edge distance `d` otherwise.
pub fn taper_weight(n: usize, side: usize, margin: f64) -> f64 {
    let width = margin * side as f64;
    if width <= 0.0 {
        return 1.0;
    }
    let d = n.min(side - 1 - n) as f64;
    if d >= width {
        1.0
    } else {
        0.5 * (1.0 - (PI * d / width).cos())
    }
}

/// Multiplies `f` by a separable raised-cosine taper that vanishes on the
/// boundary samples, making non-periodic data approximately periodic.
pub fn periodize(f: &SpatialField, margin: f64) -> Result<SpatialField> {
    if !(0.0..0.5).contains(&margin) {
        return Err(SsctError::Config(format!(
            "taper margin {margin} not in [0, 0.5)"
        )));
    }
    if margin == 0.0 {
        return Ok(f.clone());
    }
    let side = f.side;
    let w: Vec<f64> = (0..side).map(|n| taper_weight(n, side, margin)).collect();
    let values = f
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| v * (w[k / side] * w[k % side]))
        .collect();
    Ok(SpatialField {
        side,
        values,
        is_real: f.is_real,
    })
}

/// Writes `field` in the SSCT raw grid format (dtype 1 for real fields).
pub fn write_field(field: &SpatialField, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field_to(field, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_field_to(field: &SpatialField, w: &mut impl Write) -> Result<()> {
    let dtype = if field.is_real {
        DTYPE_REAL
    } else {
        DTYPE_COMPLEX
    };
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&dtype.to_le_bytes())?;
    w.write_all(&(field.side as u32).to_le_bytes())?;
    w.write_all(&(field.side as u32).to_le_bytes())?;
    for v in &field.values {
        w.write_all(&v.re.to_le_bytes())?;
        if dtype == DTYPE_COMPLEX {
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<SpatialField> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    parse_field(&bytes)
}

/// Decodes an SSCT raw buffer.
pub fn parse_field(bytes: &[u8]) -> Result<SpatialField> {
    if bytes.len() < HEADER_LEN {
        return Err(SsctError::Format(format!(
            "truncated header ({} bytes)",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(SsctError::Format("bad magic bytes".into()));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u16_at(4);
    if version != FORMAT_VERSION {
        return Err(SsctError::Format(format!(
            "unsupported format version {version}"
        )));
    }
    let dtype = u16_at(6);
    let per_sample = match dtype {
        DTYPE_REAL => 8,
        DTYPE_COMPLEX => 16,
        other => return Err(SsctError::Format(format!("unknown dtype {other}"))),
    };
    let rows = u32_at(8) as usize;
    let cols = u32_at(12) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(per_sample))
        .ok_or_else(|| SsctError::Format("grid size overflows".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(SsctError::Format(format!(
            "truncated payload: expected {expected} bytes, found {}",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(SsctError::Format("trailing bytes after payload".into()));
    }
    if rows != cols {
        return Err(SsctError::Dimension(format!(
            "non-square grid {rows}x{cols}"
        )));
    }
    let f64_at = |o: usize| f64::from_le_bytes(payload[o..o + 8].try_into().unwrap());
    let values: Vec<Complex64> = (0..rows * cols)
        .map(|k| match dtype {
            DTYPE_REAL => Complex64::new(f64_at(8 * k), 0.0),
            _ => Complex64::new(f64_at(16 * k), f64_at(16 * k + 8)),
        })
        .collect();
    check_square(rows, values.len())?;
    Ok(SpatialField {
        side: rows,
        values,
        is_real: dtype == DTYPE_REAL,
    })
}

/// CSV export `row,col,re,im` with 17 significant digits.
pub fn write_field_csv(field: &SpatialField, w: &mut impl Write) -> Result<()> {
    writeln!(w, "row,col,re,im")?;
    for (k, v) in field.values.iter().enumerate() {
        writeln!(
            w,
            "{},{},{:.16e},{:.16e}",
            k / field.side,
            k % field.side,
            v.re,
            v.im
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(side: usize, seed: u64) -> SpatialField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..side * side)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        SpatialField::new(side, values).unwrap()
    }

    /// Literal quadruple-loop evaluation of the isometric DFT.
    fn direct_dft(f: &SpatialField) -> Vec<Complex64> {
        let l = f.side();
        let mut out = Vec::with_capacity(l * l);
        for xi1 in freq_axis(l) {
            for xi2 in freq_axis(l) {
                let mut acc = Complex64::new(0.0, 0.0);
                for n1 in 0..l {
                    for n2 in 0..l {
                        let ph =
                            -2.0 * PI * ((n1 as i64 * xi1 + n2 as i64 * xi2) as f64) / l as f64;
                        acc += f.get(n1, n2) * Complex64::from_polar(1.0, ph);
                    }
                }
                out.push(acc / l as f64);
            }
        }
        out
    }

    #[test]
    fn impulse_transforms_to_constant() {
        let mut values = vec![Complex64::new(0.0, 0.0); 32 * 32];
        values[0] = Complex64::new(1.0, 0.0);
        let spec = dft2(&SpatialField::new(32, values).unwrap()).unwrap();
        for v in spec.values() {
            assert!((v - Complex64::new(1.0 / 32.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn constant_transforms_to_delta() {
        let f = SpatialField::from_real(32, &vec![1.0; 32 * 32]).unwrap();
        let spec = dft2(&f).unwrap();
        for (k, v) in spec.values().iter().enumerate() {
            let expect = if index_freq(32, k) == [0, 0] {
                32.0
            } else {
                0.0
            };
            assert!((v - Complex64::new(expect, 0.0)).norm() < 1e-12, "{k}");
        }
    }

    #[test]
    fn parseval_and_direct_sum_agree() {
        for &side in &[16usize, 32] {
            let f = random_field(side, side as u64);
            let spec = dft2(&f).unwrap();
            let direct = direct_dft(&f);
            let num: f64 = spec
                .values()
                .iter()
                .zip(&direct)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            assert!(num.sqrt() / f.norm() < 1e-10);
            assert!((spec.energy() - f.energy()).abs() / f.energy() < 1e-12);
        }
        let f = random_field(64, 5);
        assert!((dft2(&f).unwrap().energy() - f.energy()).abs() / f.energy() < 1e-12);
    }

    #[test]
    fn round_trip() {
        let f = random_field(64, 9);
        let back = idft2(&dft2(&f).unwrap()).unwrap();
        assert!(back.relative_error(&f).unwrap() < 1e-12);
    }

    #[test]
    fn single_frequency_is_plane_wave() {
        let mut spec = SpectrumField::zeros(32).unwrap();
        spec.set([5, 0], Complex64::new(32.0, 0.0)).unwrap();
        let f = idft2(&spec).unwrap();
        let expect =
            SpatialField::from_fn(32, |x1, _| Complex64::from_polar(1.0, 2.0 * PI * 5.0 * x1))
                .unwrap();
        assert!(f.relative_error(&expect).unwrap() < 1e-13);
    }

    #[test]
    fn inverse_is_linear() {
        let a = dft2(&random_field(32, 1)).unwrap();
        let b = dft2(&random_field(32, 2)).unwrap();
        let sum = SpectrumField::new(
            32,
            a.values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| x + y)
                .collect(),
        )
        .unwrap();
        let lhs = idft2(&sum).unwrap();
        let rhs = idft2(&a).unwrap().add(&idft2(&b).unwrap()).unwrap();
        assert!(lhs.relative_error(&rhs).unwrap() < 1e-13);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            SpatialField::new(4, vec![]),
            Err(SsctError::Dimension(_))
        ));
        assert!(matches!(
            SpatialField::new(4, vec![Complex64::new(0.0, 0.0); 15]),
            Err(SsctError::Dimension(_))
        ));
        assert!(matches!(
            dft2(&SpatialField::zeros(8).unwrap()),
            Err(SsctError::Dimension(_))
        ));
    }

    #[test]
    fn taper_endpoints() {
        let f = SpatialField::from_real(40, &vec![1.0; 1600]).unwrap();
        assert_eq!(periodize(&f, 0.0).unwrap(), f);
        let t = periodize(&f, 0.1).unwrap();
        assert_eq!(t.get(20, 20), Complex64::new(1.0, 0.0));
        assert_eq!(t.get(0, 0), Complex64::new(0.0, 0.0));
        assert!(t.is_real());
        // margin 0.1 of 40 samples is a 4-sample band; its midpoint is d = 2.
        let expect = 0.5 * (1.0 - (PI / 2.0).cos());
        assert!((taper_weight(2, 40, 0.1) - expect).abs() < 1e-15);
        assert!(periodize(&f, 0.5).is_err());
    }

    #[test]
    fn raw_format_round_trip_is_bit_exact() {
        let f = random_field(64, 77);
        let mut buf = Vec::new();
        write_field_to(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 64 * 64 * 16);
        let g = parse_field(&buf).unwrap();
        for (a, b) in f.values().iter().zip(g.values()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        assert!(!g.is_real());
    }

    #[test]
    fn raw_format_rejections() {
        let f = random_field(16, 1);
        let mut buf = Vec::new();
        write_field_to(&f, &mut buf).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(parse_field(&bad), Err(SsctError::Format(_))));

        assert!(matches!(
            parse_field(&buf[..buf.len() - 3]),
            Err(SsctError::Format(_))
        ));

        let mut bad = buf.clone();
        bad[6] = 9;
        assert!(matches!(parse_field(&bad), Err(SsctError::Format(_))));
    }

    #[test]
    fn real_dtype_reads_as_real() {
        let vals: Vec<f64> = (0..256).map(|k| k as f64 * 0.5 - 3.0).collect();
        let f = SpatialField::from_real(16, &vals).unwrap();
        let mut buf = Vec::new();
        write_field_to(&f, &mut buf).unwrap();
        assert_eq!(u16::from_le_bytes([buf[6], buf[7]]), 1);
        let g = parse_field(&buf).unwrap();
        assert!(g.is_real());
        assert!(g.values().iter().all(|v| v.im == 0.0));
        assert_eq!(g, f);
    }

    #[test]
    fn csv_has_seventeen_significant_digits() {
        let f = SpatialField::from_real(16, &vec![1.0 / 3.0; 256]).unwrap();
        let mut out = Vec::new();
        write_field_csv(&f, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let line = text.lines().nth(1).unwrap();
        let re: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(re.to_bits(), (1.0f64 / 3.0).to_bits());
    }
}
