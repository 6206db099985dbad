//! Discrete general curvelet transform, its spatial gradient and transpose.
//!
//! For a tile with window `g` and normalization `L_a`, coefficients on the
//! position grid `b = (m1/L_B, m2/L_B)` are
//!
//! ```text
//! W(b)      = (1/L_a) sum_xi exp(2 pi i b.xi) g(xi) f^(xi)
//! grad W(b) = (1/L_a) sum_xi 2 pi i xi exp(2 pi i b.xi) g(xi) f^(xi)
//! ```
//!
//! Because `exp(2 pi i b.xi)` is `L_B`-periodic in `xi`, both sums are
//! computed exactly by folding `g f^` modulo `L_B` and running one
//! `L_B x L_B` inverse FFT per tile. The transpose folds back through a
//! forward FFT and weights by `(L_a/L_B)^2`; it inverts the forward map
//! when no two support points of a tile alias modulo `L_B`.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Result, SsctError};
use crate::fft::Fft2;
use crate::signal::{dft2, idft2, wrap, write_field_to, SpatialField, SpectrumField};
use crate::tiling::{Tile, Tiling};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Precomputed FFT plan for one tiling and position grid.
#[derive(Clone)]
pub struct TransformPlan<'t> {
    tiling: &'t Tiling,
    lb: usize,
    fft: Fft2,
}

impl<'t> TransformPlan<'t> {
    /// Uses `lb` when given, otherwise the tiling's default position grid.
    pub fn new(tiling: &'t Tiling, lb: Option<usize>) -> Result<Self> {
        let lb = lb.unwrap_or_else(|| tiling.default_position_grid());
        tiling.check_position_grid(lb)?;
        Ok(Self {
            tiling,
            lb,
            fft: Fft2::new(lb),
        })
    }

    pub fn tiling(&self) -> &'t Tiling {
        self.tiling
    }

    pub fn lb(&self) -> usize {
        self.lb
    }

    /// `(L_a / L_B)^2`, the frame weight of one coefficient of `tile`.
    pub fn weight(&self, tile: &Tile) -> f64 {
        let r = tile.norm / self.lb as f64;
        r * r
    }

    fn fold(
        &self,
        tile: &Tile,
        spectrum: &SpectrumField,
        factor: impl Fn([i32; 2]) -> Complex64,
    ) -> Vec<Complex64> {
        let lb = self.lb;
        let values = spectrum.values();
        let mut buf = vec![ZERO; lb * lb];
        for ((&idx, xi), &g) in tile.indices().iter().zip(tile.freqs()).zip(tile.values()) {
            let k = wrap(xi[0] as i64, lb) * lb + wrap(xi[1] as i64, lb);
            buf[k] += factor(*xi) * (g * values[idx as usize]);
        }
        buf
    }

    /// Coefficients `W(a, theta, .)` of one tile on the position grid.
    pub fn tile_coefficients(&self, spectrum: &SpectrumField, tile: &Tile) -> Vec<Complex64> {
        let mut buf = self.fold(tile, spectrum, |_| Complex64::new(1.0, 0.0));
        self.fft.inverse(&mut buf);
        let inv = 1.0 / tile.norm;
        buf.iter_mut().for_each(|v| *v *= inv);
        buf
    }

    /// The two components of `grad_b W(a, theta, .)` for one tile.
    pub fn tile_gradient(&self, spectrum: &SpectrumField, tile: &Tile) -> [Vec<Complex64>; 2] {
        let inv = 1.0 / tile.norm;
        [0usize, 1].map(|c| {
            let mut buf = self.fold(tile, spectrum, |xi| Complex64::new(0.0, TAU * xi[c] as f64));
            self.fft.inverse(&mut buf);
            buf.iter_mut().for_each(|v| *v *= inv);
            buf
        })
    }

    /// Spectrum contribution of one tile's coefficients, aligned with the
    /// tile's support: `g(xi) (L_a / L_B^2) sum_b h(b) exp(-2 pi i b.xi)`.
    pub fn tile_synthesis(
        &self,
        tile: &Tile,
        coeffs: &[Complex64],
        mask: Option<&[bool]>,
    ) -> Vec<Complex64> {
        let lb = self.lb;
        let mut buf: Vec<Complex64> = match mask {
            Some(m) => coeffs
                .iter()
                .zip(m)
                .map(|(&c, &keep)| if keep { c } else { ZERO })
                .collect(),
            None => coeffs.to_vec(),
        };
        self.fft.forward(&mut buf);
        let scale = tile.norm / (lb * lb) as f64;
        tile.freqs()
            .iter()
            .zip(tile.values())
            .map(|(xi, &g)| buf[wrap(xi[0] as i64, lb) * lb + wrap(xi[1] as i64, lb)] * (g * scale))
            .collect()
    }

    /// Sums per-tile synthesis results into `(low-pass, band-pass)` spectra,
    /// in ascending tile order regardless of how they were computed.
    pub fn accumulate(
        &self,
        parts: &[(usize, Vec<Complex64>)],
    ) -> Result<(SpectrumField, SpectrumField)> {
        let side = self.tiling.side();
        let mut low = SpectrumField::zeros(side)?;
        let mut band = SpectrumField::zeros(side)?;
        let mut order: Vec<usize> = (0..parts.len()).collect();
        order.sort_by_key(|&i| parts[i].0);
        for i in order {
            let (id, contrib) = &parts[i];
            let tile = self.tiling.tile(*id);
            let target = if tile.is_lowpass() {
                &mut low
            } else {
                &mut band
            };
            let values = target.values_mut();
            for (&idx, c) in tile.indices().iter().zip(contrib) {
                values[idx as usize] += c;
            }
        }
        Ok((low, band))
    }
}

/// Transform coefficients, stored per tile as dense `L_B x L_B` arrays.
#[derive(Clone)]
pub struct CoefficientSet<'t> {
    plan: TransformPlan<'t>,
    coeffs: Vec<Vec<Complex64>>,
    grads: Option<Vec<[Vec<Complex64>; 2]>>,
}

/// Per-tile, per-position selection of coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMask {
    masks: Vec<Vec<bool>>,
}

impl CoefficientMask {
    pub fn new(tiles: usize, lb: usize, value: bool) -> Self {
        Self {
            masks: vec![vec![value; lb * lb]; tiles],
        }
    }

    pub fn set(&mut self, tile: usize, b: usize, value: bool) {
        self.masks[tile][b] = value;
    }

    pub fn get(&self, tile: usize, b: usize) -> bool {
        self.masks[tile][b]
    }

    pub fn tile(&self, tile: usize) -> &[bool] {
        &self.masks[tile]
    }

    pub fn tile_mut(&mut self, tile: usize) -> &mut [bool] {
        &mut self.masks[tile]
    }

    pub fn count(&self) -> usize {
        self.masks
            .iter()
            .map(|m| m.iter().filter(|&&k| k).count())
            .sum()
    }
}

impl<'t> CoefficientSet<'t> {
    pub fn plan(&self) -> &TransformPlan<'t> {
        &self.plan
    }

    pub fn tiling(&self) -> &'t Tiling {
        self.plan.tiling
    }

    pub fn lb(&self) -> usize {
        self.plan.lb
    }

    pub fn tile(&self, id: usize) -> &[Complex64] {
        &self.coeffs[id]
    }

    pub fn tile_mut(&mut self, id: usize) -> &mut [Complex64] {
        &mut self.coeffs[id]
    }

    pub fn has_gradients(&self) -> bool {
        self.grads.is_some()
    }

    pub fn tile_gradient(&self, id: usize) -> Option<&[Vec<Complex64>; 2]> {
        self.grads.as_ref().map(|g| &g[id])
    }

    /// `W(tile, b)` with `b = (m1/L_B, m2/L_B)`.
    pub fn at(&self, tile: usize, m1: usize, m2: usize) -> Complex64 {
        self.coeffs[tile][m1 * self.plan.lb + m2]
    }

    /// Multiplies every coefficient (and gradient) by `c`.
    pub fn scale(&mut self, c: Complex64) {
        self.coeffs.iter_mut().flatten().for_each(|v| *v *= c);
        if let Some(g) = &mut self.grads {
            g.iter_mut().flatten().flatten().for_each(|v| *v *= c);
        }
    }

    /// Writes each tile as a line `tile_id,a,theta,L_a` followed by the
    /// coefficients as an `L_B x L_B` SSCT raw block.
    pub fn write_dump(&self, w: &mut impl Write) -> Result<()> {
        for tile in self.tiling().tiles() {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e}",
                tile.id, tile.a, tile.theta, tile.norm
            )?;
            let field = SpatialField::new(self.lb(), self.coeffs[tile.id].clone())?;
            write_field_to(&field, w)?;
        }
        Ok(())
    }
}

fn check_side(f: &SpatialField, tiling: &Tiling) -> Result<()> {
    if f.side() != tiling.side() {
        return Err(SsctError::Dimension(format!(
            "field side {} does not match tiling side {}",
            f.side(),
            tiling.side()
        )));
    }
    Ok(())
}

/// Forward transform `W(a, theta, b)` for every tile.
pub fn forward<'t>(
    f: &SpatialField,
    tiling: &'t Tiling,
    lb: Option<usize>,
) -> Result<CoefficientSet<'t>> {
    check_side(f, tiling)?;
    let plan = TransformPlan::new(tiling, lb)?;
    let spectrum = dft2(f)?;
    let coeffs = tiling
        .tiles()
        .par_iter()
        .map(|t| plan.tile_coefficients(&spectrum, t))
        .collect();
    Ok(CoefficientSet {
        plan,
        coeffs,
        grads: None,
    })
}

/// Forward transform together with `grad_b W`.
pub fn gradient<'t>(
    f: &SpatialField,
    tiling: &'t Tiling,
    lb: Option<usize>,
) -> Result<CoefficientSet<'t>> {
    check_side(f, tiling)?;
    let plan = TransformPlan::new(tiling, lb)?;
    let spectrum = dft2(f)?;
    let (coeffs, grads) = tiling
        .tiles()
        .par_iter()
        .map(|t| {
            (
                plan.tile_coefficients(&spectrum, t),
                plan.tile_gradient(&spectrum, t),
            )
        })
        .unzip();
    Ok(CoefficientSet {
        plan,
        coeffs,
        grads: Some(grads),
    })
}

fn synthesize(
    coeffs: &CoefficientSet<'_>,
    mask: Option<&CoefficientMask>,
) -> Result<(SpectrumField, SpectrumField)> {
    let plan = &coeffs.plan;
    let lb2 = plan.lb * plan.lb;
    if let Some(m) = mask {
        if m.masks.len() != coeffs.coeffs.len() || m.masks.iter().any(|t| t.len() != lb2) {
            return Err(SsctError::Dimension(
                "mask shape does not match the coefficients".into(),
            ));
        }
    }
    let parts: Vec<(usize, Vec<Complex64>)> = coeffs
        .tiling()
        .tiles()
        .par_iter()
        .map(|t| {
            let m = mask.map(|m| m.tile(t.id));
            (t.id, plan.tile_synthesis(t, &coeffs.coeffs[t.id], m))
        })
        .collect();
    plan.accumulate(&parts)
}

/// `sum_{tile, b} mask * h(tile, b) w_{a theta b}(x) (L_a / L_B)^2`.
pub fn transpose(
    coeffs: &CoefficientSet<'_>,
    mask: Option<&CoefficientMask>,
) -> Result<SpatialField> {
    let (low, band) = synthesize(coeffs, mask)?;
    let side = low.side();
    let sum: Vec<Complex64> = low
        .values()
        .iter()
        .zip(band.values())
        .map(|(a, b)| a + b)
        .collect();
    idft2(&SpectrumField::new(side, sum)?)
}

/// Reconstruction respecting the tiling mode: the plain transpose for
/// complex tilings, `Re(low-pass) + 2 Re(band-pass)` for real-mode tilings.
pub fn reconstruct(
    coeffs: &CoefficientSet<'_>,
    mask: Option<&CoefficientMask>,
) -> Result<SpatialField> {
    if !coeffs.tiling().params().real_mode {
        return transpose(coeffs, mask);
    }
    let (low, band) = synthesize(coeffs, mask)?;
    let low = idft2(&low)?;
    let band = idft2(&band)?;
    let values: Vec<f64> = low
        .values()
        .iter()
        .zip(band.values())
        .map(|(l, b)| l.re + 2.0 * b.re)
        .collect();
    SpatialField::from_real(low.side(), &values)
}

/// `sum |W|^2 (L_a / L_B)^2`.
pub fn frame_energy(coeffs: &CoefficientSet<'_>) -> f64 {
    coeffs
        .tiling()
        .tiles()
        .iter()
        .map(|t| {
            let w = coeffs.plan.weight(t);
            coeffs.coeffs[t.id]
                .iter()
                .map(|v| v.norm_sqr())
                .sum::<f64>()
                * w
        })
        .sum()
}
