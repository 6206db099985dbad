//! Local wave-vector estimation and synchrosqueezing.
//!
//! Where `|W| >= sqrt(eps)` the estimate `v = Re[grad_b W / (2 pi i W)]` is
//! formed and the coefficient weight `|W|^2 (L_a/L_B)^2` is stacked into the
//! half-open cell `[(n - 1/2) D, (n + 1/2) D)^2` of the wave-vector grid that
//! contains `v`. Besides the mass, each cell keeps the number of estimates it
//! received and their vector sum, so the thresholded mean estimate can use
//! the estimates themselves rather than the cell centers.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Result, SsctError};
use crate::tiling::Tile;
use crate::transform::{CoefficientSet, TransformPlan};

/// One thresholded local wave-vector estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub tile: u32,
    /// Flat position index `m1 * L_B + m2`.
    pub b: u32,
    pub v: [f64; 2],
    /// `|W|^2 (L_a / L_B)^2`.
    pub weight: f64,
}

/// Thresholded estimates, ordered by tile then position.
#[derive(Debug, Clone)]
pub struct WaveVectorEstimates {
    lb: usize,
    epsilon: f64,
    entries: Vec<Estimate>,
}

impl WaveVectorEstimates {
    pub fn new(lb: usize, epsilon: f64, entries: Vec<Estimate>) -> Self {
        Self {
            lb,
            epsilon,
            entries,
        }
    }

    pub fn lb(&self) -> usize {
        self.lb
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn entries(&self) -> &[Estimate] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    /// CSV `tile_id,b1,b2,v1,v2,weight` with `b` as grid indices.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "tile_id,b1,b2,v1,v2,weight")?;
        for e in &self.entries {
            let b = e.b as usize;
            writeln!(
                w,
                "{},{},{},{:.16e},{:.16e},{:.16e}",
                e.tile,
                b / self.lb,
                b % self.lb,
                e.v[0],
                e.v[1],
                e.weight
            )?;
        }
        Ok(())
    }
}

/// `Re[grad / (2 pi i w)]`, componentwise.
pub fn local_wavevector(w: Complex64, grad: [Complex64; 2]) -> [f64; 2] {
    grad.map(|g| (g / w).im / std::f64::consts::TAU)
}

/// Appends the estimates of one tile whose coefficients pass `|W| >= sqrt(eps)`.
pub fn estimate_tile(
    plan: &TransformPlan<'_>,
    tile: &Tile,
    coeffs: &[Complex64],
    grad: &[Vec<Complex64>; 2],
    epsilon: f64,
    out: &mut Vec<Estimate>,
) {
    if tile.is_lowpass() {
        return;
    }
    let weight = plan.weight(tile);
    for (b, &w) in coeffs.iter().enumerate() {
        let mag2 = w.norm_sqr();
        if mag2 < epsilon {
            continue;
        }
        let v = local_wavevector(w, [grad[0][b], grad[1][b]]);
        if v.iter().all(|c| c.is_finite()) {
            out.push(Estimate {
                tile: tile.id as u32,
                b: b as u32,
                v,
                weight: mag2 * weight,
            });
        }
    }
}

/// Estimates local wave-vectors wherever `|W| >= sqrt(eps)`, excluding the
/// low-pass tile.
pub fn estimate_wavevectors(
    coeffs: &CoefficientSet<'_>,
    epsilon: f64,
) -> Result<WaveVectorEstimates> {
    if !(epsilon > 0.0) {
        return Err(SsctError::Config(format!(
            "epsilon = {epsilon} must be positive"
        )));
    }
    if !coeffs.has_gradients() {
        return Err(SsctError::State(
            "coefficients were computed without gradients".into(),
        ));
    }
    let mut entries = Vec::new();
    for tile in coeffs.tiling().tiles() {
        let grad = coeffs.tile_gradient(tile.id).expect("gradients present");
        estimate_tile(
            coeffs.plan(),
            tile,
            coeffs.tile(tile.id),
            grad,
            epsilon,
            &mut entries,
        );
    }
    Ok(WaveVectorEstimates::new(coeffs.lb(), epsilon, entries))
}

/// Accumulated energy in one wave-vector cell at one position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    /// Cell index; the cell is centered at `n * delta`.
    pub n: [i64; 2],
    pub mass: f64,
    /// Number of estimates that landed in the cell.
    pub count: u32,
    /// Sum of those estimates' vectors.
    pub vsum: [f64; 2],
}

/// Sparse synchrosqueezed energy `T(v, b)` on the grid `V = delta Z^2`.
#[derive(Debug, Clone)]
pub struct SqueezeField {
    delta: f64,
    lb: usize,
    cells: Vec<Vec<Cell>>,
}

/// Index of the half-open cell containing `v`.
pub fn cell_index(v: [f64; 2], delta: f64) -> [i64; 2] {
    v.map(|c| (c / delta + 0.5).floor() as i64)
}

/// Stacks estimate weights onto the wave-vector grid with step `delta`.
pub fn squeeze(est: &WaveVectorEstimates, delta: f64) -> Result<SqueezeField> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(SsctError::Config(format!(
            "cell step {delta} must be positive"
        )));
    }
    let mut field = SqueezeField::empty(est.lb, delta);
    for e in &est.entries {
        field.deposit(e.b as usize, e.v, e.weight);
    }
    field.finish();
    Ok(field)
}

impl SqueezeField {
    pub(crate) fn empty(lb: usize, delta: f64) -> Self {
        Self {
            delta,
            lb,
            cells: vec![Vec::new(); lb * lb],
        }
    }

    /// Sorts each position's cells; required before lookups.
    pub(crate) fn finish(&mut self) {
        for cells in &mut self.cells {
            cells.sort_by_key(|c| c.n);
        }
    }

    pub(crate) fn deposit(&mut self, b: usize, v: [f64; 2], weight: f64) {
        let n = cell_index(v, self.delta);
        let cells = &mut self.cells[b];
        match cells.iter_mut().find(|c| c.n == n) {
            Some(c) => {
                c.mass += weight;
                c.count += 1;
                c.vsum[0] += v[0];
                c.vsum[1] += v[1];
            }
            None => cells.push(Cell {
                n,
                mass: weight,
                count: 1,
                vsum: v,
            }),
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn lb(&self) -> usize {
        self.lb
    }

    /// Occupied cells at flat position `b`, sorted by cell index.
    pub fn cells_at(&self, b: usize) -> &[Cell] {
        &self.cells[b]
    }

    /// Mass of cell `n` at position `b` (0 when unoccupied).
    pub fn mass(&self, b: usize, n: [i64; 2]) -> f64 {
        self.cells[b]
            .binary_search_by_key(&n, |c| c.n)
            .map(|p| self.cells[b][p].mass)
            .unwrap_or(0.0)
    }

    pub fn cell_center(&self, n: [i64; 2]) -> [f64; 2] {
        [n[0] as f64 * self.delta, n[1] as f64 * self.delta]
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().flatten().map(|c| c.mass).sum()
    }

    pub fn occupied(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied() == 0
    }

    /// Positions holding at least one cell.
    pub fn support_mask(&self) -> Vec<bool> {
        self.cells.iter().map(|c| !c.is_empty()).collect()
    }

    /// Iterates `(b, cell)` over all occupied cells in position order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Cell)> {
        self.cells
            .iter()
            .enumerate()
            .flat_map(|(b, cells)| cells.iter().map(move |c| (b, c)))
    }

    /// CSV `n1,n2,b1,b2,mass` with `b` as grid indices.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "n1,n2,b1,b2,mass")?;
        for (b, c) in self.iter() {
            writeln!(
                w,
                "{},{},{},{},{:.16e}",
                c.n[0],
                c.n[1],
                b / self.lb,
                b % self.lb,
                c.mass
            )?;
        }
        Ok(())
    }

    /// Total mass per position (row-major `L_B x L_B`).
    pub fn mass_map(&self) -> Vec<f64> {
        self.cells
            .iter()
            .map(|c| c.iter().map(|c| c.mass).sum())
            .collect()
    }
}

/// An `L_B x L_B` field of 2-vectors with a definedness mask.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    lb: usize,
    values: Vec<[f64; 2]>,
    mask: Vec<bool>,
}

impl VectorField2 {
    pub fn new(lb: usize, values: Vec<[f64; 2]>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != lb * lb || mask.len() != lb * lb {
            return Err(SsctError::Dimension(format!(
                "vector field of side {lb} needs {} entries",
                lb * lb
            )));
        }
        Ok(Self { lb, values, mask })
    }

    /// Samples `f(b1, b2)` on `b = (m1/L_B, m2/L_B)`; every entry defined.
    pub fn from_fn(lb: usize, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let mut values = Vec::with_capacity(lb * lb);
        for m1 in 0..lb {
            for m2 in 0..lb {
                values.push(f(m1 as f64 / lb as f64, m2 as f64 / lb as f64));
            }
        }
        Self {
            lb,
            values,
            mask: vec![true; lb * lb],
        }
    }

    pub fn lb(&self) -> usize {
        self.lb
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, b: usize) -> Option<[f64; 2]> {
        self.mask[b].then(|| self.values[b])
    }

    pub fn defined(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// CSV `b1,b2,v1,v2` over the defined entries.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "b1,b2,v1,v2")?;
        for (b, v) in self.values.iter().enumerate() {
            if self.mask[b] {
                writeln!(
                    w,
                    "{},{},{:.16e},{:.16e}",
                    b / self.lb,
                    b % self.lb,
                    v[0],
                    v[1]
                )?;
            }
        }
        Ok(())
    }

    /// Parses the format written by [`VectorField2::write_csv`].
    pub fn read_csv(text: &str, lb: usize) -> Result<Self> {
        let mut values = vec![[0.0; 2]; lb * lb];
        let mut mask = vec![false; lb * lb];
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            let bad = || SsctError::Format(format!("line {}: expected b1,b2,v1,v2", i + 1));
            if parts.len() != 4 {
                return Err(bad());
            }
            let m1: usize = parts[0].trim().parse().map_err(|_| bad())?;
            let m2: usize = parts[1].trim().parse().map_err(|_| bad())?;
            let v1: f64 = parts[2].trim().parse().map_err(|_| bad())?;
            let v2: f64 = parts[3].trim().parse().map_err(|_| bad())?;
            if m1 >= lb || m2 >= lb {
                return Err(SsctError::Format(format!(
                    "line {}: position outside {lb}x{lb}",
                    i + 1
                )));
            }
            values[m1 * lb + m2] = [v1, v2];
            mask[m1 * lb + m2] = true;
        }
        Self::new(lb, values, mask)
    }
}

/// Thresholded mean local wave-vector at each position.
///
/// Over the cells with `T >= delta`, each estimate is weighted by the mass
/// of the cell it fell into:
/// `v_m(b) = sum_c T_c (sum of v in c) / sum_c T_c count_c`.
/// Positions with no passing cell are masked.
pub fn mean_wavevector(sq: &SqueezeField, delta: f64) -> Result<VectorField2> {
    if !(delta >= 0.0) {
        return Err(SsctError::Config(format!(
            "mass threshold {delta} must be nonnegative"
        )));
    }
    let n = sq.lb * sq.lb;
    let mut values = vec![[0.0; 2]; n];
    let mut mask = vec![false; n];
    for b in 0..n {
        let mut num = [0.0; 2];
        let mut den = 0.0;
        for c in sq.cells_at(b).iter().filter(|c| c.mass >= delta) {
            num[0] += c.mass * c.vsum[0];
            num[1] += c.mass * c.vsum[1];
            den += c.mass * c.count as f64;
        }
        if den > 0.0 {
            values[b] = [num[0] / den, num[1] / den];
            mask[b] = true;
        }
    }
    VectorField2::new(sq.lb, values, mask)
}

/// Per-position status of a relative-error map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorStatus {
    /// The estimate is masked; the error is reported as 0.
    Masked,
    Defined,
    /// The reference vector is zero (or masked) where the estimate exists.
    Undefined,
}

/// Pointwise relative error `|v_m - v| / |v|` with summary statistics.
#[derive(Debug, Clone)]
pub struct ErrorMap {
    lb: usize,
    values: Vec<f64>,
    status: Vec<ErrorStatus>,
    pub max: f64,
    pub mean: f64,
    /// Number of positions with a defined error.
    pub count: usize,
    pub undefined: usize,
}

impl ErrorMap {
    pub fn lb(&self) -> usize {
        self.lb
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn status(&self) -> &[ErrorStatus] {
        &self.status
    }

    /// CSV `b1,b2,R`; masked positions carry 0, undefined ones `nan`.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "b1,b2,R")?;
        for (b, r) in self.values.iter().enumerate() {
            match self.status[b] {
                ErrorStatus::Undefined => writeln!(w, "{},{},nan", b / self.lb, b % self.lb)?,
                _ => writeln!(w, "{},{},{:.16e}", b / self.lb, b % self.lb, r)?,
            }
        }
        Ok(())
    }
}

/// Relative error of `vm` against the reference `exact`.
pub fn relative_error(vm: &VectorField2, exact: &VectorField2) -> Result<ErrorMap> {
    if vm.lb != exact.lb {
        return Err(SsctError::Dimension(format!(
            "estimate side {} vs reference side {}",
            vm.lb, exact.lb
        )));
    }
    let n = vm.lb * vm.lb;
    let mut values = vec![0.0; n];
    let mut status = vec![ErrorStatus::Masked; n];
    let (mut max, mut sum, mut count, mut undefined) = (0.0f64, 0.0, 0usize, 0usize);
    for b in 0..n {
        let Some(v) = vm.get(b) else { continue };
        let r = exact.get(b).unwrap_or([0.0, 0.0]);
        let norm = r[0].hypot(r[1]);
        if norm == 0.0 {
            status[b] = ErrorStatus::Undefined;
            values[b] = f64::NAN;
            undefined += 1;
            continue;
        }
        let e = (v[0] - r[0]).hypot(v[1] - r[1]) / norm;
        values[b] = e;
        status[b] = ErrorStatus::Defined;
        max = max.max(e);
        sum += e;
        count += 1;
    }
    Ok(ErrorMap {
        lb: vm.lb,
        values,
        status,
        max,
        mean: if count > 0 { sum / count as f64 } else { 0.0 },
        count,
        undefined,
    })
}
