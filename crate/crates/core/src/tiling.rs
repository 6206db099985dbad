//! Fourier-domain tiling: the point set of `(a, theta)` tile centers and
//! the fan-shaped windows `g_{a,theta}` forming a squared partition of
//! unity on the `L x L` frequency grid.
//!
//! Radial centers grow as `a_{j+1} = a_j + radial_overlap * a_j^t` starting
//! from `a_min`, so annulus `j` spans `(a_{j-1}, a_{j+1})` and has radial
//! extent of order `a^t`. Annulus `j` carries
//! `ceil(2 pi a_j^{1-s} / angular_overlap)` equally spaced angles, each
//! window spanning two angular steps, which gives arcs of order `a^s`.
//! The outermost annulus stays at full height out to the corners of the
//! grid, and a disk window covers the frequencies below `a_min / 2`.
//!
//! Radial and angular profiles use the Meyer transition
//! `beta(u) = sin(pi/2 nu(u))` with the polynomial
//! `nu(u) = u^4 (35 - 84u + 70u^2 - 20u^3)`, whose square is a raised
//! cosine of `nu` and satisfies `beta(u)^2 + beta(1-u)^2 = 1`. The product
//! windows are renormalized pointwise so the squared sum is 1 to rounding.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsctError};
use crate::signal::{freq_index, freq_min, index_freq, wrap, MIN_SIDE};

/// Geometric parameters of a tiling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TilingParams {
    /// Grid side `L`.
    pub side: usize,
    /// Angular scaling exponent.
    pub s: f64,
    /// Radial scaling exponent.
    pub t: f64,
    #[serde(default = "default_a_min")]
    pub a_min: f64,
    /// Upper bound on the radial step between consecutive annuli.
    /// `None` means `L/2`, which never binds.
    #[serde(default)]
    pub finest_cap: Option<f64>,
    #[serde(default = "default_overlap")]
    pub radial_overlap: f64,
    #[serde(default = "default_overlap")]
    pub angular_overlap: f64,
    /// Keep only tiles with `theta in [0, pi)`, for real-valued input.
    #[serde(default)]
    pub real_mode: bool,
}

fn default_a_min() -> f64 {
    4.0
}

fn default_overlap() -> f64 {
    1.0
}

impl TilingParams {
    pub fn new(side: usize, s: f64, t: f64) -> Self {
        Self {
            side,
            s,
            t,
            a_min: default_a_min(),
            finest_cap: None,
            radial_overlap: default_overlap(),
            angular_overlap: default_overlap(),
            real_mode: false,
        }
    }

    /// Curvelet geometry used for the synthetic experiments: `s = 5/8, t = 7/8`.
    pub fn curvelet(side: usize) -> Self {
        Self::new(side, 0.625, 0.875)
    }

    /// Wave-packet geometry `s = t = 5/8`.
    pub fn wave_packet(side: usize) -> Self {
        Self::new(side, 0.625, 0.625)
    }

    pub fn with_real_mode(mut self, real_mode: bool) -> Self {
        self.real_mode = real_mode;
        self
    }

    pub fn effective_finest_cap(&self) -> f64 {
        self.finest_cap.unwrap_or(self.side as f64 / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(SsctError::Config(msg));
        if self.side < MIN_SIDE {
            return fail(format!(
                "side {} below the minimum of {MIN_SIDE}",
                self.side
            ));
        }
        if !(self.s > 0.5 && self.s <= self.t && self.t < 1.0) {
            return fail(format!(
                "scaling exponents must satisfy 1/2 < s <= t < 1 (got s = {}, t = {})",
                self.s, self.t
            ));
        }
        if !(self.a_min >= 1.0 && self.a_min < self.side as f64 / 2.0) {
            return fail(format!("a_min = {} must lie in [1, L/2)", self.a_min));
        }
        let cap = self.effective_finest_cap();
        if !(cap > 0.0 && cap <= self.side as f64 / 2.0) {
            return fail(format!("finest_cap = {cap} must lie in (0, L/2]"));
        }
        if !(self.radial_overlap > 0.0 && self.radial_overlap.is_finite()) {
            return fail(format!(
                "radial_overlap = {} must be positive",
                self.radial_overlap
            ));
        }
        if !(self.angular_overlap > 0.0 && self.angular_overlap.is_finite()) {
            return fail(format!(
                "angular_overlap = {} must be positive",
                self.angular_overlap
            ));
        }
        Ok(())
    }

    /// `L_a = a^{(s+t)/2}`.
    pub fn normalization(&self, a: f64) -> f64 {
        a.powf(0.5 * (self.s + self.t))
    }
}

/// One window of the tiling with its sampled support.
#[derive(Debug, Clone)]
pub struct Tile {
    pub id: usize,
    /// Radial center; 0 for the low-pass disk.
    pub a: f64,
    /// Angular center in `[0, 2 pi)`.
    pub theta: f64,
    /// `L_a`; 1 for the low-pass disk.
    pub norm: f64,
    /// Annulus index, 0 for the low-pass disk.
    pub scale: usize,
    indices: Vec<u32>,
    freqs: Vec<[i32; 2]>,
    values: Vec<f64>,
}

impl Tile {
    pub fn is_lowpass(&self) -> bool {
        self.scale == 0
    }

    pub fn support_size(&self) -> usize {
        self.values.len()
    }

    /// Spectrum storage indices of the support, ascending.
    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    /// Centered frequencies of the support, parallel to [`Tile::indices`].
    pub fn freqs(&self) -> &[[i32; 2]] {
        &self.freqs
    }

    /// Window values on the support, all in `(0, 1]`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Per-axis extent `max - min + 1` of the support.
    pub fn extent(&self) -> [usize; 2] {
        let mut lo = [i32::MAX; 2];
        let mut hi = [i32::MIN; 2];
        for f in &self.freqs {
            for c in 0..2 {
                lo[c] = lo[c].min(f[c]);
                hi[c] = hi[c].max(f[c]);
            }
        }
        if self.freqs.is_empty() {
            return [0, 0];
        }
        [(hi[0] - lo[0] + 1) as usize, (hi[1] - lo[1] + 1) as usize]
    }
}

/// A complete tiling of the frequency grid.
#[derive(Debug, Clone)]
pub struct Tiling {
    params: TilingParams,
    /// Annulus centers `a_1 < ... < a_J`, with the low-pass edge prepended.
    radii: Vec<f64>,
    angles_per_scale: Vec<usize>,
    tiles: Vec<Tile>,
}

fn meyer_nu(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u.powi(4) * (35.0 - 84.0 * u + 70.0 * u * u - 20.0 * u * u * u)
}

/// Smooth transition from 0 at `u = 0` to 1 at `u = 1` with
/// `beta(u)^2 + beta(1 - u)^2 = 1`.
pub fn transition(u: f64) -> f64 {
    (0.5 * PI * meyer_nu(u)).sin()
}

/// Radial centers: `[a_min/2, a_min, ...]`, every center below `L/2`.
fn radial_centers(p: &TilingParams) -> Vec<f64> {
    let half = p.side as f64 / 2.0;
    let cap = p.effective_finest_cap();
    let mut radii = vec![0.5 * p.a_min, p.a_min];
    loop {
        let a = *radii.last().unwrap();
        let next = a + (p.radial_overlap * a.powf(p.t)).min(cap);
        if next >= half {
            break;
        }
        radii.push(next);
    }
    radii
}

struct Geometry<'a> {
    radii: &'a [f64],
    counts: &'a [usize],
}

impl Geometry<'_> {
    fn lowpass(&self, r: f64) -> f64 {
        let (r0, r1) = (self.radii[0], self.radii[1]);
        if r <= r0 {
            1.0
        } else if r >= r1 {
            0.0
        } else {
            transition((r1 - r) / (r1 - r0))
        }
    }

    /// Radial profile of annulus `j >= 1`.
    fn radial(&self, j: usize, r: f64) -> f64 {
        let last = self.radii.len() - 1;
        let (lo, mid) = (self.radii[j - 1], self.radii[j]);
        if r <= lo {
            return 0.0;
        }
        if r < mid {
            return transition((r - lo) / (mid - lo));
        }
        if j == last {
            return 1.0;
        }
        let hi = self.radii[j + 1];
        if r >= hi {
            0.0
        } else {
            transition((hi - r) / (hi - mid))
        }
    }

    /// Calls `emit(j, k, value)` for every band window nonzero at `xi`.
    fn band_windows(&self, xi: [f64; 2], mut emit: impl FnMut(usize, usize, f64)) {
        let r = xi[0].hypot(xi[1]);
        if r <= self.radii[0] {
            return;
        }
        let theta = xi[1].atan2(xi[0]).rem_euclid(TAU);
        for j in 1..self.radii.len() {
            let rv = self.radial(j, r);
            if rv <= 0.0 {
                continue;
            }
            let n = self.counts[j];
            if n == 1 {
                emit(j, 0, rv);
                continue;
            }
            let step = TAU / n as f64;
            let k0 = ((theta / step).floor() as usize) % n;
            for k in [k0, (k0 + 1) % n] {
                let d = angular_distance(theta, k as f64 * step);
                if d < step {
                    let v = rv * transition(1.0 - d / step);
                    if v > 0.0 {
                        emit(j, k, v);
                    }
                }
            }
        }
    }
}

/// Circular distance between two angles, in `[0, pi]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Builds the tiling described by `params`.
pub fn build_tiling(params: &TilingParams) -> Result<Tiling> {
    params.validate()?;
    let side = params.side;
    let radii = radial_centers(params);
    let mut counts = vec![1usize; radii.len()];
    for j in 1..radii.len() {
        let n = (TAU * radii[j].powf(1.0 - params.s) / params.angular_overlap).ceil() as usize;
        let mut n = n.max(1);
        if params.real_mode && n % 2 == 1 {
            n += 1;
        }
        counts[j] = n;
    }

    // Tile ids: 0 is the low-pass disk, then annuli outward, angles ascending.
    let mut tiles = vec![Tile {
        id: 0,
        a: 0.0,
        theta: 0.0,
        norm: 1.0,
        scale: 0,
        indices: Vec::new(),
        freqs: Vec::new(),
        values: Vec::new(),
    }];
    let mut first_id = vec![0usize; radii.len()];
    for j in 1..radii.len() {
        first_id[j] = tiles.len();
        let n = counts[j];
        let kept = if params.real_mode { n / 2 } else { n };
        for k in 0..kept {
            tiles.push(Tile {
                id: tiles.len(),
                a: radii[j],
                theta: TAU * k as f64 / n as f64,
                norm: params.normalization(radii[j]),
                scale: j,
                indices: Vec::new(),
                freqs: Vec::new(),
                values: Vec::new(),
            });
        }
    }
    let tile_id = |j: usize, k: usize| -> Option<usize> {
        let n = counts[j];
        if params.real_mode && k >= n / 2 {
            None
        } else {
            Some(first_id[j] + k)
        }
    };

    let geom = Geometry {
        radii: &radii,
        counts: &counts,
    };
    let mut local: Vec<(usize, f64)> = Vec::with_capacity(8);
    for idx in 0..side * side {
        let xi = index_freq(side, idx);
        let xf = window_coords(params, xi);
        local.clear();
        let low = geom.lowpass(xf[0].hypot(xf[1]));
        let mut total = low * low;
        if low > 0.0 {
            local.push((0, low));
        }
        geom.band_windows(xf, |j, k, v| {
            total += v * v;
            if let Some(id) = tile_id(j, k) {
                local.push((id, v));
            }
        });
        if params.real_mode {
            // Mirror tiles are dropped; their mass at xi is the mass of the kept
            // tiles at the conjugate frequency -xi (mod L). Folding that in
            // keeps 2 Re(.) reconstruction exact on the Nyquist lines.
            total = low * low;
            for &(id, v) in &local {
                if id != 0 {
                    total += v * v;
                }
            }
            let mirror = window_coords(params, index_freq(side, conjugate_index(side, xi)));
            geom.band_windows(mirror, |j, k, v| {
                if tile_id(j, k).is_some() {
                    total += v * v;
                }
            });
        }
        if !(total > 0.0) {
            return Err(SsctError::Numerical(format!(
                "frequency {xi:?} is not covered by any window"
            )));
        }
        let scale = 1.0 / total.sqrt();
        for &(id, v) in &local {
            let tile = &mut tiles[id];
            tile.indices.push(idx as u32);
            tile.freqs.push([xi[0] as i32, xi[1] as i32]);
            tile.values.push(v * scale);
        }
    }
    tiles.retain(|t| !t.values.is_empty());
    for (id, t) in tiles.iter_mut().enumerate() {
        t.id = id;
    }

    Ok(Tiling {
        params: params.clone(),
        radii,
        angles_per_scale: counts,
        tiles,
    })
}

impl Tiling {
    pub fn params(&self) -> &TilingParams {
        &self.params
    }

    pub fn side(&self) -> usize {
        self.params.side
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    pub fn tile(&self, id: usize) -> &Tile {
        &self.tiles[id]
    }

    pub fn tile_count(&self) -> usize {
        self.tiles.len()
    }

    /// Annulus centers `a_1..a_J` (the low-pass edge excluded).
    pub fn radii(&self) -> &[f64] {
        &self.radii[1..]
    }

    /// Radius below which only the low-pass window is nonzero.
    pub fn lowpass_radius(&self) -> f64 {
        self.radii[0]
    }

    /// Number of angles of each annulus, parallel to [`Tiling::radii`].
    pub fn angles_per_scale(&self) -> &[usize] {
        &self.angles_per_scale[1..]
    }

    /// `g_{a,theta}(xi)` for tile `id`; 0 outside its support.
    pub fn window_value(&self, id: usize, xi: [i64; 2]) -> Result<f64> {
        let tile = self
            .tiles
            .get(id)
            .ok_or_else(|| SsctError::Index(format!("tile {id} out of range")))?;
        let idx = freq_index(self.side(), xi)
            .ok_or_else(|| SsctError::Index(format!("frequency {xi:?} outside the grid")))?;
        Ok(match tile.indices.binary_search(&(idx as u32)) {
            Ok(p) => tile.values[p],
            Err(_) => 0.0,
        })
    }

    /// Per-frequency sum of squared windows. In real mode the kept tiles'
    /// values at the conjugate frequency are included.
    pub fn squared_sums(&self) -> Vec<f64> {
        let side = self.side();
        let mut sums = vec![0.0; side * side];
        for tile in &self.tiles {
            for (&idx, &v) in tile.indices.iter().zip(&tile.values) {
                sums[idx as usize] += v * v;
                if self.params.real_mode && !tile.is_lowpass() {
                    let xi = index_freq(side, idx as usize);
                    let m = conjugate_index(side, xi);
                    sums[m] += v * v;
                }
            }
        }
        sums
    }

    /// `max_xi |sum |g|^2 - 1|`.
    pub fn partition_deviation(&self) -> f64 {
        self.squared_sums()
            .iter()
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest per-axis support extent over all tiles, with the tile id.
    pub fn max_extent(&self) -> (usize, usize) {
        self.tiles
            .iter()
            .map(|t| (t.extent()[0].max(t.extent()[1]), t.id))
            .max()
            .unwrap_or((0, 0))
    }

    /// Smallest power of two `>= L^t`, doubled until every support fits one
    /// `L_B x L_B` cell, and never more than `L`.
    pub fn default_position_grid(&self) -> usize {
        let side = self.side();
        let mut lb = ((side as f64).powf(self.params.t).ceil() as usize).next_power_of_two();
        let (need, _) = self.max_extent();
        while lb < need {
            lb *= 2;
        }
        lb.min(side)
    }

    /// Checks that no two support points of a tile alias modulo `lb`.
    pub fn check_position_grid(&self, lb: usize) -> Result<()> {
        if lb == 0 {
            return Err(SsctError::Config("L_B must be positive".into()));
        }
        for t in &self.tiles {
            let [e1, e2] = t.extent();
            if e1 > lb || e2 > lb {
                return Err(SsctError::Config(format!(
                    "L_B = {lb} too small: tile {} (a = {:.3}, theta = {:.4}) has support extent {e1}x{e2}",
                    t.id, t.a, t.theta
                )));
            }
        }
        Ok(())
    }

    /// CSV summary `tile_id,a,theta,L_a,support_size`.
    pub fn write_summary_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "tile_id,a,theta,L_a,support_size")?;
        for t in &self.tiles {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{}",
                t.id,
                t.a,
                t.theta,
                t.norm,
                t.support_size()
            )?;
        }
        Ok(())
    }
}

/// Coordinates at which the windows are evaluated for grid frequency `xi`.
///
/// On even grids the Nyquist row `xi2 = -L/2` and the point `(-L/2, 0)`
/// alias frequencies in the upper half-plane. Real-mode tilings keep only
/// upper half-plane tiles, so those points use the aliased representative.
fn window_coords(params: &TilingParams, xi: [i64; 2]) -> [f64; 2] {
    let mut x = xi;
    if params.real_mode && params.side.is_multiple_of(2) {
        let nyq = -(params.side as i64) / 2;
        if x[1] == nyq {
            x[1] = -nyq;
        } else if x[1] == 0 && x[0] == nyq {
            x[0] = -nyq;
        }
    }
    [x[0] as f64, x[1] as f64]
}

/// Storage index of `-xi mod L` in the centered grid.
pub(crate) fn conjugate_index(side: usize, xi: [i64; 2]) -> usize {
    let lo = freq_min(side);
    let fold = |c: i64| -> i64 {
        let w = wrap(-c, side) as i64;
        if w >= lo + side as i64 {
            w - side as i64
        } else {
            w
        }
    };
    freq_index(side, [fold(xi[0]), fold(xi[1])]).expect("conjugate frequency on the grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn transition_is_power_complementary() {
        for k in 0..=100 {
            let u = k as f64 / 100.0;
            let s = transition(u).powi(2) + transition(1.0 - u).powi(2);
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert_eq!(transition(0.0), 0.0);
        assert_eq!(transition(1.0), 1.0);
    }

    #[test]
    fn partition_of_unity_large_grid() {
        for params in [TilingParams::curvelet(512), TilingParams::wave_packet(512)] {
            let tiling = build_tiling(&params).unwrap();
            assert!(tiling.partition_deviation() <= 1e-12, "{params:?}");
        }
    }

    #[test]
    fn partition_of_unity_small_and_real() {
        for side in [16usize, 17, 32, 64] {
            for real in [false, true] {
                let tiling =
                    build_tiling(&TilingParams::curvelet(side).with_real_mode(real)).unwrap();
                assert!(
                    tiling.partition_deviation() <= 1e-12,
                    "side {side} real {real}"
                );
            }
        }
    }

    #[test]
    fn lowpass_alone_below_inner_radius() {
        let mut p = TilingParams::curvelet(32);
        p.a_min = 4.0;
        let tiling = build_tiling(&p).unwrap();
        let r0 = tiling.lowpass_radius();
        assert_eq!(r0, 2.0);
        let mut checked = 0;
        for xi1 in -16i64..16 {
            for xi2 in -16i64..16 {
                if ((xi1 * xi1 + xi2 * xi2) as f64).sqrt() < r0 {
                    checked += 1;
                    for t in tiling.tiles() {
                        let v = tiling.window_value(t.id, [xi1, xi2]).unwrap();
                        if t.is_lowpass() {
                            assert!((v - 1.0).abs() < 1e-15);
                        } else {
                            assert_eq!(v, 0.0, "tile {} at {xi1},{xi2}", t.id);
                        }
                    }
                }
            }
        }
        assert_eq!(checked, 9);
    }

    #[test]
    fn window_value_support_and_center() {
        let tiling = build_tiling(&TilingParams::curvelet(128)).unwrap();
        for t in tiling.tiles().iter().filter(|t| !t.is_lowpass()) {
            let c = [
                (t.a * t.theta.cos()).round() as i64,
                (t.a * t.theta.sin()).round() as i64,
            ];
            if freq_index(128, c).is_some() {
                assert!(tiling.window_value(t.id, c).unwrap() > 0.0, "tile {}", t.id);
            }
            // Opposite side of the origin is outside every band window's fan.
            let far = [-c[0], -c[1]];
            if t.a > 10.0 && freq_index(128, far).is_some() {
                assert_eq!(tiling.window_value(t.id, far).unwrap(), 0.0);
            }
        }
        assert!(matches!(
            tiling.window_value(0, [64, 0]),
            Err(SsctError::Index(_))
        ));
        assert!(matches!(
            tiling.window_value(10_000, [0, 0]),
            Err(SsctError::Index(_))
        ));
    }

    #[test]
    fn random_frequencies_sum_to_one() {
        let tiling = build_tiling(&TilingParams::curvelet(64)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let xi = [rng.random_range(-32..32), rng.random_range(-32..32)];
            let s: f64 = tiling
                .tiles()
                .iter()
                .map(|t| tiling.window_value(t.id, xi).unwrap().powi(2))
                .sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_exponents() {
        for (s, t) in [(0.5, 0.8), (0.8, 0.7), (0.6, 1.0)] {
            assert!(matches!(
                build_tiling(&TilingParams::new(64, s, t)),
                Err(SsctError::Config(_))
            ));
        }
        let mut p = TilingParams::curvelet(64);
        p.a_min = 0.5;
        assert!(build_tiling(&p).is_err());
        let mut p = TilingParams::curvelet(64);
        p.finest_cap = Some(40.0);
        assert!(build_tiling(&p).is_err());
    }

    #[test]
    fn angle_counts_scale_with_radius() {
        let p = TilingParams::curvelet(512);
        let tiling = build_tiling(&p).unwrap();
        let radii = tiling.radii();
        let counts = tiling.angles_per_scale();
        let expected = 2f64.powf(1.0 - p.s);
        for i in 0..radii.len() {
            for j in (i + 1)..radii.len() {
                let ratio_a = radii[j] / radii[i];
                if (ratio_a - 2.0).abs() < 0.5 {
                    let ratio_n = counts[j] as f64 / counts[i] as f64;
                    let scaled = expected * (ratio_a / 2.0).powf(1.0 - p.s);
                    assert!(ratio_n >= 0.5 * scaled && ratio_n <= 2.0 * scaled);
                }
            }
        }
    }

    #[test]
    fn support_extents_follow_exponents() {
        let p = TilingParams::curvelet(512);
        let tiling = build_tiling(&p).unwrap();
        let last = *tiling.radii().last().unwrap();
        for t in tiling
            .tiles()
            .iter()
            .filter(|t| !t.is_lowpass() && t.a >= 16.0 && t.a < last)
        {
            let (c, s) = (t.theta.cos(), t.theta.sin());
            let (mut rmin, mut rmax, mut pmin, mut pmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            for f in t.freqs() {
                let (x, y) = (f[0] as f64, f[1] as f64);
                let along = x * c + y * s;
                let across = -x * s + y * c;
                rmin = rmin.min(along);
                rmax = rmax.max(along);
                pmin = pmin.min(across);
                pmax = pmax.max(across);
            }
            let radial = (rmax - rmin) / t.a.powf(p.t);
            let angular = (pmax - pmin) / t.a.powf(p.s);
            assert!(
                (0.25..=4.0).contains(&radial),
                "tile {} radial ratio {radial}",
                t.id
            );
            assert!(
                (0.25..=4.0).contains(&angular),
                "tile {} angular ratio {angular}",
                t.id
            );
        }
    }

    #[test]
    fn smaller_s_means_more_tiles() {
        let mut last = 0;
        for s in [0.8, 0.7, 0.6] {
            let n = build_tiling(&TilingParams::new(512, s, 0.875))
                .unwrap()
                .tile_count();
            assert!(n > last, "s = {s}: {n} tiles");
            last = n;
        }
    }

    #[test]
    fn real_mode_keeps_upper_half_plane() {
        let tiling = build_tiling(&TilingParams::curvelet(64).with_real_mode(true)).unwrap();
        for t in tiling.tiles() {
            assert!(t.theta < PI);
        }
    }

    #[test]
    fn default_position_grid_fits_supports() {
        for side in [32usize, 64, 128, 512] {
            for p in [
                TilingParams::curvelet(side),
                TilingParams::wave_packet(side),
            ] {
                let tiling = build_tiling(&p).unwrap();
                let lb = tiling.default_position_grid();
                tiling.check_position_grid(lb).unwrap();
                assert!(lb >= ((side as f64).powf(p.t).ceil() as usize).min(side));
            }
        }
        let tiling = build_tiling(&TilingParams::curvelet(64)).unwrap();
        let err = tiling.check_position_grid(8).unwrap_err().to_string();
        assert!(err.contains("tile"), "{err}");
    }
}
