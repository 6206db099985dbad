//! Transform, squeeze, cluster and reconstruct.
//!
//! Tiles are processed in small parallel batches and their contributions
//! merged in tile order, so only the sparse above-threshold estimates and
//! the output spectra stay in memory. The decomposition recomputes each
//! tile's coefficients for the masked reconstruction instead of keeping the
//! whole coefficient set.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{reduce_then_cluster, AdjacencyParams, ClusterSummary};
use crate::error::{Result, SsctError};
use crate::signal::{dft2, idft2, SpatialField, SpectrumField};
use crate::synchro::{
    cell_index, estimate_tile, local_wavevector, mean_wavevector, relative_error, ErrorMap,
    Estimate, SqueezeField, VectorField2,
};
use crate::synth::Preset;
use crate::tiling::{build_tiling, Tiling, TilingParams};
use crate::transform::TransformPlan;

/// Parameters of a full decomposition run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    pub tiling: TilingParams,
    /// Position grid side; `None` picks the tiling's default.
    #[serde(default)]
    pub lb: Option<usize>,
    /// Coefficients with `|W|^2 < epsilon` are ignored.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Wave-vector cell step; `None` means `max(1, L/128)`.
    #[serde(default)]
    pub cell_step: Option<f64>,
    /// Squeeze cells with mass below this are dropped.
    #[serde(default)]
    pub mass_threshold: f64,
    #[serde(default)]
    pub adjacency: AdjacencyParams,
    /// Keep at most this many modes; the rest are discarded.
    #[serde(default)]
    pub max_modes: Option<usize>,
}

fn default_epsilon() -> f64 {
    1e-4
}

impl DecomposeConfig {
    /// Curvelet defaults for an `side x side` input.
    pub fn new(side: usize) -> Self {
        Self::with_tiling(TilingParams::curvelet(side))
    }

    pub fn with_tiling(tiling: TilingParams) -> Self {
        Self {
            tiling,
            lb: None,
            epsilon: default_epsilon(),
            cell_step: None,
            mass_threshold: 0.0,
            adjacency: AdjacencyParams::default(),
            max_modes: None,
        }
    }

    pub fn side(&self) -> usize {
        self.tiling.side
    }

    pub fn real_mode(&self) -> bool {
        self.tiling.real_mode
    }

    pub fn effective_cell_step(&self) -> f64 {
        self.cell_step
            .unwrap_or_else(|| (self.side() as f64 / 128.0).max(1.0))
    }

    pub fn validate(&self) -> Result<()> {
        self.tiling.validate()?;
        self.adjacency.validate()?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(SsctError::Config(format!(
                "epsilon = {} must be positive",
                self.epsilon
            )));
        }
        let step = self.effective_cell_step();
        if !(step > 0.0 && step.is_finite()) {
            return Err(SsctError::Config(format!(
                "cell_step = {step} must be positive"
            )));
        }
        if !(self.mass_threshold >= 0.0 && self.mass_threshold.is_finite()) {
            return Err(SsctError::Config(format!(
                "mass_threshold = {} must be nonnegative",
                self.mass_threshold
            )));
        }
        if self.max_modes == Some(0) {
            return Err(SsctError::Config("max_modes must be at least 1".into()));
        }
        Ok(())
    }

    fn check_input(&self, f: &SpatialField) -> Result<()> {
        self.validate()?;
        if f.side() != self.side() {
            return Err(SsctError::Dimension(format!(
                "input side {} but the tiling expects {}",
                f.side(),
                self.side()
            )));
        }
        if self.real_mode() && !f.is_real() {
            return Err(SsctError::Config(
                "real_mode requires a real-valued input".into(),
            ));
        }
        Ok(())
    }
}

const BATCH: usize = 8;

/// Squeezed energy of `f` plus the bookkeeping needed by later stages.
struct Analysis {
    squeeze: SqueezeField,
    spectrum: SpectrumField,
    lb: usize,
    tile_count: usize,
    estimate_count: usize,
}

fn analyze(f: &SpatialField, tiling: &Tiling, cfg: &DecomposeConfig) -> Result<Analysis> {
    let plan = TransformPlan::new(tiling, cfg.lb)?;
    let spectrum = dft2(f)?;
    let mut squeeze = SqueezeField::empty(plan.lb(), cfg.effective_cell_step());
    let mut weight_sum = 0.0;
    let mut estimate_count = 0;
    for batch in tiling.tiles().chunks(BATCH) {
        let parts: Vec<Vec<Estimate>> = batch
            .par_iter()
            .map(|tile| {
                let mut out = Vec::new();
                if !tile.is_lowpass() {
                    let w = plan.tile_coefficients(&spectrum, tile);
                    let g = plan.tile_gradient(&spectrum, tile);
                    estimate_tile(&plan, tile, &w, &g, cfg.epsilon, &mut out);
                }
                out
            })
            .collect();
        for e in parts.iter().flatten() {
            squeeze.deposit(e.b as usize, e.v, e.weight);
            weight_sum += e.weight;
            estimate_count += 1;
        }
    }
    squeeze.finish();
    check_mass(&squeeze, weight_sum)?;
    Ok(Analysis {
        squeeze,
        spectrum,
        lb: plan.lb(),
        tile_count: tiling.tile_count(),
        estimate_count,
    })
}

/// Total squeezed mass must equal the thresholded coefficient energy.
fn check_mass(sq: &SqueezeField, expected: f64) -> Result<()> {
    let total = sq.total_mass();
    let scale = expected.abs().max(f64::MIN_POSITIVE);
    if (total - expected).abs() > 1e-12 * scale {
        return Err(SsctError::Numerical(format!(
            "squeezing lost mass: {total:e} vs {expected:e}"
        )));
    }
    Ok(())
}

/// Thresholded mean wave-vectors and their accuracy.
#[derive(Debug, Clone)]
pub struct Estimation {
    pub lb: usize,
    pub tile_count: usize,
    pub estimate_count: usize,
    pub squeeze: SqueezeField,
    /// Positions holding at least one thresholded coefficient.
    pub support: Vec<bool>,
    pub mean: VectorField2,
    /// Present when a ground truth was supplied.
    pub errors: Option<ErrorMap>,
}

impl Estimation {
    pub fn support_count(&self) -> usize {
        self.support.iter().filter(|&&s| s).count()
    }
}

/// Runs estimation and squeezing, then the thresholded mean at
/// `cfg.mass_threshold`; compares with `truth` when given.
pub fn estimate_field(
    f: &SpatialField,
    cfg: &DecomposeConfig,
    truth: Option<&VectorField2>,
) -> Result<Estimation> {
    cfg.check_input(f)?;
    let tiling = build_tiling(&cfg.tiling)?;
    let analysis = analyze(f, &tiling, cfg)?;
    let support = analysis.squeeze.support_mask();
    let mean = mean_wavevector(&analysis.squeeze, cfg.mass_threshold)?;
    if mean.mask().iter().zip(&support).any(|(&m, &s)| m && !s) {
        return Err(SsctError::Numerical(
            "thresholded mask exceeds the coefficient support".into(),
        ));
    }
    let errors = match truth {
        Some(t) => Some(relative_error(&mean, t)?),
        None => None,
    };
    Ok(Estimation {
        lb: analysis.lb,
        tile_count: analysis.tile_count,
        estimate_count: analysis.estimate_count,
        squeeze: analysis.squeeze,
        support,
        mean,
        errors,
    })
}

/// Outcome flag of a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecomposeStatus {
    Ok,
    /// No coefficient passed the threshold; everything is residual.
    NoCoefficients,
}

/// One recovered mode.
#[derive(Debug, Clone)]
pub struct Mode {
    pub field: SpatialField,
    pub cluster: ClusterSummary,
    /// Number of `(tile, b)` coefficients assigned to the mode.
    pub coefficient_count: usize,
    /// `sum |W|^2 (L_a/L_B)^2` over those coefficients.
    pub coefficient_energy: f64,
}

/// Modes in cluster order plus the accounting fields.
#[derive(Debug, Clone)]
pub struct ModeSet {
    pub modes: Vec<Mode>,
    /// Input minus the sum of the modes.
    pub residual: SpatialField,
    /// Reconstruction from the low-pass tile.
    pub lowpass: SpatialField,
    /// Reconstruction from band-pass coefficients assigned to no mode.
    pub discarded: SpatialField,
    pub status: DecomposeStatus,
    pub lb: usize,
    pub tile_count: usize,
    /// Clusters found before `max_modes` was applied.
    pub cluster_count: usize,
    /// `||sum modes + lowpass + discarded - f|| / ||f||`.
    pub cover_error: f64,
}

impl ModeSet {
    pub fn recovered_energy(&self) -> f64 {
        self.modes.iter().map(|m| m.coefficient_energy).sum()
    }
}

fn materialize(spec: &SpectrumField, real_band: bool, real_mode: bool) -> Result<SpatialField> {
    let f = idft2(spec)?;
    if !real_mode {
        return Ok(f);
    }
    let factor = if real_band { 2.0 } else { 1.0 };
    let re: Vec<f64> = f.values().iter().map(|v| factor * v.re).collect();
    SpatialField::from_real(f.side(), &re)
}

/// Decomposes `f` into clustered modes.
///
/// Every band-pass coefficient with `|W|^2 >= epsilon` whose squeeze cell
/// passes the mass threshold and belongs to a kept cluster is assigned to
/// that cluster's mode; all remaining band-pass coefficients form the
/// discarded field and the low-pass tile forms its own field.
pub fn decompose(f: &SpatialField, cfg: &DecomposeConfig) -> Result<ModeSet> {
    cfg.check_input(f)?;
    let tiling = build_tiling(&cfg.tiling)?;
    let analysis = analyze(f, &tiling, cfg)?;
    let pc = reduce_then_cluster(&analysis.squeeze, cfg.mass_threshold, &cfg.adjacency)?;
    let cluster_count = pc.clustering.k();
    let kept = cfg
        .max_modes
        .map_or(cluster_count, |m| m.min(cluster_count));

    // (b, cell) -> mode index, for cells of kept clusters.
    let mut label_of: HashMap<(u32, [i64; 2]), u16> = HashMap::with_capacity(pc.points.len());
    for (p, &l) in pc.points.iter().zip(pc.clustering.labels()) {
        if l <= kept {
            label_of.insert((p.origin.0 as u32, p.origin.1), (l - 1) as u16);
        }
    }

    let plan = TransformPlan::new(&tiling, cfg.lb)?;
    let side = f.side();
    let step = cfg.effective_cell_step();
    // Output spectra: modes, then discarded, then low-pass.
    let slots = kept + 2;
    let (discard_slot, low_slot) = (kept, kept + 1);
    let mut spectra: Vec<SpectrumField> = (0..slots)
        .map(|_| SpectrumField::zeros(side))
        .collect::<Result<_>>()?;
    let mut counts = vec![0usize; kept];
    let mut energies = vec![0.0f64; kept];

    for batch in tiling.tiles().chunks(BATCH) {
        let parts: Vec<TileSplit> = batch
            .par_iter()
            .map(|tile| {
                let w = plan.tile_coefficients(&analysis.spectrum, tile);
                if tile.is_lowpass() {
                    return TileSplit {
                        parts: vec![(low_slot, plan.tile_synthesis(tile, &w, None))],
                        counts: vec![0; kept],
                        energies: vec![0.0; kept],
                    };
                }
                let g = plan.tile_gradient(&analysis.spectrum, tile);
                let mut assign = vec![discard_slot; w.len()];
                for (b, wb) in w.iter().enumerate() {
                    if wb.norm_sqr() < cfg.epsilon {
                        continue;
                    }
                    let v = local_wavevector(*wb, [g[0][b], g[1][b]]);
                    if !v.iter().all(|c| c.is_finite()) {
                        continue;
                    }
                    if let Some(&k) = label_of.get(&(b as u32, cell_index(v, step))) {
                        assign[b] = k as usize;
                    }
                }
                let weight = plan.weight(tile);
                let mut counts = vec![0; kept];
                let mut energies = vec![0.0; kept];
                for (wb, &a) in w.iter().zip(&assign) {
                    if a < kept {
                        counts[a] += 1;
                        energies[a] += wb.norm_sqr() * weight;
                    }
                }
                let mut used = assign.clone();
                used.sort_unstable();
                used.dedup();
                let parts = used
                    .into_iter()
                    .map(|slot| {
                        let mask: Vec<bool> = assign.iter().map(|&a| a == slot).collect();
                        (slot, plan.tile_synthesis(tile, &w, Some(&mask)))
                    })
                    .collect();
                TileSplit {
                    parts,
                    counts,
                    energies,
                }
            })
            .collect();
        for (tile, split) in batch.iter().zip(parts) {
            for k in 0..kept {
                counts[k] += split.counts[k];
                energies[k] += split.energies[k];
            }
            for (slot, c) in split.parts {
                let values = spectra[slot].values_mut();
                for (&idx, v) in tile.indices().iter().zip(&c) {
                    values[idx as usize] += v;
                }
            }
        }
    }

    let real = cfg.real_mode();
    let mut fields = spectra
        .iter()
        .enumerate()
        .map(|(slot, s)| materialize(s, slot != low_slot, real))
        .collect::<Result<Vec<_>>>()?;
    let lowpass = fields.pop().expect("low-pass slot");
    let discarded = fields.pop().expect("discard slot");

    let mut total = lowpass.add(&discarded)?;
    let mut residual = f.clone();
    for m in &fields {
        total = total.add(m)?;
        residual = residual.sub(m)?;
    }
    let norm = f.norm();
    let cover_error = if norm > 0.0 {
        total.sub(f)?.norm() / norm
    } else {
        total.norm()
    };
    if cover_error > 1e-10 {
        return Err(SsctError::Numerical(format!(
            "modes, discarded and low-pass content do not add up to the input (relative error {cover_error:e})"
        )));
    }

    let modes = fields
        .into_iter()
        .enumerate()
        .map(|(k, field)| Mode {
            field,
            cluster: pc.clustering.summaries()[k],
            coefficient_count: counts[k],
            coefficient_energy: energies[k],
        })
        .collect();
    Ok(ModeSet {
        modes,
        residual,
        lowpass,
        discarded,
        status: if analysis.estimate_count == 0 {
            DecomposeStatus::NoCoefficients
        } else {
            DecomposeStatus::Ok
        },
        lb: analysis.lb,
        tile_count: analysis.tile_count,
        cluster_count,
        cover_error,
    })
}

/// One tile's share of the decomposition: support-aligned spectra per
/// output slot, and per-mode coefficient counts and energies.
struct TileSplit {
    parts: Vec<(usize, Vec<Complex64>)>,
    counts: Vec<usize>,
    energies: Vec<f64>,
}

/// One cell of an SNR sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub mass_threshold: f64,
    pub seed: u64,
    pub max_error: f64,
    pub mean_error: f64,
    /// Positions where the error is defined.
    pub evaluated: usize,
}

/// For each `(snr, delta)` pair and seed, adds noise to the preset's field,
/// estimates wave-vectors at threshold `delta` and records the error
/// against the first component's ground truth.
pub fn snr_sweep(
    preset: &Preset,
    snr_list: &[f64],
    delta_list: &[f64],
    seeds: &[u64],
    cfg: &DecomposeConfig,
) -> Result<Vec<SweepRow>> {
    if snr_list.len() != delta_list.len() {
        return Err(SsctError::Config(format!(
            "{} SNR values but {} thresholds",
            snr_list.len(),
            delta_list.len()
        )));
    }
    let mut clean_preset = preset.clone();
    clean_preset.snr_db = None;
    let clean = clean_preset.generate()?.field;
    let tiling = build_tiling(&cfg.tiling)?;
    let lb = TransformPlan::new(&tiling, cfg.lb)?.lb();
    let truth = preset.ground_truth(0, lb).ok_or_else(|| {
        SsctError::Config("the first preset component has no ground truth".into())
    })?;
    let mut rows = Vec::new();
    for (&snr, &delta) in snr_list.iter().zip(delta_list) {
        for &seed in seeds {
            let f = crate::synth::add_noise(&clean, snr, seed)?;
            let mut c = cfg.clone();
            c.mass_threshold = delta;
            let est = estimate_field(&f, &c, Some(&truth))?;
            let e = est.errors.expect("truth supplied");
            rows.push(SweepRow {
                snr_db: snr,
                mass_threshold: delta,
                seed,
                max_error: e.max,
                mean_error: e.mean,
                evaluated: e.count,
            });
        }
    }
    Ok(rows)
}
