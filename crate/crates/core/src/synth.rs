//! Test signals: deformed plane waves, banded modes, noise and disruption.
//!
//! Phases have the form
//! `phi(x) = c0 + c1 x1 + c2 x2 + sum_j A_j sin(2 pi k_j.x + psi_j)`,
//! which keeps `phi` and its gradient in closed form. A component is
//! `alpha exp(-(phi - c)^2 / sigma^2) exp(2 pi i N phi)`; it is periodic on
//! the unit square when `N c1`, `N c2` and every `k_j` are integers.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsctError};
use crate::signal::{periodize, SpatialField, MIN_SIDE};
use crate::synchro::VectorField2;

/// One `A sin(2 pi k.x + psi)` term of a phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineTerm {
    pub amp: f64,
    pub k: [f64; 2],
    #[serde(default)]
    pub psi: f64,
}

/// Closed-form phase, wavenumber scale `N` and constant amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    #[serde(default)]
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    #[serde(default)]
    pub terms: Vec<SineTerm>,
    pub n: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl PhaseSpec {
    /// `x1 + (1 - x2) + 0.1 sin(2 pi x1) + 0.1 sin(2 pi (1 - x2))` with `N = 135`.
    pub fn example1() -> Self {
        Self {
            c0: 1.0,
            c1: 1.0,
            c2: -1.0,
            terms: vec![
                SineTerm {
                    amp: 0.1,
                    k: [1.0, 0.0],
                    psi: 0.0,
                },
                SineTerm {
                    amp: 0.1,
                    k: [0.0, -1.0],
                    psi: 0.0,
                },
            ],
            n: 135.0,
            amplitude: 1.0,
        }
    }

    pub fn phi(&self, x: [f64; 2]) -> f64 {
        self.c0
            + self.c1 * x[0]
            + self.c2 * x[1]
            + self
                .terms
                .iter()
                .map(|t| t.amp * (TAU * (t.k[0] * x[0] + t.k[1] * x[1]) + t.psi).sin())
                .sum::<f64>()
    }

    pub fn grad_phi(&self, x: [f64; 2]) -> [f64; 2] {
        let mut g = [self.c1, self.c2];
        for t in &self.terms {
            let c = t.amp * TAU * (TAU * (t.k[0] * x[0] + t.k[1] * x[1]) + t.psi).cos();
            g[0] += c * t.k[0];
            g[1] += c * t.k[1];
        }
        g
    }

    /// The local wave-vector `N grad phi`.
    pub fn wavevector(&self, x: [f64; 2]) -> [f64; 2] {
        let g = self.grad_phi(x);
        [self.n * g[0], self.n * g[1]]
    }

    /// `N grad phi` sampled on the `lb x lb` position grid.
    pub fn ground_truth(&self, lb: usize) -> VectorField2 {
        VectorField2::from_fn(lb, |b1, b2| self.wavevector([b1, b2]))
    }

    pub fn validate(&self) -> Result<()> {
        let mut values = vec![self.c0, self.c1, self.c2, self.n, self.amplitude];
        for t in &self.terms {
            values.extend([t.amp, t.k[0], t.k[1], t.psi]);
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(SsctError::Config(
                "phase coefficients must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Gaussian band `exp(-(phi - c)^2 / sigma^2)`; `sigma = None` means no band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSpec {
    pub c: f64,
    pub sigma: Option<f64>,
}

impl BandSpec {
    pub fn new(c: f64, sigma: f64) -> Result<Self> {
        let b = Self {
            c,
            sigma: Some(sigma),
        };
        b.validate()?;
        Ok(b)
    }

    /// The infinitely wide band, whose envelope is identically 1.
    pub fn unbounded(c: f64) -> Self {
        Self { c, sigma: None }
    }

    pub fn validate(&self) -> Result<()> {
        match self.sigma {
            Some(s) if !(s > 0.0) => Err(SsctError::Config(format!(
                "band width {s} must be positive"
            ))),
            _ => Ok(()),
        }
    }

    pub fn envelope(&self, phi: f64) -> f64 {
        match self.sigma {
            None => 1.0,
            Some(s) => {
                let u = (phi - self.c) / s;
                (-u * u).exp()
            }
        }
    }
}

fn check_side(side: usize) -> Result<()> {
    if side < MIN_SIDE {
        return Err(SsctError::Dimension(format!(
            "side {side} is below the minimum {MIN_SIDE}"
        )));
    }
    Ok(())
}

/// `alpha exp(2 pi i N phi(x))` on the `side x side` grid.
pub fn deformed_plane_wave(spec: &PhaseSpec, side: usize) -> Result<SpatialField> {
    check_side(side)?;
    spec.validate()?;
    SpatialField::from_fn(side, |x1, x2| {
        Complex64::from_polar(spec.amplitude, TAU * spec.n * spec.phi([x1, x2]))
    })
}

/// `exp(-(phi - c)^2 / sigma^2) alpha exp(2 pi i N phi(x))`.
pub fn banded_imf(spec: &PhaseSpec, band: &BandSpec, side: usize) -> Result<SpatialField> {
    check_side(side)?;
    spec.validate()?;
    band.validate()?;
    SpatialField::from_fn(side, |x1, x2| {
        let phi = spec.phi([x1, x2]);
        Complex64::from_polar(spec.amplitude * band.envelope(phi), TAU * spec.n * phi)
    })
}

/// Mean of `|f - mean f|^2` over the grid.
pub fn variance(f: &SpatialField) -> f64 {
    let n = f.values().len() as f64;
    let mean: Complex64 = f.values().iter().sum::<Complex64>() / n;
    f.values()
        .iter()
        .map(|v| (v - mean).norm_sqr())
        .sum::<f64>()
        / n
}

/// Per-sample noise variance giving `snr_db` against `f`.
pub fn noise_variance(f: &SpatialField, snr_db: f64) -> Result<f64> {
    let var = variance(f);
    if var == 0.0 {
        return Err(SsctError::Numerical(
            "cannot calibrate noise against a constant field".into(),
        ));
    }
    Ok(var / 10f64.powf(snr_db / 10.0))
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

const NOISE_STREAM: u64 = 1;
const SHIFT_STREAM: u64 = 2;

/// Adds i.i.d. complex Gaussian noise of variance `Var f / 10^(snr/10)`
/// (half in each of the real and imaginary parts). An infinite SNR returns
/// the field unchanged.
pub fn add_noise(f: &SpatialField, snr_db: f64, seed: u64) -> Result<SpatialField> {
    add_noise_with(f, snr_db, seed, false)
}

/// Like [`add_noise`], with purely real noise when `real` is set.
pub fn add_noise_with(
    f: &SpatialField,
    snr_db: f64,
    seed: u64,
    real: bool,
) -> Result<SpatialField> {
    if snr_db == f64::INFINITY {
        return Ok(f.clone());
    }
    let sigma2 = noise_variance(f, snr_db)?;
    let mut r = rng(seed, NOISE_STREAM);
    let mut out = f.clone();
    if real {
        let normal =
            Normal::new(0.0, sigma2.sqrt()).map_err(|e| SsctError::Numerical(e.to_string()))?;
        let keep_real = f.is_real();
        for v in out.values_mut() {
            v.re += normal.sample(&mut r);
        }
        if keep_real {
            let re: Vec<f64> = out.values().iter().map(|v| v.re).collect();
            return SpatialField::from_real(f.side(), &re);
        }
    } else {
        let normal = Normal::new(0.0, (sigma2 / 2.0).sqrt())
            .map_err(|e| SsctError::Numerical(e.to_string()))?;
        for v in out.values_mut() {
            v.re += normal.sample(&mut r);
            v.im += normal.sample(&mut r);
        }
    }
    Ok(out)
}

/// Circularly shifts column `n2` along `n1` by `offsets[n2]`.
pub fn shift_columns(f: &SpatialField, offsets: &[usize]) -> Result<SpatialField> {
    let side = f.side();
    if offsets.len() != side {
        return Err(SsctError::Dimension(format!(
            "need {side} column offsets, got {}",
            offsets.len()
        )));
    }
    let src = f.values();
    let mut out = vec![Complex64::new(0.0, 0.0); side * side];
    for (n2, &off) in offsets.iter().enumerate() {
        for n1 in 0..side {
            out[((n1 + off) % side) * side + n2] = src[n1 * side + n2];
        }
    }
    let mut g = SpatialField::new(side, out)?;
    if f.is_real() {
        let re: Vec<f64> = g.values().iter().map(|v| v.re).collect();
        g = SpatialField::from_real(side, &re)?;
    }
    Ok(g)
}

/// Column offsets drawn uniformly from `0..side`.
pub fn random_offsets(side: usize, seed: u64) -> Vec<usize> {
    let mut r = rng(seed, SHIFT_STREAM);
    (0..side).map(|_| r.random_range(0..side)).collect()
}

/// Shifts every column by an independent uniform offset.
pub fn random_shift_disrupt(f: &SpatialField, seed: u64) -> Result<SpatialField> {
    shift_columns(f, &random_offsets(f.side(), seed))
}

/// One component of a preset: a phase and an optional band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub phase: PhaseSpec,
    #[serde(default)]
    pub band: Option<BandSpec>,
    /// Shift this component's columns at random before summing.
    #[serde(default)]
    pub disrupt: bool,
}

impl ComponentSpec {
    pub fn render(&self, side: usize) -> Result<SpatialField> {
        match &self.band {
            Some(b) => banded_imf(&self.phase, b, side),
            None => deformed_plane_wave(&self.phase, side),
        }
    }
}

/// A named, versioned generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub name: String,
    pub version: u32,
    pub side: usize,
    #[serde(default)]
    pub seed: u64,
    /// Noise level in dB; absent means noiseless.
    #[serde(default)]
    pub snr_db: Option<f64>,
    /// Edge taper margin applied to the clean sum, as a fraction of the
    /// side, for fields that are not periodic; 0 disables it.
    #[serde(default)]
    pub taper: f64,
    pub components: Vec<ComponentSpec>,
}

const PRESETS: [(&str, &str); 4] = [
    ("example1", include_str!("../presets/example1.json")),
    ("banded1", include_str!("../presets/banded1.json")),
    ("example2", include_str!("../presets/example2.json")),
    ("example3", include_str!("../presets/example3.json")),
];

impl Preset {
    pub fn names() -> Vec<&'static str> {
        PRESETS.iter().map(|(n, _)| *n).collect()
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            SsctError::Config(format!(
                "unknown preset {name:?}; known: {}",
                Self::names().join(", ")
            ))
        })?;
        Self::from_json(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self =
            serde_json::from_str(text).map_err(|e| SsctError::Config(format!("preset: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_side(self.side)?;
        if self.components.is_empty() {
            return Err(SsctError::Config("preset has no components".into()));
        }
        for c in &self.components {
            c.phase.validate()?;
            if let Some(b) = &c.band {
                b.validate()?;
            }
        }
        if !(0.0..0.5).contains(&self.taper) {
            return Err(SsctError::Config(format!(
                "taper = {} must lie in [0, 0.5)",
                self.taper
            )));
        }
        if let Some(s) = self.snr_db {
            if s.is_nan() {
                return Err(SsctError::Config("snr_db is NaN".into()));
            }
        }
        Ok(())
    }

    /// Renders the components, the (possibly disrupted) sum and the noisy field.
    pub fn generate(&self) -> Result<Synthetic> {
        self.validate()?;
        let mut components = Vec::with_capacity(self.components.len());
        for (k, c) in self.components.iter().enumerate() {
            let mut f = c.render(self.side)?;
            if c.disrupt {
                f = random_shift_disrupt(&f, self.seed.wrapping_add(k as u64))?;
            }
            components.push(f);
        }
        let mut clean = components[0].clone();
        for c in &components[1..] {
            clean = clean.add(c)?;
        }
        if self.taper > 0.0 {
            clean = periodize(&clean, self.taper)?;
        }
        let field = match self.snr_db {
            Some(snr) => add_noise(&clean, snr, self.seed)?,
            None => clean.clone(),
        };
        Ok(Synthetic {
            field,
            clean,
            components,
        })
    }

    /// Ground-truth wave-vectors of component `k`, unless it is disrupted.
    pub fn ground_truth(&self, k: usize, lb: usize) -> Option<VectorField2> {
        let c = self.components.get(k)?;
        (!c.disrupt).then(|| c.phase.ground_truth(lb))
    }
}

/// Output of [`Preset::generate`].
#[derive(Debug, Clone)]
pub struct Synthetic {
    /// Sum of components plus noise.
    pub field: SpatialField,
    /// Sum of components, tapered when the preset asks for it.
    pub clean: SpatialField,
    pub components: Vec<SpatialField>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::f64::consts::PI;

    #[test]
    fn example1_phase_at_origin() {
        let p = PhaseSpec::example1();
        assert!((p.phi([0.0, 0.0]) - 1.0).abs() < 1e-15);
        let g = p.grad_phi([0.0, 0.0]);
        assert!((g[0] - (1.0 + 0.2 * PI)).abs() < 1e-14);
        assert!((g[1] - (-1.0 - 0.2 * PI)).abs() < 1e-14);
    }

    #[test]
    fn example1_matches_written_form() {
        let p = PhaseSpec::example1();
        let mut r = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = [r.random::<f64>(), r.random::<f64>()];
            let direct =
                x[0] + (1.0 - x[1]) + 0.1 * (TAU * x[0]).sin() + 0.1 * (TAU * (1.0 - x[1])).sin();
            assert!((p.phi(x) - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let specs = [
            PhaseSpec::example1(),
            Preset::builtin("example2").unwrap().components[1]
                .phase
                .clone(),
        ];
        let mut r = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for spec in &specs {
            for _ in 0..1000 {
                let x = [r.random::<f64>(), r.random::<f64>()];
                let g = spec.grad_phi(x);
                let d1 = (spec.phi([x[0] + h, x[1]]) - spec.phi([x[0] - h, x[1]])) / (2.0 * h);
                let d2 = (spec.phi([x[0], x[1] + h]) - spec.phi([x[0], x[1] - h])) / (2.0 * h);
                assert!((g[0] - d1).abs() < 1e-6 && (g[1] - d2).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn plane_wave_is_unimodular() {
        let f = deformed_plane_wave(&PhaseSpec::example1(), 64).unwrap();
        assert!(f.values().iter().all(|v| (v.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn band_envelope_values() {
        let band = BandSpec::new(0.7, 4.0 / 135.0).unwrap();
        assert_eq!(band.envelope(0.7), 1.0);
        assert!((band.envelope(0.7 + 4.0 / 135.0) - (-1f64).exp()).abs() < 1e-15);
        // Width of {envelope > 0.01} in phase units.
        let s = 4.0 / 135.0;
        let half = s * 100f64.ln().sqrt();
        assert!(band.envelope(0.7 + half * 0.999) > 0.01);
        assert!(band.envelope(0.7 + half * 1.001) < 0.01);
        assert!(BandSpec::new(0.7, 0.0).is_err());
    }

    #[test]
    fn unbounded_band_is_the_plane_wave() {
        let p = PhaseSpec::example1();
        let a = banded_imf(&p, &BandSpec::unbounded(0.7), 32).unwrap();
        let b = deformed_plane_wave(&p, 32).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn noise_level() {
        let f = deformed_plane_wave(&PhaseSpec::example1(), 512).unwrap();
        let var = variance(&f);
        assert!((noise_variance(&f, 0.0).unwrap() - var).abs() < 1e-15);
        let g = add_noise(&f, 3.0, 9).unwrap();
        let noise = g.sub(&f).unwrap();
        let target = var / 10f64.powf(0.3);
        let measured = noise.energy() / (512.0 * 512.0);
        assert!(
            (measured / target - 1.0).abs() < 0.02,
            "{measured} vs {target}"
        );
        assert_eq!(add_noise(&f, 3.0, 9).unwrap().values(), g.values());
        assert_ne!(add_noise(&f, 3.0, 10).unwrap().values(), g.values());
    }

    #[test]
    fn constant_field_cannot_be_calibrated() {
        let f = SpatialField::from_fn(16, |_, _| Complex64::new(2.0, 0.0)).unwrap();
        assert!(matches!(
            add_noise(&f, 0.0, 1),
            Err(SsctError::Numerical(_))
        ));
    }

    #[test]
    fn zero_shift_is_identity() {
        let f = deformed_plane_wave(&PhaseSpec::example1(), 32).unwrap();
        let g = shift_columns(&f, &[0; 32]).unwrap();
        assert_eq!(f.values(), g.values());
    }

    #[test]
    fn disruption_permutes_columns() {
        let f = deformed_plane_wave(&PhaseSpec::example1(), 32).unwrap();
        let a = random_shift_disrupt(&f, 1).unwrap();
        let b = random_shift_disrupt(&f, 2).unwrap();
        assert_ne!(a.values(), b.values());
        assert_eq!(a.energy().to_bits(), a.energy().to_bits());
        assert!((a.energy() - f.energy()).abs() < 1e-9);
        let column = |g: &SpatialField, n2: usize| {
            let mut c: Vec<(u64, u64)> = (0..32)
                .map(|n1| {
                    let v = g.get(n1, n2);
                    (v.re.to_bits(), v.im.to_bits())
                })
                .collect();
            c.sort();
            c
        };
        for n2 in 0..32 {
            assert_eq!(column(&a, n2), column(&f, n2));
            assert_eq!(column(&b, n2), column(&f, n2));
        }
    }

    #[test]
    fn presets_load() {
        for name in Preset::names() {
            let p = Preset::builtin(name).unwrap();
            assert_eq!(p.name, name);
        }
        assert!(Preset::builtin("nope").is_err());
        assert!(Preset::from_json(
            r#"{"name":"x","version":1,"side":32,"components":[],"extra":1}"#
        )
        .is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let mut p = Preset::builtin("example3").unwrap();
        p.side = 64;
        p.snr_db = Some(0.0);
        let a = p.generate().unwrap();
        let b = p.generate().unwrap();
        assert_eq!(a.field.values(), b.field.values());
        assert!(p.ground_truth(0, 32).is_none());
        assert!(p.ground_truth(1, 32).is_some());
    }
}
