//! Run configuration: a JSON document, overridden key by key from flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use ssct::synth::Preset;
use ssct::{DecomposeConfig, SsctError};

/// Thresholds and seeds for `snr-sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Noise levels in dB; `null` is noiseless.
    pub snr_db: Vec<Option<f64>>,
    pub delta: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for SweepSpec {
    // The noise table for the banded preset.
    fn default() -> Self {
        Self {
            snr_db: vec![None, Some(3.0), Some(0.0), Some(-3.0), Some(-6.0)],
            delta: vec![0.0, 3.5, 4.0, 4.5, 5.0],
            seeds: vec![1, 2, 3],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in preset name or path to a preset JSON file.
    #[serde(default)]
    pub preset: Option<String>,
    /// SSCT raw input field, used instead of a preset.
    #[serde(default)]
    pub input: Option<PathBuf>,
    /// Ground-truth wave-vectors as `b1,b2,v1,v2` CSV.
    #[serde(default)]
    pub truth: Option<PathBuf>,
    #[serde(default)]
    pub decompose: Option<DecomposeConfig>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Replaces the preset seed.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Replaces the preset noise level.
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| SsctError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.preset.is_some() && self.input.is_some() {
            bail!(SsctError::Config(
                "give either a preset or an input field, not both".into()
            ));
        }
        if self.threads == Some(0) {
            bail!(SsctError::Config("threads must be at least 1".into()));
        }
        if let Some(s) = self.snr_db {
            if s.is_nan() {
                bail!(SsctError::Config("snr_db must be a number".into()));
            }
        }
        if let Some(d) = &self.decompose {
            d.validate()?;
        }
        if let Some(s) = &self.sweep {
            if s.snr_db.len() != s.delta.len() || s.seeds.is_empty() {
                bail!(SsctError::Config(
                    "sweep needs as many delta values as SNR values and at least one seed".into()
                ));
            }
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("ssct-out"))
    }

    /// The preset with seed and noise overrides applied.
    pub fn load_preset(&self) -> Result<Option<Preset>> {
        let Some(name) = &self.preset else {
            return Ok(None);
        };
        let mut p = if Path::new(name).is_file() {
            let text =
                std::fs::read_to_string(name).with_context(|| format!("reading preset {name}"))?;
            Preset::from_json(&text)?
        } else {
            Preset::builtin(name)?
        };
        if let Some(seed) = self.seed {
            p.seed = seed;
        }
        if let Some(s) = self.snr_db {
            p.snr_db = Some(s).filter(|s| s.is_finite());
        }
        p.validate()?;
        Ok(Some(p))
    }

    /// The configured analysis parameters, or curvelet defaults for `side`.
    pub fn analysis(&self, side: usize) -> Result<DecomposeConfig> {
        let cfg = self
            .decompose
            .clone()
            .unwrap_or_else(|| DecomposeConfig::new(side));
        if cfg.side() != side {
            bail!(SsctError::Dimension(format!(
                "config tiling side {} does not match the input side {side}",
                cfg.side()
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_keys() {
        assert!(
            serde_json::from_str::<RunConfig>(r#"{"preset": "example1", "bogus": 1}"#).is_err()
        );
        assert!(serde_json::from_str::<RunConfig>(
            r#"{"decompose": {"tiling": {"side": 64, "s": 0.6, "t": 0.8, "x": 1}}}"#
        )
        .is_err());
    }

    #[test]
    fn minimal_decompose_section() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"decompose": {"tiling": {"side": 64, "s": 0.625, "t": 0.875}}}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.analysis(64).unwrap().epsilon, 1e-4);
        assert!(cfg.analysis(128).is_err());
    }

    #[test]
    fn preset_overrides() {
        let cfg = RunConfig {
            preset: Some("example2".into()),
            seed: Some(9),
            snr_db: Some(5.0),
            ..Default::default()
        };
        let p = cfg.load_preset().unwrap().unwrap();
        assert_eq!((p.seed, p.snr_db), (9, Some(5.0)));
    }

    #[test]
    fn preset_and_input_conflict() {
        let cfg = RunConfig {
            preset: Some("example1".into()),
            input: Some("f.ssct".into()),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
