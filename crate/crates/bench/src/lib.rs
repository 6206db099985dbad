//! Shared inputs for the benchmarks.

use ssct::synth::{deformed_plane_wave, PhaseSpec};
use ssct::{DecomposeConfig, SpatialField};

/// The deformed plane wave of the first preset, rescaled to `side` so the
/// wavenumber stays a fixed fraction of the Nyquist limit.
pub fn deformed_wave(side: usize) -> SpatialField {
    let mut spec = PhaseSpec::example1();
    spec.n = (spec.n * side as f64 / 512.0).round();
    deformed_plane_wave(&spec, side).expect("valid fixture")
}

pub fn curvelet_config(side: usize) -> DecomposeConfig {
    DecomposeConfig::new(side)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_match_sizes() {
        for side in [64, 128] {
            let f = deformed_wave(side);
            assert_eq!(f.side(), side);
            assert_eq!(curvelet_config(side).side(), side);
        }
    }
}
