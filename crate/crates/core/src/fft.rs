//! Square 2D FFTs built from rustfft row transforms.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

/// Unnormalized 2D FFT on an `n x n` row-major buffer.
#[derive(Clone)]
pub(crate) struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// `X[k] = sum_m x[m] exp(-2 pi i k.m / n)`.
    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(data, FftDirection::Forward);
    }

    /// `x[m] = sum_k X[k] exp(+2 pi i k.m / n)` (no `1/n^2` factor).
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, FftDirection::Inverse);
    }

    fn run(&self, data: &mut [Complex64], direction: FftDirection) {
        let n = self.n;
        assert_eq!(data.len(), n * n, "buffer is not {n}x{n}");
        let plan = match direction {
            FftDirection::Forward => &self.forward,
            FftDirection::Inverse => &self.inverse,
        };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        transpose_square(data, n);
        plan.process_with_scratch(data, &mut scratch);
        transpose_square(data, n);
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_then_inverse_scales_by_n_squared() {
        let n = 12;
        let fft = Fft2::new(n);
        let orig: Vec<Complex64> = (0..n * n)
            .map(|k| Complex64::new((k as f64).sin(), (k as f64 * 0.3).cos()))
            .collect();
        let mut data = orig.clone();
        fft.forward(&mut data);
        fft.inverse(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a / (n * n) as f64 - b).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_dft() {
        let n = 6;
        let fft = Fft2::new(n);
        let x: Vec<Complex64> = (0..n * n)
            .map(|k| Complex64::new(k as f64, (k * k % 7) as f64))
            .collect();
        let mut fast = x.clone();
        fft.forward(&mut fast);
        for k1 in 0..n {
            for k2 in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for m1 in 0..n {
                    for m2 in 0..n {
                        let ph =
                            -2.0 * std::f64::consts::PI * ((k1 * m1 + k2 * m2) as f64) / n as f64;
                        acc += x[m1 * n + m2] * Complex64::from_polar(1.0, ph);
                    }
                }
                assert!((acc - fast[k1 * n + k2]).norm() < 1e-9);
            }
        }
    }
}
