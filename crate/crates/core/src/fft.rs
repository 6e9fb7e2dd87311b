//! Square 2-D FFTs over row-major buffers.
//!
//! Plans are cached per thread; the inverse transform is unnormalized, matching rustfft.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    for bi in (0..n).step_by(BLOCK) {
        for bj in (bi..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + BLOCK).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

fn transform(data: &mut [Complex64], n: usize, inverse: bool) {
    assert_eq!(data.len(), n * n, "buffer is not n x n");
    let fft = plan(n, inverse);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(data, &mut scratch);
    transpose_square(data, n);
    fft.process_with_scratch(data, &mut scratch);
    transpose_square(data, n);
}

/// In-place forward 2-D DFT (no normalization).
pub fn forward(data: &mut [Complex64], n: usize) {
    transform(data, n, false);
}

/// In-place inverse 2-D DFT without the 1/n² factor.
pub fn inverse_unnormalized(data: &mut [Complex64], n: usize) {
    transform(data, n, true);
}

/// In-place inverse 2-D DFT, normalized so that `inverse(forward(x)) == x`.
pub fn inverse(data: &mut [Complex64], n: usize) {
    transform(data, n, true);
    let scale = 1.0 / (n * n) as f64;
    data.iter_mut().for_each(|v| *v *= scale);
}

/// Angular spatial frequency (rad/m) of DFT bin `index` for an `n`-point axis with spacing `delta`.
pub fn angular_frequency(index: usize, n: usize, delta: f64) -> f64 {
    let signed = if index < n.div_ceil(2) {
        index as f64
    } else {
        index as f64 - n as f64
    };
    2.0 * std::f64::consts::PI * signed / (n as f64 * delta)
}

/// All `n` angular frequencies in DFT order.
pub fn angular_frequencies(n: usize, delta: f64) -> Vec<f64> {
    (0..n).map(|i| angular_frequency(i, n, delta)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft2(data: &[Complex64], n: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); n * n];
        for u in 0..n {
            for v in 0..n {
                let mut acc = Complex64::default();
                for r in 0..n {
                    for c in 0..n {
                        let arg = -2.0 * std::f64::consts::PI * ((u * r + v * c) as f64) / n as f64;
                        acc += data[r * n + c] * Complex64::from_polar(1.0, arg);
                    }
                }
                out[u * n + v] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft() {
        let n = 8;
        let data: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut fast = data.clone();
        forward(&mut fast, n);
        let slow = naive_dft2(&data, n);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn round_trip() {
        let n = 64;
        let data: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i % 7) as f64, (i % 5) as f64 - 2.0))
            .collect();
        let mut buf = data.clone();
        forward(&mut buf, n);
        inverse(&mut buf, n);
        for (a, b) in buf.iter().zip(&data) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn transpose_is_involution() {
        let n = 70;
        let data: Vec<Complex64> = (0..n * n).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let mut buf = data.clone();
        transpose_square(&mut buf, n);
        assert_eq!(buf[1], data[n]);
        transpose_square(&mut buf, n);
        assert_eq!(buf, data);
    }

    #[test]
    fn frequency_layout() {
        let f = angular_frequencies(8, 0.5);
        let dk = 2.0 * std::f64::consts::PI / 4.0;
        assert_eq!(f[0], 0.0);
        assert!((f[1] - dk).abs() < 1e-15);
        assert!((f[4] + 4.0 * dk).abs() < 1e-15);
        assert!((f[7] + dk).abs() < 1e-15);
    }
}
