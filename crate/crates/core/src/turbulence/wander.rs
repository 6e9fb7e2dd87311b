use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fft;
use crate::field::ComplexField;

/// Per-axis angle-of-arrival variance `0.182 (D/r₀)^{5/3} (λ/D)²` (rad²).
pub fn tilt_variance(segment_r0: f64, aperture_d: f64, wavelength: f64) -> f64 {
    if !segment_r0.is_finite() {
        return 0.0;
    }
    0.182 * (aperture_d / segment_r0).powf(5.0 / 3.0) * (wavelength / aperture_d).powi(2)
}

/// Draws a lateral displacement `(θx·dz, θy·dz)` for one segment.
pub fn sample_wander<R: Rng + ?Sized>(
    segment_r0: f64,
    dz: f64,
    aperture_d: f64,
    wavelength: f64,
    rng: &mut R,
) -> (f64, f64) {
    let sigma = tilt_variance(segment_r0, aperture_d, wavelength).sqrt();
    if sigma == 0.0 {
        return (0.0, 0.0);
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    (normal.sample(rng) * dz, normal.sample(rng) * dz)
}

/// Translates the field by `(sx, sy)` metres with a Fourier-domain phase ramp.
pub fn shift_field(mut field: ComplexField, sx: f64, sy: f64) -> Result<ComplexField> {
    let limit = field.grid.side() / 4.0;
    let displacement = sx.hypot(sy);
    if displacement > limit {
        return Err(Error::WanderMargin {
            displacement,
            limit,
        });
    }
    if sx == 0.0 && sy == 0.0 {
        return Ok(field);
    }
    let n = field.grid.n;
    let freqs = fft::angular_frequencies(n, field.grid.delta);
    let ramp_x: Vec<Complex64> = freqs.iter().map(|&k| Complex64::from_polar(1.0, -k * sx)).collect();
    let ramp_y: Vec<Complex64> = freqs.iter().map(|&k| Complex64::from_polar(1.0, -k * sy)).collect();
    fft::forward(&mut field.amplitude, n);
    for (row, chunk) in field.amplitude.chunks_exact_mut(n).enumerate() {
        let ry = ramp_y[row];
        for (a, rx) in chunk.iter_mut().zip(&ramp_x) {
            *a *= ry * rx;
        }
    }
    fft::inverse(&mut field.amplitude, n);
    Ok(field)
}

/// Random tilt-induced lateral shift accumulated over a segment of length `dz`.
pub fn beam_wander_step<R: Rng + ?Sized>(
    field: ComplexField,
    segment_r0: f64,
    dz: f64,
    aperture_d: f64,
    rng: &mut R,
) -> Result<ComplexField> {
    if !(dz > 0.0) {
        return Err(Error::invalid("dz", "must be positive"));
    }
    let (sx, sy) = sample_wander(segment_r0, dz, aperture_d, field.wavelength, rng);
    shift_field(field, sx, sy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{beam_stats, gaussian_beam, total_power, Grid, OpticalConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn beam() -> ComplexField {
        let grid = Grid::new(64, 0.01).unwrap();
        gaussian_beam(
            grid,
            &OpticalConfig {
                wavelength: 810e-9,
                w0: 0.05,
                tx_power: 1.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn no_turbulence_no_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = beam();
        let out = beam_wander_step(b.clone(), f64::INFINITY, 1000.0, 0.2, &mut rng).unwrap();
        assert_eq!(out, b);
    }

    #[test]
    fn reproducible_for_seed() {
        let a = beam_wander_step(beam(), 0.05, 2000.0, 0.2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = beam_wander_step(beam(), 0.05, 2000.0, 0.2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subpixel_shift_moves_centroid_and_keeps_power() {
        let out = shift_field(beam(), 0.0137, -0.0042).unwrap();
        let s = beam_stats(&out).unwrap();
        assert!((s.centroid_x - 0.0137).abs() < 1e-6);
        assert!((s.centroid_y + 0.0042).abs() < 1e-6);
        assert!((total_power(&out) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oversize_wander_is_rejected() {
        let err = shift_field(beam(), 0.2, 0.0).unwrap_err();
        assert!(err.to_string().contains("wander exceeds grid margin"));
    }

    #[test]
    fn ensemble_variance_matches_configured_tilt() {
        let (r0, dz, d) = (0.05, 2000.0, 0.2);
        let var = tilt_variance(r0, d, 810e-9) * dz * dz;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let b = beam();
        let draws = 1000;
        let mut sum2 = 0.0;
        for _ in 0..draws {
            let out = beam_wander_step(b.clone(), r0, dz, d, &mut rng).unwrap();
            let s = beam_stats(&out).unwrap();
            sum2 += s.centroid_x * s.centroid_x + s.centroid_y * s.centroid_y;
        }
        // Both axes pooled: 2000 samples of a zero-mean Gaussian.
        let est = sum2 / (2.0 * draws as f64);
        assert!((est - var).abs() / var < 0.10, "{est} vs {var}");
    }
}
