use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::fft;
use crate::field::{ComplexField, Grid};

/// Modified Von Kármán phase PSD (rad²·m² per (rad/m)²):
/// `0.49 r₀^{-5/3} (κ² + κ₀²)^{-11/6} exp(-κ²/κ_m²)`, `κ₀ = 2π/L₀`, `κ_m = 5.92/l₀`.
pub fn von_karman_psd(kappa: f64, r0: f64, outer_scale: f64, inner_scale: f64) -> f64 {
    let k0 = if outer_scale.is_finite() {
        2.0 * std::f64::consts::PI / outer_scale
    } else {
        0.0
    };
    let k2 = kappa * kappa;
    let cutoff = if inner_scale > 0.0 {
        let km = 5.92 / inner_scale;
        (-k2 / (km * km)).exp()
    } else {
        1.0
    };
    0.49 * r0.powf(-5.0 / 3.0) * (k2 + k0 * k0).powf(-11.0 / 6.0) * cutoff
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScreenOptions {
    /// Number of Lane-style subharmonic levels added below the FFT grid's lowest
    /// frequency; 0 disables them.
    pub subharmonic_levels: u32,
}

/// One realization of turbulent phase (radians) on a grid, piston removed.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseScreen {
    pub grid: Grid,
    pub phase: Vec<f64>,
    pub segment_r0: f64,
    pub seed: u64,
}

impl PhaseScreen {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            phase: vec![0.0; grid.len()],
            segment_r0: f64::INFINITY,
            seed: 0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.phase.iter().sum::<f64>() / self.phase.len() as f64
    }
}

fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

pub fn make_phase_screen(
    grid: Grid,
    segment_r0: f64,
    outer_scale: f64,
    inner_scale: f64,
    seed: u64,
) -> PhaseScreen {
    make_phase_screen_with(
        grid,
        segment_r0,
        outer_scale,
        inner_scale,
        seed,
        ScreenOptions::default(),
    )
}

/// FFT spectral synthesis: unit complex Gaussian noise weighted by `sqrt(Φ)·Δκ`,
/// inverse transformed, real part kept. Deterministic for a given seed.
pub fn make_phase_screen_with(
    grid: Grid,
    segment_r0: f64,
    outer_scale: f64,
    inner_scale: f64,
    seed: u64,
    options: ScreenOptions,
) -> PhaseScreen {
    if grid.side() <= outer_scale / 10.0 {
        log::warn!(
            "grid side {:.3} m is under a tenth of the outer scale {:.3} m; low-order phase is truncated",
            grid.side(),
            outer_scale
        );
    }
    let n = grid.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dk = 2.0 * std::f64::consts::PI / grid.side();
    let freqs = fft::angular_frequencies(n, grid.delta);

    let mut spectrum = vec![Complex64::default(); grid.len()];
    for (iy, &ky) in freqs.iter().enumerate() {
        for (ix, &kx) in freqs.iter().enumerate() {
            let noise = complex_normal(&mut rng);
            if ix == 0 && iy == 0 {
                continue;
            }
            let kappa = (kx * kx + ky * ky).sqrt();
            let amp = von_karman_psd(kappa, segment_r0, outer_scale, inner_scale).sqrt() * dk;
            spectrum[iy * n + ix] = noise * amp;
        }
    }
    fft::inverse_unnormalized(&mut spectrum, n);
    let mut phase: Vec<f64> = spectrum.iter().map(|c| c.re).collect();

    if options.subharmonic_levels > 0 {
        add_subharmonics(
            &mut phase,
            grid,
            segment_r0,
            outer_scale,
            inner_scale,
            options.subharmonic_levels,
            &mut rng,
        );
    }

    let mean = phase.iter().sum::<f64>() / phase.len() as f64;
    phase.iter_mut().for_each(|p| *p -= mean);
    PhaseScreen {
        grid,
        phase,
        segment_r0,
        seed,
    }
}

fn add_subharmonics(
    phase: &mut [f64],
    grid: Grid,
    r0: f64,
    outer_scale: f64,
    inner_scale: f64,
    levels: u32,
    rng: &mut ChaCha8Rng,
) {
    let n = grid.n;
    let coords: Vec<f64> = (0..n).map(|i| grid.coord(i)).collect();
    let mut low = vec![0.0; grid.len()];
    let base = 2.0 * std::f64::consts::PI / grid.side();
    for p in 1..=levels {
        let dkp = base / 3f64.powi(p as i32);
        for b in -1i32..=1 {
            for a in -1i32..=1 {
                let noise = complex_normal(rng);
                if a == 0 && b == 0 {
                    continue;
                }
                let (kx, ky) = (a as f64 * dkp, b as f64 * dkp);
                let kappa = (kx * kx + ky * ky).sqrt();
                let c = noise * von_karman_psd(kappa, r0, outer_scale, inner_scale).sqrt() * dkp;
                let ex: Vec<Complex64> = coords
                    .iter()
                    .map(|&x| Complex64::from_polar(1.0, kx * x))
                    .collect();
                for (row, &y) in coords.iter().enumerate() {
                    let cy = c * Complex64::from_polar(1.0, ky * y);
                    let out = &mut low[row * n..(row + 1) * n];
                    for (o, e) in out.iter_mut().zip(&ex) {
                        *o += cy.re * e.re - cy.im * e.im;
                    }
                }
            }
        }
    }
    let mean = low.iter().sum::<f64>() / low.len() as f64;
    for (p, l) in phase.iter_mut().zip(&low) {
        *p += l - mean;
    }
}

/// Multiplies the field by `exp(i·phase)`.
pub fn apply_phase_screen(mut field: ComplexField, screen: &PhaseScreen) -> Result<ComplexField> {
    field.ensure_same_grid(&screen.grid, "phase screen")?;
    for (a, &p) in field.amplitude.iter_mut().zip(&screen.phase) {
        *a *= Complex64::from_polar(1.0, p);
    }
    Ok(field)
}
