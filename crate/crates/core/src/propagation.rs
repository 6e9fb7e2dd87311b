//! Angular-spectrum propagation with an edge absorber.
//!
//! The transfer function drops the global phase `exp(i k dz)` and uses
//! `kz - k = -(kx² + ky²) / (k + sqrt(k² - kx² - ky²))`, which keeps the per-bin phase
//! accurate even when `k·dz` is of order 1e12 rad.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::field::{ComplexField, Grid};

/// Default lower bound on the sampling factor.
pub const DEFAULT_S_MIN: f64 = 1.0;
/// Below this sampling factor a warning is logged.
pub const S_WARN: f64 = 2.0;

/// `S = n·delta² / (λ·dz)`.
pub fn sampling_factor(grid: &Grid, wavelength: f64, dz: f64) -> f64 {
    grid.n as f64 * grid.delta * grid.delta / (wavelength * dz.abs())
}

/// Errors when the sampling factor of a step falls below `s_min`.
pub fn check_sampling(grid: &Grid, wavelength: f64, dz: f64, s_min: f64) -> Result<f64> {
    let s = sampling_factor(grid, wavelength, dz);
    if s < s_min {
        return Err(Error::Aliasing {
            factor: s,
            minimum: s_min,
        });
    }
    if s < S_WARN {
        log::warn!("sampling factor {s:.3} for dz = {dz} m is below {S_WARN}");
    }
    Ok(s)
}

/// Precomputed ASM transfer function for one step length.
#[derive(Debug, Clone)]
pub struct PropagationStep {
    pub grid: Grid,
    pub wavelength: f64,
    pub dz: f64,
    /// `H(kx, ky)` in DFT order; zero in the evanescent region.
    transfer: Vec<Complex64>,
}

impl PropagationStep {
    /// Builds the transfer function without any sampling check.
    pub fn new(grid: Grid, wavelength: f64, dz: f64) -> Self {
        let k = 2.0 * std::f64::consts::PI / wavelength;
        let k2 = k * k;
        let freqs = fft::angular_frequencies(grid.n, grid.delta);
        let mut transfer = Vec::with_capacity(grid.len());
        for &ky in &freqs {
            for &kx in &freqs {
                let kt2 = kx * kx + ky * ky;
                if kt2 > k2 {
                    transfer.push(Complex64::default());
                } else {
                    let kz_minus_k = -kt2 / (k + (k2 - kt2).sqrt());
                    transfer.push(Complex64::from_polar(1.0, kz_minus_k * dz));
                }
            }
        }
        Self {
            grid,
            wavelength,
            dz,
            transfer,
        }
    }

    /// Propagator for `-dz`: the complex conjugate of this one.
    pub fn conjugate(&self) -> Self {
        Self {
            grid: self.grid,
            wavelength: self.wavelength,
            dz: -self.dz,
            transfer: self.transfer.iter().map(|h| h.conj()).collect(),
        }
    }

    pub fn transfer(&self) -> &[Complex64] {
        &self.transfer
    }

    /// Advances `field` by `dz`. The field must share this step's grid and wavelength.
    pub fn apply(&self, mut field: ComplexField) -> Result<ComplexField> {
        field.ensure_same_grid(&self.grid, "propagation step")?;
        if field.wavelength != self.wavelength {
            return Err(Error::GridMismatch(
                "propagation step built for a different wavelength".into(),
            ));
        }
        let n = self.grid.n;
        fft::forward(&mut field.amplitude, n);
        for (a, h) in field.amplitude.iter_mut().zip(&self.transfer) {
            *a *= h;
        }
        fft::inverse(&mut field.amplitude, n);
        field.z += self.dz;
        Ok(field)
    }
}

/// One ASM step with the default sampling guard.
pub fn asm_step(field: ComplexField, dz: f64) -> Result<ComplexField> {
    asm_step_with(field, dz, DEFAULT_S_MIN)
}

/// One ASM step, rejecting steps whose sampling factor is below `s_min`.
pub fn asm_step_with(field: ComplexField, dz: f64, s_min: f64) -> Result<ComplexField> {
    if !(dz > 0.0 && dz.is_finite()) {
        return Err(Error::invalid("dz", "must be positive"));
    }
    check_sampling(&field.grid, field.wavelength, dz, s_min)?;
    PropagationStep::new(field.grid, field.wavelength, dz).apply(field)
}

/// Separable raised-cosine (Tukey) edge window.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorberProfile {
    /// Width of each tapered edge as a fraction of the grid side.
    pub margin_fraction: f64,
    /// Per-axis amplitude transmission; the 2-D map is `axis[row]·axis[col]`.
    axis: Vec<f64>,
}

impl AbsorberProfile {
    /// Taper of `round(margin_fraction·n)` samples on each edge, rising from 0 at the
    /// outermost sample to exactly 1 in the interior.
    pub fn raised_cosine(grid: &Grid, margin_fraction: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&margin_fraction) {
            return Err(Error::invalid(
                "absorber_margin",
                "must lie in [0, 0.5)",
            ));
        }
        let n = grid.n;
        let m = (margin_fraction * n as f64).round() as usize;
        let mut axis = vec![1.0; n];
        for u in 0..m {
            let w = 0.5 * (1.0 - (std::f64::consts::PI * u as f64 / m as f64).cos());
            axis[u] = w;
            axis[n - 1 - u] = w;
        }
        Ok(Self {
            margin_fraction,
            axis,
        })
    }

    /// Number of tapered samples on each edge.
    pub fn margin_samples(&self) -> usize {
        self.axis.iter().take_while(|&&w| w < 1.0).count()
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn transmission(&self, row: usize, col: usize) -> f64 {
        self.axis[row] * self.axis[col]
    }
}

pub fn apply_absorber(mut field: ComplexField, absorber: &AbsorberProfile) -> Result<ComplexField> {
    let n = field.grid.n;
    if absorber.axis.len() != n {
        return Err(Error::GridMismatch(format!(
            "absorber built for n = {}, field has n = {n}",
            absorber.axis.len()
        )));
    }
    if absorber.margin_samples() == 0 {
        return Ok(field);
    }
    for (row, chunk) in field.amplitude.chunks_exact_mut(n).enumerate() {
        let wr = absorber.axis[row];
        for (a, &wc) in chunk.iter_mut().zip(&absorber.axis) {
            let t = wr * wc;
            if t != 1.0 {
                *a *= t;
            }
        }
    }
    Ok(field)
}

/// Vacuum propagation over `distance` in steps of `dz` (last step may be shorter),
/// applying `absorber` after every step.
pub fn vacuum_propagate(
    field: ComplexField,
    distance: f64,
    dz: f64,
    absorber: Option<&AbsorberProfile>,
    s_min: f64,
) -> Result<ComplexField> {
    if !(distance >= 0.0) {
        return Err(Error::invalid("distance", "must be non-negative"));
    }
    if !(dz > 0.0) {
        return Err(Error::invalid("dz", "must be positive"));
    }
    if distance == 0.0 {
        return Ok(field);
    }
    let full_steps = (distance / dz).floor() as usize;
    let remainder = distance - full_steps as f64 * dz;
    let mut lengths = vec![dz; full_steps];
    // Remainders below a nanometre are rounding noise.
    if remainder > 1e-9 {
        lengths.push(remainder);
    }
    let mut field = field;
    let mut cached: Option<PropagationStep> = None;
    for len in lengths {
        check_sampling(&field.grid, field.wavelength, len, s_min)?;
        let step = match cached.take() {
            Some(s) if s.dz == len => s,
            _ => PropagationStep::new(field.grid, field.wavelength, len),
        };
        field = step.apply(field)?;
        if let Some(a) = absorber {
            field = apply_absorber(field, a)?;
        }
        cached = Some(step);
    }
    Ok(field)
}
