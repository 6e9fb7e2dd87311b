//! Sampled complex optical fields on a square grid.
//!
//! Beam radii are reported everywhere as the e⁻² intensity radius. For a sampled
//! intensity this is computed from the second moment, `W = sqrt(2 <r²>)`, which equals
//! `w` exactly for a Gaussian `I ∝ exp(-2 r² / w²)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square sampling grid: `n × n` samples spaced `delta` metres apart.
///
/// Sample `(row, col)` sits at `x = (col - n/2)·delta`, `y = (row - n/2)·delta`, so
/// the optical axis passes through sample `(n/2, n/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub delta: f64,
}

impl Grid {
    pub const MIN_SAMPLES: usize = 64;

    pub fn new(n: usize, delta: f64) -> Result<Self> {
        let grid = Self { n, delta };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < Self::MIN_SAMPLES || !self.n.is_power_of_two() {
            return Err(Error::invalid(
                "grid.n",
                format!("must be a power of two >= {}", Self::MIN_SAMPLES),
            ));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid("grid.delta", "must be positive"));
        }
        Ok(())
    }

    /// Physical side length `n·delta`.
    pub fn side(&self) -> f64 {
        self.n as f64 * self.delta
    }

    /// Index of the on-axis sample along either axis.
    pub fn center(&self) -> usize {
        self.n / 2
    }

    /// Physical coordinate of sample index `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) * self.delta
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            n: 512,
            delta: 0.02,
        }
    }
}

/// Source optics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalConfig {
    /// Wavelength (m).
    pub wavelength: f64,
    /// Beam waist radius at the transmitter (m), e⁻² intensity convention.
    pub w0: f64,
    /// Launched power; all losses are relative to it.
    pub tx_power: f64,
}

impl Default for OpticalConfig {
    fn default() -> Self {
        Self {
            wavelength: 810e-9,
            w0: 0.08,
            tx_power: 1.0,
        }
    }
}

impl OpticalConfig {
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    /// Rayleigh range `π w0² / λ`.
    pub fn rayleigh_range(&self) -> f64 {
        std::f64::consts::PI * self.w0 * self.w0 / self.wavelength
    }

    /// Checks the waist against the grid: at least 4 samples per radius and small enough
    /// to leave room for the absorbing margin.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::invalid("optics.wavelength", "must be positive"));
        }
        if !(self.tx_power > 0.0 && self.tx_power.is_finite()) {
            return Err(Error::invalid("optics.tx_power", "must be positive"));
        }
        if !(self.w0 >= 4.0 * grid.delta) {
            return Err(Error::invalid(
                "optics.w0",
                format!(
                    "under-resolved waist: w0 = {} m < 4·delta = {} m",
                    self.w0,
                    4.0 * grid.delta
                ),
            ));
        }
        if self.w0 > grid.side() / 4.0 {
            return Err(Error::invalid(
                "optics.w0",
                format!(
                    "waist too large for absorbing margin: w0 = {} m > n·delta/4 = {} m",
                    self.w0,
                    grid.side() / 4.0
                ),
            ));
        }
        Ok(())
    }
}

/// Complex amplitude (square-root-intensity units) sampled on a [`Grid`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub wavelength: f64,
    /// Current propagation coordinate (m).
    pub z: f64,
    pub amplitude: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid, wavelength: f64) -> Self {
        Self {
            grid,
            wavelength,
            z: 0.0,
            amplitude: vec![Complex64::default(); grid.len()],
        }
    }

    /// Builds a field from `f(x, y)` evaluated at every sample.
    pub fn from_fn(grid: Grid, wavelength: f64, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut field = Self::zeros(grid, wavelength);
        for row in 0..grid.n {
            let y = grid.coord(row);
            for col in 0..grid.n {
                field.amplitude[row * grid.n + col] = f(grid.coord(col), y);
            }
        }
        field
    }

    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.amplitude[row * self.grid.n + col]
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.amplitude.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Intensity of the on-axis sample.
    pub fn on_axis_intensity(&self) -> f64 {
        let c = self.grid.center();
        self.at(c, c).norm_sqr()
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        self.amplitude.iter_mut().for_each(|a| *a *= factor);
        self
    }

    /// Circularly shifts the samples by whole pixels (`+cols` moves the beam toward +x).
    pub fn rolled(&self, rows: isize, cols: isize) -> Self {
        let n = self.grid.n as isize;
        let mut out = self.clone();
        for r in 0..n {
            for c in 0..n {
                let dst = ((r + rows).rem_euclid(n) * n + (c + cols).rem_euclid(n)) as usize;
                out.amplitude[dst] = self.amplitude[(r * n + c) as usize];
            }
        }
        out
    }

    pub(crate) fn ensure_same_grid(&self, other: &Grid, what: &str) -> Result<()> {
        if self.grid.n != other.n || self.grid.delta != other.delta {
            return Err(Error::GridMismatch(format!(
                "{what}: field grid {}x{} @ {} m vs {}x{} @ {} m",
                self.grid.n, self.grid.n, self.grid.delta, other.n, other.n, other.delta
            )));
        }
        Ok(())
    }
}

/// Centered Gaussian beam `∝ exp(-(x²+y²)/w0²)` renormalized to carry `tx_power`.
pub fn gaussian_beam(grid: Grid, optics: &OpticalConfig) -> Result<ComplexField> {
    grid.validate()?;
    optics.validate(&grid)?;
    let inv_w2 = 1.0 / (optics.w0 * optics.w0);
    let field = ComplexField::from_fn(grid, optics.wavelength, |x, y| {
        Complex64::new((-(x * x + y * y) * inv_w2).exp(), 0.0)
    });
    let scale = (optics.tx_power / total_power(&field)).sqrt();
    Ok(field.scaled(Complex64::new(scale, 0.0)))
}

/// `Σ |a|² · delta²`.
pub fn total_power(field: &ComplexField) -> f64 {
    let d2 = field.grid.delta * field.grid.delta;
    field.amplitude.iter().map(|a| a.norm_sqr()).sum::<f64>() * d2
}

/// Intensity-weighted centroid and e⁻² radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamStats {
    pub centroid_x: f64,
    pub centroid_y: f64,
    /// `sqrt(2 <|r - centroid|²>)`.
    pub radius: f64,
}

pub fn beam_stats(field: &ComplexField) -> Result<BeamStats> {
    let grid = field.grid;
    let (mut sum, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for row in 0..grid.n {
        let y = grid.coord(row);
        for col in 0..grid.n {
            let i = field.at(row, col).norm_sqr();
            sum += i;
            sx += i * grid.coord(col);
            sy += i * y;
        }
    }
    if sum <= 0.0 || !sum.is_finite() {
        return Err(Error::EmptyField);
    }
    let (cx, cy) = (sx / sum, sy / sum);
    let mut sr2 = 0.0;
    for row in 0..grid.n {
        let dy = grid.coord(row) - cy;
        for col in 0..grid.n {
            let dx = grid.coord(col) - cx;
            sr2 += field.at(row, col).norm_sqr() * (dx * dx + dy * dy);
        }
    }
    Ok(BeamStats {
        centroid_x: cx,
        centroid_y: cy,
        radius: (2.0 * sr2 / sum).sqrt(),
    })
}
