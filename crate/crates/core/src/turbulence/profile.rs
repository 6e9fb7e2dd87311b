use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Zenith angles at or beyond this are rejected by the sec θ airmass model.
pub const MAX_ZENITH_DEG: f64 = 80.0;

const R0_QUAD_TOL: f64 = 1e-6;

/// Hufnagel–Valley parameters plus the Von Kármán outer/inner scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbulenceProfile {
    /// RMS wind speed (m/s).
    pub v: f64,
    /// Ground-level turbulence strength (m^-2/3).
    pub a0: f64,
    /// Outer scale L₀ (m); `f64::INFINITY` gives a Kolmogorov spectrum at low κ.
    pub outer_scale: f64,
    /// Inner scale l₀ (m); zero disables the high-κ cutoff.
    pub inner_scale: f64,
}

impl Default for TurbulenceProfile {
    /// HV 5/7 with L₀ = 25 m, l₀ = 1 cm.
    fn default() -> Self {
        Self {
            v: 21.0,
            a0: 1.7e-14,
            outer_scale: 25.0,
            inner_scale: 0.01,
        }
    }
}

impl TurbulenceProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.v > 0.0) {
            return Err(Error::invalid("turbulence.v_wind", "must be positive"));
        }
        if !(self.a0 >= 0.0) {
            return Err(Error::invalid("turbulence.a0", "must be non-negative"));
        }
        if !(self.inner_scale > 0.0) {
            return Err(Error::invalid("turbulence.inner_scale", "must be positive"));
        }
        if !(self.outer_scale > self.inner_scale) {
            return Err(Error::invalid(
                "turbulence.outer_scale",
                "must exceed the inner scale",
            ));
        }
        Ok(())
    }

    pub fn cn2(&self, h: f64) -> Result<f64> {
        cn2_hv(h, self.v, self.a0)
    }
}

fn hv_unchecked(h: f64, v: f64, a0: f64) -> f64 {
    0.00594 * (v / 27.0).powi(2) * (1e-5 * h).powi(10) * (-h / 1000.0).exp()
        + 2.7e-16 * (-h / 1500.0).exp()
        + a0 * (-h / 100.0).exp()
}

/// Hufnagel–Valley Cn²(h) in m^-2/3.
pub fn cn2_hv(h: f64, v: f64, a0: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::Domain(format!("altitude must be >= 0, got {h}")));
    }
    Ok(hv_unchecked(h, v, a0))
}

fn check_zenith(zenith: f64) -> Result<()> {
    let deg = zenith.to_degrees();
    if !(0.0..MAX_ZENITH_DEG).contains(&deg) {
        return Err(Error::AirmassInvalid { zenith_deg: deg });
    }
    Ok(())
}

fn cn2_integral(profile: &TurbulenceProfile, h_lo: f64, h_hi: f64) -> f64 {
    quad::integrate(
        |h| hv_unchecked(h, profile.v, profile.a0),
        h_lo,
        h_hi,
        R0_QUAD_TOL * 1e-2,
    )
}

fn r0_from_integral(wavelength: f64, zenith: f64, integral: f64) -> f64 {
    let k = 2.0 * std::f64::consts::PI / wavelength;
    (0.423 * k * k * integral / zenith.cos()).powf(-0.6)
}

/// Fried parameter for the altitude slab `[h_lo, h_hi]` viewed at `zenith` (rad).
pub fn fried_r0(
    profile: &TurbulenceProfile,
    wavelength: f64,
    zenith: f64,
    h_lo: f64,
    h_hi: f64,
) -> Result<f64> {
    check_zenith(zenith)?;
    if !(h_lo >= 0.0 && h_hi > h_lo) {
        return Err(Error::Domain(format!(
            "altitude range must satisfy 0 <= h_lo < h_hi, got [{h_lo}, {h_hi}]"
        )));
    }
    Ok(r0_from_integral(
        wavelength,
        zenith,
        cn2_integral(profile, h_lo, h_hi),
    ))
}

/// Where the phase screens sit along the slant path and how strong each one is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenPlan {
    /// Slant-path coordinate of each screen (m), strictly increasing.
    pub positions: Vec<f64>,
    /// Fried parameter of each segment (m).
    pub segment_r0s: Vec<f64>,
    /// Slant length each screen represents (m).
    pub segment_lengths: Vec<f64>,
    pub zenith: f64,
    /// Fried parameter of the whole planned path (m).
    pub path_r0: f64,
}

impl ScreenPlan {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `(Σ r_i^{-5/3})^{-3/5}`.
    pub fn combined_r0(&self) -> f64 {
        self.segment_r0s
            .iter()
            .map(|r| r.powf(-5.0 / 3.0))
            .sum::<f64>()
            .powf(-0.6)
    }
}

/// Splits the slant path `[0, path_length]` into `n_screens` equal-altitude segments.
///
/// Each screen carries its segment's r₀ and sits at the Cn²-weighted mean altitude of
/// the segment, mapped back to the slant coordinate with `z = h / cos θ`.
pub fn plan_screens(
    profile: &TurbulenceProfile,
    wavelength: f64,
    zenith: f64,
    path_length: f64,
    n_screens: usize,
) -> Result<ScreenPlan> {
    check_zenith(zenith)?;
    if n_screens == 0 {
        return Err(Error::invalid("turbulence.n_screens", "must be at least 1"));
    }
    if !(path_length > 0.0) {
        return Err(Error::invalid("path length", "must be positive"));
    }
    let cos_t = zenith.cos();
    let top = path_length * cos_t;
    let whole = cn2_integral(profile, 0.0, top);
    let mut plan = ScreenPlan {
        positions: Vec::with_capacity(n_screens),
        segment_r0s: Vec::with_capacity(n_screens),
        segment_lengths: Vec::with_capacity(n_screens),
        zenith,
        path_r0: r0_from_integral(wavelength, zenith, whole),
    };
    if n_screens == 1 {
        let moment = quad::integrate(
            |h| h * hv_unchecked(h, profile.v, profile.a0),
            0.0,
            top,
            R0_QUAD_TOL * 1e-2,
        );
        plan.positions.push(moment / whole / cos_t);
        plan.segment_r0s.push(plan.path_r0);
        plan.segment_lengths.push(path_length);
        return Ok(plan);
    }
    let dh = top / n_screens as f64;
    for i in 0..n_screens {
        let (lo, hi) = (i as f64 * dh, (i + 1) as f64 * dh);
        let weight = cn2_integral(profile, lo, hi);
        let moment = quad::integrate(
            |h| h * hv_unchecked(h, profile.v, profile.a0),
            lo,
            hi,
            R0_QUAD_TOL * 1e-2,
        );
        let h_mean = (moment / weight).clamp(lo, hi);
        plan.positions.push(h_mean / cos_t);
        plan.segment_r0s.push(r0_from_integral(wavelength, zenith, weight));
        plan.segment_lengths.push(dh / cos_t);
    }
    Ok(plan)
}
