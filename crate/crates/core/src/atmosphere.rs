//! Static (non-turbulent) transmittance.
//!
//! Transmittance tables are plain text:
//!
//! ```text
//! # zenith_deg=0
//! wavelength_nm,transmittance
//! 400,0.6
//! 1600,0.9
//! ```
//!
//! `#` lines are comments; `# zenith_deg=<deg>` sets the geometry the table was computed
//! for (default 0). Off-reference zenith angles scale the optical depth with sec θ.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::turbulence::MAX_ZENITH_DEG;

pub const TABLE_HEADER: &str = "wavelength_nm,transmittance";

/// `exp(-β·L)`.
pub fn beer_lambert(beta_ext: f64, length: f64) -> f64 {
    (-beta_ext * length).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmittanceSpectrum {
    /// Strictly increasing (nm).
    pub wavelengths: Vec<f64>,
    /// Values in [0, 1].
    pub transmittance: Vec<f64>,
    /// Zenith angle (rad) the values were computed for.
    pub reference_zenith: f64,
}

impl TransmittanceSpectrum {
    pub fn new(wavelengths: Vec<f64>, transmittance: Vec<f64>, reference_zenith: f64) -> Result<Self> {
        if wavelengths.len() != transmittance.len() {
            return Err(Error::invalid(
                "transmittance table",
                "wavelength and transmittance columns differ in length",
            ));
        }
        if wavelengths.len() < 2 {
            return Err(Error::invalid("transmittance table", "needs at least two rows"));
        }
        if !wavelengths.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid(
                "transmittance table",
                "wavelengths must be strictly increasing",
            ));
        }
        if !transmittance.iter().all(|t| (0.0..=1.0).contains(t)) {
            return Err(Error::invalid("transmittance table", "values must lie in [0, 1]"));
        }
        Ok(Self {
            wavelengths,
            transmittance,
            reference_zenith,
        })
    }

    /// Parses the text table format described in the module docs.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let table_err = |line: usize, message: String| Error::Table {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut zenith_deg = 0.0_f64;
        let mut seen_header = false;
        let mut wavelengths: Vec<f64> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("zenith_deg=") {
                    zenith_deg = v
                        .trim()
                        .parse()
                        .map_err(|_| table_err(lineno, format!("bad zenith_deg `{}`", v.trim())))?;
                }
                continue;
            }
            if !seen_header {
                if line.replace(' ', "") != TABLE_HEADER {
                    return Err(table_err(lineno, format!("expected header `{TABLE_HEADER}`")));
                }
                seen_header = true;
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(w), Some(t), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(table_err(lineno, "expected two comma-separated columns".into()));
            };
            let w: f64 = w
                .parse()
                .map_err(|_| table_err(lineno, format!("bad wavelength `{w}`")))?;
            let t: f64 = t
                .parse()
                .map_err(|_| table_err(lineno, format!("bad transmittance `{t}`")))?;
            if !(0.0..=1.0).contains(&t) {
                return Err(table_err(lineno, format!("transmittance {t} outside [0, 1]")));
            }
            if let Some(&prev) = wavelengths.last() {
                if !(w > prev) {
                    return Err(table_err(lineno, format!("wavelength {w} nm not above {prev} nm")));
                }
            }
            wavelengths.push(w);
            values.push(t);
        }
        if wavelengths.is_empty() {
            return Err(table_err(text.lines().count().max(1), "table has no data rows".into()));
        }
        if wavelengths.len() < 2 {
            return Err(table_err(text.lines().count(), "table needs at least two rows".into()));
        }
        Self::new(wavelengths, values, zenith_deg.to_radians())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# zenith_deg={}\n{TABLE_HEADER}\n", self.reference_zenith.to_degrees());
        for (w, t) in self.wavelengths.iter().zip(&self.transmittance) {
            let _ = writeln!(out, "{w},{t}");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Linear interpolation at `wavelength_nm`, then `T^(sec θ / sec θ_ref)`.
    pub fn transmittance_at(&self, wavelength_nm: f64, zenith: f64) -> Result<f64> {
        let deg = zenith.to_degrees();
        if !(0.0..MAX_ZENITH_DEG).contains(&deg) {
            return Err(Error::AirmassInvalid { zenith_deg: deg });
        }
        let (lo, hi) = (self.wavelengths[0], *self.wavelengths.last().expect("two rows"));
        if !(lo..=hi).contains(&wavelength_nm) {
            return Err(Error::Domain(format!(
                "wavelength {wavelength_nm} nm outside table span [{lo}, {hi}] nm"
            )));
        }
        let i = self
            .wavelengths
            .partition_point(|&w| w <= wavelength_nm)
            .clamp(1, self.wavelengths.len() - 1);
        let (w0, w1) = (self.wavelengths[i - 1], self.wavelengths[i]);
        let (t0, t1) = (self.transmittance[i - 1], self.transmittance[i]);
        let t_ref = t0 + (t1 - t0) * (wavelength_nm - w0) / (w1 - w0);
        let airmass = self.reference_zenith.cos() / zenith.cos();
        Ok(t_ref.powf(airmass).clamp(0.0, 1.0))
    }
}

pub fn load_transmittance_table(path: &Path) -> Result<TransmittanceSpectrum> {
    let text = fs::read_to_string(path)?;
    TransmittanceSpectrum::parse(&text, path)
}

/// Where the static atmospheric transmittance comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AtmosphericTransmittance {
    Fixed(f64),
    Table { table: PathBuf },
}

/// Path-shape-independent losses applied as one scalar on the channel.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticLossConfig {
    pub eta_atm: f64,
    pub eta_t_optical: f64,
    pub eta_r_optical: f64,
}

impl Default for StaticLossConfig {
    /// Product 10^(-7.498/10) ≈ 0.1779 with η_t = η_r = 0.9; the split is arbitrary.
    fn default() -> Self {
        Self {
            eta_atm: default_eta_atm(),
            eta_t_optical: 0.9,
            eta_r_optical: 0.9,
        }
    }
}

/// Atmospheric share of the default static product once η_t = η_r = 0.9 are removed.
pub fn default_eta_atm() -> f64 {
    10f64.powf(-0.7498) / 0.81
}

impl StaticLossConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("static_loss.eta_atm", self.eta_atm),
            ("static_loss.eta_t_optical", self.eta_t_optical),
            ("static_loss.eta_r_optical", self.eta_r_optical),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(name, "must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    pub fn product(&self) -> f64 {
        self.eta_atm * self.eta_t_optical * self.eta_r_optical
    }

    pub fn loss_db(&self) -> f64 {
        -10.0 * self.product().log10()
    }
}
