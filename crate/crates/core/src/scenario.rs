//! Scenario files: a TOML document with the sections below, all optional.
//!
//! ```toml
//! [sweep]
//! distances_km = [100, 300, 500, 1000, 2000]
//! qber_averaging = "average-then-compute"   # or "per-sample"
//! decoy_mode = "paper"                      # or "vacuum-weak"
//! output_dir = "out"
//!
//! [optics]
//! wavelength_nm = 810
//! w0 = 0.08                 # m, e^-2 intensity radius
//! tx_power = 1.0
//!
//! [grid]
//! n = 512
//! delta = 0.02              # m
//!
//! [turbulence]
//! enabled = true
//! wind_speed = 21           # m/s, HV pseudo-wind
//! ground_cn2 = 1.7e-14      # m^-2/3
//! outer_scale = 25          # m
//! inner_scale = 0.01        # m
//! ceiling = 20000           # m altitude
//! n_screens = 10
//! subharmonic_levels = 0
//! wander = true
//!
//! [static_loss]
//! eta_atm = 0.2196          # or eta_atm = { table = "modtran.csv" }
//! eta_t_optical = 0.9
//! eta_r_optical = 0.9
//!
//! [path]
//! zenith_deg = 0
//! dz = 25000                # m
//! rx_aperture_d = 0.1       # m
//! s_min = 1.0
//! absorber_margin = 0.1
//!
//! [monte_carlo]
//! realizations = 50
//! master_seed = 1
//!
//! [qkd]
//! mu_signal = 0.5
//! mu_decoy = 0.1
//! y0 = 1e-6
//! e_det = 0.015
//! e_pol = 0.01
//! eta_d = 1.0
//! rep_rate = 1e7
//! p_sift = 0.5
//! f_ec = 1.22
//! ```
//!
//! Unknown keys are errors. Relative table paths resolve against the file's directory.
//! The optical efficiencies η_t and η_r live in `[static_loss]` only; the QKD chain
//! reads them from there.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::atmosphere::{default_eta_atm, load_transmittance_table, AtmosphericTransmittance, StaticLossConfig};
use crate::error::{Error, Result};
use crate::field::{Grid, OpticalConfig};
use crate::linkbudget::{MonteCarloConfig, PathConfig, Scenario, TurbulenceModel};
use crate::qkd::{DecoyMode, QberAveraging, QkdParams};
use crate::turbulence::TurbulenceProfile;

pub const STANDARD_DISTANCES_KM: [f64; 5] = [100.0, 300.0, 500.0, 1000.0, 2000.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub distances_km: Vec<f64>,
    pub qber_averaging: QberAveraging,
    pub decoy_mode: DecoyMode,
    pub output_dir: PathBuf,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            distances_km: STANDARD_DISTANCES_KM.to_vec(),
            qber_averaging: QberAveraging::default(),
            decoy_mode: DecoyMode::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticsSection {
    pub wavelength_nm: f64,
    pub w0: f64,
    pub tx_power: f64,
}

impl Default for OpticsSection {
    fn default() -> Self {
        let o = OpticalConfig::default();
        Self {
            wavelength_nm: o.wavelength * 1e9,
            w0: o.w0,
            tx_power: o.tx_power,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n: usize,
    pub delta: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = Grid::default();
        Self { n: g.n, delta: g.delta }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TurbulenceSection {
    pub enabled: bool,
    pub wind_speed: f64,
    pub ground_cn2: f64,
    pub outer_scale: f64,
    pub inner_scale: f64,
    pub ceiling: f64,
    pub n_screens: usize,
    pub subharmonic_levels: u32,
    pub wander: bool,
}

impl Default for TurbulenceSection {
    fn default() -> Self {
        let p = TurbulenceProfile::default();
        let m = TurbulenceModel::default();
        Self {
            enabled: m.enabled,
            wind_speed: p.v,
            ground_cn2: p.a0,
            outer_scale: p.outer_scale,
            inner_scale: p.inner_scale,
            ceiling: m.ceiling,
            n_screens: m.n_screens,
            subharmonic_levels: m.subharmonic_levels,
            wander: m.wander,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StaticLossSection {
    pub eta_atm: AtmosphericTransmittance,
    pub eta_t_optical: f64,
    pub eta_r_optical: f64,
}

impl Default for StaticLossSection {
    fn default() -> Self {
        Self {
            eta_atm: AtmosphericTransmittance::Fixed(default_eta_atm()),
            eta_t_optical: 0.9,
            eta_r_optical: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathSection {
    pub zenith_deg: f64,
    pub dz: f64,
    pub rx_aperture_d: f64,
    pub s_min: f64,
    pub absorber_margin: f64,
}

impl Default for PathSection {
    fn default() -> Self {
        let p = PathConfig::default();
        Self {
            zenith_deg: p.zenith.to_degrees(),
            dz: p.dz,
            rx_aperture_d: p.rx_aperture_d,
            s_min: p.s_min,
            absorber_margin: p.absorber_margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSection {
    pub realizations: usize,
    pub master_seed: u64,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        let m = MonteCarloConfig::default();
        Self {
            realizations: m.realizations,
            master_seed: m.master_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QkdSection {
    pub mu_signal: f64,
    pub mu_decoy: f64,
    pub y0: f64,
    pub e_det: f64,
    pub e_pol: f64,
    pub eta_d: f64,
    pub rep_rate: f64,
    pub p_sift: f64,
    pub f_ec: f64,
}

impl Default for QkdSection {
    fn default() -> Self {
        let q = QkdParams::default();
        Self {
            mu_signal: q.mu_signal,
            mu_decoy: q.mu_decoy,
            y0: q.y0,
            e_det: q.e_det,
            e_pol: q.e_pol,
            eta_d: q.eta_d,
            rep_rate: q.rep_rate,
            p_sift: q.p_sift,
            f_ec: q.f_ec,
        }
    }
}

/// The file as written, with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioFile {
    pub sweep: SweepSection,
    pub optics: OpticsSection,
    pub grid: GridSection,
    pub turbulence: TurbulenceSection,
    pub static_loss: StaticLossSection,
    pub path: PathSection,
    pub monte_carlo: MonteCarloSection,
    pub qkd: QkdSection,
}

/// Where a resolved value came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProvenanceEntry {
    pub key: String,
    pub value: String,
    /// `file` when set in the scenario file, `default` otherwise.
    pub origin: &'static str,
    /// For defaults: `published` (stated in the reference work), `fitted` (solved from
    /// its published tables) or `chosen` (picked for this simulator).
    pub basis: &'static str,
    pub note: &'static str,
}

const DEFAULT_BASIS: &[(&str, &str, &str)] = &[
    ("sweep.distances_km", "published", "standard five-point sweep"),
    ("sweep.qber_averaging", "chosen", "reproduces the short-range QBER rows"),
    ("sweep.decoy_mode", "chosen", "reproduces the 100 km single-photon row"),
    ("sweep.output_dir", "chosen", ""),
    ("optics.wavelength_nm", "published", "810 nm uplink"),
    ("optics.w0", "chosen", "waist never stated; sized for the far-field regime"),
    ("optics.tx_power", "chosen", "losses are relative"),
    ("grid.n", "chosen", "grid size never stated"),
    ("grid.delta", "chosen", "keeps the 2000 km beam on the grid"),
    ("turbulence.enabled", "chosen", ""),
    ("turbulence.wind_speed", "published", "HV 21 m/s"),
    ("turbulence.ground_cn2", "published", "HV ground strength"),
    ("turbulence.outer_scale", "chosen", "outer scale never stated"),
    ("turbulence.inner_scale", "chosen", "inner scale never stated"),
    ("turbulence.ceiling", "chosen", "Cn2 negligible above 20 km"),
    ("turbulence.n_screens", "chosen", "screen count never stated"),
    ("turbulence.subharmonic_levels", "chosen", "plain FFT screens"),
    ("turbulence.wander", "published", "wander applied as a loss mechanism"),
    ("static_loss.eta_atm", "fitted", "static loss 7.498 dB with 0.9 optics"),
    ("static_loss.eta_t_optical", "chosen", "split of the static product is arbitrary"),
    ("static_loss.eta_r_optical", "chosen", "split of the static product is arbitrary"),
    ("path.zenith_deg", "chosen", "zenith pointing"),
    ("path.dz", "chosen", "step never stated"),
    ("path.rx_aperture_d", "chosen", "aperture never stated"),
    ("path.s_min", "chosen", ""),
    ("path.absorber_margin", "chosen", "boundary treatment never stated"),
    ("monte_carlo.realizations", "chosen", "runtime bound"),
    ("monte_carlo.master_seed", "chosen", ""),
    ("qkd.mu_signal", "published", "signal intensity 0.5"),
    ("qkd.mu_decoy", "published", "decoy intensity 0.1"),
    ("qkd.y0", "published", "dark counts 1e-6"),
    ("qkd.e_det", "published", "detector error 0.015"),
    ("qkd.e_pol", "fitted", "solved from the 100 km QBER"),
    ("qkd.eta_d", "fitted", "folded into the 100 km total loss"),
    ("qkd.rep_rate", "published", "10 MHz"),
    ("qkd.p_sift", "published", "BB84 basis sifting"),
    ("qkd.f_ec", "published", "error-correction inefficiency 1.22"),
];

/// A fully resolved, validated sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Distances in metres, strictly increasing.
    pub distances: Vec<f64>,
    pub scenario: Scenario,
    pub qkd: QkdParams,
    pub qber_averaging: QberAveraging,
    pub decoy_mode: DecoyMode,
    pub output_dir: PathBuf,
    /// The defaulted file model the spec was resolved from.
    pub file: ScenarioFile,
    pub provenance: Vec<ProvenanceEntry>,
}

fn config_error(e: impl std::fmt::Display) -> Error {
    Error::Scenario(e.to_string())
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<(String, String)>) {
    match value {
        toml::Value::Table(t) if prefix.is_empty() || !prefix.contains('.') => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

impl SweepSpec {
    /// Parses scenario text. `base_dir` anchors relative table paths.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(config_error)?;
        let raw: toml::Table = toml::from_str(text).map_err(config_error)?;
        let mut explicit = Vec::new();
        flatten("", &toml::Value::Table(raw), &mut explicit);
        Self::resolve(file, base_dir, &explicit)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Canonical TOML of the defaulted file model; parses back to an equal spec.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&self.file).map_err(config_error)
    }

    fn resolve(file: ScenarioFile, base_dir: &Path, explicit: &[(String, String)]) -> Result<Self> {
        let s = &file.sweep;
        if s.distances_km.is_empty() {
            return Err(Error::invalid("sweep.distances_km", "must not be empty"));
        }
        if s.distances_km.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::invalid("sweep.distances_km", "every distance must be positive"));
        }
        if !s.distances_km.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("sweep.distances_km", "must be strictly increasing"));
        }

        let zenith = file.path.zenith_deg.to_radians();
        let wavelength = file.optics.wavelength_nm * 1e-9;
        let eta_atm = match &file.static_loss.eta_atm {
            AtmosphericTransmittance::Fixed(v) => *v,
            AtmosphericTransmittance::Table { table } => {
                let path = if table.is_absolute() { table.clone() } else { base_dir.join(table) };
                load_transmittance_table(&path)?.transmittance_at(file.optics.wavelength_nm, zenith)?
            }
        };
        let static_loss = StaticLossConfig {
            eta_atm,
            eta_t_optical: file.static_loss.eta_t_optical,
            eta_r_optical: file.static_loss.eta_r_optical,
        };
        let t = &file.turbulence;
        let p = &file.path;
        let scenario = Scenario {
            optics: OpticalConfig {
                wavelength,
                w0: file.optics.w0,
                tx_power: file.optics.tx_power,
            },
            grid: Grid {
                n: file.grid.n,
                delta: file.grid.delta,
            },
            turbulence: TurbulenceProfile {
                v: t.wind_speed,
                a0: t.ground_cn2,
                outer_scale: t.outer_scale,
                inner_scale: t.inner_scale,
            },
            turbulence_model: TurbulenceModel {
                enabled: t.enabled,
                ceiling: t.ceiling,
                n_screens: t.n_screens,
                subharmonic_levels: t.subharmonic_levels,
                wander: t.wander,
            },
            static_loss: static_loss.clone(),
            path: PathConfig {
                distance: s.distances_km[s.distances_km.len() - 1] * 1e3,
                zenith,
                dz: p.dz,
                rx_aperture_d: p.rx_aperture_d,
                s_min: p.s_min,
                absorber_margin: p.absorber_margin,
            },
            mc: MonteCarloConfig {
                realizations: file.monte_carlo.realizations,
                master_seed: file.monte_carlo.master_seed,
            },
        };
        if !(wavelength > 0.0) {
            return Err(Error::invalid("optics.wavelength_nm", "must be positive"));
        }
        scenario.validate()?;
        let q = &file.qkd;
        let qkd = QkdParams {
            mu_signal: q.mu_signal,
            mu_decoy: q.mu_decoy,
            y0: q.y0,
            e_det: q.e_det,
            e_pol: q.e_pol,
            eta_d: q.eta_d,
            eta_t_optical: static_loss.eta_t_optical,
            eta_r_optical: static_loss.eta_r_optical,
            rep_rate: q.rep_rate,
            p_sift: q.p_sift,
            f_ec: q.f_ec,
        };
        qkd.validate()?;

        let provenance = provenance(&file, explicit)?;
        Ok(Self {
            distances: s.distances_km.iter().map(|d| d * 1e3).collect(),
            qber_averaging: s.qber_averaging,
            decoy_mode: s.decoy_mode,
            output_dir: s.output_dir.clone(),
            scenario,
            qkd,
            file,
            provenance,
        })
    }

    /// Replaces the master seed, keeping the file model in sync.
    pub fn set_master_seed(&mut self, seed: u64) {
        self.scenario.mc.master_seed = seed;
        self.file.monte_carlo.master_seed = seed;
        self.mark_explicit("monte_carlo.master_seed", seed.to_string());
    }

    pub fn set_realizations(&mut self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::invalid("monte_carlo.realizations", "must be at least 1"));
        }
        self.scenario.mc.realizations = n;
        self.file.monte_carlo.realizations = n;
        self.mark_explicit("monte_carlo.realizations", n.to_string());
        Ok(())
    }

    pub fn set_output_dir(&mut self, dir: PathBuf) {
        self.mark_explicit("sweep.output_dir", format!("{:?}", dir.display().to_string()));
        self.file.sweep.output_dir = dir.clone();
        self.output_dir = dir;
    }

    fn mark_explicit(&mut self, key: &str, value: String) {
        if let Some(e) = self.provenance.iter_mut().find(|e| e.key == key) {
            e.value = value;
            e.origin = "override";
        }
    }
}

fn provenance(file: &ScenarioFile, explicit: &[(String, String)]) -> Result<Vec<ProvenanceEntry>> {
    let resolved: toml::Table = toml::Table::try_from(file).map_err(config_error)?;
    let mut all = Vec::new();
    flatten("", &toml::Value::Table(resolved), &mut all);
    Ok(all
        .into_iter()
        .map(|(key, value)| {
            let from_file = explicit.iter().any(|(k, _)| *k == key);
            let (basis, note) = DEFAULT_BASIS
                .iter()
                .find(|(k, _, _)| *k == key)
                .map(|(_, b, n)| (*b, *n))
                .unwrap_or(("chosen", ""));
            ProvenanceEntry {
                key,
                value,
                origin: if from_file { "file" } else { "default" },
                basis: if from_file { "user" } else { basis },
                note: if from_file { "" } else { note },
            }
        })
        .collect())
}

pub fn parse_scenario(path: &Path) -> Result<SweepSpec> {
    SweepSpec::from_file(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SweepSpec> {
        SweepSpec::from_toml(text, Path::new("."))
    }

    #[test]
    fn empty_file_gives_defaults() {
        let spec = parse("").unwrap();
        assert_eq!(spec.distances, vec![1e5, 3e5, 5e5, 1e6, 2e6]);
        assert_eq!(spec.scenario.grid, Grid::default());
        assert_eq!(spec.qkd, QkdParams::default());
        assert!(spec.provenance.iter().all(|e| e.origin == "default"));
        assert_eq!(spec.provenance.len(), DEFAULT_BASIS.len());
        for (key, _, _) in DEFAULT_BASIS {
            assert!(spec.provenance.iter().any(|e| e.key == *key), "{key}");
        }
    }

    #[test]
    fn explicit_keys_are_marked() {
        let spec = parse("[sweep]\ndistances_km = [100, 200]\n[qkd]\ne_pol = 0.02\n").unwrap();
        assert_eq!(spec.distances, vec![1e5, 2e5]);
        assert_eq!(spec.qkd.e_pol, 0.02);
        let e = spec.provenance.iter().find(|e| e.key == "qkd.e_pol").unwrap();
        assert_eq!(e.origin, "file");
        let d = spec.provenance.iter().find(|e| e.key == "qkd.e_det").unwrap();
        assert_eq!((d.origin, d.basis), ("default", "published"));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse("[grid]\nn = 512\ndelt = 0.01\n").unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("delt"), "{err}");
        let err = parse("[gird]\nn = 512\n").unwrap_err();
        assert!(err.to_string().contains("gird"), "{err}");
    }

    #[test]
    fn decoy_ordering_is_enforced() {
        let err = parse("[qkd]\nmu_decoy = 0.6\n").unwrap_err();
        assert!(err.to_string().contains("mu_decoy"), "{err}");
        assert!(err.to_string().contains("decoy ordering"), "{err}");
    }

    #[test]
    fn distance_invariants() {
        for bad in ["[]", "[100, 100]", "[300, 100]", "[-1]"] {
            let err = parse(&format!("[sweep]\ndistances_km = {bad}\n")).unwrap_err();
            assert!(err.to_string().contains("sweep.distances_km"), "{bad}: {err}");
        }
    }

    #[test]
    fn round_trip() {
        let spec = parse(
            "[sweep]\ndistances_km = [100, 500]\ndecoy_mode = \"vacuum-weak\"\n\
             [turbulence]\nn_screens = 3\n[monte_carlo]\nmaster_seed = 99\n",
        )
        .unwrap();
        let text = spec.to_toml().unwrap();
        let again = parse(&text).unwrap();
        assert_eq!(spec.scenario, again.scenario);
        assert_eq!(spec.qkd, again.qkd);
        assert_eq!(spec.file, again.file);
        assert_eq!(spec.distances, again.distances);
        assert_eq!(spec.decoy_mode, DecoyMode::VacuumWeak);
    }

    #[test]
    fn table_source_resolves_relative_path() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("atm.csv"),
            "wavelength_nm,transmittance\n700,0.5\n900,0.7\n",
        )
        .unwrap();
        let cfg = dir.path().join("s.toml");
        fs::write(&cfg, "[static_loss]\neta_atm = { table = \"atm.csv\" }\n").unwrap();
        let spec = parse_scenario(&cfg).unwrap();
        assert!((spec.scenario.static_loss.eta_atm - 0.61).abs() < 1e-12);

        fs::write(&cfg, "[static_loss]\neta_atm = { table = \"missing.csv\" }\n").unwrap();
        assert!(parse_scenario(&cfg).is_err());
    }

    #[test]
    fn overrides_update_file_model() {
        let mut spec = parse("").unwrap();
        spec.set_master_seed(7);
        spec.set_realizations(3).unwrap();
        assert!(spec.set_realizations(0).is_err());
        let again = parse(&spec.to_toml().unwrap()).unwrap();
        assert_eq!(again.scenario.mc.master_seed, 7);
        assert_eq!(again.scenario.mc.realizations, 3);
        let e = spec.provenance.iter().find(|e| e.key == "monte_carlo.master_seed").unwrap();
        assert_eq!(e.origin, "override");
    }

    #[test]
    fn invalid_grid_names_field() {
        let err = parse("[grid]\nn = 100\n").unwrap_err();
        assert!(err.to_string().contains("n"), "{err}");
        assert!(err.is_config());
    }
}
