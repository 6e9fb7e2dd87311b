//! Binary matrix dumps for beam intensities and phase screens.
//!
//! A dump is two files: `<name>.bin` holds `n·n` little-endian `f64` values in
//! row-major order, and `<name>.hdr` is a `key = value` text sidecar:
//!
//! ```text
//! format = f64le-rowmajor
//! kind = intensity
//! n = 512
//! delta_m = 0.02
//! wavelength_m = 8.1e-7
//! z_m = 1000000
//! ```
//!
//! Row `i`, column `j` sits at `y = (i - n/2)·delta`, `x = (j - n/2)·delta`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::{ComplexField, Grid};
use crate::turbulence::PhaseScreen;

pub const FORMAT: &str = "f64le-rowmajor";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpKind {
    /// `|amplitude|²`
    Intensity,
    /// Phase in radians.
    Phase,
}

impl DumpKind {
    fn as_str(self) -> &'static str {
        match self {
            DumpKind::Intensity => "intensity",
            DumpKind::Phase => "phase",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DumpHeader {
    pub kind: DumpKind,
    pub n: usize,
    pub delta: f64,
    pub wavelength: f64,
    pub z: f64,
    /// Extra `key = value` pairs, written after the fixed keys.
    pub extra: BTreeMap<String, String>,
}

/// Sidecar path for a `.bin` dump path.
pub fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("hdr")
}

fn render_header(h: &DumpHeader) -> String {
    let mut s = format!(
        "format = {FORMAT}\nkind = {}\nn = {}\ndelta_m = {}\nwavelength_m = {}\nz_m = {}\n",
        h.kind.as_str(),
        h.n,
        h.delta,
        h.wavelength,
        h.z
    );
    for (k, v) in &h.extra {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s
}

fn parse_header(text: &str, path: &Path) -> Result<DumpHeader> {
    let bad = |line: usize, message: String| Error::Table {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(i + 1, format!("expected `key = value`, got `{line}`")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let mut take = |key: &str| {
        map.remove(key)
            .ok_or_else(|| bad(0, format!("missing key `{key}`")))
    };
    let format = take("format")?;
    if format != FORMAT {
        return Err(bad(0, format!("unsupported format `{format}`")));
    }
    let kind = match take("kind")?.as_str() {
        "intensity" => DumpKind::Intensity,
        "phase" => DumpKind::Phase,
        other => return Err(bad(0, format!("unknown kind `{other}`"))),
    };
    let num = |key: &str, v: String| {
        v.parse::<f64>()
            .map_err(|_| bad(0, format!("`{key}` is not a number: `{v}`")))
    };
    let n_text = take("n")?;
    let n = n_text
        .parse::<usize>()
        .map_err(|_| bad(0, format!("`n` is not an integer: `{n_text}`")))?;
    let delta = num("delta_m", take("delta_m")?)?;
    let wavelength = num("wavelength_m", take("wavelength_m")?)?;
    let z = num("z_m", take("z_m")?)?;
    Ok(DumpHeader {
        kind,
        n,
        delta,
        wavelength,
        z,
        extra: map,
    })
}

/// Writes `data` (length `n²`) and its sidecar.
pub fn write_matrix(path: &Path, header: &DumpHeader, data: &[f64]) -> Result<()> {
    if data.len() != header.n * header.n {
        return Err(Error::GridMismatch(format!(
            "matrix has {} values, header declares {}²",
            data.len(),
            header.n
        )));
    }
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    fs::write(sidecar_path(path), render_header(header))?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<(DumpHeader, Vec<f64>)> {
    let hdr_path = sidecar_path(path);
    let header = parse_header(&fs::read_to_string(&hdr_path)?, &hdr_path)?;
    let bytes = fs::read(path)?;
    if bytes.len() != header.n * header.n * 8 {
        return Err(Error::GridMismatch(format!(
            "{} holds {} bytes, sidecar declares n = {}",
            path.display(),
            bytes.len(),
            header.n
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, data))
}

pub fn dump_beam_profile(field: &ComplexField, path: &Path) -> Result<()> {
    let header = DumpHeader {
        kind: DumpKind::Intensity,
        n: field.grid.n,
        delta: field.grid.delta,
        wavelength: field.wavelength,
        z: field.z,
        extra: BTreeMap::new(),
    };
    write_matrix(path, &header, &field.intensity())
}

/// `z` is the screen's position along the path.
pub fn dump_phase_screen(screen: &PhaseScreen, wavelength: f64, z: f64, path: &Path) -> Result<()> {
    let mut extra = BTreeMap::new();
    extra.insert("r0_m".to_string(), screen.segment_r0.to_string());
    extra.insert("seed".to_string(), screen.seed.to_string());
    let header = DumpHeader {
        kind: DumpKind::Phase,
        n: screen.grid.n,
        delta: screen.grid.delta,
        wavelength,
        z,
        extra,
    };
    write_matrix(path, &header, &screen.phase)
}

/// Grid described by a dump header.
pub fn header_grid(header: &DumpHeader) -> Result<Grid> {
    Grid::new(header.n, header.delta)
}
