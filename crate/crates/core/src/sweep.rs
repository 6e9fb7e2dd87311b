//! Distance sweeps: Monte Carlo channel, loss decomposition, QKD chain, artifacts.
//!
//! Output directory layout:
//!
//! * `link_budget.csv`: one row per distance (losses in dB).
//! * `qkd_metrics.csv`: one row per distance (gain, QBER, key rates).
//! * `manifest.json`: resolved config, provenance, seed, timing.
//! * `beams/`: optional intensity dumps (vacuum and realization 0) per distance.
//! * `PARTIAL`: present only when the sweep aborted; holds the error.
//!
//! CSV numbers use Rust's shortest round-trip formatting, so identical inputs give
//! byte-identical files; infinite losses are written as `inf`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::dump::dump_beam_profile;
use crate::error::{Error, Result};
use crate::linkbudget::{decompose_losses, Channel, LinkBudget, McSummary, RealizationResult};
use crate::qkd::{evaluate, evaluate_per_sample, QberAveraging, QkdMetrics};
use crate::scenario::{ProvenanceEntry, SweepSpec};

pub const LINK_BUDGET_HEADER: &str = "distance_km,loss_total_db,loss_path_db,loss_geom_ideal_db,loss_non_geom_db,loss_static_db,t_path_avg,scintillation_index";
pub const QKD_HEADER: &str =
    "distance_km,mu_det,q_mu,qber_mu_pct,q1,e1_pct,sift_rate_kbps,secure_rate_bps";

pub const LINK_BUDGET_FILE: &str = "link_budget.csv";
pub const QKD_FILE: &str = "qkd_metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARTIAL_FILE: &str = "PARTIAL";

/// Additive dB identities are checked to this tolerance.
const IDENTITY_TOL_DB: f64 = 1e-9;
/// Turbulence should never add gain; small negative excess is Monte Carlo noise.
const NON_GEOM_FLOOR_DB: f64 = -0.1;

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    pub dump_beams: bool,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub budget: LinkBudget,
    pub qkd: QkdMetrics,
    pub vacuum: RealizationResult,
    pub compute_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub artifacts: Vec<PathBuf>,
    pub wall_seconds: f64,
}

fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

pub fn link_budget_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(LINK_BUDGET_HEADER);
    s.push('\n');
    for r in rows {
        let b = &r.budget;
        let fields = [
            b.distance / 1e3,
            b.loss_total_sig_db,
            b.loss_path_sim_db,
            b.loss_geom_ideal_db,
            b.loss_non_geom_db,
            b.loss_static_db,
            b.t_path_avg,
            b.scintillation_index,
        ];
        s.push_str(&fields.map(num).join(","));
        s.push('\n');
    }
    s
}

pub fn qkd_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(QKD_HEADER);
    s.push('\n');
    for r in rows {
        let q = &r.qkd;
        let fields = [
            r.budget.distance / 1e3,
            q.mu_det,
            q.q_mu,
            q.e_mu * 100.0,
            q.q1,
            q.e1 * 100.0,
            q.sift_rate / 1e3,
            q.skr,
        ];
        s.push_str(&fields.map(num).join(","));
        s.push('\n');
    }
    s
}

fn parse_csv(text: &str, header: &str, path: &Path) -> Result<Vec<Vec<f64>>> {
    let fail = |line: usize, message: String| Error::Table {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(fail(1, "unexpected header".into()));
    }
    let width = header.split(',').count();
    lines
        .enumerate()
        .map(|(i, line)| {
            let row: Vec<f64> = line
                .split(',')
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| fail(i + 2, e.to_string()))?;
            if row.len() != width {
                return Err(fail(i + 2, format!("expected {width} columns, got {}", row.len())));
            }
            Ok(row)
        })
        .collect()
}

/// Re-reads both CSVs and checks the loss identities and QKD invariants on every row.
pub fn validate_outputs(dir: &Path, y0: f64) -> Result<()> {
    let lb_path = dir.join(LINK_BUDGET_FILE);
    let lb = parse_csv(&fs::read_to_string(&lb_path)?, LINK_BUDGET_HEADER, &lb_path)?;
    for row in &lb {
        let [d, total, path, geom, non_geom, stat, t, si] = row[..] else {
            unreachable!("width checked")
        };
        let bad = |what: &str| Error::Validation(format!("{LINK_BUDGET_FILE} at {d} km: {what}"));
        if path.is_finite() && (total - path - stat).abs() > IDENTITY_TOL_DB {
            return Err(bad("total != path + static"));
        }
        if path.is_finite() && geom.is_finite() && (non_geom - (path - geom)).abs() > IDENTITY_TOL_DB {
            return Err(bad("non_geom != path - geom"));
        }
        if non_geom < NON_GEOM_FLOOR_DB {
            log::warn!("{d} km: turbulence excess loss {non_geom:.3} dB is below {NON_GEOM_FLOOR_DB} dB");
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(bad("t_path_avg outside [0, 1]"));
        }
        if !(si >= 0.0) {
            return Err(bad("negative scintillation index"));
        }
    }
    let q_path = dir.join(QKD_FILE);
    let q = parse_csv(&fs::read_to_string(&q_path)?, QKD_HEADER, &q_path)?;
    if q.len() != lb.len() {
        return Err(Error::Validation("CSV row counts differ".into()));
    }
    for row in &q {
        let [d, _, q_mu, qber_pct, _, _, _, skr] = row[..] else {
            unreachable!("width checked")
        };
        let bad = |what: &str| Error::Validation(format!("{QKD_FILE} at {d} km: {what}"));
        if q_mu < y0 * (1.0 - 1e-12) {
            return Err(bad("gain below dark-count floor"));
        }
        if !(0.0..=50.0).contains(&qber_pct) {
            return Err(bad("QBER outside [0, 50] %"));
        }
        if !(skr >= 0.0) {
            return Err(bad("negative secure key rate"));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct DistanceTiming {
    distance_km: f64,
    compute_seconds: f64,
}

#[derive(Serialize)]
struct ScreenPlanRecord {
    positions_m: Vec<f64>,
    segment_r0_m: Vec<f64>,
    segment_lengths_m: Vec<f64>,
    path_r0_m: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    master_seed: u64,
    realizations: usize,
    distances_km: Vec<f64>,
    config_toml: String,
    provenance: &'a [ProvenanceEntry],
    screen_plan: ScreenPlanRecord,
    wall_seconds: f64,
    timing: Vec<DistanceTiming>,
    artifacts: Vec<String>,
}

fn beam_name(distance: f64, tag: &str) -> String {
    format!("beam_{:05}km_{tag}.bin", (distance / 1e3).round() as u64)
}

fn compute(spec: &SweepSpec, options: SweepOptions, artifacts: &mut Vec<PathBuf>) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;

    let scenario = &spec.scenario;
    let channel = Channel::new(scenario, &spec.distances)?;
    let keep = options.dump_beams;
    let vacuum = channel.run_detailed(0, false, keep)?;
    let turbulent = scenario.turbulence_model.enabled;
    let runs: Vec<_> = (0..scenario.mc.realizations as u64)
        .into_par_iter()
        .map(|j| channel.run_detailed(j, turbulent, keep && j == 0))
        .collect::<Result<_>>()?;

    if keep {
        let dir = spec.output_dir.join("beams");
        fs::create_dir_all(&dir)?;
        for (c, &d) in spec.distances.iter().enumerate() {
            for (tag, field) in [("vacuum", &vacuum[c].1), ("turbulent", &runs[0][c].1)] {
                let path = dir.join(beam_name(d, tag));
                dump_beam_profile(field.as_ref().expect("fields kept"), &path)?;
                artifacts.push(path);
            }
        }
    }

    let eta_atm = scenario.static_loss.eta_atm;
    let mut rows = Vec::with_capacity(spec.distances.len());
    for (c, &distance) in spec.distances.iter().enumerate() {
        let results: Vec<RealizationResult> = runs.iter().map(|r| r[c].0).collect();
        let summary = McSummary::from_results(distance, vacuum[c].0.t_path_instant, &results);
        let budget = decompose_losses(&summary, &scenario.static_loss);
        let qkd = match spec.qber_averaging {
            QberAveraging::AverageThenCompute => {
                evaluate(&spec.qkd, summary.t_path_avg * eta_atm, spec.decoy_mode)?
            }
            QberAveraging::PerSample => {
                let samples: Vec<f64> = summary.samples.iter().map(|t| t * eta_atm).collect();
                evaluate_per_sample(&spec.qkd, &samples, spec.decoy_mode)?
            }
        };
        rows.push(SweepRow {
            budget,
            qkd,
            vacuum: vacuum[c].0,
            compute_seconds: runs.iter().map(|r| r[c].2).sum(),
        });
    }
    Ok(rows)
}

/// Runs the sweep and writes every artifact into `spec.output_dir`.
///
/// On failure a `PARTIAL` marker holding the error is written next to whatever
/// artifacts were produced, and the error is returned.
pub fn run_sweep(spec: &SweepSpec, options: SweepOptions) -> Result<SweepReport> {
    let dir = &spec.output_dir;
    fs::create_dir_all(dir)?;
    let marker = dir.join(PARTIAL_FILE);
    if marker.exists() {
        fs::remove_file(&marker)?;
    }
    let started = Instant::now();
    let mut artifacts = Vec::new();
    match sweep_inner(spec, options, started, &mut artifacts) {
        Ok(rows) => Ok(SweepReport {
            rows,
            artifacts,
            wall_seconds: started.elapsed().as_secs_f64(),
        }),
        Err(e) => {
            let listed: Vec<String> = artifacts.iter().map(|p| p.display().to_string()).collect();
            let _ = fs::write(&marker, format!("sweep aborted: {e}\nwritten:\n{}\n", listed.join("\n")));
            Err(e)
        }
    }
}

fn sweep_inner(
    spec: &SweepSpec,
    options: SweepOptions,
    started: Instant,
    artifacts: &mut Vec<PathBuf>,
) -> Result<Vec<SweepRow>> {
    let dir = &spec.output_dir;
    let rows = compute(spec, options, artifacts)?;

    let lb = dir.join(LINK_BUDGET_FILE);
    fs::write(&lb, link_budget_csv(&rows))?;
    artifacts.push(lb);
    let q = dir.join(QKD_FILE);
    fs::write(&q, qkd_csv(&rows))?;
    artifacts.push(q);
    validate_outputs(dir, spec.qkd.y0)?;

    let plan = spec.scenario.screen_plan()?;
    let manifest = Manifest {
        tool: "fsoqkd",
        version: env!("CARGO_PKG_VERSION"),
        master_seed: spec.scenario.mc.master_seed,
        realizations: spec.scenario.mc.realizations,
        distances_km: spec.distances.iter().map(|d| d / 1e3).collect(),
        config_toml: spec.to_toml()?,
        provenance: &spec.provenance,
        screen_plan: ScreenPlanRecord {
            positions_m: plan.positions.clone(),
            segment_r0_m: plan.segment_r0s.clone(),
            segment_lengths_m: plan.segment_lengths.clone(),
            path_r0_m: plan.path_r0,
        },
        wall_seconds: started.elapsed().as_secs_f64(),
        timing: rows
            .iter()
            .map(|r| DistanceTiming {
                distance_km: r.budget.distance / 1e3,
                compute_seconds: r.compute_seconds,
            })
            .collect(),
        artifacts: artifacts.iter().map(|p| p.display().to_string()).collect(),
    };
    let m = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Validation(e.to_string()))?;
    fs::write(&m, json)?;
    artifacts.push(m);
    Ok(rows)
}
