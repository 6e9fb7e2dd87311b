//! Channel realizations, Monte Carlo averaging and the dB loss decomposition.
//!
//! A realization launches the Gaussian beam, steps it with the angular spectrum method,
//! applies a phase screen plus a random tilt shift at each planned screen position, tapers
//! the edges after every step, and measures the power collected by a hard circular
//! aperture centered on the optical axis. The vacuum reference follows the identical
//! step schedule with the screens and tilts switched off.
//!
//! Screens are planned over the turbulent layer only (`[0, ceiling / cos θ]` along the
//! slant path), so every distance beyond the ceiling sees the same screens and the same r₀.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atmosphere::StaticLossConfig;
use crate::error::{Error, Result};
use crate::field::{beam_stats, gaussian_beam, ComplexField, Grid, OpticalConfig};
use crate::propagation::{apply_absorber, check_sampling, AbsorberProfile, PropagationStep};
use crate::seed::SeedTree;
use crate::turbulence::{
    apply_phase_screen, beam_wander_step, make_phase_screen_with, plan_screens, ScreenOptions,
    ScreenPlan, TurbulenceProfile,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbulenceModel {
    pub enabled: bool,
    /// Altitude (m) above which Cn² is treated as zero.
    pub ceiling: f64,
    pub n_screens: usize,
    pub subharmonic_levels: u32,
    pub wander: bool,
}

impl Default for TurbulenceModel {
    fn default() -> Self {
        Self {
            enabled: true,
            ceiling: 20_000.0,
            n_screens: 10,
            subharmonic_levels: 0,
            wander: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    /// Slant distance to the receiver (m).
    pub distance: f64,
    /// Zenith angle (rad).
    pub zenith: f64,
    /// Nominal step length (m).
    pub dz: f64,
    /// Receiver aperture diameter (m).
    pub rx_aperture_d: f64,
    pub s_min: f64,
    pub absorber_margin: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            distance: 100_000.0,
            zenith: 0.0,
            dz: 25_000.0,
            rx_aperture_d: 0.1,
            s_min: crate::propagation::DEFAULT_S_MIN,
            absorber_margin: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub realizations: usize,
    pub master_seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            realizations: 50,
            master_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub optics: OpticalConfig,
    pub grid: Grid,
    pub turbulence: TurbulenceProfile,
    pub turbulence_model: TurbulenceModel,
    pub static_loss: StaticLossConfig,
    pub path: PathConfig,
    pub mc: MonteCarloConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.optics.validate(&self.grid)?;
        self.turbulence.validate()?;
        self.static_loss.validate()?;
        let p = &self.path;
        if !(p.distance > 0.0 && p.distance.is_finite()) {
            return Err(Error::invalid("path.distance", "must be positive"));
        }
        if !(p.dz > 0.0) {
            return Err(Error::invalid("path.dz", "must be positive"));
        }
        if !(p.rx_aperture_d > 0.0) {
            return Err(Error::invalid("path.rx_aperture_d", "must be positive"));
        }
        if p.rx_aperture_d > self.grid.side() / 2.0 {
            return Err(Error::invalid(
                "path.rx_aperture_d",
                "aperture must not exceed half the grid side",
            ));
        }
        if !(p.s_min > 0.0) {
            return Err(Error::invalid("path.s_min", "must be positive"));
        }
        if !(0.0..0.5).contains(&p.absorber_margin) {
            return Err(Error::invalid("path.absorber_margin", "must lie in [0, 0.5)"));
        }
        if !(0.0..crate::turbulence::MAX_ZENITH_DEG).contains(&p.zenith.to_degrees()) {
            return Err(Error::AirmassInvalid {
                zenith_deg: p.zenith.to_degrees(),
            });
        }
        let t = &self.turbulence_model;
        if t.n_screens == 0 {
            return Err(Error::invalid("turbulence.n_screens", "must be at least 1"));
        }
        if !(t.ceiling > 0.0) {
            return Err(Error::invalid("turbulence.ceiling", "must be positive"));
        }
        if self.mc.realizations == 0 {
            return Err(Error::invalid("monte_carlo.realizations", "must be at least 1"));
        }
        Ok(())
    }

    /// Slant length of the turbulent layer.
    pub fn turbulent_path_length(&self) -> f64 {
        self.turbulence_model.ceiling / self.path.zenith.cos()
    }

    pub fn screen_plan(&self) -> Result<ScreenPlan> {
        plan_screens(
            &self.turbulence,
            self.optics.wavelength,
            self.path.zenith,
            self.turbulent_path_length(),
            self.turbulence_model.n_screens,
        )
    }
}

// ---------------------------------------------------------------------------
// Receiver
// ---------------------------------------------------------------------------

/// Area of `{0 <= u <= x, 0 <= v <= y, u² + v² <= r²}` for `x, y >= 0`.
fn quadrant_area(x: f64, y: f64, r: f64) -> f64 {
    let (x, y) = (x.min(r), y.min(r));
    if x * x + y * y <= r * r {
        return x * y;
    }
    let primitive = |u: f64| 0.5 * (u * (r * r - u * u).max(0.0).sqrt() + r * r * (u / r).clamp(-1.0, 1.0).asin());
    let xc = (r * r - y * y).max(0.0).sqrt();
    y * xc + primitive(x) - primitive(xc)
}

fn signed_quadrant_area(x: f64, y: f64, r: f64) -> f64 {
    x.signum() * y.signum() * quadrant_area(x.abs(), y.abs(), r)
}

/// Exact area of the intersection of the disc of radius `r` at the origin with a rectangle.
pub fn disc_rect_overlap(x0: f64, x1: f64, y0: f64, y1: f64, r: f64) -> f64 {
    signed_quadrant_area(x1, y1, r) - signed_quadrant_area(x0, y1, r) - signed_quadrant_area(x1, y0, r)
        + signed_quadrant_area(x0, y0, r)
}

/// Per-pixel weights (covered fraction of each pixel) of a centered circular aperture.
#[derive(Debug, Clone, PartialEq)]
pub struct ApertureMask {
    pub diameter: f64,
    weights: Vec<(usize, f64)>,
}

impl ApertureMask {
    pub fn new(grid: &Grid, diameter: f64) -> Result<Self> {
        if !(diameter >= 0.0) {
            return Err(Error::invalid("rx_aperture_d", "must be non-negative"));
        }
        if diameter > grid.side() / 2.0 {
            return Err(Error::invalid(
                "rx_aperture_d",
                format!("aperture {diameter} m larger than half the grid side {} m", grid.side() / 2.0),
            ));
        }
        let r = diameter / 2.0;
        let h = grid.delta / 2.0;
        let area = grid.delta * grid.delta;
        let mut weights = Vec::new();
        if r > 0.0 {
            let span = (r / grid.delta).ceil() as usize + 1;
            let c = grid.center();
            for row in c.saturating_sub(span)..(c + span + 1).min(grid.n) {
                let y = grid.coord(row);
                for col in c.saturating_sub(span)..(c + span + 1).min(grid.n) {
                    let x = grid.coord(col);
                    let w = disc_rect_overlap(x - h, x + h, y - h, y + h, r) / area;
                    if w > 0.0 {
                        weights.push((row * grid.n + col, w.min(1.0)));
                    }
                }
            }
        }
        Ok(Self { diameter, weights })
    }

    /// Power collected by the aperture: `Σ w·|a|²·delta²`.
    pub fn collected_power(&self, field: &ComplexField) -> f64 {
        let d2 = field.grid.delta * field.grid.delta;
        self.weights
            .iter()
            .map(|&(i, w)| w * field.amplitude[i].norm_sqr())
            .sum::<f64>()
            * d2
    }

    /// Covered area (m²); equals `π D²/4` exactly up to rounding.
    pub fn area(&self, grid: &Grid) -> f64 {
        self.weights.iter().map(|w| w.1).sum::<f64>() * grid.delta * grid.delta
    }
}

/// Fraction of the field's current total power inside the centered aperture.
pub fn receiver_coupled_fraction(field: &ComplexField, aperture_d: f64) -> Result<f64> {
    let mask = ApertureMask::new(&field.grid, aperture_d)?;
    let total = crate::field::total_power(field);
    if total <= 0.0 {
        return Err(Error::EmptyField);
    }
    Ok(mask.collected_power(field) / total)
}

// ---------------------------------------------------------------------------
// Realizations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RealizationResult {
    /// Receiver distance this result was recorded at (m).
    pub distance: f64,
    /// Collected power over launched power.
    pub t_path_instant: f64,
    pub centroid_x: f64,
    pub centroid_y: f64,
    /// e⁻² radius about the centroid (m).
    pub effective_radius: f64,
    /// Long-exposure contribution: `<r²>` about the optical axis (m²).
    pub mean_r2_about_axis: f64,
    pub on_axis_intensity: f64,
}

impl RealizationResult {
    pub fn centroid_offset(&self) -> f64 {
        self.centroid_x.hypot(self.centroid_y)
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    z: f64,
    step: usize,
    screen: Option<usize>,
    checkpoint: Option<usize>,
}

/// A scenario prepared for repeated realizations: step schedule, cached transfer
/// functions, absorber, aperture and screen plan. Shared read-only across workers.
#[derive(Debug)]
pub struct Channel {
    scenario: Scenario,
    plan: ScreenPlan,
    checkpoints: Vec<f64>,
    steps: Vec<PropagationStep>,
    events: Vec<Event>,
    absorber: AbsorberProfile,
    aperture: ApertureMask,
}

/// Positions closer than this are merged when building the step schedule.
const MERGE_TOL: f64 = 1e-6;

impl Channel {
    /// Prepares propagation to every distance in `checkpoints` (strictly increasing).
    pub fn new(scenario: &Scenario, checkpoints: &[f64]) -> Result<Self> {
        scenario.validate()?;
        if checkpoints.is_empty() || !checkpoints.windows(2).all(|w| w[0] < w[1]) || checkpoints[0] <= 0.0
        {
            return Err(Error::invalid(
                "distances",
                "must be non-empty, positive and strictly increasing",
            ));
        }
        let plan = scenario.screen_plan()?;
        let end = *checkpoints.last().expect("non-empty");
        let dz = scenario.path.dz;

        let mut marks: Vec<(f64, Option<usize>, Option<usize>)> = Vec::new();
        let mut k = 1u64;
        while (k as f64) * dz < end - MERGE_TOL {
            marks.push((k as f64 * dz, None, None));
            k += 1;
        }
        for (i, &z) in plan.positions.iter().enumerate() {
            if z < end - MERGE_TOL {
                marks.push((z, Some(i), None));
            }
        }
        for (i, &z) in checkpoints.iter().enumerate() {
            marks.push((z, None, Some(i)));
        }
        marks.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, Option<usize>, Option<usize>)> = Vec::new();
        for m in marks {
            match merged.last_mut() {
                Some(last) if (m.0 - last.0).abs() < MERGE_TOL => {
                    last.1 = last.1.or(m.1);
                    last.2 = last.2.or(m.2);
                    if m.2.is_some() {
                        last.0 = m.0;
                    }
                }
                _ => merged.push(m),
            }
        }

        let grid = scenario.grid;
        let wavelength = scenario.optics.wavelength;
        let mut steps: Vec<PropagationStep> = Vec::new();
        let mut keys: Vec<i64> = Vec::new();
        let mut events = Vec::with_capacity(merged.len());
        let mut z_prev = 0.0;
        for (z, screen, checkpoint) in merged {
            let len = z - z_prev;
            let key = (len * 1e6).round() as i64;
            let step = match keys.iter().position(|&k| k == key) {
                Some(i) => i,
                None => {
                    check_sampling(&grid, wavelength, len, scenario.path.s_min)?;
                    keys.push(key);
                    steps.push(PropagationStep::new(grid, wavelength, key as f64 * 1e-6));
                    steps.len() - 1
                }
            };
            events.push(Event {
                z,
                step,
                screen,
                checkpoint,
            });
            z_prev = z;
        }

        Ok(Self {
            scenario: scenario.clone(),
            plan,
            checkpoints: checkpoints.to_vec(),
            steps,
            events,
            absorber: AbsorberProfile::raised_cosine(&grid, scenario.path.absorber_margin)?,
            aperture: ApertureMask::new(&grid, scenario.path.rx_aperture_d)?,
        })
    }

    pub fn plan(&self) -> &ScreenPlan {
        &self.plan
    }

    pub fn checkpoints(&self) -> &[f64] {
        &self.checkpoints
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Number of propagation steps to the last checkpoint.
    pub fn step_count(&self) -> usize {
        self.events.len()
    }

    fn measure(&self, field: &ComplexField, distance: f64) -> Result<RealizationResult> {
        let stats = beam_stats(field)?;
        let grid = field.grid;
        let (mut sum, mut r2) = (0.0, 0.0);
        for row in 0..grid.n {
            let y = grid.coord(row);
            for col in 0..grid.n {
                let x = grid.coord(col);
                let i = field.at(row, col).norm_sqr();
                sum += i;
                r2 += i * (x * x + y * y);
            }
        }
        Ok(RealizationResult {
            distance,
            t_path_instant: (self.aperture.collected_power(field) / self.scenario.optics.tx_power)
                .clamp(0.0, 1.0),
            centroid_x: stats.centroid_x,
            centroid_y: stats.centroid_y,
            effective_radius: stats.radius,
            mean_r2_about_axis: r2 / sum,
            on_axis_intensity: field.on_axis_intensity(),
        })
    }

    /// Runs realization `index`; returns one result (and optionally the field) per checkpoint
    /// plus the compute time spent reaching each checkpoint from the previous one.
    pub fn run_detailed(
        &self,
        index: u64,
        turbulent: bool,
        keep_fields: bool,
    ) -> Result<Vec<(RealizationResult, Option<ComplexField>, f64)>> {
        let s = &self.scenario;
        let seeds = SeedTree::new(s.mc.master_seed);
        let options = ScreenOptions {
            subharmonic_levels: s.turbulence_model.subharmonic_levels,
        };
        let mut field = gaussian_beam(s.grid, &s.optics)?;
        let mut out = Vec::with_capacity(self.checkpoints.len());
        let mut clock = Instant::now();
        for ev in &self.events {
            field = self.steps[ev.step].apply(field)?;
            field.z = ev.z;
            if let (true, Some(i)) = (turbulent, ev.screen) {
                let r0 = self.plan.segment_r0s[i];
                let screen = make_phase_screen_with(
                    s.grid,
                    r0,
                    s.turbulence.outer_scale,
                    s.turbulence.inner_scale,
                    seeds.screen(index, i as u64),
                    options,
                );
                field = apply_phase_screen(field, &screen)?;
                if s.turbulence_model.wander {
                    let mut rng = ChaCha8Rng::seed_from_u64(seeds.wander(index, i as u64));
                    field = beam_wander_step(
                        field,
                        r0,
                        self.plan.segment_lengths[i],
                        s.path.rx_aperture_d,
                        &mut rng,
                    )?;
                }
            }
            field = apply_absorber(field, &self.absorber)?;
            if let Some(c) = ev.checkpoint {
                let result = self.measure(&field, self.checkpoints[c])?;
                let elapsed = clock.elapsed().as_secs_f64();
                clock = Instant::now();
                out.push((result, keep_fields.then(|| field.clone()), elapsed));
            }
        }
        Ok(out)
    }

    pub fn run(&self, index: u64, turbulent: bool) -> Result<Vec<RealizationResult>> {
        Ok(self
            .run_detailed(index, turbulent, false)?
            .into_iter()
            .map(|r| r.0)
            .collect())
    }

    /// Coupled transmittance at each checkpoint with turbulence switched off.
    pub fn vacuum(&self) -> Result<Vec<RealizationResult>> {
        self.run(0, false)
    }
}

/// One realization of `scenario` at `scenario.path.distance`.
pub fn run_realization(scenario: &Scenario, realization_index: u64) -> Result<RealizationResult> {
    let channel = Channel::new(scenario, &[scenario.path.distance])?;
    let turbulent = scenario.turbulence_model.enabled;
    Ok(channel.run(realization_index, turbulent)?[0])
}

// ---------------------------------------------------------------------------
// Monte Carlo and loss decomposition
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkBudget {
    pub distance: f64,
    pub loss_total_sig_db: f64,
    pub loss_path_sim_db: f64,
    pub loss_geom_ideal_db: f64,
    pub loss_non_geom_db: f64,
    pub loss_static_db: f64,
    pub t_path_avg: f64,
    pub scintillation_index: f64,
}

/// `-10·log10(x)`, +∞ for `x = 0`.
pub fn loss_db(x: f64) -> f64 {
    if x <= 0.0 {
        f64::INFINITY
    } else {
        -10.0 * x.log10()
    }
}

/// Aggregated Monte Carlo statistics at one distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub distance: f64,
    pub t_path_avg: f64,
    /// Vacuum-reference coupled transmittance.
    pub t_vacuum: f64,
    pub scintillation_index: f64,
    pub samples: Vec<f64>,
}

impl McSummary {
    pub fn from_results(distance: f64, t_vacuum: f64, results: &[RealizationResult]) -> Self {
        let count = results.len() as f64;
        let samples: Vec<f64> = results.iter().map(|r| r.t_path_instant).collect();
        let t_path_avg = samples.iter().sum::<f64>() / count;
        let mean_i = results.iter().map(|r| r.on_axis_intensity).sum::<f64>() / count;
        let var_i = results
            .iter()
            .map(|r| (r.on_axis_intensity - mean_i).powi(2))
            .sum::<f64>()
            / count;
        let scintillation_index = if mean_i > 0.0 { var_i / (mean_i * mean_i) } else { 0.0 };
        Self {
            distance,
            t_path_avg,
            t_vacuum,
            scintillation_index,
            samples,
        }
    }
}

pub fn decompose_losses(mc: &McSummary, static_loss: &StaticLossConfig) -> LinkBudget {
    let loss_path_sim_db = loss_db(mc.t_path_avg);
    let loss_geom_ideal_db = loss_db(mc.t_vacuum);
    let loss_static_db = static_loss.loss_db();
    let loss_non_geom_db = if loss_path_sim_db.is_infinite() {
        f64::INFINITY
    } else {
        loss_path_sim_db - loss_geom_ideal_db
    };
    LinkBudget {
        distance: mc.distance,
        loss_total_sig_db: loss_path_sim_db + loss_static_db,
        loss_path_sim_db,
        loss_geom_ideal_db,
        loss_non_geom_db,
        loss_static_db,
        t_path_avg: mc.t_path_avg,
        scintillation_index: mc.scintillation_index,
    }
}

/// Full Monte Carlo output at one distance.
#[derive(Debug, Clone)]
pub struct McRun {
    pub budget: LinkBudget,
    pub summary: McSummary,
    pub realizations: Vec<RealizationResult>,
    pub vacuum: RealizationResult,
    /// Compute seconds summed over realizations for the segment ending at this distance.
    pub compute_seconds: f64,
}

/// Monte Carlo at several distances sharing one propagation per realization.
///
/// Results at a distance that is a multiple of `dz` are bit-identical to a standalone
/// run at that distance.
pub fn run_monte_carlo_multi(scenario: &Scenario, distances: &[f64]) -> Result<Vec<McRun>> {
    let channel = Channel::new(scenario, distances)?;
    let vacuum = channel.vacuum()?;
    let turbulent = scenario.turbulence_model.enabled;
    let per_realization: Vec<Vec<(RealizationResult, Option<ComplexField>, f64)>> = (0
        ..scenario.mc.realizations as u64)
        .into_par_iter()
        .map(|j| channel.run_detailed(j, turbulent, false))
        .collect::<Result<_>>()?;

    let mut runs = Vec::with_capacity(distances.len());
    for (c, &distance) in distances.iter().enumerate() {
        let realizations: Vec<RealizationResult> =
            per_realization.iter().map(|r| r[c].0).collect();
        let compute_seconds = per_realization.iter().map(|r| r[c].2).sum();
        let summary = McSummary::from_results(distance, vacuum[c].t_path_instant, &realizations);
        runs.push(McRun {
            budget: decompose_losses(&summary, &scenario.static_loss),
            summary,
            realizations,
            vacuum: vacuum[c],
            compute_seconds,
        });
    }
    Ok(runs)
}

pub fn run_monte_carlo(scenario: &Scenario) -> Result<(LinkBudget, Vec<RealizationResult>)> {
    let run = run_monte_carlo_multi(scenario, &[scenario.path.distance])?
        .pop()
        .expect("one distance");
    Ok((run.budget, run.realizations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::total_power;

    fn small_scenario() -> Scenario {
        Scenario {
            grid: Grid::new(128, 0.01).unwrap(),
            optics: OpticalConfig {
                wavelength: 810e-9,
                w0: 0.05,
                tx_power: 1.0,
            },
            path: PathConfig {
                distance: 5_000.0,
                dz: 1_000.0,
                rx_aperture_d: 0.1,
                ..PathConfig::default()
            },
            turbulence_model: TurbulenceModel {
                ceiling: 2_000.0,
                n_screens: 4,
                ..TurbulenceModel::default()
            },
            mc: MonteCarloConfig {
                realizations: 4,
                master_seed: 11,
            },
            ..Scenario::default()
        }
    }

    fn brute_overlap(x0: f64, x1: f64, y0: f64, y1: f64, r: f64) -> f64 {
        let m = 2000;
        let (dx, dy) = ((x1 - x0) / m as f64, (y1 - y0) / m as f64);
        let mut hits = 0usize;
        for i in 0..m {
            let x = x0 + (i as f64 + 0.5) * dx;
            for j in 0..m {
                let y = y0 + (j as f64 + 0.5) * dy;
                if x * x + y * y <= r * r {
                    hits += 1;
                }
            }
        }
        hits as f64 * dx * dy
    }

    #[test]
    fn overlap_matches_brute_force() {
        for &(x0, x1, y0, y1, r) in &[
            (0.2, 0.6, -0.1, 0.3, 0.5),
            (-0.3, 0.3, -0.3, 0.3, 0.25),
            (0.4, 0.9, 0.4, 0.9, 1.0),
            (-1.0, -0.5, 0.1, 0.2, 0.7),
            (2.0, 3.0, 0.0, 1.0, 1.0),
        ] {
            let exact = disc_rect_overlap(x0, x1, y0, y1, r);
            let brute = brute_overlap(x0, x1, y0, y1, r);
            assert!((exact - brute).abs() < 2e-6, "{exact} vs {brute}");
        }
    }

    #[test]
    fn aperture_area_is_exact() {
        let grid = Grid::new(128, 0.01).unwrap();
        let mask = ApertureMask::new(&grid, 0.137).unwrap();
        let expected = std::f64::consts::PI * 0.137 * 0.137 / 4.0;
        assert!((mask.area(&grid) - expected).abs() < 1e-12);
        assert!(ApertureMask::new(&grid, 0.7).is_err());
    }

    #[test]
    fn coupled_fraction_cases() {
        let grid = Grid::new(256, 0.01).unwrap();
        let optics = OpticalConfig {
            wavelength: 810e-9,
            w0: 0.1,
            tx_power: 1.0,
        };
        let beam = gaussian_beam(grid, &optics).unwrap();
        let all = receiver_coupled_fraction(&beam, 1.2).unwrap();
        assert!((all - 1.0).abs() < 1e-4);
        let e2 = receiver_coupled_fraction(&beam, 0.2).unwrap();
        let expected = 1.0 - (-2.0f64).exp();
        assert!((e2 - expected).abs() / expected < 0.01, "{e2}");
        assert_eq!(receiver_coupled_fraction(&beam, 0.0).unwrap(), 0.0);
        assert!(receiver_coupled_fraction(&beam, 0.001).unwrap() < 1e-3);
        assert!(receiver_coupled_fraction(&beam, 2.0).is_err());
        assert!((total_power(&beam) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn loss_identities() {
        let mc = McSummary {
            distance: 1.0,
            t_path_avg: 0.1,
            t_vacuum: 0.2,
            scintillation_index: 0.0,
            samples: vec![0.1],
        };
        let unit = StaticLossConfig {
            eta_atm: 1.0,
            eta_t_optical: 1.0,
            eta_r_optical: 1.0,
        };
        let b = decompose_losses(&mc, &unit);
        assert!((b.loss_path_sim_db - 10.0).abs() < 1e-12);
        assert!((b.loss_total_sig_db - 10.0).abs() < 1e-12);
        assert!((b.loss_non_geom_db - 10.0 * 2f64.log10()).abs() < 1e-12);

        let d = decompose_losses(&mc, &StaticLossConfig::default());
        assert!((d.loss_static_db - 7.498).abs() < 1e-9);
        assert!((d.loss_total_sig_db - d.loss_path_sim_db - d.loss_static_db).abs() < 1e-9);

        let dead = McSummary {
            t_path_avg: 0.0,
            ..mc
        };
        let z = decompose_losses(&dead, &unit);
        assert!(z.loss_path_sim_db.is_infinite() && z.loss_total_sig_db.is_infinite());
    }

    #[test]
    fn schedule_hits_screens_and_checkpoints() {
        let s = small_scenario();
        let channel = Channel::new(&s, &[1_500.0, 5_000.0]).unwrap();
        let screens = channel.events.iter().filter(|e| e.screen.is_some()).count();
        assert_eq!(screens, 4);
        let cps: Vec<f64> = channel
            .events
            .iter()
            .filter(|e| e.checkpoint.is_some())
            .map(|e| e.z)
            .collect();
        assert_eq!(cps, vec![1_500.0, 5_000.0]);
        assert!(channel.events.windows(2).all(|w| w[0].z < w[1].z));
    }

    #[test]
    fn vacuum_equals_disabled_turbulence() {
        let mut s = small_scenario();
        s.turbulence_model.enabled = false;
        let r = run_realization(&s, 3).unwrap();
        let channel = Channel::new(&s, &[s.path.distance]).unwrap();
        assert_eq!(r, channel.vacuum().unwrap()[0]);

        s.mc.realizations = 1;
        let (budget, _) = run_monte_carlo(&s).unwrap();
        assert!(budget.loss_non_geom_db.abs() < 1e-9);
        assert_eq!(budget.t_path_avg, r.t_path_instant);
    }

    #[test]
    fn realizations_are_reproducible() {
        let s = small_scenario();
        let a = run_realization(&s, 2).unwrap();
        let b = run_realization(&s, 2).unwrap();
        assert_eq!(a, b);
        let c = run_realization(&s, 3).unwrap();
        assert_ne!(a, c);
        assert!((0.0..=1.0).contains(&a.t_path_instant));
    }

    #[test]
    fn multi_distance_matches_standalone_on_step_multiples() {
        let s = small_scenario();
        let multi = run_monte_carlo_multi(&s, &[3_000.0, 5_000.0]).unwrap();
        let mut at3 = s.clone();
        at3.path.distance = 3_000.0;
        let (single, _) = run_monte_carlo(&at3).unwrap();
        assert_eq!(multi[0].budget, single);
    }

    #[test]
    fn scenario_validation() {
        let mut s = small_scenario();
        s.mc.realizations = 0;
        assert!(s.validate().is_err());
        let mut s = small_scenario();
        s.path.rx_aperture_d = 1.0;
        assert!(s.validate().is_err());
        let mut s = small_scenario();
        s.path.dz = 1e6;
        assert!(matches!(
            Channel::new(&s, &[2e6]),
            Err(Error::Aliasing { .. })
        ));
    }
}
