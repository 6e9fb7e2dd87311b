use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fsoqkd::dump::dump_phase_screen;
use fsoqkd::scenario::SweepSpec;
use fsoqkd::seed::SeedTree;
use fsoqkd::sweep::{run_sweep, SweepOptions};
use fsoqkd::turbulence::{make_phase_screen_with, ScreenOptions};
use fsoqkd::Error;

/// Ground-to-satellite optical uplink and decoy-state BB84 simulator.
#[derive(Parser)]
#[command(name = "fsoqkd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the distance sweep and write CSVs, manifest and optional beam dumps.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dump vacuum and turbulent beam intensities at every distance.
        #[arg(long)]
        dump_beams: bool,
    },
    /// Write phase-screen realizations for the planned screen positions.
    Screen {
        #[command(flatten)]
        common: Common,
    },
    /// Parse and validate a scenario file, then print the resolved configuration.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML). Defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Realization count override (screen sets for `screen`).
    #[arg(long, value_name = "N")]
    realizations: Option<usize>,
}

impl Common {
    fn load(&self) -> fsoqkd::Result<SweepSpec> {
        let mut spec = match &self.config {
            Some(path) => SweepSpec::from_file(path)?,
            None => SweepSpec::from_toml("", std::path::Path::new("."))?,
        };
        if let Some(seed) = self.seed {
            spec.set_master_seed(seed);
        }
        if let Some(n) = self.realizations {
            spec.set_realizations(n)?;
        }
        if let Some(out) = &self.out {
            spec.set_output_dir(out.clone());
        }
        Ok(spec)
    }
}

fn sweep(common: &Common, dump_beams: bool) -> fsoqkd::Result<()> {
    let spec = common.load()?;
    log::info!(
        "sweeping {} distances, {} realizations, seed {}",
        spec.distances.len(),
        spec.scenario.mc.realizations,
        spec.scenario.mc.master_seed
    );
    let report = run_sweep(&spec, SweepOptions { dump_beams })?;
    println!("distance_km  loss_total_db  qber_pct  secure_rate_bps");
    for row in &report.rows {
        println!(
            "{:>11.0}  {:>13.3}  {:>8.4}  {:>15.3}",
            row.budget.distance / 1e3,
            row.budget.loss_total_sig_db,
            row.qkd.e_mu * 100.0,
            row.qkd.skr
        );
    }
    println!(
        "wrote {} artifacts to {} in {:.1} s",
        report.artifacts.len(),
        spec.output_dir.display(),
        report.wall_seconds
    );
    Ok(())
}

fn screens(common: &Common) -> fsoqkd::Result<()> {
    let spec = common.load()?;
    let count = common.realizations.unwrap_or(1);
    let s = &spec.scenario;
    let plan = s.screen_plan()?;
    let seeds = SeedTree::new(s.mc.master_seed);
    let options = ScreenOptions {
        subharmonic_levels: s.turbulence_model.subharmonic_levels,
    };
    let dir = spec.output_dir.join("screens");
    fs::create_dir_all(&dir)?;
    for r in 0..count as u64 {
        for (i, (&z, &r0)) in plan.positions.iter().zip(&plan.segment_r0s).enumerate() {
            let screen = make_phase_screen_with(
                s.grid,
                r0,
                s.turbulence.outer_scale,
                s.turbulence.inner_scale,
                seeds.screen(r, i as u64),
                options,
            );
            let path = dir.join(format!("screen_r{r:03}_s{i:02}.bin"));
            dump_phase_screen(&screen, s.optics.wavelength, z, &path)?;
        }
    }
    println!(
        "wrote {} screens (path r0 {:.4} m) to {}",
        count * plan.positions.len(),
        plan.path_r0,
        dir.display()
    );
    Ok(())
}

fn validate(common: &Common) -> fsoqkd::Result<()> {
    let spec = common.load()?;
    let plan = spec.scenario.screen_plan()?;
    print!("{}", spec.to_toml()?);
    println!(
        "# ok: {} distances, {} screens, path r0 {:.4} m at {:.0} nm",
        spec.distances.len(),
        plan.positions.len(),
        plan.path_r0,
        spec.scenario.optics.wavelength * 1e9
    );
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        2
    } else if e.is_numerical_guard() {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sweep { common, dump_beams } => sweep(common, *dump_beams),
        Command::Screen { common } => screens(common),
        Command::Validate { common } => validate(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
