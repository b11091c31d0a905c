//! gratewave — semi-analytic electromagnetics for rectangular rooms with
//! engineered walls: field maps, water-filled MIMO capacity, envelope-fading
//! fits, and angular spectra, exported as deterministic CSV/JSON/PGM.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gratewave_core::error::{Error, Result};
use gratewave_core::par;

use crate::commands::{FitStatsArgs, SyntheticFamily};
use crate::run::RunContext;

#[derive(Parser)]
#[command(
    name = "gratewave",
    version,
    about = "Field maps, MIMO capacity, fading fits, and angular spectra \
             for rectangular rooms with engineered walls"
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (JSON); the bundled reference scenario when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for artifacts and manifest.json
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Scale the room and array centers by this factor (wavelength and
    /// element spacing stay fixed); 0.3333333333333333 turns the bundled
    /// 30-wavelength room into a 10-wavelength quick run
    #[arg(long, global = true)]
    scale: Option<f64>,

    /// Worker threads for grid sweeps (falls back to GRATEWAVE_WORKERS,
    /// then all cores); results never depend on the worker count
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Override the scenario RNG seed (synthetic-statistics commands)
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Total-field map over the room for the configured drive current
    FieldMap,

    /// Water-filled capacity over a receiver grid, plus improvement over
    /// free space for engineered walls
    CapacityMap,

    /// Capacity along a ray from the transmit center
    CapacityVsDistance {
        /// Ray direction, degrees from the +x axis
        #[arg(long, default_value_t = 0.0)]
        theta_deg: f64,
        /// Closest receiver distance, wavelengths
        #[arg(long, default_value_t = 1.0)]
        d_min_lambda: f64,
        /// Farthest receiver distance, wavelengths
        #[arg(long, default_value_t = 20.0)]
        d_max_lambda: f64,
        /// Number of distances (inclusive endpoints)
        #[arg(long, default_value_t = 77)]
        steps: usize,
    },

    /// Normalized singular values and power allocation versus distance
    /// along the transmit broadside
    Modes {
        /// Closest receiver distance, wavelengths
        #[arg(long, default_value_t = 1.0)]
        d_min_lambda: f64,
        /// Farthest receiver distance, wavelengths
        #[arg(long, default_value_t = 20.0)]
        d_max_lambda: f64,
        /// Number of distances (inclusive endpoints)
        #[arg(long, default_value_t = 39)]
        steps: usize,
    },

    /// Envelope statistics on a ring around a single source, with Rician
    /// and Hoyt maximum-likelihood fits
    FitStats {
        /// Draw from a known family instead of simulating rooms
        #[arg(long, value_enum)]
        synthetic: Option<SyntheticFamily>,
        /// Rician K-factor for --synthetic rician
        #[arg(long, default_value_t = 1.0)]
        k_factor: f64,
        /// Hoyt axial ratio q for --synthetic hoyt
        #[arg(long, default_value_t = 0.3)]
        hoyt_q: f64,
        /// Sample count for synthetic draws
        #[arg(long, default_value_t = 100_000)]
        n_samples: usize,
        /// Square-room side lengths (wavelengths) pooled when simulating
        #[arg(long, value_delimiter = ',', default_values_t = [20.0, 25.0, 30.0])]
        pool_lambda: Vec<f64>,
        /// Inner ring radius, wavelengths
        #[arg(long, default_value_t = 3.0)]
        ring_min_lambda: f64,
        /// Outer ring radius, wavelengths
        #[arg(long, default_value_t = 3.2)]
        ring_max_lambda: f64,
        /// Histogram bin count (0 = Freedman–Diaconis)
        #[arg(long, default_value_t = 0)]
        bins: usize,
    },

    /// Angular spectrum of the scattered field on a line aperture in front
    /// of the left wall
    AngularSpectrum {
        /// Taper applied before the transform: none or hann
        #[arg(long, default_value = "none")]
        window: String,
        /// Zero-padding multiple for the transform length
        #[arg(long, default_value_t = 4)]
        zero_pad: usize,
        /// Aperture sample count
        #[arg(long, default_value_t = 256)]
        samples: usize,
    },

    /// Mean capacity improvement over free space for drywall, grating,
    /// and PEC walls on the same grid
    CompareWalls,

    /// Mean capacity improvement of gratings over plain drywall across
    /// a list of periods
    PeriodSweep {
        /// Grating periods to sweep, wavelengths
        #[arg(long, value_delimiter = ',', default_values_t = [0.25, 2.0, 30.0])]
        periods_lambda: Vec<f64>,
    },

    /// Slab reflection coefficient versus incidence angle for the
    /// scenario's drywall material
    ReflectanceCurve {
        /// Number of incidence angles on [0°, 90°)
        #[arg(long, default_value_t = 181)]
        angles: usize,
    },
}

fn main() -> ExitCode {
    match run_cli(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run_cli(cli: Cli) -> Result<()> {
    if let Some(n) = worker_request(&cli.common)? {
        par::configure_workers(n)?;
    }
    let scenario =
        run::resolve_scenario(cli.common.config.as_deref(), cli.common.scale, cli.common.seed)?;
    let ctx = RunContext { scenario, out_dir: cli.common.out.clone() };
    match cli.command {
        Command::FieldMap => commands::field_map(&ctx),
        Command::CapacityMap => commands::capacity_map(&ctx),
        Command::CapacityVsDistance { theta_deg, d_min_lambda, d_max_lambda, steps } => {
            commands::capacity_vs_distance(&ctx, theta_deg, d_min_lambda, d_max_lambda, steps)
        }
        Command::Modes { d_min_lambda, d_max_lambda, steps } => {
            commands::modes(&ctx, d_min_lambda, d_max_lambda, steps)
        }
        Command::FitStats {
            synthetic,
            k_factor,
            hoyt_q,
            n_samples,
            pool_lambda,
            ring_min_lambda,
            ring_max_lambda,
            bins,
        } => {
            let args = FitStatsArgs {
                synthetic,
                k_factor,
                hoyt_q,
                n_samples,
                pool_lambda,
                ring_min_lambda,
                ring_max_lambda,
                bins,
            };
            commands::fit_stats(&ctx, &args)
        }
        Command::AngularSpectrum { window, zero_pad, samples } => {
            commands::angular_spectrum(&ctx, &window, zero_pad, samples)
        }
        Command::CompareWalls => commands::compare_walls(&ctx),
        Command::PeriodSweep { periods_lambda } => {
            commands::period_sweep(&ctx, &periods_lambda)
        }
        Command::ReflectanceCurve { angles } => commands::reflectance_curve(&ctx, angles),
    }
}

/// `--workers` wins; otherwise a set GRATEWAVE_WORKERS must parse.
fn worker_request(common: &CommonArgs) -> Result<Option<usize>> {
    if let Some(n) = common.workers {
        return Ok(Some(n));
    }
    match std::env::var("GRATEWAVE_WORKERS") {
        Ok(raw) => raw.trim().parse::<usize>().map(Some).map_err(|_| {
            Error::Parse(format!("GRATEWAVE_WORKERS must be a thread count, got {raw:?}"))
        }),
        Err(_) => Ok(None),
    }
}
