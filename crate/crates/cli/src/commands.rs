//! The nine subcommands. Each computes through the core library and hands
//! its artifacts to the run plumbing, which owns naming, the manifest, and
//! cleanup on failure.

use std::fs::File;
use std::io::{BufWriter, Write as IoWrite};
use std::path::Path;

use clap::ValueEnum;

use gratewave_core::error::{Error, Result};
use gratewave_core::field::{self, GridSpec};
use gratewave_core::geom::{ArrayLayout, Point, RoomGeometry};
use gratewave_core::num_complex::Complex64;
use gratewave_core::scenario::Scenario;
use gratewave_core::spectrum::{self, Window};
use gratewave_core::stats::{self, EnvelopeEnsemble, RingMeta};
use gratewave_core::wall::{
    drywall_reflection_curve, CoeffSource, DrywallMaterial, GratingSpec, WallModel,
};
use gratewave_core::{io, mimo};

use crate::run::{self, RunContext};

/// Total-field map over the room for the configured drive current.
pub fn field_map(ctx: &RunContext) -> Result<()> {
    let scn = &ctx.scenario;
    let grid = GridSpec::room_grid(&scn.room, scn.grid_spacing)?;
    let excitation = vec![Complex64::new(scn.current, 0.0); scn.tx.element_count];
    run::warn_if_heavy(
        "field-map",
        grid.len() as f64
            * scn.tx.element_count as f64
            * run::paths_per_eval(&scn.wall, &scn.limits),
    );
    run::deliver(ctx, "field-map", scn.wall.tag(), &[], |art| {
        let total = field::field_map(scn, &excitation, &grid)?;
        art.produce(".csv", |p| io::write_field_csv(p, &total))?;
        let magnitude = total.magnitude();
        let sidecar = art.produce(".pgm", |p| io::write_scalar_pgm(p, &magnitude))?;
        art.produce("-render.json", |p| io::write_json(p, &sidecar))
    })
}

/// Water-filled capacity with the receive array centered on every grid
/// point; engineered walls also get the relative improvement over free
/// space on the same grid.
pub fn capacity_map(ctx: &RunContext) -> Result<()> {
    let scn = &ctx.scenario;
    let grid = GridSpec::room_grid(&scn.room, scn.grid_spacing)?;
    let pairs = (scn.tx.element_count * scn.rx.element_count) as f64;
    let engineered = !matches!(scn.wall, WallModel::FreeSpace);
    let mut estimate = grid.len() as f64 * pairs * run::paths_per_eval(&scn.wall, &scn.limits);
    if engineered {
        estimate += grid.len() as f64 * pairs;
    }
    run::warn_if_heavy("capacity-map", estimate);
    run::deliver(ctx, "capacity-map", scn.wall.tag(), &[], |art| {
        let walled = mimo::capacity_map(scn, &grid)?;
        art.produce(".csv", |p| io::write_scalar_csv(p, &walled, "capacity_bps_hz"))?;
        let sidecar = art.produce(".pgm", |p| io::write_scalar_pgm(p, &walled))?;
        art.produce("-render.json", |p| io::write_json(p, &sidecar))?;
        if engineered {
            let mut base_scn = scn.clone();
            base_scn.wall = WallModel::FreeSpace;
            let base = mimo::capacity_map(&base_scn, &grid)?;
            let (delta, mean) = mimo::capacity_improvement(&walled, &base)?;
            art.produce("-improvement.csv", |p| io::write_scalar_csv(p, &delta, "delta_c_rel"))?;
            let delta_sidecar =
                art.produce("-improvement.pgm", |p| io::write_scalar_pgm(p, &delta))?;
            art.produce("-improvement-render.json", |p| io::write_json(p, &delta_sidecar))?;
            let summary = serde_json::json!({
                "wall": scn.wall.tag(),
                "baseline": "free_space",
                "mean_delta_c_rel": mean,
            });
            art.produce("-improvement-summary.json", |p| io::write_json(p, &summary))?;
        }
        Ok(())
    })
}

/// Capacity along a ray leaving the transmit center at `theta_deg` from +x.
pub fn capacity_vs_distance(
    ctx: &RunContext,
    theta_deg: f64,
    d_min_lambda: f64,
    d_max_lambda: f64,
    steps: usize,
) -> Result<()> {
    let scn = &ctx.scenario;
    let lam = scn.room.wavelength();
    let distances = linspace(d_min_lambda * lam, d_max_lambda * lam, steps)?;
    let pairs = (scn.tx.element_count * scn.rx.element_count) as f64;
    run::warn_if_heavy(
        "capacity-vs-distance",
        steps as f64 * pairs * run::paths_per_eval(&scn.wall, &scn.limits),
    );
    let params = [
        ("theta_deg".to_string(), fmt(theta_deg)),
        ("d_min_lambda".to_string(), fmt(d_min_lambda)),
        ("d_max_lambda".to_string(), fmt(d_max_lambda)),
        ("steps".to_string(), steps.to_string()),
    ];
    run::deliver(ctx, "capacity-vs-distance", scn.wall.tag(), &params, |art| {
        let points = mimo::capacity_vs_distance(scn, theta_deg.to_radians(), &distances)?;
        let doc = serde_json::json!({
            "wall": scn.wall.tag(),
            "theta_deg": theta_deg,
            "points": points,
        });
        art.produce(".json", |p| io::write_json(p, &doc))
    })
}

/// Normalized singular values, water-filling coefficients, and useful-mode
/// counts with the receiver swept along the transmit broadside.
pub fn modes(ctx: &RunContext, d_min_lambda: f64, d_max_lambda: f64, steps: usize) -> Result<()> {
    let scn = &ctx.scenario;
    let lam = scn.room.wavelength();
    let distances = linspace(d_min_lambda * lam, d_max_lambda * lam, steps)?;
    let pairs = (scn.tx.element_count * scn.rx.element_count) as f64;
    run::warn_if_heavy(
        "modes",
        steps as f64 * pairs * run::paths_per_eval(&scn.wall, &scn.limits),
    );
    let params = [
        ("d_min_lambda".to_string(), fmt(d_min_lambda)),
        ("d_max_lambda".to_string(), fmt(d_max_lambda)),
        ("steps".to_string(), steps.to_string()),
    ];
    run::deliver(ctx, "modes", scn.wall.tag(), &params, |art| {
        let points = mimo::mode_analysis(scn, &distances)?;
        let doc = serde_json::json!({
            "wall": scn.wall.tag(),
            "points": points,
        });
        art.produce(".json", |p| io::write_json(p, &doc))
    })
}

/// Source of the envelope ensemble for `fit-stats --synthetic`.
#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
pub enum SyntheticFamily {
    Rician,
    Hoyt,
}

/// An ensemble plus its report label and the parameters that identify it in
/// the artifact hash.
type LabeledEnsemble = (EnvelopeEnsemble, String, Vec<(String, String)>);

pub struct FitStatsArgs {
    pub synthetic: Option<SyntheticFamily>,
    pub k_factor: f64,
    pub hoyt_q: f64,
    pub n_samples: usize,
    pub pool_lambda: Vec<f64>,
    pub ring_min_lambda: f64,
    pub ring_max_lambda: f64,
    pub bins: usize,
}

/// Envelope statistics on a thin ring around a single-element source, pooled
/// over square rooms (or drawn synthetically), with Rician and Hoyt maximum-
/// likelihood fits and the log-likelihood winner.
pub fn fit_stats(ctx: &RunContext, args: &FitStatsArgs) -> Result<()> {
    let scn = &ctx.scenario;
    let (ensemble, label, params) = match args.synthetic {
        Some(family) => synthetic_ensemble(scn, args, family)?,
        None => simulated_ensemble(scn, args)?,
    };
    run::deliver(ctx, "fit-stats", scn.wall.tag(), &params, |art| {
        let selection = stats::select_model(&ensemble)?;
        let best = selection.best();
        let bins = if args.bins == 0 {
            stats::freedman_diaconis_bins(&ensemble)
        } else {
            args.bins
        };
        let pdf = stats::empirical_pdf(&ensemble, bins)?;
        art.produce(".csv", |p| io::write_histogram_csv(p, &pdf))?;
        let report = serde_json::json!({
            "wall": label,
            "model": best.model_name(),
            "params": best.model,
            "k_or_q": best.k_factor().or(best.q()),
            "loglik_rician": selection.rician.log_likelihood,
            "loglik_hoyt": selection.hoyt.log_likelihood,
            "n_samples": ensemble.samples.len(),
            "bins": bins,
            "rician": selection.rician,
            "hoyt": selection.hoyt,
            "rings": ensemble.rings,
        });
        art.produce(".json", |p| io::write_json(p, &report))
    })
}

/// Draw a synthetic Rician or Hoyt ensemble (Ω = 1) from the scenario seed.
fn synthetic_ensemble(
    scn: &Scenario,
    args: &FitStatsArgs,
    family: SyntheticFamily,
) -> Result<LabeledEnsemble> {
    if args.n_samples < 100 {
        return Err(Error::Validation(format!(
            "--n-samples: fits need at least 100 samples, got {}",
            args.n_samples
        )));
    }
    let (samples, label, knob) = match family {
        SyntheticFamily::Rician => {
            if !(args.k_factor > 0.0 && args.k_factor.is_finite()) {
                return Err(Error::Validation(format!(
                    "--k-factor must be positive, got {}",
                    args.k_factor
                )));
            }
            // Unit total power: s² + 2σ² = 1 with K = s²/(2σ²).
            let s = (args.k_factor / (1.0 + args.k_factor)).sqrt();
            let sigma = (0.5 / (1.0 + args.k_factor)).sqrt();
            (
                stats::sample_rician(args.n_samples, s, sigma, scn.seed),
                "synthetic-rician",
                ("k_factor".to_string(), fmt(args.k_factor)),
            )
        }
        SyntheticFamily::Hoyt => {
            if !(args.hoyt_q > 0.0 && args.hoyt_q <= 1.0) {
                return Err(Error::Validation(format!(
                    "--hoyt-q must lie in (0, 1], got {}",
                    args.hoyt_q
                )));
            }
            (
                stats::sample_hoyt(args.n_samples, args.hoyt_q, 1.0, scn.seed),
                "synthetic-hoyt",
                ("hoyt_q".to_string(), fmt(args.hoyt_q)),
            )
        }
    };
    let meta = RingMeta {
        r_min: 0.0,
        r_max: 0.0,
        center: Point::new(0.0, 0.0),
        wall: label.to_string(),
    };
    let ensemble = stats::rms_normalize(&samples, meta)?;
    let params = vec![
        ("synthetic".to_string(), label.to_string()),
        knob,
        ("n_samples".to_string(), args.n_samples.to_string()),
        ("bins".to_string(), args.bins.to_string()),
    ];
    Ok((ensemble, label.to_string(), params))
}

/// Simulate the configured wall in each pooled square room with one source
/// element at the room center, collect the envelope on a thin ring, RMS-
/// normalize per room, and pool.
fn simulated_ensemble(
    scn: &Scenario,
    args: &FitStatsArgs,
) -> Result<LabeledEnsemble> {
    if args.pool_lambda.is_empty() {
        return Err(Error::Validation("--pool-lambda: need at least one room size".into()));
    }
    if !(args.ring_min_lambda > 0.0 && args.ring_max_lambda > args.ring_min_lambda) {
        return Err(Error::Validation(format!(
            "ring radii must satisfy 0 < min < max, got [{}, {}]",
            args.ring_min_lambda, args.ring_max_lambda
        )));
    }
    let mut ensembles = Vec::with_capacity(args.pool_lambda.len());
    for &side_lambda in &args.pool_lambda {
        ensembles.push(ring_ensemble_for_room(scn, side_lambda, args)?);
    }
    let pooled = stats::pool(&ensembles)?;
    let params = vec![
        ("pool_lambda".to_string(), fmt_list(&args.pool_lambda)),
        ("ring_min_lambda".to_string(), fmt(args.ring_min_lambda)),
        ("ring_max_lambda".to_string(), fmt(args.ring_max_lambda)),
        ("bins".to_string(), args.bins.to_string()),
    ];
    Ok((pooled, scn.wall.tag().to_string(), params))
}

/// One pooled-room ensemble: λ/8 sampling over the ring's bounding box.
fn ring_ensemble_for_room(
    scn: &Scenario,
    side_lambda: f64,
    args: &FitStatsArgs,
) -> Result<EnvelopeEnsemble> {
    let lam = scn.room.wavelength();
    let dx = lam / 8.0;
    let r_min = args.ring_min_lambda * lam;
    let r_max = args.ring_max_lambda * lam;
    if side_lambda / 2.0 <= args.ring_max_lambda + 0.25 {
        return Err(Error::Validation(format!(
            "--pool-lambda: a {side_lambda}λ room cannot hold the ring out to \
             {}λ around its center",
            args.ring_max_lambda
        )));
    }
    let side = side_lambda * lam;
    let room = RoomGeometry::new(side, side, scn.room.frequency)?;
    let center = Point::new(0.5 * side, 0.5 * side);
    let probe_array = ArrayLayout::new(center, 1, scn.tx.spacing, scn.tx.orientation)?;
    let probe = Scenario {
        room,
        wall: scn.wall.clone(),
        tx: probe_array,
        rx: probe_array,
        budget: scn.budget,
        limits: scn.limits,
        grid_spacing: scn.grid_spacing,
        current: scn.current,
        seed: scn.seed,
    };
    // Cell-centered odd-count grid covering the annulus, with the source on
    // the middle sample (the guard disc masks it out of the ring anyway).
    let half = r_max + dx;
    let n_side = 2 * (half / dx).ceil() as usize + 1;
    let grid = GridSpec {
        nx: n_side,
        ny: n_side,
        x0: center.x - 0.5 * (n_side - 1) as f64 * dx,
        y0: center.y - 0.5 * (n_side - 1) as f64 * dx,
        dx,
        dy: dx,
    };
    run::warn_if_heavy(
        "fit-stats",
        grid.len() as f64 * run::paths_per_eval(&scn.wall, &scn.limits),
    );
    let excitation = [Complex64::new(scn.current, 0.0)];
    let total = field::field_map(&probe, &excitation, &grid)?;
    let samples = stats::ring_ensemble(&total, center, r_min, r_max)?;
    let meta = RingMeta { r_min, r_max, center, wall: scn.wall.tag().to_string() };
    stats::rms_normalize(&samples, meta)
}

/// Angular spectrum of the scattered field on a vertical aperture λ/2 in
/// front of the left wall, inset λ/2 from floor and ceiling.
pub fn angular_spectrum(
    ctx: &RunContext,
    window_name: &str,
    zero_pad: usize,
    samples: usize,
) -> Result<()> {
    let scn = &ctx.scenario;
    let lam = scn.room.wavelength();
    let window = Window::from_name(window_name)?;
    let start = Point::new(0.5 * lam, 0.5 * lam);
    let end = Point::new(0.5 * lam, scn.room.length_y - 0.5 * lam);
    let excitation = vec![Complex64::new(scn.current, 0.0); scn.tx.element_count];
    run::warn_if_heavy(
        "angular-spectrum",
        samples as f64
            * scn.tx.element_count as f64
            * (run::paths_per_eval(&scn.wall, &scn.limits) + 1.0),
    );
    let params = [
        ("window".to_string(), window.name().to_string()),
        ("zero_pad".to_string(), zero_pad.to_string()),
        ("samples".to_string(), samples.to_string()),
    ];
    run::deliver(ctx, "angular-spectrum", scn.wall.tag(), &params, |art| {
        let aperture = spectrum::sample_aperture(scn, &excitation, start, end, samples)?;
        let spec = spectrum::angular_spectrum(&aperture, window, zero_pad)?;
        art.produce(".csv", |p| io::write_spectrum_csv(p, &spec))?;
        let meta = serde_json::json!({
            "wall": scn.wall.tag(),
            "aperture": {
                "start": aperture.start,
                "end": aperture.end,
                "n_samples": aperture.n_samples,
                "spacing_m": aperture.spacing(),
            },
            "window": window.name(),
            "zero_pad": zero_pad,
            "wavelength_m": lam,
        });
        art.produce("-meta.json", |p| io::write_json(p, &meta))
    })
}

/// Mean relative capacity improvement over free space for drywall, the
/// grating, and PEC on the same receiver grid.
pub fn compare_walls(ctx: &RunContext) -> Result<()> {
    let scn = &ctx.scenario;
    let grid = GridSpec::room_grid(&scn.room, scn.grid_spacing)?;
    let lam = scn.room.wavelength();
    let drywall = scenario_drywall(scn);
    let grating = match &scn.wall {
        WallModel::Grating(g) => g.clone(),
        _ => GratingSpec::new(2.0 * lam, 0.5, drywall, CoeffSource::Kirchhoff, 3)?,
    };
    let walls = [
        WallModel::Drywall(drywall),
        WallModel::Grating(grating),
        WallModel::Pec,
    ];
    let pairs = (scn.tx.element_count * scn.rx.element_count) as f64;
    let estimate: f64 = walls
        .iter()
        .map(|w| grid.len() as f64 * pairs * run::paths_per_eval(w, &scn.limits))
        .sum::<f64>()
        + grid.len() as f64 * pairs;
    run::warn_if_heavy("compare-walls", estimate);
    run::deliver(ctx, "compare-walls", "all", &[], |art| {
        let mut base_scn = scn.clone();
        base_scn.wall = WallModel::FreeSpace;
        let base = mimo::capacity_map(&base_scn, &grid)?;
        let mut entries = Vec::with_capacity(walls.len());
        for wall in &walls {
            let mut walled_scn = scn.clone();
            walled_scn.wall = wall.clone();
            let walled = mimo::capacity_map(&walled_scn, &grid)?;
            let (_, mean) = mimo::capacity_improvement(&walled, &base)?;
            entries.push((wall.tag(), mean));
        }
        art.produce(".csv", |p| {
            write_csv(
                p,
                "wall,mean_delta_c_rel",
                entries.iter().map(|(tag, mean)| format!("{tag},{mean}")),
            )
        })?;
        let doc = serde_json::json!({
            "baseline": "free_space",
            "entries": entries
                .iter()
                .map(|(tag, mean)| serde_json::json!({ "wall": tag, "mean_delta_c_rel": mean }))
                .collect::<Vec<_>>(),
        });
        art.produce(".json", |p| io::write_json(p, &doc))
    })
}

/// Mean relative capacity improvement of gratings over plain drywall as the
/// period sweeps; duty, order, and dielectric come from the scenario's
/// grating when it has one.
pub fn period_sweep(ctx: &RunContext, periods_lambda: &[f64]) -> Result<()> {
    let scn = &ctx.scenario;
    if periods_lambda.is_empty() {
        return Err(Error::Validation("--periods-lambda: need at least one period".into()));
    }
    let grid = GridSpec::room_grid(&scn.room, scn.grid_spacing)?;
    let lam = scn.room.wavelength();
    let drywall = scenario_drywall(scn);
    let (duty, max_order, coeffs) = match &scn.wall {
        WallModel::Grating(g) => (g.pec_duty, g.max_order, g.coeff_source.clone()),
        _ => (0.5, 3, CoeffSource::Kirchhoff),
    };
    let gratings = periods_lambda
        .iter()
        .map(|&pl| GratingSpec::new(pl * lam, duty, drywall, coeffs.clone(), max_order))
        .collect::<Result<Vec<_>>>()?;
    let pairs = (scn.tx.element_count * scn.rx.element_count) as f64;
    let estimate: f64 = gratings
        .iter()
        .map(|g| {
            grid.len() as f64
                * pairs
                * run::paths_per_eval(&WallModel::Grating(g.clone()), &scn.limits)
        })
        .sum::<f64>()
        + grid.len() as f64
            * pairs
            * run::paths_per_eval(&WallModel::Drywall(drywall), &scn.limits);
    run::warn_if_heavy("period-sweep", estimate);
    let params = [("periods_lambda".to_string(), fmt_list(periods_lambda))];
    run::deliver(ctx, "period-sweep", "grating", &params, |art| {
        let mut base_scn = scn.clone();
        base_scn.wall = WallModel::Drywall(drywall);
        let base = mimo::capacity_map(&base_scn, &grid)?;
        let mut entries = Vec::with_capacity(gratings.len());
        for (pl, g) in periods_lambda.iter().zip(&gratings) {
            let mut walled_scn = scn.clone();
            walled_scn.wall = WallModel::Grating(g.clone());
            let walled = mimo::capacity_map(&walled_scn, &grid)?;
            let (_, mean) = mimo::capacity_improvement(&walled, &base)?;
            entries.push((*pl, g.period, mean));
        }
        art.produce(".csv", |p| {
            write_csv(
                p,
                "period_lambda,mean_delta_c_rel",
                entries.iter().map(|(pl, _, mean)| format!("{pl},{mean}")),
            )
        })?;
        let doc = serde_json::json!({
            "baseline": "drywall",
            "entries": entries
                .iter()
                .map(|(pl, pm, mean)| serde_json::json!({
                    "period_lambda": pl,
                    "period_m": pm,
                    "mean_delta_c_rel": mean,
                }))
                .collect::<Vec<_>>(),
        });
        art.produce(".json", |p| io::write_json(p, &doc))
    })
}

/// Slab reflection magnitude and phase versus incidence angle for the
/// scenario's drywall material.
pub fn reflectance_curve(ctx: &RunContext, angles: usize) -> Result<()> {
    let scn = &ctx.scenario;
    let material = scenario_drywall(scn);
    let params = [("angles".to_string(), angles.to_string())];
    run::deliver(ctx, "reflectance-curve", "drywall", &params, |art| {
        let curve = drywall_reflection_curve(&material, &scn.room, angles)?;
        art.produce(".csv", |p| {
            write_csv(
                p,
                "theta_deg,abs_gamma,arg_gamma_rad",
                curve
                    .iter()
                    .map(|(theta, mag, arg)| format!("{},{mag},{arg}", theta.to_degrees())),
            )
        })
    })
}

/// The drywall material the scenario implies: its own slab, the grating's
/// filling, or standard gypsum board.
fn scenario_drywall(scn: &Scenario) -> DrywallMaterial {
    match &scn.wall {
        WallModel::Drywall(m) => *m,
        WallModel::Grating(g) => g.dielectric,
        _ => DrywallMaterial::default_gypsum(),
    }
}

/// `n` uniformly spaced values covering [a, b] inclusive.
fn linspace(a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Validation(format!("--steps: need at least 2, got {n}")));
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

/// Shortest round-trip decimal for hash/param strings.
fn fmt(x: f64) -> String {
    format!("{x}")
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt(*x)).collect::<Vec<_>>().join(",")
}

/// Small CSV writer for the CLI's own tables (walls, periods, reflectance).
fn write_csv(
    path: &Path,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}
