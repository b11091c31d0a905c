//! Scenario configuration: the full description of one simulated room link.
//!
//! A scenario couples the room, wall model, transmit/receive arrays, power
//! budget, and tracing limits. Scenarios load from JSON where any length may
//! be given either in meters (a number) or as a wavelength multiple (a string
//! like `"5lambda"`, resolved against the configured frequency). Validation
//! failures name the offending field (`rx.center`, `budget.p_tx_w`, ...).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{ArrayLayout, Point, RoomGeometry};
use crate::mimo::PowerBudget;
use crate::wall::{CoeffSource, CoeffTable, DrywallMaterial, GratingSpec, WallModel};
use crate::geom::PathTraceLimits;

/// One fully resolved experiment configuration. All lengths are meters and
/// all angles radians by the time a `Scenario` exists.
#[derive(Clone, Debug, Serialize)]
pub struct Scenario {
    pub room: RoomGeometry,
    pub wall: WallModel,
    pub tx: ArrayLayout,
    pub rx: ArrayLayout,
    pub budget: PowerBudget,
    pub limits: PathTraceLimits,
    /// Sampling step for field and capacity maps, meters.
    pub grid_spacing: f64,
    /// Line-current drive I0 for field maps, amperes.
    pub current: f64,
    /// Seed for the synthetic-statistics commands.
    pub seed: u64,
}

impl Scenario {
    /// The reference configuration: 2.4 GHz, 30λ × 30λ room, transmitter 5λ
    /// from the left wall at mid-height, receiver 15λ broadside, λ/2 element
    /// spacing, grating wall with p = 2λ, P_T = 1 W, P_N = 1e4 W, I0 = 1 A.
    pub fn reference(elements: usize) -> Scenario {
        let lam = crate::geom::C0 / 2.4e9;
        let room = RoomGeometry::new(30.0 * lam, 30.0 * lam, 2.4e9)
            .expect("reference room parameters are valid");
        let tx_center = Point::new(5.0 * lam, 15.0 * lam);
        let rx_center = Point::new(20.0 * lam, 15.0 * lam);
        Scenario {
            room,
            wall: WallModel::Grating(
                GratingSpec::new(2.0 * lam, 0.5, DrywallMaterial::default_gypsum(), CoeffSource::Kirchhoff, 3)
                    .expect("reference grating parameters are valid"),
            ),
            tx: ArrayLayout::new(tx_center, elements, 0.5 * lam, 0.0)
                .expect("reference transmit array parameters are valid"),
            rx: ArrayLayout::new(rx_center, elements, 0.5 * lam, 0.0)
                .expect("reference receive array parameters are valid"),
            budget: PowerBudget::new(1.0, 1e4).expect("reference powers are valid"),
            limits: PathTraceLimits::default(),
            grid_spacing: 0.5 * lam,
            current: 1.0,
            seed: 1,
        }
    }

    /// Parse and validate a scenario from JSON text. `base_dir` anchors any
    /// relative coefficient-table path (usually the config file's directory).
    pub fn from_json(text: &str, base_dir: Option<&Path>) -> Result<Scenario> {
        let raw: RawScenario =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("scenario config: {e}")))?;
        raw.resolve(base_dir)
    }

    /// Load a scenario from a JSON file.
    pub fn load(path: &Path) -> Result<Scenario> {
        let text = fs::read_to_string(path)?;
        Scenario::from_json(&text, path.parent())
    }

    /// Geometrically shrink or grow the room: room dimensions and array
    /// centers scale by `factor`; element spacings, wavelength, wall
    /// microstructure and powers stay fixed. Used by the CLI `--scale` flag.
    pub fn scaled(&self, factor: f64) -> Result<Scenario> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Validation(format!("scale factor must be positive, got {factor}")));
        }
        let mut out = self.clone();
        out.room = RoomGeometry::new(
            self.room.length_x * factor,
            self.room.length_y * factor,
            self.room.frequency,
        )?;
        out.tx = self.tx.at_center(self.tx.center * factor);
        out.rx = self.rx.at_center(self.rx.center * factor);
        out.validate()?;
        Ok(out)
    }

    /// Cross-field validation with spec'd field naming.
    pub fn validate(&self) -> Result<()> {
        check_array_inside("tx", &self.tx, &self.room)?;
        check_array_inside("rx", &self.rx, &self.room)?;
        let nyquist = 0.5 * self.room.wavelength();
        if self.grid_spacing > nyquist * (1.0 + 1e-9) {
            return Err(Error::Validation(format!(
                "grid_spacing: {} m exceeds the λ/2 sampling limit of {} m",
                self.grid_spacing, nyquist
            )));
        }
        if !(self.grid_spacing > 0.0) {
            return Err(Error::Validation(format!(
                "grid_spacing: must be positive, got {}",
                self.grid_spacing
            )));
        }
        if !self.current.is_finite() {
            return Err(Error::Validation(format!("current_a: must be finite, got {}", self.current)));
        }
        Ok(())
    }

    /// Compact canonical JSON of the resolved scenario; the CLI hashes this
    /// (plus command and run options) into artifact names.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serialization cannot fail")
    }
}

fn check_array_inside(name: &str, array: &ArrayLayout, room: &RoomGeometry) -> Result<()> {
    for p in array.element_positions() {
        if !room.contains(p) {
            return Err(Error::Validation(format!(
                "{name}.center: element at ({}, {}) m falls outside the {} x {} m room",
                p.x, p.y, room.length_x, room.length_y
            )));
        }
    }
    Ok(())
}

/// A length that is either meters or a `"<x>lambda"` multiple.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum RawLength {
    Meters(f64),
    Text(String),
}

impl RawLength {
    fn resolve(&self, lam: f64, field: &str) -> Result<f64> {
        match self {
            RawLength::Meters(v) => {
                if v.is_finite() {
                    Ok(*v)
                } else {
                    Err(Error::Parse(format!("{field}: non-finite length")))
                }
            }
            RawLength::Text(s) => {
                let t = s.trim();
                let Some(prefix) = t.strip_suffix("lambda") else {
                    return Err(Error::Parse(format!(
                        "{field}: expected meters or \"<x>lambda\", got {t:?}"
                    )));
                };
                let mult = if prefix.is_empty() {
                    1.0
                } else {
                    prefix.trim().parse::<f64>().map_err(|_| {
                        Error::Parse(format!("{field}: bad wavelength multiple in {t:?}"))
                    })?
                };
                if !mult.is_finite() {
                    return Err(Error::Parse(format!("{field}: non-finite wavelength multiple")));
                }
                Ok(mult * lam)
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    frequency_hz: f64,
    room: RawRoom,
    wall: RawWall,
    tx: RawArray,
    rx: RawArray,
    budget: Option<RawBudget>,
    limits: Option<RawLimits>,
    grid_spacing: Option<RawLength>,
    current_a: Option<f64>,
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRoom {
    length_x: RawLength,
    length_y: RawLength,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum RawWall {
    FreeSpace,
    Pec,
    Drywall {
        dielectric: Option<RawDielectric>,
    },
    Grating {
        period: RawLength,
        pec_duty: Option<f64>,
        max_order: Option<usize>,
        dielectric: Option<RawDielectric>,
        coefficients: Option<RawCoeffs>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDielectric {
    eps_real: Option<f64>,
    loss_tangent: Option<f64>,
    thickness_m: Option<f64>,
    mu_rel: Option<f64>,
}

impl RawDielectric {
    fn resolve(opt: Option<&RawDielectric>, field: &str) -> Result<DrywallMaterial> {
        let gypsum = DrywallMaterial::default_gypsum();
        let Some(raw) = opt else { return Ok(gypsum) };
        DrywallMaterial::new(
            raw.eps_real.unwrap_or(gypsum.eps_real),
            raw.loss_tangent.unwrap_or(gypsum.loss_tangent),
            raw.thickness_m.unwrap_or(gypsum.thickness),
            raw.mu_rel.unwrap_or(gypsum.mu_rel),
        )
        .map_err(|e| Error::Validation(format!("{field}: {e}")))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawCoeffs {
    Named(String),
    Table { table_path: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArray {
    center: [RawLength; 2],
    elements: usize,
    spacing: Option<RawLength>,
    orientation_deg: Option<f64>,
}

impl RawArray {
    fn resolve(&self, lam: f64, name: &str) -> Result<ArrayLayout> {
        let cx = self.center[0].resolve(lam, &format!("{name}.center"))?;
        let cy = self.center[1].resolve(lam, &format!("{name}.center"))?;
        let spacing = match &self.spacing {
            Some(s) => s.resolve(lam, &format!("{name}.spacing"))?,
            None => 0.5 * lam,
        };
        let orientation = self.orientation_deg.unwrap_or(0.0).to_radians();
        ArrayLayout::new(Point::new(cx, cy), self.elements, spacing, orientation)
            .map_err(|e| Error::Validation(format!("{name}: {e}")))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBudget {
    p_tx_w: f64,
    p_noise_w: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLimits {
    max_bounces: Option<usize>,
    max_image_order: Option<usize>,
    artificial_loss: Option<f64>,
}

impl RawScenario {
    fn resolve(self, base_dir: Option<&Path>) -> Result<Scenario> {
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return Err(Error::Validation(format!(
                "frequency_hz: must be positive, got {}",
                self.frequency_hz
            )));
        }
        // λ must exist before any "…lambda" length can resolve.
        let lam = crate::geom::C0 / self.frequency_hz;
        let lx = self.room.length_x.resolve(lam, "room.length_x")?;
        let ly = self.room.length_y.resolve(lam, "room.length_y")?;
        let room = RoomGeometry::new(lx, ly, self.frequency_hz)
            .map_err(|e| Error::Validation(format!("room: {e}")))?;

        let wall = match &self.wall {
            RawWall::FreeSpace => WallModel::FreeSpace,
            RawWall::Pec => WallModel::Pec,
            RawWall::Drywall { dielectric } => {
                WallModel::Drywall(RawDielectric::resolve(dielectric.as_ref(), "wall.dielectric")?)
            }
            RawWall::Grating { period, pec_duty, max_order, dielectric, coefficients } => {
                let period = period.resolve(lam, "wall.period")?;
                let duty = pec_duty.unwrap_or(0.5);
                let mat = RawDielectric::resolve(dielectric.as_ref(), "wall.dielectric")?;
                let source = match coefficients {
                    None => CoeffSource::Kirchhoff,
                    Some(RawCoeffs::Named(name)) if name.eq_ignore_ascii_case("kirchhoff") => {
                        CoeffSource::Kirchhoff
                    }
                    Some(RawCoeffs::Named(name)) => {
                        return Err(Error::Parse(format!(
                            "wall.coefficients: unknown source {name:?} (expected \"kirchhoff\" or a table)"
                        )));
                    }
                    Some(RawCoeffs::Table { table_path }) => {
                        let path = match base_dir {
                            Some(dir) => dir.join(table_path),
                            None => table_path.into(),
                        };
                        let text = fs::read_to_string(&path).map_err(|e| {
                            Error::Parse(format!(
                                "wall.coefficients: cannot read table {}: {e}",
                                path.display()
                            ))
                        })?;
                        CoeffSource::Table(CoeffTable::parse(&text).map_err(|e| {
                            Error::Parse(format!("wall.coefficients: {}: {e}", path.display()))
                        })?)
                    }
                };
                WallModel::Grating(
                    GratingSpec::new(period, duty, mat, source, max_order.unwrap_or(3))
                        .map_err(|e| Error::Validation(format!("wall: {e}")))?,
                )
            }
        };

        let tx = self.tx.resolve(lam, "tx")?;
        let rx = self.rx.resolve(lam, "rx")?;
        let budget = match &self.budget {
            Some(b) => PowerBudget::new(b.p_tx_w, b.p_noise_w)
                .map_err(|e| Error::Validation(format!("budget: {e}")))?,
            None => PowerBudget::new(1.0, 1e4).expect("default powers are valid"),
        };
        let defaults = PathTraceLimits::default();
        let limits = match &self.limits {
            Some(l) => {
                let limits = PathTraceLimits {
                    max_bounces: l.max_bounces.unwrap_or(defaults.max_bounces),
                    max_image_order: l.max_image_order.unwrap_or(defaults.max_image_order),
                    artificial_loss: l.artificial_loss.unwrap_or(defaults.artificial_loss),
                };
                limits.validate().map_err(|e| Error::Validation(format!("limits: {e}")))?;
                limits
            }
            None => defaults,
        };
        let grid_spacing = match &self.grid_spacing {
            Some(g) => g.resolve(lam, "grid_spacing")?,
            None => 0.5 * lam,
        };
        let scenario = Scenario {
            room,
            wall,
            tx,
            rx,
            budget,
            limits,
            grid_spacing,
            current: self.current_a.unwrap_or(1.0),
            seed: self.seed.unwrap_or(1),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
