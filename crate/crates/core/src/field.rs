//! Spatial sampling grids and field-map evaluation.
//!
//! Grids are cell-centered rectangular lattices described by a [`GridSpec`];
//! maps carry a mask lane flagging samples that fall inside the λ/8
//! singularity-guard disc of a source (the 2-D kernel diverges
//! logarithmically there, so those samples are excluded rather than
//! evaluated). Grid sweeps run through [`crate::par::map_indexed`], which
//! keeps results bit-identical for any worker count.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{Point, RoomGeometry, MU0};
use crate::greens::greens;
use crate::par;
use crate::scenario::Scenario;

/// Guard-disc radius as a fraction of the wavelength.
pub const GUARD_RADIUS_FACTOR: f64 = 0.125;

/// A cell-centered rectangular sampling lattice: sample (ix, iy) sits at
/// (x0 + ix·dx, y0 + iy·dy), row-major with x fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
}

impl GridSpec {
    /// Cell-centered grid covering the full room at (approximately) the
    /// requested spacing; the cell size divides each side length exactly so
    /// every sample lies strictly inside.
    pub fn room_grid(room: &RoomGeometry, spacing: f64) -> Result<GridSpec> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Validation(format!("grid spacing must be positive, got {spacing}")));
        }
        let nx = (room.length_x / spacing).ceil().max(1.0) as usize;
        let ny = (room.length_y / spacing).ceil().max(1.0) as usize;
        let dx = room.length_x / nx as f64;
        let dy = room.length_y / ny as f64;
        Ok(GridSpec { nx, ny, x0: 0.5 * dx, y0: 0.5 * dy, dx, dy })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of sample (ix, iy).
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// (ix, iy) of a flat index.
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn point(&self, ix: usize, iy: usize) -> Point {
        Point::new(self.x0 + ix as f64 * self.dx, self.y0 + iy as f64 * self.dy)
    }

    pub fn point_at(&self, idx: usize) -> Point {
        let (ix, iy) = self.coords(idx);
        self.point(ix, iy)
    }

    /// Two grids are congruent when they sample exactly the same points.
    pub fn congruent(&self, other: &GridSpec) -> bool {
        self == other
    }
}

/// A complex-valued map over a grid, with a mask lane for guarded samples.
#[derive(Clone, Debug)]
pub struct FieldGrid {
    pub spec: GridSpec,
    pub values: Vec<Complex64>,
    pub masked: Vec<bool>,
}

/// A real-valued map over a grid (capacity, magnitude, ΔC, ...).
#[derive(Clone, Debug)]
pub struct ScalarGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub masked: Vec<bool>,
}

impl FieldGrid {
    /// Pointwise magnitude; masked samples stay masked with value 0.
    pub fn magnitude(&self) -> ScalarGrid {
        ScalarGrid {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&self.masked)
                .map(|(v, &m)| if m { 0.0 } else { v.norm() })
                .collect(),
            masked: self.masked.clone(),
        }
    }
}

/// Total electric field E_z over the grid for per-element complex drive
/// currents `excitation` (amperes): Σ_j jωμ0·w_j·G(p, src_j). Samples inside
/// any source's guard disc are masked (value 0), never evaluated.
pub fn field_map(scenario: &Scenario, excitation: &[Complex64], grid: &GridSpec) -> Result<FieldGrid> {
    let sources = scenario.tx.element_positions();
    if excitation.len() != sources.len() {
        return Err(Error::Shape(format!(
            "excitation holds {} weights for {} transmit elements",
            excitation.len(),
            sources.len()
        )));
    }
    let guard = GUARD_RADIUS_FACTOR * scenario.room.wavelength();
    let prefactor = Complex64::new(0.0, scenario.room.omega() * MU0);
    let samples = par::map_indexed(grid.len(), |idx| {
        let p = grid.point_at(idx);
        if sources.iter().any(|s| s.dist(p) < guard) {
            return Ok((Complex64::new(0.0, 0.0), true));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (src, w) in sources.iter().zip(excitation) {
            if w.norm_sqr() == 0.0 {
                continue;
            }
            acc += w * greens(&scenario.wall, &scenario.room, &scenario.limits, p, *src)?;
        }
        Ok((prefactor * acc, false))
    })?;
    let (values, masked) = samples.into_iter().unzip();
    Ok(FieldGrid { spec: *grid, values, masked })
}

/// Pointwise total − incident on congruent grids; masks are OR-combined.
pub fn scattered_field(total: &FieldGrid, incident: &FieldGrid) -> Result<FieldGrid> {
    if !total.spec.congruent(&incident.spec) {
        return Err(Error::Shape(format!(
            "grids not congruent: {:?} vs {:?}",
            total.spec, incident.spec
        )));
    }
    let values = total
        .values
        .iter()
        .zip(&incident.values)
        .map(|(t, i)| t - i)
        .collect();
    let masked = total
        .masked
        .iter()
        .zip(&incident.masked)
        .map(|(&a, &b)| a || b)
        .collect();
    Ok(FieldGrid { spec: total.spec, values, masked })
}
