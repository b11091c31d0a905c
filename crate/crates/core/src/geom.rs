//! Geometry primitives, physical constants, and room/array configuration.

use serde::Serialize;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s (exact).
pub const C0: f64 = 299_792_458.0;
/// Vacuum permeability, H/m (2018 CODATA).
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Vacuum permittivity, F/m, derived so that μ0·ε0·c² = 1 holds exactly.
pub const EPS0: f64 = 1.0 / (MU0 * C0 * C0);

/// A point (or vector) in the 2-D propagation plane, meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Unit vector in the same direction; zero-length input returns zero.
    pub fn unit(self) -> Point {
        let n = self.norm();
        if n > 0.0 {
            Point::new(self.x / n, self.y / n)
        } else {
            Point::new(0.0, 0.0)
        }
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Rectangular room spanning [0, length_x] × [0, length_y] plus the operating
/// frequency, which fixes ω, λ0 and k0 for every evaluation inside it.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RoomGeometry {
    pub length_x: f64,
    pub length_y: f64,
    pub frequency: f64,
}

impl RoomGeometry {
    pub fn new(length_x: f64, length_y: f64, frequency: f64) -> Result<Self> {
        if !(length_x > 0.0) || !(length_y > 0.0) {
            return Err(Error::Validation(format!(
                "room: side lengths must be positive, got {length_x} x {length_y}"
            )));
        }
        if !(frequency > 0.0) {
            return Err(Error::Validation(format!("room: frequency must be positive, got {frequency}")));
        }
        Ok(RoomGeometry { length_x, length_y, frequency })
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency
    }

    pub fn wavelength(&self) -> f64 {
        C0 / self.frequency
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength()
    }

    /// True if `p` lies strictly inside the room.
    pub fn contains(&self, p: Point) -> bool {
        p.x > 0.0 && p.x < self.length_x && p.y > 0.0 && p.y < self.length_y
    }
}

/// Uniform linear array. `orientation` is measured from the +y axis, so at
/// zero the elements line up along y and broadside points along +x.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ArrayLayout {
    pub center: Point,
    pub element_count: usize,
    pub spacing: f64,
    pub orientation: f64,
}

impl ArrayLayout {
    pub fn new(center: Point, element_count: usize, spacing: f64, orientation: f64) -> Result<Self> {
        if element_count < 1 {
            return Err(Error::Validation("array: element_count must be >= 1".into()));
        }
        if element_count > 1 && !(spacing > 0.0) {
            return Err(Error::Validation(format!(
                "array: spacing must be positive for multi-element arrays, got {spacing}"
            )));
        }
        Ok(ArrayLayout { center, element_count, spacing, orientation })
    }

    /// Element positions, symmetric about the center, ordered along the axis.
    pub fn element_positions(&self) -> Vec<Point> {
        let axis = Point::new(-self.orientation.sin(), self.orientation.cos());
        let mid = 0.5 * (self.element_count as f64 - 1.0);
        (0..self.element_count)
            .map(|i| self.center + axis * ((i as f64 - mid) * self.spacing))
            .collect()
    }

    /// End-to-end aperture length D.
    pub fn aperture(&self) -> f64 {
        (self.element_count.saturating_sub(1)) as f64 * self.spacing
    }

    /// Same array moved to a new center.
    pub fn at_center(&self, center: Point) -> ArrayLayout {
        ArrayLayout { center, ..*self }
    }
}

/// Truncation knobs for the image/beam path sums.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PathTraceLimits {
    /// Caps total wall hits per path in the drywall/grating sums.
    pub max_bounces: usize,
    /// Caps per-axis reflection index |n_x|, |n_y| in the PEC image lattice.
    pub max_image_order: usize,
    /// Relative imaginary wavenumber k → k0(1 − j·loss) applied to the PEC
    /// image series so the conditionally convergent sum converges absolutely.
    pub artificial_loss: f64,
}

impl Default for PathTraceLimits {
    fn default() -> Self {
        PathTraceLimits { max_bounces: 2, max_image_order: 40, artificial_loss: 1e-3 }
    }
}

impl PathTraceLimits {
    pub fn validate(&self) -> Result<()> {
        if !(self.artificial_loss >= 0.0) {
            return Err(Error::Validation(format!(
                "limits.artificial_loss must be >= 0, got {}",
                self.artificial_loss
            )));
        }
        Ok(())
    }
}

/// Conventional far-field (Fraunhofer) distance 2D²/λ.
pub fn far_field_distance(aperture: f64, wavelength: f64) -> Result<f64> {
    if !(aperture > 0.0) || !(wavelength > 0.0) {
        return Err(Error::Domain(format!(
            "far_field_distance: aperture and wavelength must be positive, got D={aperture}, lambda={wavelength}"
        )));
    }
    Ok(2.0 * aperture * aperture / wavelength)
}
