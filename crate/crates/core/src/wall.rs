//! Wall boundary models: drywall slab reflection, binary-grating diffraction
//! orders and coefficients, and the tagged union tying them together.

use num_complex::Complex64;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::geom::{RoomGeometry, EPS0, MU0};

/// Reflection coefficient of a perfect electric conductor.
pub const GAMMA_PEC: Complex64 = Complex64::new(-1.0, 0.0);

/// Tolerance below which a diffraction order counts as grazing and is dropped.
const GRAZING_TOL: f64 = 1e-9;

/// Lossy dielectric slab in air (single homogeneous layer).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DrywallMaterial {
    /// Real part of the relative permittivity ε′.
    pub eps_real: f64,
    /// Loss tangent tanδ, so ε″ = ε′·tanδ.
    pub loss_tangent: f64,
    /// Slab thickness, meters.
    pub thickness: f64,
    /// Relative permeability (1 for every scenario of interest).
    pub mu_rel: f64,
}

impl DrywallMaterial {
    pub fn new(eps_real: f64, loss_tangent: f64, thickness: f64, mu_rel: f64) -> Result<Self> {
        if !(eps_real >= 1.0) {
            return Err(Error::Validation(format!("drywall: eps_real must be >= 1, got {eps_real}")));
        }
        if !(loss_tangent >= 0.0) {
            return Err(Error::Validation(format!(
                "drywall: loss_tangent must be >= 0, got {loss_tangent}"
            )));
        }
        if !(thickness > 0.0) {
            return Err(Error::Validation(format!("drywall: thickness must be > 0, got {thickness}")));
        }
        if !(mu_rel > 0.0) {
            return Err(Error::Validation(format!("drywall: mu_rel must be > 0, got {mu_rel}")));
        }
        Ok(DrywallMaterial { eps_real, loss_tangent, thickness, mu_rel })
    }

    /// Standard 13 mm gypsum board: ε′ = 2.75, tanδ = 0.01.
    pub fn default_gypsum() -> Self {
        DrywallMaterial { eps_real: 2.75, loss_tangent: 0.01, thickness: 13e-3, mu_rel: 1.0 }
    }

    /// Complex relative permittivity ε′(1 − j·tanδ) under e^{jωt}.
    pub fn eps_complex(&self) -> Complex64 {
        Complex64::new(self.eps_real, -self.eps_real * self.loss_tangent)
    }

    /// Complex wavenumber inside the slab, branch Re > 0, Im ≤ 0 (decaying).
    pub fn wavenumber(&self, k0: f64) -> Complex64 {
        let n2 = self.eps_complex() * self.mu_rel;
        let k = k0 * n2.sqrt();
        // principal sqrt of ε_c (fourth quadrant) already lands Re>0, Im<=0
        debug_assert!(k.re > 0.0 && k.im <= 0.0);
        k
    }

    /// Propagation constant γ = j·k inside the slab (Re ≥ 0).
    pub fn gamma(&self, k0: f64) -> Complex64 {
        Complex64::new(0.0, 1.0) * self.wavenumber(k0)
    }

    /// Intrinsic impedance η = η0·√(μ_r/ε_c).
    pub fn impedance(&self) -> Complex64 {
        let eta0 = (MU0 / EPS0).sqrt();
        eta0 * (Complex64::new(self.mu_rel, 0.0) / self.eps_complex()).sqrt()
    }
}

/// TE reflection coefficient of the air/slab/air stack at incidence angle
/// `theta_i` from the wall normal, multiple internal reflections summed in
/// closed form: Γ = Γ12(1 − e)/(1 − Γ12²e), e = exp(−2γd·cosθ_t).
pub fn slab_reflection(theta_i: f64, mat: &DrywallMaterial, room: &RoomGeometry) -> Result<Complex64> {
    if !theta_i.is_finite() || !(0.0..FRAC_PI_2).contains(&theta_i) {
        return Err(Error::Domain(format!(
            "slab_reflection: incidence angle must lie in [0, pi/2), got {theta_i}"
        )));
    }
    let k0 = room.wavenumber();
    let k_dw = mat.wavenumber(k0);
    // Snell: k0·sinθ_i = k_dw·sinθ_t (transverse wavenumber continuity).
    let sin_t = k0 * theta_i.sin() / k_dw;
    let cos_t = (Complex64::new(1.0, 0.0) - sin_t * sin_t).sqrt();
    let eta1 = Complex64::new((MU0 / EPS0).sqrt(), 0.0);
    let eta2 = mat.impedance();
    // TE (perpendicular) Fresnel coefficient air → slab.
    let g12 = (eta2 * theta_i.cos() - eta1 * cos_t) / (eta2 * theta_i.cos() + eta1 * cos_t);
    // Two-way propagation factor through the thickness.
    let e = (-2.0 * mat.gamma(k0) * mat.thickness * cos_t).exp();
    Ok(g12 * (1.0 - e) / (1.0 - g12 * g12 * e))
}

/// Uniform sampling of `slab_reflection` over [0, π/2): rows (θ_i, |Γ|, arg Γ).
pub fn drywall_reflection_curve(
    mat: &DrywallMaterial,
    room: &RoomGeometry,
    n_angles: usize,
) -> Result<Vec<(f64, f64, f64)>> {
    if n_angles < 2 {
        return Err(Error::Validation(format!("reflection curve needs >= 2 angles, got {n_angles}")));
    }
    (0..n_angles)
        .map(|i| {
            let theta = FRAC_PI_2 * i as f64 / n_angles as f64;
            let g = slab_reflection(theta, mat, room)?;
            Ok((theta, g.norm(), g.arg()))
        })
        .collect()
}

/// One row of a user-supplied grating coefficient table.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TableRow {
    pub theta_deg: f64,
    pub m: i64,
    pub coeff: Complex64,
}

/// Reflection-order table over (incidence angle, order); angle interpolation
/// is linear, the order is an exact key.
#[derive(Clone, Debug, Serialize)]
pub struct CoeffTable {
    rows: Vec<TableRow>,
}

impl CoeffTable {
    /// Parses the plain-text format: a `theta_deg m re im` header line, then
    /// whitespace-separated rows sorted by (theta, m).
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse("coefficient table: empty file".into()))?;
        let cols: Vec<&str> = header.split_whitespace().collect();
        if cols != ["theta_deg", "m", "re", "im"] {
            return Err(Error::Parse(format!(
                "coefficient table: expected header 'theta_deg m re im', got '{}'",
                header.trim()
            )));
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::Parse(format!(
                    "coefficient table line {}: expected 4 fields, got {}",
                    idx + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str, what: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("coefficient table line {}: bad {what} '{s}'", idx + 1))
                })
            };
            let theta_deg = parse(fields[0], "angle")?;
            let m: i64 = fields[1].parse().map_err(|_| {
                Error::Parse(format!("coefficient table line {}: bad order '{}'", idx + 1, fields[1]))
            })?;
            let re = parse(fields[2], "re")?;
            let im = parse(fields[3], "im")?;
            if !(0.0..90.0).contains(&theta_deg) {
                return Err(Error::Parse(format!(
                    "coefficient table line {}: angle {theta_deg} outside [0, 90)",
                    idx + 1
                )));
            }
            let coeff = Complex64::new(re, im);
            if coeff.norm() > 1.0 + 1e-9 {
                return Err(Error::Validation(format!(
                    "coefficient table line {}: |R| = {} exceeds 1",
                    idx + 1,
                    coeff.norm()
                )));
            }
            rows.push(TableRow { theta_deg, m, coeff });
        }
        if rows.is_empty() {
            return Err(Error::Parse("coefficient table: no data rows".into()));
        }
        for w in rows.windows(2) {
            let a = (w[0].theta_deg, w[0].m);
            let b = (w[1].theta_deg, w[1].m);
            if b <= a {
                return Err(Error::Parse(format!(
                    "coefficient table: rows not strictly sorted by (theta, m) at theta={} m={}",
                    b.0, b.1
                )));
            }
        }
        Ok(CoeffTable { rows })
    }

    /// Distinct angles present, ascending.
    fn angles(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if out.last().is_none_or(|&a| r.theta_deg > a) {
                out.push(r.theta_deg);
            }
        }
        out
    }

    fn coeff_at(&self, theta_deg: f64, m: i64) -> Option<Complex64> {
        self.rows
            .iter()
            .find(|r| r.theta_deg == theta_deg && r.m == m)
            .map(|r| r.coeff)
    }

    /// Linear interpolation in angle; the order is an exact key. Orders
    /// missing from a bracketing angle contribute zero there.
    pub fn lookup(&self, theta_deg: f64, m: i64) -> Result<Complex64> {
        let angles = self.angles();
        let lo = *angles.first().unwrap();
        let hi = *angles.last().unwrap();
        if theta_deg < lo - 1e-12 || theta_deg > hi + 1e-12 {
            return Err(Error::Domain(format!(
                "coefficient table: angle {theta_deg} deg outside tabulated range [{lo}, {hi}]"
            )));
        }
        let theta = theta_deg.clamp(lo, hi);
        let j = angles.partition_point(|&a| a < theta);
        let (a0, a1) = if j == 0 {
            (angles[0], angles[0])
        } else if j == angles.len() {
            (hi, hi)
        } else if angles[j] == theta {
            (theta, theta)
        } else {
            (angles[j - 1], angles[j])
        };
        let c0 = self.coeff_at(a0, m).unwrap_or(Complex64::new(0.0, 0.0));
        if a0 == a1 {
            return Ok(c0);
        }
        let c1 = self.coeff_at(a1, m).unwrap_or(Complex64::new(0.0, 0.0));
        let t = (theta - a0) / (a1 - a0);
        Ok(c0 * (1.0 - t) + c1 * t)
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }
}

/// Where grating reflection coefficients come from.
#[derive(Clone, Debug, Serialize)]
pub enum CoeffSource {
    /// Kirchhoff (physical-optics) Fourier coefficients of the local
    /// PEC/drywall reflection profile.
    Kirchhoff,
    /// User-supplied table, e.g. from full-wave unit-cell simulations.
    Table(CoeffTable),
}

/// Binary PEC/drywall grating description.
#[derive(Clone, Debug, Serialize)]
pub struct GratingSpec {
    /// Grating period p, meters.
    pub period: f64,
    /// PEC fraction of the unit cell in [0, 1].
    pub pec_duty: f64,
    /// The dielectric filling the non-PEC segment.
    pub dielectric: DrywallMaterial,
    pub coeff_source: CoeffSource,
    /// Cap on |m| per diffraction event.
    pub max_order: usize,
}

impl GratingSpec {
    pub fn new(
        period: f64,
        pec_duty: f64,
        dielectric: DrywallMaterial,
        coeff_source: CoeffSource,
        max_order: usize,
    ) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::Validation(format!("grating: period must be > 0, got {period}")));
        }
        if !(0.0..=1.0).contains(&pec_duty) {
            return Err(Error::Validation(format!(
                "grating: pec_duty must lie in [0, 1], got {pec_duty}"
            )));
        }
        Ok(GratingSpec { period, pec_duty, dielectric, coeff_source, max_order })
    }
}

/// Wall boundary condition shared by all four room walls.
#[derive(Clone, Debug, Serialize)]
pub enum WallModel {
    FreeSpace,
    Pec,
    Drywall(DrywallMaterial),
    Grating(GratingSpec),
}

impl WallModel {
    /// Short tag used in artifact names and reports.
    pub fn tag(&self) -> &'static str {
        match self {
            WallModel::FreeSpace => "free_space",
            WallModel::Pec => "pec",
            WallModel::Drywall(_) => "drywall",
            WallModel::Grating(_) => "grating",
        }
    }
}

/// Propagating reflected Floquet orders for incidence angle `theta_i`
/// (signed, |θ| < π/2): all integers m with |sinθ_i − mλ0/p| < 1, grazing
/// excluded; returns (m, θ_m) sorted by m. m = 0 (specular) always present.
pub fn grating_orders(theta_i: f64, period: f64, wavelength: f64) -> Result<Vec<(i64, f64)>> {
    if !theta_i.is_finite() || theta_i.abs() >= FRAC_PI_2 {
        return Err(Error::Domain(format!(
            "grating_orders: incidence angle must satisfy |theta| < pi/2, got {theta_i}"
        )));
    }
    if !(period > 0.0) || !(wavelength > 0.0) {
        return Err(Error::Domain("grating_orders: period and wavelength must be positive".into()));
    }
    let si = theta_i.sin();
    let ratio = wavelength / period;
    // |si − m·ratio| < 1 bounds m to [(si−1)/ratio, (si+1)/ratio].
    let m_lo = ((si - 1.0) / ratio).floor() as i64;
    let m_hi = ((si + 1.0) / ratio).ceil() as i64;
    let mut out = Vec::new();
    for m in m_lo..=m_hi {
        let s = si - m as f64 * ratio;
        if s.abs() < 1.0 - GRAZING_TOL {
            out.push((m, s.asin()));
        }
    }
    Ok(out)
}

/// Reflection coefficients R_m for every propagating order at `theta_i`
/// (signed angle), keyed by order. Kirchhoff: Fourier coefficients of the
/// piecewise profile r(x) = Γ_PEC on the PEC fraction, Γ_dw(θ_i) elsewhere;
/// Table: angle-interpolated lookup of |θ_i| with an energy-bound check.
pub fn grating_coefficients(
    theta_i: f64,
    spec: &GratingSpec,
    room: &RoomGeometry,
) -> Result<BTreeMap<i64, Complex64>> {
    let orders = grating_orders(theta_i, spec.period, room.wavelength())?;
    let mut out = BTreeMap::new();
    match &spec.coeff_source {
        CoeffSource::Kirchhoff => {
            let duty = spec.pec_duty;
            let gamma_dw = slab_reflection(theta_i.abs(), &spec.dielectric, room)?;
            for &(m, _) in &orders {
                if m.unsigned_abs() as usize > spec.max_order {
                    continue;
                }
                let r = if m == 0 {
                    GAMMA_PEC * duty + gamma_dw * (1.0 - duty)
                } else {
                    // (Γ_PEC − Γ_dw)·(1 − e^{−j2πm·duty})/(j2πm)
                    let phase = Complex64::new(0.0, -2.0 * PI * m as f64 * duty).exp();
                    (GAMMA_PEC - gamma_dw) * (1.0 - phase) / Complex64::new(0.0, 2.0 * PI * m as f64)
                };
                out.insert(m, r);
            }
        }
        CoeffSource::Table(table) => {
            let theta_deg = theta_i.abs().to_degrees();
            for &(m, _) in &orders {
                if m.unsigned_abs() as usize > spec.max_order {
                    continue;
                }
                out.insert(m, table.lookup(theta_deg, m)?);
            }
            // Energy bound over propagating orders:
            // Σ |R_m|²·cosθ_m/cosθ_i ≤ 1 (+ tolerance).
            let cos_i = theta_i.cos();
            let mut power = 0.0;
            for &(m, theta_m) in &orders {
                if let Some(r) = out.get(&m) {
                    power += r.norm_sqr() * theta_m.cos() / cos_i;
                }
            }
            if power > 1.0 + 1e-6 {
                return Err(Error::Validation(format!(
                    "coefficient table: reflected power {power:.6} exceeds unity at theta_i = {:.3} deg",
                    theta_i.to_degrees()
                )));
            }
        }
    }
    Ok(out)
}
