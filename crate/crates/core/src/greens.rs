//! The four wall Green's functions.
//!
//! Everything is TE_z under the e^{jωt} convention: a unit line current at
//! `src` radiates G0 = (j/4)·H0^(2)(k0ρ), and walls add mirror-image or
//! diffracted-beam contributions on top. Path sums always accumulate in a
//! fixed order — lattice paths sorted by (|n_x|+|n_y|, n_x, n_y), beam
//! branches by (bounce count, wall sequence, order sequence) — so grid sweeps
//! are bit-identical no matter how they are partitioned across workers.

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::geom::{Point, RoomGeometry, MU0};
use crate::specfun::hankel2_raw;
use crate::wall::{grating_coefficients, slab_reflection, DrywallMaterial, GratingSpec, WallModel};
use crate::geom::PathTraceLimits;

/// Coincidence threshold: k0·ρ below this is treated as a singular hit.
const SINGULAR_KRHO: f64 = 1e-9;
/// Hard cap on beam-tree branches before a grating evaluation may start.
const MAX_BRANCHES: u64 = 10_000_000;

fn g0(k0rho: f64) -> Complex64 {
    Complex64::new(0.0, 0.25) * hankel2_raw(k0rho)
}

/// G0 with the artificial-loss wavenumber k0(1 − j·loss): the imaginary part
/// only attenuates, exp(−loss·k0·ρ); the slowly varying Hankel amplitude is
/// kept at the real argument (error O(loss), negligible at loss ~ 1e-3).
fn g0_lossy(k0rho: f64, loss: f64) -> Complex64 {
    g0(k0rho) * (-loss * k0rho).exp()
}

/// Free-space Green's function (j/4)·H0^(2)(k0·|obs−src|).
pub fn greens_free_space(obs: Point, src: Point, k0: f64) -> Result<Complex64> {
    let krho = k0 * obs.dist(src);
    if krho <= SINGULAR_KRHO {
        return Err(Error::Singularity(format!(
            "free-space Green's function evaluated at its source ({}, {})",
            src.x, src.y
        )));
    }
    Ok(g0(krho))
}

/// Electric field E_z of a line current `current` (amperes) in free space:
/// jωμ0·I0·G0 = −(I0·k0²/(4ωε0))·H0^(2)(k0ρ), in V/m.
pub fn efield_line_source(obs: Point, src: Point, room: &RoomGeometry, current: f64) -> Result<Complex64> {
    let g = greens_free_space(obs, src, room.wavenumber())?;
    Ok(Complex64::new(0.0, room.omega() * MU0 * current) * g)
}

/// One mirror image: lattice indices and position. |nx|+|ny| is the number of
/// wall reflections along the unfolded path; the PEC sign is (−1)^(|nx|+|ny|).
#[derive(Clone, Copy, Debug)]
pub(crate) struct ImagePath {
    pub point: Point,
    pub nx: i64,
    pub ny: i64,
}

impl ImagePath {
    pub fn bounces(&self) -> u32 {
        (self.nx.unsigned_abs() + self.ny.unsigned_abs()) as u32
    }
}

/// Per-axis image coordinate for reflection index n: the 1-D Dirichlet
/// lattice {2mL+s, 2mL−s} reindexed so that |n| counts wall reflections:
/// X(n) = nL + s for even n, nL + (L − s) for odd n.
fn axis_image(n: i64, s: f64, len: f64) -> f64 {
    if n % 2 == 0 {
        n as f64 * len + s
    } else {
        n as f64 * len + (len - s)
    }
}

/// All images with |n_x| ≤ cap_x and |n_y| ≤ cap_y, physical source excluded,
/// sorted by (|n_x|+|n_y|, n_x, n_y).
pub(crate) fn image_lattice(src: Point, room: &RoomGeometry, cap_x: i64, cap_y: i64) -> Vec<ImagePath> {
    let mut out = Vec::with_capacity(((2 * cap_x + 1) * (2 * cap_y + 1) - 1).max(0) as usize);
    for nx in -cap_x..=cap_x {
        for ny in -cap_y..=cap_y {
            if nx == 0 && ny == 0 {
                continue;
            }
            out.push(ImagePath {
                point: Point::new(axis_image(nx, src.x, room.length_x), axis_image(ny, src.y, room.length_y)),
                nx,
                ny,
            });
        }
    }
    out.sort_by_key(|p| (p.bounces(), p.nx, p.ny));
    out
}

fn require_inside(p: Point, room: &RoomGeometry, what: &str) -> Result<()> {
    if !room.contains(p) {
        return Err(Error::Domain(format!(
            "{what} ({}, {}) must lie strictly inside the {} x {} room",
            p.x, p.y, room.length_x, room.length_y
        )));
    }
    Ok(())
}

/// Mirror-image set of `src` for a PEC rectangle, up to per-axis reflection
/// index `max_order`; returns (image position, sign) with sign = (−1)^bounces.
pub fn pec_image_set(src: Point, room: &RoomGeometry, max_order: usize) -> Result<Vec<(Point, i32)>> {
    require_inside(src, room, "source")?;
    Ok(image_lattice(src, room, max_order as i64, max_order as i64)
        .into_iter()
        .map(|p| (p.point, if p.bounces() % 2 == 0 { 1 } else { -1 }))
        .collect())
}

/// Smooth truncation window for the PEC lattice sum: weight 1 out to the room
/// diagonal (direct paths always pass untouched), then a cos² taper of the
/// unfolded path length ρ down to 0 at ρ_max = max_image_order·min(L).
///
/// A sharp lattice cap leaves an unpaired slab of images, ringing at the
/// percent level on the walls and worse inside; tapering restores pairwise
/// wall cancellation exactly, because mirror partners of any wall point sit
/// at equal unfolded distances and therefore get equal weights.
fn lattice_window(rho: f64, rho_flat: f64, rho_max: f64) -> f64 {
    if rho <= rho_flat {
        1.0
    } else if rho >= rho_max {
        0.0
    } else {
        let c = (FRAC_PI_2 * (rho - rho_flat) / (rho_max - rho_flat)).cos();
        c * c
    }
}

/// PEC-walled room: direct term plus signed image sum, all kernels evaluated
/// with the artificial-loss wavenumber and the whole sum smoothly truncated
/// by [`lattice_window`] so the conditionally convergent series settles.
pub fn greens_pec(obs: Point, src: Point, room: &RoomGeometry, limits: &PathTraceLimits) -> Result<Complex64> {
    require_inside(src, room, "source")?;
    require_inside_or_boundary(obs, room)?;
    let k0 = room.wavenumber();
    let loss = limits.artificial_loss;
    let singular = |which: &str, p: Point| {
        Error::Singularity(format!("observation point coincides with {which} at ({}, {})", p.x, p.y))
    };

    let rho = obs.dist(src);
    if k0 * rho <= SINGULAR_KRHO {
        return Err(singular("the source", src));
    }
    if limits.max_image_order == 0 {
        return Ok(g0_lossy(k0 * rho, loss));
    }
    let rho_flat = room.length_x.hypot(room.length_y);
    let rho_max = (limits.max_image_order as f64 * room.length_x.min(room.length_y)).max(2.0 * rho_flat);
    let mut total = g0_lossy(k0 * rho, loss);
    let cap = limits.max_image_order as i64;
    for path in image_lattice(src, room, cap, cap) {
        let rho = obs.dist(path.point);
        let w = lattice_window(rho, rho_flat, rho_max);
        if w == 0.0 {
            continue;
        }
        if k0 * rho <= SINGULAR_KRHO {
            return Err(singular("a retained image", path.point));
        }
        let term = g0_lossy(k0 * rho, loss) * w;
        if path.bounces() % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    Ok(total)
}

/// The PEC boundary-residual check samples the field ON the walls, so `obs`
/// may sit on the boundary (but not outside).
fn require_inside_or_boundary(p: Point, room: &RoomGeometry) -> Result<()> {
    if p.x < 0.0 || p.x > room.length_x || p.y < 0.0 || p.y > room.length_y {
        return Err(Error::Domain(format!(
            "observation point ({}, {}) lies outside the {} x {} room",
            p.x, p.y, room.length_x, room.length_y
        )));
    }
    Ok(())
}

/// Specular NLoS path sum over the image lattice with total bounce count
/// ≤ `max_bounces`, each path weighted by refl(θ_x)^bx · refl(θ_y)^by at the
/// shared unfolded incidence angles of its x- and y-wall hits. This is the
/// common skeleton of the drywall Green's function and of test substitutions.
pub(crate) fn specular_path_sum<F>(
    obs: Point,
    src: Point,
    room: &RoomGeometry,
    max_bounces: usize,
    refl: F,
) -> Result<Complex64>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let k0 = room.wavenumber();
    let mut total = greens_free_space(obs, src, k0)?;
    if max_bounces == 0 {
        return Ok(total);
    }
    let cap = max_bounces as i64;
    for path in image_lattice(src, room, cap, cap) {
        if path.bounces() as usize > max_bounces {
            continue;
        }
        let d = obs - path.point;
        let rho = d.norm();
        if k0 * rho <= SINGULAR_KRHO {
            return Err(Error::Singularity(format!(
                "observation point coincides with a retained image at ({}, {})",
                path.point.x, path.point.y
            )));
        }
        // Along one unfolded straight path every x-wall hit shares the same
        // incidence angle (from the x normal), and likewise for y-wall hits.
        let mut weight = Complex64::new(1.0, 0.0);
        let bx = path.nx.unsigned_abs() as i32;
        if bx > 0 {
            let theta_x = incidence_angle(d.x.abs() / rho);
            weight *= refl(theta_x)?.powi(bx);
        }
        let by = path.ny.unsigned_abs() as i32;
        if by > 0 {
            let theta_y = incidence_angle(d.y.abs() / rho);
            weight *= refl(theta_y)?.powi(by);
        }
        if weight.norm_sqr() > 0.0 {
            total += weight * g0(k0 * rho);
        }
    }
    Ok(total)
}

/// Angle from the wall normal given |cos θ|; clamped strictly below π/2 so
/// grazing lattice paths stay inside `slab_reflection`'s domain.
fn incidence_angle(cos_theta: f64) -> f64 {
    cos_theta.clamp(0.0, 1.0).acos().min(FRAC_PI_2 * (1.0 - 1e-12))
}

/// Drywall-walled room: image lattice reweighted per path by the slab
/// reflection coefficient at the unfolded specular angles.
pub fn greens_drywall(
    obs: Point,
    src: Point,
    room: &RoomGeometry,
    mat: &DrywallMaterial,
    limits: &PathTraceLimits,
) -> Result<Complex64> {
    require_inside(src, room, "source")?;
    require_inside(obs, room, "observation point")?;
    specular_path_sum(obs, src, room, limits.max_bounces, |theta| slab_reflection(theta, mat, room))
}

/// The four wall planes of the room, in the fixed enumeration order used for
/// beam tracing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum WallId {
    Left,   // x = 0
    Right,  // x = Lx
    Bottom, // y = 0
    Top,    // y = Ly
}

const WALLS: [WallId; 4] = [WallId::Left, WallId::Right, WallId::Bottom, WallId::Top];

impl WallId {
    fn inward_normal(self) -> Point {
        match self {
            WallId::Left => Point::new(1.0, 0.0),
            WallId::Right => Point::new(-1.0, 0.0),
            WallId::Bottom => Point::new(0.0, 1.0),
            WallId::Top => Point::new(0.0, -1.0),
        }
    }

    /// Tangential unit vector fixing the sign convention of θ and m per wall.
    fn tangent(self) -> Point {
        match self {
            WallId::Left | WallId::Right => Point::new(0.0, 1.0),
            WallId::Bottom | WallId::Top => Point::new(1.0, 0.0),
        }
    }

    fn mirror(self, p: Point, room: &RoomGeometry) -> Point {
        match self {
            WallId::Left => Point::new(-p.x, p.y),
            WallId::Right => Point::new(2.0 * room.length_x - p.x, p.y),
            WallId::Bottom => Point::new(p.x, -p.y),
            WallId::Top => Point::new(p.x, 2.0 * room.length_y - p.y),
        }
    }

    /// Signed distance of `p` from the wall plane, positive on the room side.
    fn room_side_distance(self, p: Point, room: &RoomGeometry) -> f64 {
        match self {
            WallId::Left => p.x,
            WallId::Right => room.length_x - p.x,
            WallId::Bottom => p.y,
            WallId::Top => room.length_y - p.y,
        }
    }

    /// Coordinate of `p` along the wall segment and the segment length.
    fn tangential(self, p: Point, room: &RoomGeometry) -> (f64, f64) {
        match self {
            WallId::Left | WallId::Right => (p.y, room.length_y),
            WallId::Bottom | WallId::Top => (p.x, room.length_x),
        }
    }
}

/// Specular hit points of the wall sequence, found by back-tracing from `obs`
/// against the mirror-image chain of `src`. Returns None when the sequence is
/// not geometrically realizable (a hit misses its finite wall segment, or the
/// ray degenerates), which is what prevents double-counting the two orderings
/// of an x-then-y bounce pair.
fn specular_skeleton(walls: &[WallId], src: Point, obs: Point, room: &RoomGeometry) -> Option<Vec<Point>> {
    let mut images = Vec::with_capacity(walls.len());
    let mut s = src;
    for &w in walls {
        s = w.mirror(s, room);
        images.push(s);
    }
    let mut hits = vec![Point::new(0.0, 0.0); walls.len()];
    let mut p = obs;
    for (l, &w) in walls.iter().enumerate().rev() {
        let dp = w.room_side_distance(p, room);
        let ds = w.room_side_distance(images[l], room);
        // The segment must actually cross the plane: p strictly on the room
        // side, the image strictly beyond (chains like Left, Bottom, Left can
        // fold an image back onto the room side — not realizable).
        if dp <= 0.0 || ds >= 0.0 {
            return None;
        }
        let denom = dp - ds;
        let t = dp / denom; // crossing parameter along p → image, in (0, 1]
        let q = p + (images[l] - p) * t;
        let (tang, extent) = w.tangential(q, room);
        let tol = 1e-12 * extent;
        if tang <= tol || tang >= extent - tol {
            return None;
        }
        hits[l] = q;
        p = q;
    }
    Some(hits)
}

/// Upper bound on the number of beam branches for a grating evaluation.
pub fn grating_branch_bound(max_bounces: usize, max_order: usize) -> u64 {
    let orders = 2 * max_order as u64 + 1;
    let mut total = 0u64;
    let mut sequences = 4u64;
    for b in 1..=max_bounces as u64 {
        let branches = sequences.saturating_mul(orders.saturating_pow(b as u32));
        total = total.saturating_add(branches);
        sequences = sequences.saturating_mul(3);
    }
    total
}

/// Grating-walled room via beam tracing: for every realizable specular wall
/// sequence, each hit branches over the propagating diffraction orders. A
/// branch keeps a virtual source v_ℓ = q_ℓ − |q_ℓ − v_{ℓ−1}|·û_out so the
/// accumulated path phase is continuous at the wall; its field at the
/// observation point is weight·(j/4)H0^(2)(k0·|obs − v_B|). With only the
/// m = 0 order present this reduces exactly to the specular image method.
pub fn greens_grating(
    obs: Point,
    src: Point,
    room: &RoomGeometry,
    spec: &GratingSpec,
    limits: &PathTraceLimits,
) -> Result<Complex64> {
    require_inside(src, room, "source")?;
    require_inside(obs, room, "observation point")?;
    let bound = grating_branch_bound(limits.max_bounces, spec.max_order);
    if bound > MAX_BRANCHES {
        return Err(Error::Config(format!(
            "grating beam tree would hold up to {bound} branches (cap {MAX_BRANCHES}); \
             reduce max_bounces or max_order"
        )));
    }
    let k0 = room.wavenumber();
    let mut total = greens_free_space(obs, src, k0)?;
    let mut seq: Vec<WallId> = Vec::with_capacity(limits.max_bounces);
    for b in 1..=limits.max_bounces {
        enumerate_sequences(&mut seq, b, &mut |walls| {
            let Some(hits) = specular_skeleton(walls, src, obs, room) else {
                return Ok(());
            };
            trace_branches(walls, &hits, 0, src, Complex64::new(1.0, 0.0), obs, room, spec, k0, &mut total)
        })?;
    }
    Ok(total)
}

/// Depth-first enumeration of wall sequences with distinct adjacent walls, in
/// lexicographic (Left, Right, Bottom, Top) order.
fn enumerate_sequences<F>(seq: &mut Vec<WallId>, depth: usize, visit: &mut F) -> Result<()>
where
    F: FnMut(&[WallId]) -> Result<()>,
{
    if seq.len() == depth {
        return visit(seq);
    }
    for w in WALLS {
        if seq.last() == Some(&w) {
            continue;
        }
        seq.push(w);
        enumerate_sequences(seq, depth, visit)?;
        seq.pop();
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn trace_branches(
    walls: &[WallId],
    hits: &[Point],
    level: usize,
    vsrc: Point,
    weight: Complex64,
    obs: Point,
    room: &RoomGeometry,
    spec: &GratingSpec,
    k0: f64,
    total: &mut Complex64,
) -> Result<()> {
    if level == walls.len() {
        let krho = k0 * obs.dist(vsrc);
        if krho <= SINGULAR_KRHO {
            return Err(Error::Singularity(format!(
                "observation point coincides with a beam launch point at ({}, {})",
                vsrc.x, vsrc.y
            )));
        }
        *total += weight * g0(krho);
        return Ok(());
    }
    let wall = walls[level];
    let q = hits[level];
    let d = q - vsrc;
    let r = d.norm();
    if k0 * r <= SINGULAR_KRHO {
        return Ok(()); // degenerate branch: launch point collapsed onto the wall
    }
    let u = d * (1.0 / r);
    let n = wall.inward_normal();
    let tau = wall.tangent();
    let cos_i = -u.dot(n);
    if cos_i <= 1e-9 {
        return Ok(()); // beam no longer travels toward this wall: prune
    }
    let sin_i = u.dot(tau);
    let theta_i = sin_i.clamp(-1.0, 1.0).asin();
    let coeffs = grating_coefficients(theta_i, spec, room)?;
    let ratio = room.wavelength() / spec.period;
    for (&m, &r_m) in &coeffs {
        if r_m.norm_sqr() == 0.0 {
            continue;
        }
        let sin_m = sin_i - m as f64 * ratio;
        let cos_m = (1.0 - sin_m * sin_m).max(0.0).sqrt();
        let u_out = tau * sin_m + n * cos_m;
        let v_next = q - u_out * r;
        trace_branches(walls, hits, level + 1, v_next, weight * r_m, obs, room, spec, k0, total)?;
    }
    Ok(())
}

/// Green's function dispatch over the wall model. Free space ignores the room
/// bounds; every walled model requires both points strictly inside.
pub fn greens(
    wall: &WallModel,
    room: &RoomGeometry,
    limits: &PathTraceLimits,
    obs: Point,
    src: Point,
) -> Result<Complex64> {
    match wall {
        WallModel::FreeSpace => greens_free_space(obs, src, room.wavenumber()),
        WallModel::Pec => greens_pec(obs, src, room, limits),
        WallModel::Drywall(mat) => greens_drywall(obs, src, room, mat, limits),
        WallModel::Grating(spec) => greens_grating(obs, src, room, spec, limits),
    }
}
