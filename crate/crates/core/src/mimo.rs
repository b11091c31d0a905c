//! MIMO channel construction and water-filled spectral efficiency.
//!
//! The channel entry g_ij is the raw complex E-field (V/m) at receive
//! element i due to a 1 A line current on transmit element j, routed through
//! whichever Green's function the wall model selects. Capacity then follows
//! from the singular values: allocate the transmit power across the
//! eigenchannels by water-filling and sum the per-mode log terms.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarGrid, GUARD_RADIUS_FACTOR};
use crate::geom::{ArrayLayout, Point, RoomGeometry, MU0};
use crate::greens::greens;
use crate::linalg;
use crate::par;
use crate::scenario::Scenario;
use crate::wall::WallModel;
use crate::geom::PathTraceLimits;

/// Water-level agreement demanded of active modes, and the Σγ budget check.
const KKT_TOL: f64 = 1e-9;
/// Relative threshold under σ_max below which a singular value does not
/// count toward the rank.
const RANK_TOL: f64 = 1e-12;

/// Complex N_R × N_T coupling matrix, row-major (receive rows).
#[derive(Clone, Debug)]
pub struct ChannelMatrix {
    pub entries: Vec<Complex64>,
    pub n_rx: usize,
    pub n_tx: usize,
}

impl ChannelMatrix {
    pub fn new(entries: Vec<Complex64>, n_rx: usize, n_tx: usize) -> Result<Self> {
        if entries.len() != n_rx * n_tx {
            return Err(Error::Shape(format!(
                "channel claims {n_rx} x {n_tx} but holds {} entries",
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation(format!("non-finite channel entry {bad}")));
        }
        Ok(ChannelMatrix { entries, n_rx, n_tx })
    }

    pub fn get(&self, rx: usize, tx: usize) -> Complex64 {
        self.entries[rx * self.n_tx + tx]
    }
}

/// Transmit power P_T and receiver noise power P_N, both in watts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerBudget {
    pub p_tx: f64,
    pub p_noise: f64,
}

impl PowerBudget {
    pub fn new(p_tx: f64, p_noise: f64) -> Result<Self> {
        if !(p_tx > 0.0 && p_tx.is_finite()) {
            return Err(Error::Validation(format!("transmit power must be positive, got {p_tx}")));
        }
        if !(p_noise > 0.0 && p_noise.is_finite()) {
            return Err(Error::Validation(format!("noise power must be positive, got {p_noise}")));
        }
        Ok(PowerBudget { p_tx, p_noise })
    }

    /// Per-mode SNR coefficient a_i = P_T·σ² / (N_T·P_N).
    fn mode_gain(&self, sigma: f64, n_tx: usize) -> f64 {
        self.p_tx * sigma * sigma / (n_tx as f64 * self.p_noise)
    }
}

/// Everything the capacity computation produces for one channel.
#[derive(Clone, Debug, Serialize)]
pub struct CapacityResult {
    pub singular_values: Vec<f64>,
    pub gammas: Vec<f64>,
    pub capacity: f64,
    pub useful_modes: usize,
    pub rank: usize,
}

/// Assemble the coupling matrix between two arrays: g_ij = field at rx
/// element i from a unit line current on tx element j.
pub fn build_channel_matrix(
    tx: &ArrayLayout,
    rx: &ArrayLayout,
    wall: &WallModel,
    room: &RoomGeometry,
    limits: &PathTraceLimits,
) -> Result<ChannelMatrix> {
    let tx_pos = tx.element_positions();
    let rx_pos = rx.element_positions();
    let prefactor = Complex64::new(0.0, room.omega() * MU0);
    let mut entries = Vec::with_capacity(rx_pos.len() * tx_pos.len());
    for &obs in &rx_pos {
        for &src in &tx_pos {
            entries.push(prefactor * greens(wall, room, limits, obs, src)?);
        }
    }
    ChannelMatrix::new(entries, rx_pos.len(), tx_pos.len())
}

/// Singular values of the channel, descending; length min(N_R, N_T).
pub fn singular_values(h: &ChannelMatrix) -> Result<Vec<f64>> {
    linalg::singular_values(&h.entries, h.n_rx, h.n_tx)
}

/// Water-filling power allocation: maximize Σ log2(1 + γ_i·a_i) with
/// a_i = P_T·σ_i²/(N_T·P_N), subject to Σγ_i = N_T and γ_i ≥ 0. Returns the
/// allocation and the capacity in bits/s/Hz. The solution is checked against
/// the KKT conditions before it is returned.
pub fn waterfill(sv: &[f64], budget: &PowerBudget, n_tx: usize) -> Result<(Vec<f64>, f64)> {
    if n_tx == 0 {
        return Err(Error::Validation("n_tx must be at least 1".into()));
    }
    for w in sv.windows(2) {
        if w[1] > w[0] {
            return Err(Error::Validation(format!(
                "singular values must be sorted descending, got {} before {}",
                w[0], w[1]
            )));
        }
    }
    if sv.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
        return Err(Error::Validation("singular values must be finite and nonnegative".into()));
    }
    let n = sv.len();
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let budget_total = n_tx as f64;
    let a: Vec<f64> = sv.iter().map(|&s| budget.mode_gain(s, n_tx)).collect();
    let usable = a.iter().filter(|&&x| x > 0.0).count();
    if usable == 0 {
        // Dead channel: the allocation is arbitrary, so return the uniform
        // one (still summing to N_T) with zero capacity.
        return Ok((vec![budget_total / n as f64; n], 0.0));
    }

    // Sorted-inversion: assume the top k modes are active, compute the water
    // level, and shrink k while the marginal mode would get negative power.
    let mut k = usable;
    let mu = loop {
        let inv_sum: f64 = a[..k].iter().map(|&x| 1.0 / x).sum();
        let mu = (budget_total + inv_sum) / k as f64;
        if k == 1 || mu - 1.0 / a[k - 1] >= 0.0 {
            break mu;
        }
        k -= 1;
    };
    let mut gammas = vec![0.0; n];
    let mut capacity = 0.0;
    for i in 0..k {
        let g = (mu - 1.0 / a[i]).max(0.0);
        gammas[i] = g;
        capacity += (g * a[i]).ln_1p() / std::f64::consts::LN_2;
    }
    verify_kkt(&a, &gammas, mu, budget_total)?;
    Ok((gammas, capacity))
}

/// KKT sanity for every water-filling result: active modes share the water
/// level, inactive modes could not profitably receive power, and the power
/// budget is met.
fn verify_kkt(a: &[f64], gammas: &[f64], mu: f64, budget_total: f64) -> Result<()> {
    let tol = KKT_TOL * mu.abs().max(1.0);
    for (i, (&ai, &g)) in a.iter().zip(gammas).enumerate() {
        if g > 0.0 {
            if (g + 1.0 / ai - mu).abs() > tol {
                return Err(Error::Convergence(format!(
                    "active mode {i} misses the water level by {}",
                    (g + 1.0 / ai - mu).abs()
                )));
            }
        } else if ai > 0.0 && 1.0 / ai < mu - tol {
            return Err(Error::Convergence(format!(
                "inactive mode {i} should have received power (1/a = {}, level = {mu})",
                1.0 / ai
            )));
        }
    }
    let total: f64 = gammas.iter().sum();
    if (total - budget_total).abs() > KKT_TOL * budget_total.max(1.0) {
        return Err(Error::Convergence(format!(
            "allocation sums to {total}, budget is {budget_total}"
        )));
    }
    Ok(())
}

/// Threshold below which a water-filling coefficient does not count as a
/// "useful" mode.
pub fn useful_mode_threshold(n_tx: usize) -> f64 {
    1e-9 * n_tx as f64
}

/// Full capacity pipeline: SVD, water-filling, mode bookkeeping.
pub fn capacity(h: &ChannelMatrix, budget: &PowerBudget) -> Result<CapacityResult> {
    let sv = singular_values(h)?;
    let (gammas, cap) = waterfill(&sv, budget, h.n_tx)?;
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let rank = if sigma_max > 0.0 {
        sv.iter().filter(|&&s| s > RANK_TOL * sigma_max).count()
    } else {
        0
    };
    let eps = useful_mode_threshold(h.n_tx);
    let useful_modes = gammas.iter().filter(|&&g| g > eps).count();
    Ok(CapacityResult { singular_values: sv, gammas, capacity: cap, useful_modes, rank })
}

/// True when the receive array, translated to `center`, violates a placement
/// rule: an element within a guard disc of a transmit element, or (for walled
/// rooms) outside the room.
fn rx_placement_masked(scenario: &Scenario, center: Point) -> bool {
    let rx = scenario.rx.at_center(center);
    let guard = GUARD_RADIUS_FACTOR * scenario.room.wavelength();
    let tx_pos = scenario.tx.element_positions();
    let walled = !matches!(scenario.wall, WallModel::FreeSpace);
    rx.element_positions().iter().any(|&p| {
        (walled && !scenario.room.contains(p)) || tx_pos.iter().any(|t| t.dist(p) < guard)
    })
}

/// Capacity at one receiver-center position, or None when placement rules
/// mask the position.
fn capacity_at(scenario: &Scenario, center: Point) -> Result<Option<CapacityResult>> {
    if rx_placement_masked(scenario, center) {
        return Ok(None);
    }
    let rx = scenario.rx.at_center(center);
    let h = build_channel_matrix(&scenario.tx, &rx, &scenario.wall, &scenario.room, &scenario.limits)?;
    capacity(&h, &scenario.budget).map(Some)
}

/// Water-filled capacity with the receive array centered at every grid
/// point. Masked samples (guard or out-of-room violations) carry value 0.
pub fn capacity_map(scenario: &Scenario, grid: &GridSpec) -> Result<ScalarGrid> {
    let samples = par::map_indexed(grid.len(), |idx| {
        match capacity_at(scenario, grid.point_at(idx))? {
            Some(res) => Ok((res.capacity, false)),
            None => Ok((0.0, true)),
        }
    })?;
    let (values, masked) = samples.into_iter().unzip();
    Ok(ScalarGrid { spec: *grid, values, masked })
}

/// Pointwise relative capacity improvement ΔC = (C_wall − C_FS)/C_FS and its
/// mean over the points where both maps are valid and the baseline is
/// positive; excluded points come back masked.
pub fn capacity_improvement(c_wall: &ScalarGrid, c_fs: &ScalarGrid) -> Result<(ScalarGrid, f64)> {
    if !c_wall.spec.congruent(&c_fs.spec) {
        return Err(Error::Shape(format!(
            "capacity grids not congruent: {:?} vs {:?}",
            c_wall.spec, c_fs.spec
        )));
    }
    let mut values = vec![0.0; c_wall.values.len()];
    let mut masked = vec![false; c_wall.values.len()];
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..values.len() {
        let base = c_fs.values[i];
        if c_wall.masked[i] || c_fs.masked[i] || base <= 0.0 {
            masked[i] = true;
            continue;
        }
        let delta = (c_wall.values[i] - base) / base;
        values[i] = delta;
        sum += delta;
        count += 1;
    }
    if count == 0 {
        return Err(Error::Validation("no valid samples shared by the two capacity maps".into()));
    }
    Ok((ScalarGrid { spec: c_wall.spec, values, masked }, sum / count as f64))
}

/// One sample of a capacity-versus-distance sweep.
#[derive(Clone, Debug, Serialize)]
pub struct DistancePoint {
    pub distance: f64,
    pub capacity: f64,
    pub masked: bool,
}

/// Capacity along the ray from the transmit center at angle `theta_tr`
/// (measured from the +x axis). Invalid receiver placements are masked.
pub fn capacity_vs_distance(
    scenario: &Scenario,
    theta_tr: f64,
    distances: &[f64],
) -> Result<Vec<DistancePoint>> {
    let dir = Point::new(theta_tr.cos(), theta_tr.sin());
    let origin = scenario.tx.center;
    par::map_indexed(distances.len(), |i| {
        let d = distances[i];
        let center = origin + dir * d;
        Ok(match capacity_at(scenario, center)? {
            Some(res) => DistancePoint { distance: d, capacity: res.capacity, masked: false },
            None => DistancePoint { distance: d, capacity: 0.0, masked: true },
        })
    })
}

/// Mode-level census at one distance: singular values normalized by σ_1,
/// the water-filling coefficients, and the useful-mode count.
#[derive(Clone, Debug, Serialize)]
pub struct ModePoint {
    pub distance: f64,
    pub sigmas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub useful_modes: usize,
    pub masked: bool,
}

/// Sweep the receiver along the transmit array's broadside direction and
/// report the normalized mode structure at each distance.
pub fn mode_analysis(scenario: &Scenario, distances: &[f64]) -> Result<Vec<ModePoint>> {
    let theta = scenario.tx.orientation;
    let dir = Point::new(theta.cos(), theta.sin());
    let origin = scenario.tx.center;
    par::map_indexed(distances.len(), |i| {
        let d = distances[i];
        let center = origin + dir * d;
        match capacity_at(scenario, center)? {
            Some(res) => {
                let s1 = res.singular_values.first().copied().unwrap_or(0.0);
                let sigmas = if s1 > 0.0 {
                    res.singular_values.iter().map(|s| s / s1).collect()
                } else {
                    res.singular_values.clone()
                };
                Ok(ModePoint {
                    distance: d,
                    sigmas,
                    gammas: res.gammas,
                    useful_modes: res.useful_modes,
                    masked: false,
                })
            }
            None => Ok(ModePoint {
                distance: d,
                sigmas: Vec::new(),
                gammas: Vec::new(),
                useful_modes: 0,
                masked: true,
            }),
        }
    })
}
