//! Local fading statistics: envelope ensembles and Rician/Hoyt model fits.
//!
//! An ensemble is the set of |E_z| samples on a thin ring around the
//! transmitter, RMS-normalized so rooms of different sizes pool onto a common
//! scale. Each candidate model is fitted by maximizing the exact
//! log-likelihood with a deterministic coordinate search started from
//! method-of-moments estimates; model selection just compares the two
//! optimized log-likelihoods.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::FieldGrid;
use crate::geom::Point;
use crate::par;
use crate::specfun::log_i0_raw;

/// Smallest admissible Rician σ; an optimizer pinned here is reported with
/// `hit_bound` instead of looping forever toward a point mass.
const SIGMA_FLOOR: f64 = 1e-12;
/// Smallest admissible Hoyt axial ratio; q = 1 (Rayleigh) is the upper end.
const Q_FLOOR: f64 = 1e-6;
/// Relative tolerance of the final golden-section line searches.
const SEARCH_TOL: f64 = 1e-8;
/// Relative tolerance of the exploratory line searches; sweeps run at this
/// resolution until the iterate stops moving, then tighten to [`SEARCH_TOL`].
const COARSE_TOL: f64 = 1e-3;
/// Coordinate-sweep cap before the fit is declared non-convergent.
const MAX_SWEEPS: usize = 500;

/// Where an ensemble's samples came from: one entry per pooled ring.
#[derive(Clone, Debug, Serialize)]
pub struct RingMeta {
    pub r_min: f64,
    pub r_max: f64,
    pub center: Point,
    pub wall: String,
}

/// RMS-normalized envelope samples plus their provenance.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeEnsemble {
    pub samples: Vec<f64>,
    pub rings: Vec<RingMeta>,
}

/// Raw |E_z| samples on the annulus r_min ≤ ‖p − center‖ ≤ r_max, masked
/// grid points excluded.
pub fn ring_ensemble(field: &FieldGrid, center: Point, r_min: f64, r_max: f64) -> Result<Vec<f64>> {
    if !(r_min > 0.0 && r_max > r_min) {
        return Err(Error::Validation(format!(
            "ring radii must satisfy 0 < r_min < r_max, got [{r_min}, {r_max}]"
        )));
    }
    let mut samples = Vec::new();
    for idx in 0..field.spec.len() {
        if field.masked[idx] {
            continue;
        }
        let d = field.spec.point_at(idx).dist(center);
        if d >= r_min && d <= r_max {
            samples.push(field.values[idx].norm());
        }
    }
    if samples.is_empty() {
        return Err(Error::Validation(format!(
            "no unmasked grid samples fall in the ring [{r_min}, {r_max}] m"
        )));
    }
    Ok(samples)
}

/// Normalize raw envelopes by their own RMS so the ensemble has unit
/// mean-square.
pub fn rms_normalize(samples: &[f64], meta: RingMeta) -> Result<EnvelopeEnsemble> {
    if samples.is_empty() {
        return Err(Error::Validation("cannot normalize an empty sample set".into()));
    }
    if samples.iter().any(|&r| !(r >= 0.0) || !r.is_finite()) {
        return Err(Error::Validation("envelope samples must be finite and nonnegative".into()));
    }
    let ms = samples.iter().map(|r| r * r).sum::<f64>() / samples.len() as f64;
    if ms == 0.0 {
        return Err(Error::Validation("all envelope samples are zero".into()));
    }
    let rms = ms.sqrt();
    Ok(EnvelopeEnsemble {
        samples: samples.iter().map(|r| r / rms).collect(),
        rings: vec![meta],
    })
}

/// Pool already-normalized ensembles by concatenation. Each input has unit
/// RMS, so the pooled mean-square is a weighted mean of ones and stays 1.
pub fn pool(ensembles: &[EnvelopeEnsemble]) -> Result<EnvelopeEnsemble> {
    if ensembles.is_empty() {
        return Err(Error::Validation("nothing to pool".into()));
    }
    let mut samples = Vec::new();
    let mut rings = Vec::new();
    for e in ensembles {
        samples.extend_from_slice(&e.samples);
        rings.extend(e.rings.iter().cloned());
    }
    Ok(EnvelopeEnsemble { samples, rings })
}

/// Histogram density estimate n_j/(N·Δr) over uniform bins spanning the
/// sample range.
#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalPdf {
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub n_samples: usize,
    pub bin_count: usize,
}

pub fn empirical_pdf(ens: &EnvelopeEnsemble, bins: usize) -> Result<EmpiricalPdf> {
    if bins < 2 {
        return Err(Error::Validation(format!("need at least 2 bins, got {bins}")));
    }
    let lo = ens.samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ens.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::Validation(format!(
            "degenerate sample range [{lo}, {hi}] cannot be binned"
        )));
    }
    let n = ens.samples.len();
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &r in &ens.samples {
        // Top edge closes the last bin.
        let j = (((r - lo) / width) as usize).min(bins - 1);
        counts[j] += 1;
    }
    let densities = counts.iter().map(|&c| c as f64 / (n as f64 * width)).collect();
    let bin_edges = (0..=bins).map(|j| lo + j as f64 * width).collect();
    Ok(EmpiricalPdf { bin_edges, densities, n_samples: n, bin_count: bins })
}

/// Freedman–Diaconis bin-count suggestion (reported in metadata; the default
/// bin count stays 50).
pub fn freedman_diaconis_bins(ens: &EnvelopeEnsemble) -> usize {
    let mut sorted = ens.samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let quantile = |p: f64| -> f64 {
        let t = p * (n - 1) as f64;
        let i = t.floor() as usize;
        let frac = t - i as f64;
        if i + 1 < n {
            sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
        } else {
            sorted[n - 1]
        }
    };
    let iqr = quantile(0.75) - quantile(0.25);
    let range = sorted[n - 1] - sorted[0];
    if iqr <= 0.0 || range <= 0.0 {
        return 1;
    }
    let width = 2.0 * iqr / (n as f64).cbrt();
    (range / width).ceil().max(1.0) as usize
}

/// Rician density f(r) = (r/σ²)·exp(−(r²+s²)/(2σ²))·I0(r·s/σ²).
pub fn rician_pdf(r: f64, s: f64, sigma: f64) -> Result<f64> {
    if !(s >= 0.0) || !(sigma > 0.0) {
        return Err(Error::Domain(format!("Rician parameters need s ≥ 0, σ > 0; got s={s}, σ={sigma}")));
    }
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("envelope must be nonnegative, got {r}")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    Ok(log_rician(r, s, sigma).exp())
}

/// Hoyt density f(r) = ((1+q²)/(qΩ))·r·exp(−(1+q²)²r²/(4q²Ω))·I0((1−q⁴)r²/(4q²Ω)).
pub fn hoyt_pdf(r: f64, q: f64, omega: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) || !(omega > 0.0) {
        return Err(Error::Domain(format!(
            "Hoyt parameters need 0 < q ≤ 1, Ω > 0; got q={q}, Ω={omega}"
        )));
    }
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("envelope must be nonnegative, got {r}")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    Ok(log_hoyt(r, q, omega).exp())
}

/// ln of the Rician density for r > 0, computed in log space.
fn log_rician(r: f64, s: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    r.ln() - s2.ln() - (r * r + s * s) / (2.0 * s2) + log_i0_raw(r * s / s2)
}

/// ln of the Hoyt density for r > 0, computed in log space.
fn log_hoyt(r: f64, q: f64, omega: f64) -> f64 {
    let q2 = q * q;
    let r2 = r * r;
    let denom = 4.0 * q2 * omega;
    ((1.0 + q2) / (q * omega)).ln() + r.ln() - (1.0 + q2) * (1.0 + q2) * r2 / denom
        + log_i0_raw((1.0 - q2 * q2) * r2 / denom)
}

/// The fitted model family with its parameters.
#[derive(Clone, Debug, Serialize)]
pub enum FadingModel {
    Rician { s: f64, sigma: f64 },
    Hoyt { q: f64, omega: f64 },
}

/// Result of one maximum-likelihood fit.
#[derive(Clone, Debug, Serialize)]
pub struct FadingFit {
    pub model: FadingModel,
    pub log_likelihood: f64,
    /// Set when the optimum is pinned at a parameter-domain boundary (e.g.
    /// σ at its floor for degenerate, dispersion-free data).
    pub hit_bound: bool,
}

impl FadingFit {
    pub fn model_name(&self) -> &'static str {
        match self.model {
            FadingModel::Rician { .. } => "rician",
            FadingModel::Hoyt { .. } => "hoyt",
        }
    }

    /// Rician K = s²/(2σ²); None for a Hoyt fit.
    pub fn k_factor(&self) -> Option<f64> {
        match self.model {
            FadingModel::Rician { s, sigma } => Some(s * s / (2.0 * sigma * sigma)),
            FadingModel::Hoyt { .. } => None,
        }
    }

    /// Hoyt axial ratio q; None for a Rician fit.
    pub fn q(&self) -> Option<f64> {
        match self.model {
            FadingModel::Hoyt { q, .. } => Some(q),
            FadingModel::Rician { .. } => None,
        }
    }
}

fn require_fit_preconditions(ens: &EnvelopeEnsemble) -> Result<()> {
    if ens.samples.len() < 100 {
        return Err(Error::Validation(format!(
            "model fitting needs at least 100 samples, got {}",
            ens.samples.len()
        )));
    }
    if ens.samples.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
        return Err(Error::Validation(
            "model fitting needs strictly positive finite envelopes (both densities vanish at r = 0)"
                .into(),
        ));
    }
    Ok(())
}

/// Sum `f` over the samples in fixed-size chunks: chunk partials may be
/// computed in parallel, but they are always combined in chunk order, so the
/// result is bit-stable for any worker count.
fn chunked_sum<F>(samples: &[f64], f: F) -> f64
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    const CHUNK: usize = 4096;
    let n_chunks = samples.len().div_ceil(CHUNK);
    let partials = par::map_indexed(n_chunks, |ci| {
        let lo = ci * CHUNK;
        let hi = (lo + CHUNK).min(samples.len());
        Ok(samples[lo..hi].iter().map(|&r| f(r)).sum::<f64>())
    })
    .expect("chunk sums are infallible");
    partials.iter().sum()
}

/// Cached sufficient statistics: only the Bessel term of either
/// log-likelihood depends on the parameters sample-by-sample; Σln r and Σr²
/// are computed once per fit.
struct SampleStats<'a> {
    samples: &'a [f64],
    n: f64,
    sum_ln: f64,
    sum_sq: f64,
}

impl<'a> SampleStats<'a> {
    fn new(samples: &'a [f64]) -> Self {
        SampleStats {
            samples,
            n: samples.len() as f64,
            sum_ln: chunked_sum(samples, f64::ln),
            sum_sq: chunked_sum(samples, |r| r * r),
        }
    }

    /// Σᵢ ln f_Rician(rᵢ; s, σ).
    fn rician_ll(&self, s: f64, sigma: f64) -> f64 {
        let s2 = sigma * sigma;
        let bessel = if s == 0.0 {
            0.0
        } else {
            let c = s / s2;
            chunked_sum(self.samples, |r| log_i0_raw(r * c))
        };
        self.sum_ln - self.n * s2.ln() - (self.sum_sq + self.n * s * s) / (2.0 * s2) + bessel
    }

    /// Σᵢ ln f_Hoyt(rᵢ; q, Ω).
    fn hoyt_ll(&self, q: f64, omega: f64) -> f64 {
        let q2 = q * q;
        let denom = 4.0 * q2 * omega;
        let c = (1.0 - q2 * q2) / denom;
        let bessel = if c == 0.0 {
            0.0
        } else {
            chunked_sum(self.samples, |r| log_i0_raw(c * r * r))
        };
        self.n * ((1.0 + q2) / (q * omega)).ln() + self.sum_ln
            - (1.0 + q2) * (1.0 + q2) * self.sum_sq / denom
            + bessel
    }
}

/// Golden-section maximization of `f` on [lo, hi] down to a bracket width of
/// `rel_tol · max(|hi|, 1)`; deterministic, no derivatives. Returns the
/// located argmax.
fn golden_max<F: Fn(f64) -> f64>(mut lo: f64, mut hi: f64, rel_tol: f64, f: &F) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let tol = rel_tol * hi.abs().max(1.0);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Two-parameter deterministic coordinate ascent: golden-section line search
/// per parameter in a fixed order, bracket re-centered on the current value
/// each sweep. Exploration runs wide at [`COARSE_TOL`]; once a sweep stops
/// moving the iterate, the searches tighten to [`SEARCH_TOL`] over a bracket
/// just wide enough to hold the residual error, which cuts the likelihood
/// evaluations several-fold without changing the located maximum. Returns
/// (params, loglik, hit_bound).
fn coordinate_ascent<F>(
    mut p: [f64; 2],
    bounds: [(f64, f64); 2],
    loglik: F,
) -> Result<([f64; 2], f64, bool)>
where
    F: Fn(&[f64; 2]) -> f64,
{
    let mut ll = loglik(&p);
    let mut coarse = true;
    // Brackets span [center/ratio, center·ratio]; refinement hugs the
    // iterate, but any search that pins at an interior bracket edge forces a
    // re-expansion, so a narrow bracket can never trap the ascent short of
    // the maximum. Edges clipped to the parameter bounds are exempt — pinning
    // there is legitimate convergence onto a bounded optimum.
    let mut ratio = 4.0_f64;
    let mut tol = COARSE_TOL;
    for _ in 0..MAX_SWEEPS {
        let mut max_move = 0.0f64;
        let mut edge_pinned = false;
        for i in 0..2 {
            let (lo_bound, hi_bound) = bounds[i];
            let center = p[i].max(lo_bound);
            let lo = (center / ratio).max(lo_bound);
            let hi = (center * ratio).max(lo_bound * 4.0).min(hi_bound);
            if hi <= lo {
                p[i] = lo_bound;
                continue;
            }
            let f = |x: f64| {
                let mut q = p;
                q[i] = x;
                loglik(&q)
            };
            let best = golden_max(lo, hi, tol, &f);
            let width = hi - lo;
            edge_pinned |= (lo > lo_bound && best - lo < 0.01 * width)
                || (hi < hi_bound && hi - best < 0.01 * width);
            max_move = max_move.max((best - p[i]).abs() / p[i].abs().max(1.0));
            p[i] = best;
        }
        let new_ll = loglik(&p);
        let improved = new_ll - ll;
        ll = new_ll;
        eprintln!("sweep: coarse={coarse} ratio={ratio:.4} tol={tol:.1e} move={max_move:.2e} pinned={edge_pinned}");
        if coarse {
            // The coarse searches resolve each parameter to ~COARSE_TOL at
            // best; once the sweep movement falls into that jitter the
            // maximum is localized and refinement can take over.
            if max_move < 10.0 * COARSE_TOL && !edge_pinned {
                coarse = false;
            }
            ratio = 4.0;
            tol = COARSE_TOL;
        } else if tol <= SEARCH_TOL
            && max_move < 10.0 * SEARCH_TOL
            && improved.abs() <= 1e-10 * (1.0 + ll.abs())
        {
            // The line searches resolve each parameter to ~4·SEARCH_TOL at
            // best, so the settle threshold must sit above that jitter; the
            // tol guard makes sure the deciding sweep ran at full precision.
            let hit = p
                .iter()
                .zip(&bounds)
                .any(|(&x, &(lo, _))| lo > 0.0 && x <= lo * 4.0);
            return Ok((p, ll, hit));
        } else {
            // Refinement tracks the iterate: each sweep brackets ~50× and
            // resolves ~1/10 of the previous movement, so the cost of a line
            // search stays flat while the moves shrink geometrically.
            ratio = if edge_pinned {
                4.0
            } else {
                (1.0 + 50.0 * max_move).clamp(1.0 + 1e-6, 4.0)
            };
            tol = (0.1 * max_move).clamp(SEARCH_TOL, COARSE_TOL);
        }
    }
    Err(Error::Convergence(format!(
        "coordinate search did not settle within {MAX_SWEEPS} sweeps (params {p:?}, loglik {ll})"
    )))
}

/// Moment summary used by both initializers.
fn moments(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let m2 = samples.iter().map(|r| r * r).sum::<f64>() / n;
    let m4 = samples.iter().map(|r| r.powi(4)).sum::<f64>() / n;
    (m2, m4)
}

/// Maximum-likelihood Rician fit, method-of-moments initialized.
pub fn fit_rician(ens: &EnvelopeEnsemble) -> Result<FadingFit> {
    require_fit_preconditions(ens)?;
    let samples = &ens.samples;
    let (m2, m4) = moments(samples);
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 1e-14 * hi.abs() {
        // Dispersion-free data: the likelihood is unbounded as σ → 0 with
        // s at the common value, so report the pinned optimum directly. The
        // generic formula would subtract two ~1e24 terms at the σ floor;
        // with r = s the exponent and the Bessel asymptote cancel exactly,
        // leaving ln f = ln s − 2 ln σ − ½·ln(2π s²/σ²).
        let s = hi;
        let sigma = SIGMA_FLOOR;
        let x = s * s / (sigma * sigma);
        let per_sample = s.ln() - 2.0 * sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI * x).ln();
        return Ok(FadingFit {
            model: FadingModel::Rician { s, sigma },
            log_likelihood: samples.len() as f64 * per_sample,
            hit_bound: true,
        });
    }

    // ρ = m4/m2² determines K: ρ = 1 + (1+2K)/(1+K)², inverted as
    // K = [(2−ρ) + sqrt(2−ρ)]/(ρ−1) for ρ ∈ (1, 2]; ρ ≥ 2 is Rayleigh-like.
    let rho = (m4 / (m2 * m2)).max(1.0 + 1e-9);
    let k0 = if rho >= 2.0 { 0.0 } else { ((2.0 - rho) + (2.0 - rho).sqrt()) / (rho - 1.0) };
    let s0 = (m2 * k0 / (1.0 + k0)).sqrt();
    let sigma0 = (m2 / (2.0 * (1.0 + k0))).sqrt().max(SIGMA_FLOOR * 10.0);

    let rms = m2.sqrt();
    let stats = SampleStats::new(samples);
    let loglik = |p: &[f64; 2]| stats.rician_ll(p[0], p[1]);
    // s may legitimately sit at 0 (Rayleigh), so its lower bound is not a
    // "hit"; encode it as a zero bound.
    let start = [s0.max(1e-6 * rms), sigma0];
    let (p, ll, hit) = coordinate_ascent(start, [(0.0, 64.0 * rms), (SIGMA_FLOOR, 64.0 * rms)], loglik)?;
    Ok(FadingFit { model: FadingModel::Rician { s: p[0], sigma: p[1] }, log_likelihood: ll, hit_bound: hit })
}

/// Maximum-likelihood Hoyt fit, moment-ratio initialized.
pub fn fit_hoyt(ens: &EnvelopeEnsemble) -> Result<FadingFit> {
    require_fit_preconditions(ens)?;
    let samples = &ens.samples;
    let (m2, m4) = moments(samples);
    // ρ = (3 + 2u + 3u²)/(1+u)² with u = q²: ρ=2 at q=1 (Rayleigh), ρ→3 as
    // q→0. Invert as u = [(ρ−1) − 2·sqrt(ρ−2)]/(3−ρ) on ρ ∈ (2, 3).
    let rho = m4 / (m2 * m2);
    let q0 = if rho <= 2.0 {
        1.0
    } else if rho >= 3.0 {
        0.05
    } else {
        (((rho - 1.0) - 2.0 * (rho - 2.0).sqrt()) / (3.0 - rho)).max(Q_FLOOR * 100.0).sqrt()
    };

    let stats = SampleStats::new(samples);
    let loglik = |p: &[f64; 2]| stats.hoyt_ll(p[0], p[1]);
    let (p, ll, hit) = coordinate_ascent([q0.min(1.0), m2], [(Q_FLOOR, 1.0), (1e-9 * m2, 64.0 * m2)], loglik)?;
    Ok(FadingFit { model: FadingModel::Hoyt { q: p[0], omega: p[1] }, log_likelihood: ll, hit_bound: hit })
}

/// Both fits plus the likelihood decision between them.
#[derive(Clone, Debug, Serialize)]
pub struct ModelSelection {
    pub rician: FadingFit,
    pub hoyt: FadingFit,
    /// "rician" or "hoyt" — whichever log-likelihood is higher (ties go to
    /// Rician, deterministically).
    pub selected: String,
}

impl ModelSelection {
    pub fn best(&self) -> &FadingFit {
        if self.selected == "hoyt" {
            &self.hoyt
        } else {
            &self.rician
        }
    }
}

/// Fit both families and keep the higher log-likelihood.
pub fn select_model(ens: &EnvelopeEnsemble) -> Result<ModelSelection> {
    let rician = fit_rician(ens)?;
    let hoyt = fit_hoyt(ens)?;
    let selected = if hoyt.log_likelihood > rician.log_likelihood { "hoyt" } else { "rician" };
    Ok(ModelSelection { rician, hoyt, selected: selected.to_string() })
}

/// Synthetic Rician envelopes: |(s + σX) + j·σY| with X, Y standard normal.
/// Deterministic in the seed.
pub fn sample_rician(n: usize, s: f64, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal is valid");
    (0..n)
        .map(|_| {
            let x = s + sigma * normal.sample(&mut rng);
            let y = sigma * normal.sample(&mut rng);
            x.hypot(y)
        })
        .collect()
}

/// Synthetic Hoyt envelopes: |σ_X·X + j·σ_Y·Y| with σ_X² = Ω/(1+q²) and
/// σ_Y² = q²Ω/(1+q²). Deterministic in the seed.
pub fn sample_hoyt(n: usize, q: f64, omega: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal is valid");
    let sx = (omega / (1.0 + q * q)).sqrt();
    let sy = (q * q * omega / (1.0 + q * q)).sqrt();
    (0..n)
        .map(|_| {
            let x = sx * normal.sample(&mut rng);
            let y = sy * normal.sample(&mut rng);
            x.hypot(y)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn meta() -> RingMeta {
        RingMeta { r_min: 0.3, r_max: 0.4, center: Point::new(0.0, 0.0), wall: "free_space".into() }
    }

    fn ensemble_of(samples: Vec<f64>) -> EnvelopeEnsemble {
        EnvelopeEnsemble { samples, rings: vec![meta()] }
    }

    #[test]
    fn ring_ensemble_selection() {
        // A uniform-magnitude synthetic field on a grid centered at origin.
        let spec = GridSpec { nx: 21, ny: 21, x0: -1.0, y0: -1.0, dx: 0.1, dy: 0.1 };
        let values = vec![Complex64::new(0.0, 2.5); spec.len()];
        let mut masked = vec![false; spec.len()];
        let field = FieldGrid { spec, values: values.clone(), masked: masked.clone() };
        let center = Point::new(0.0, 0.0);
        let samples = ring_ensemble(&field, center, 0.35, 0.65).unwrap();
        // Every sample equals the uniform magnitude, and the count equals the
        // number of grid points inside the annulus.
        let expected = (0..spec.len())
            .filter(|&i| {
                let d = spec.point_at(i).dist(center);
                (0.35..=0.65).contains(&d)
            })
            .count();
        assert_eq!(samples.len(), expected);
        assert!(samples.iter().all(|&s| s == 2.5));

        // Masking every annulus point empties the ring.
        for (i, m) in masked.iter_mut().enumerate() {
            if (0.35..=0.65).contains(&spec.point_at(i).dist(center)) {
                *m = true;
            }
        }
        let field = FieldGrid { spec, values, masked };
        assert!(ring_ensemble(&field, center, 0.35, 0.65).is_err());
        assert!(ring_ensemble(&field, center, 0.65, 0.35).is_err());
    }

    #[test]
    fn rms_normalize_examples() {
        let e = rms_normalize(&[2.0, 2.0, 2.0], meta()).unwrap();
        assert_eq!(e.samples, vec![1.0, 1.0, 1.0]);

        let e = rms_normalize(&[3.0, 4.0], meta()).unwrap();
        assert_relative_eq!(e.samples[0], 3.0 / 12.5f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(e.samples[1], 4.0 / 12.5f64.sqrt(), epsilon = 1e-15);

        // Scale invariance.
        let e7 = rms_normalize(&[21.0, 28.0], meta()).unwrap();
        assert_relative_eq!(e7.samples[0], e.samples[0], epsilon = 1e-15);
        assert_relative_eq!(e7.samples[1], e.samples[1], epsilon = 1e-15);

        assert!(rms_normalize(&[], meta()).is_err());
        assert!(rms_normalize(&[0.0, 0.0], meta()).is_err());
    }

    #[test]
    fn pooling_preserves_unit_rms() {
        let a = rms_normalize(&[1.0, 2.0, 3.0, 4.0], meta()).unwrap();
        let b = rms_normalize(&[10.0, 11.0], meta()).unwrap();
        let pooled = pool(&[a, b]).unwrap();
        assert_eq!(pooled.samples.len(), 6);
        assert_eq!(pooled.rings.len(), 2);
        let ms = pooled.samples.iter().map(|r| r * r).sum::<f64>() / 6.0;
        assert_abs_diff_eq!(ms.sqrt(), 1.0, epsilon = 1e-9);
        assert!(pool(&[]).is_err());
    }

    #[test]
    fn empirical_pdf_integrates_to_one() {
        let samples = sample_rician(5000, 1.0, 0.5, 42);
        let ens = rms_normalize(&samples, meta()).unwrap();
        for bins in [2, 7, 50] {
            let pdf = empirical_pdf(&ens, bins).unwrap();
            let integral: f64 = pdf
                .densities
                .iter()
                .enumerate()
                .map(|(j, d)| d * (pdf.bin_edges[j + 1] - pdf.bin_edges[j]))
                .sum();
            assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-9);
            assert_eq!(pdf.bin_count, bins);
            assert_eq!(pdf.n_samples, 5000);
        }
        // Pooled ensembles keep the property.
        let other = rms_normalize(&sample_hoyt(3000, 0.4, 1.0, 7), meta()).unwrap();
        let pooled = pool(&[ens, other]).unwrap();
        let pdf = empirical_pdf(&pooled, 50).unwrap();
        let integral: f64 = pdf
            .densities
            .iter()
            .enumerate()
            .map(|(j, d)| d * (pdf.bin_edges[j + 1] - pdf.bin_edges[j]))
            .sum();
        assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-9);

        assert!(empirical_pdf(&ensemble_of(vec![1.0; 10]), 50).is_err()); // degenerate range
        assert!(empirical_pdf(&ensemble_of(vec![1.0, 2.0]), 1).is_err());
    }

    #[test]
    fn freedman_diaconis_reasonable() {
        let samples = sample_rician(10000, 1.0, 0.3, 3);
        let ens = rms_normalize(&samples, meta()).unwrap();
        let b = freedman_diaconis_bins(&ens);
        assert!((10..=200).contains(&b), "suggested {b} bins");
        assert_eq!(freedman_diaconis_bins(&ensemble_of(vec![1.0; 100])), 1);
    }

    #[test]
    fn rician_pdf_reduces_to_rayleigh() {
        let sigma = 0.7f64;
        for r in [0.1f64, 0.5, 1.0, 2.0] {
            let want = (r / (sigma * sigma)) * (-r * r / (2.0 * sigma * sigma)).exp();
            assert_relative_eq!(rician_pdf(r, 0.0, sigma).unwrap(), want, epsilon = 1e-12);
            // Hoyt with q = 1 and Ω = 2σ² is the same Rayleigh density.
            assert_relative_eq!(
                hoyt_pdf(r, 1.0, 2.0 * sigma * sigma).unwrap(),
                want,
                epsilon = 1e-10
            );
        }
        assert_eq!(rician_pdf(0.0, 1.0, 0.5).unwrap(), 0.0);
        assert!(rician_pdf(-0.1, 1.0, 0.5).is_err());
        assert!(rician_pdf(1.0, -1.0, 0.5).is_err());
        assert!(rician_pdf(1.0, 1.0, 0.0).is_err());
        assert!(hoyt_pdf(1.0, 0.0, 1.0).is_err());
        assert!(hoyt_pdf(1.0, 1.2, 1.0).is_err());
        assert!(hoyt_pdf(1.0, 0.5, -1.0).is_err());
    }

    #[test]
    fn pdfs_integrate_to_one() {
        // Simpson quadrature oracle on a generous envelope range.
        let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize| -> f64 {
            let h = (b - a) / n as f64;
            let mut acc = f(a) + f(b);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(a + i as f64 * h);
            }
            acc * h / 3.0
        };
        let cases: Vec<Box<dyn Fn(f64) -> f64>> = vec![
            Box::new(|r| rician_pdf(r, 1.0, 0.5).unwrap()),
            Box::new(|r| rician_pdf(r, 3.0, 0.2).unwrap()),
            Box::new(|r| hoyt_pdf(r, 0.3, 1.0).unwrap()),
            Box::new(|r| hoyt_pdf(r, 0.9, 2.5).unwrap()),
        ];
        for f in &cases {
            let integral = simpson(&|r| f(r), 0.0, 12.0, 4000);
            assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn rician_fit_recovers_k() {
        // True K = 1: s = 1, σ = 1/sqrt(2) (m2 = 2 before normalization;
        // normalization rescales both but K is scale-free).
        let samples = sample_rician(100_000, 1.0, std::f64::consts::FRAC_1_SQRT_2, 11);
        let ens = rms_normalize(&samples, meta()).unwrap();
        let fit = fit_rician(&ens).unwrap();
        let k = fit.k_factor().unwrap();
        assert!((0.9..=1.1).contains(&k), "fitted K = {k}");
        assert!(!fit.hit_bound);
        assert!(fit.log_likelihood.is_finite());
    }

    #[test]
    fn hoyt_fit_recovers_q() {
        let samples = sample_hoyt(100_000, 0.3, 1.0, 12);
        let ens = rms_normalize(&samples, meta()).unwrap();
        let fit = fit_hoyt(&ens).unwrap();
        let q = fit.q().unwrap();
        assert!((0.27..=0.33).contains(&q), "fitted q = {q}");
        assert!(!fit.hit_bound);
    }

    #[test]
    fn degenerate_data_flags_bound() {
        let ens = ensemble_of(vec![1.0; 200]);
        let fit = fit_rician(&ens).unwrap();
        assert!(fit.hit_bound);
        match fit.model {
            FadingModel::Rician { s, sigma } => {
                assert_relative_eq!(s, 1.0, epsilon = 1e-9);
                assert!(sigma <= 1e-11);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn fit_requires_enough_samples() {
        let ens = ensemble_of(sample_rician(99, 1.0, 0.5, 1));
        assert!(fit_rician(&ens).is_err());
        assert!(fit_hoyt(&ens).is_err());
    }

    #[test]
    fn select_model_distinguishes_families() {
        let rician_data = rms_normalize(&sample_rician(20_000, 1.5, 0.4, 21), meta()).unwrap();
        let pick = select_model(&rician_data).unwrap();
        assert_eq!(pick.selected, "rician");
        assert_eq!(pick.best().model_name(), "rician");
        assert!(pick.rician.log_likelihood >= pick.hoyt.log_likelihood);

        let hoyt_data = rms_normalize(&sample_hoyt(20_000, 0.2, 1.0, 22), meta()).unwrap();
        let pick = select_model(&hoyt_data).unwrap();
        assert_eq!(pick.selected, "hoyt");
    }

    #[test]
    fn mle_consistency_improves_with_samples() {
        // Average |K̂ − K| over five seeded trials must not grow as the
        // sample count steps 1e3 → 1e4 → 1e5.
        let true_k = 1.0;
        let (s, sigma) = (1.0, std::f64::consts::FRAC_1_SQRT_2);
        let mut errors = Vec::new();
        for &n in &[1000usize, 10_000, 100_000] {
            let mut total = 0.0;
            for seed in 0..5u64 {
                let data = sample_rician(n, s, sigma, 100 + seed);
                let ens = rms_normalize(&data, meta()).unwrap();
                let k = fit_rician(&ens).unwrap().k_factor().unwrap();
                total += (k - true_k).abs();
            }
            errors.push(total / 5.0);
        }
        assert!(
            errors[2] <= errors[0] && errors[1] <= errors[0] * 1.5,
            "K-error did not shrink: {errors:?}"
        );
    }

    #[test]
    fn scale_equivariance_of_fits() {
        let base = sample_rician(5000, 1.2, 0.5, 31);
        let scaled: Vec<f64> = base.iter().map(|r| 7.0 * r).collect();
        let fit_a = fit_rician(&ensemble_of(base.clone())).unwrap();
        let fit_b = fit_rician(&ensemble_of(scaled.clone())).unwrap();
        match (&fit_a.model, &fit_b.model) {
            (FadingModel::Rician { s: s1, sigma: g1 }, FadingModel::Rician { s: s2, sigma: g2 }) => {
                assert_relative_eq!(s2 / s1, 7.0, max_relative = 1e-6);
                assert_relative_eq!(g2 / g1, 7.0, max_relative = 1e-6);
            }
            _ => unreachable!(),
        }
        assert_relative_eq!(
            fit_a.k_factor().unwrap(),
            fit_b.k_factor().unwrap(),
            max_relative = 1e-6
        );

        let ha = fit_hoyt(&ensemble_of(base)).unwrap();
        let hb = fit_hoyt(&ensemble_of(scaled)).unwrap();
        match (&ha.model, &hb.model) {
            (FadingModel::Hoyt { q: q1, omega: o1 }, FadingModel::Hoyt { q: q2, omega: o2 }) => {
                assert_relative_eq!(q1, q2, max_relative = 1e-6);
                assert_relative_eq!(o2 / o1, 49.0, max_relative = 1e-6);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn samplers_are_seed_deterministic() {
        assert_eq!(sample_rician(50, 1.0, 0.5, 9), sample_rician(50, 1.0, 0.5, 9));
        assert_ne!(sample_rician(50, 1.0, 0.5, 9), sample_rician(50, 1.0, 0.5, 10));
        assert_eq!(sample_hoyt(50, 0.4, 1.0, 9), sample_hoyt(50, 0.4, 1.0, 9));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn rms_normalize_always_unit_rms(
            samples in prop::collection::vec(0.001f64..100.0, 3..200),
        ) {
            let e = rms_normalize(&samples, meta()).unwrap();
            let ms = e.samples.iter().map(|r| r * r).sum::<f64>() / e.samples.len() as f64;
            prop_assert!((ms.sqrt() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn pdf_nonnegative_and_finite(
            r in 0.0f64..20.0,
            s in 0.0f64..5.0,
            sigma in 0.01f64..3.0,
            q in 0.01f64..1.0,
            omega in 0.01f64..5.0,
        ) {
            let fr = rician_pdf(r, s, sigma).unwrap();
            prop_assert!(fr.is_finite() && fr >= 0.0);
            let fh = hoyt_pdf(r, q, omega).unwrap();
            prop_assert!(fh.is_finite() && fh >= 0.0);
        }
    }
}
