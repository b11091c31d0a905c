//! Angular-spectrum analysis of fields sampled on a line aperture.
//!
//! Scattered fields are sampled at uniform points on a segment, optionally
//! windowed and zero-padded, then discrete-Fourier transformed. With the
//! e^{+jωt} phasor convention a plane wave arriving from direction θ carries
//! the spatial factor e^{−j k0 ξ sinθ} along the aperture, so the
//! positive-exponent transform places its energy at the bin whose spatial
//! frequency is +k0 sinθ. Bins beyond |k0| are evanescent and dropped; the
//! surviving magnitudes are normalized to peak 1 so different walls compare
//! by shape.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{Point, MU0};
use crate::greens::{greens, greens_free_space};
use crate::par;
use crate::scenario::Scenario;

/// Complex field samples at uniform points on a line segment.
#[derive(Clone, Debug, Serialize)]
pub struct ApertureSampling {
    pub start: Point,
    pub end: Point,
    pub n_samples: usize,
    /// Free-space wavelength that defines the Nyquist limit and the sinθ map.
    pub wavelength: f64,
    pub samples: Vec<Complex64>,
}

impl ApertureSampling {
    /// Wrap externally produced samples, enforcing the sampling invariants.
    pub fn from_samples(
        start: Point,
        end: Point,
        wavelength: f64,
        samples: Vec<Complex64>,
    ) -> Result<Self> {
        let n = samples.len();
        check_sampling(start, end, wavelength, n)?;
        Ok(ApertureSampling { start, end, n_samples: n, wavelength, samples })
    }

    /// Sample a caller-supplied field function at n uniform points.
    pub fn sample_with<F>(
        start: Point,
        end: Point,
        wavelength: f64,
        n: usize,
        field: F,
    ) -> Result<Self>
    where
        F: Fn(Point) -> Result<Complex64> + Sync + Send,
    {
        check_sampling(start, end, wavelength, n)?;
        let samples = par::map_indexed(n, |i| {
            let t = i as f64 / (n - 1) as f64;
            field(Point::new(
                start.x + t * (end.x - start.x),
                start.y + t * (end.y - start.y),
            ))
        })?;
        Ok(ApertureSampling { start, end, n_samples: n, wavelength, samples })
    }

    /// Distance between adjacent sample points.
    pub fn spacing(&self) -> f64 {
        self.start.dist(self.end) / (self.n_samples - 1) as f64
    }
}

fn check_sampling(start: Point, end: Point, wavelength: f64, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Validation(format!("aperture needs at least 2 samples, got {n}")));
    }
    if !(wavelength > 0.0) {
        return Err(Error::Validation(format!("wavelength must be positive, got {wavelength}")));
    }
    let length = start.dist(end);
    if !(length > 0.0) {
        return Err(Error::Validation("aperture endpoints coincide".into()));
    }
    let spacing = length / (n - 1) as f64;
    if spacing > wavelength / 2.0 * (1.0 + 1e-9) {
        return Err(Error::Config(format!(
            "aperture spacing {spacing:.6e} m exceeds the Nyquist limit λ/2 = {:.6e} m; \
             increase n_samples or shorten the aperture",
            wavelength / 2.0
        )));
    }
    Ok(())
}

/// Sample the scattered field (total minus free-space incident) of the
/// scenario's transmit array on the segment [start, end].
pub fn sample_aperture(
    scenario: &Scenario,
    excitation: &[Complex64],
    start: Point,
    end: Point,
    n: usize,
) -> Result<ApertureSampling> {
    let elements = scenario.tx.element_positions();
    if excitation.len() != elements.len() {
        return Err(Error::Shape(format!(
            "excitation has {} entries but the transmit array has {} elements",
            excitation.len(),
            elements.len()
        )));
    }
    if !scenario.room.contains(start) || !scenario.room.contains(end) {
        return Err(Error::Validation(format!(
            "aperture [({:.4}, {:.4}) → ({:.4}, {:.4})] m must lie inside the room",
            start.x, start.y, end.x, end.y
        )));
    }
    let k0 = scenario.room.wavenumber();
    let j_omega_mu = Complex64::new(0.0, scenario.room.omega() * MU0);
    ApertureSampling::sample_with(start, end, scenario.room.wavelength(), n, |p| {
        let mut scattered = Complex64::new(0.0, 0.0);
        for (w, &src) in excitation.iter().zip(&elements) {
            if w.norm_sqr() == 0.0 {
                continue;
            }
            let total = greens(&scenario.wall, &scenario.room, &scenario.limits, p, src)?;
            let incident = greens_free_space(p, src, k0)?;
            scattered += j_omega_mu * w * (total - incident);
        }
        Ok(scattered)
    })
}

/// Taper applied to the samples before transforming.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Window {
    None,
    Hann,
}

impl Window {
    pub fn name(self) -> &'static str {
        match self {
            Window::None => "none",
            Window::Hann => "hann",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "none" => Ok(Window::None),
            "hann" => Ok(Window::Hann),
            other => Err(Error::Parse(format!("unknown window '{other}' (expected none or hann)"))),
        }
    }
}

/// Propagating-bin magnitudes on a symmetric sinθ grid, peak-normalized.
#[derive(Clone, Debug, Serialize)]
pub struct AngularSpectrum {
    pub sin_theta: Vec<f64>,
    pub magnitude: Vec<f64>,
}

/// Windowed, zero-padded, positive-exponent DFT bins in natural index order,
/// before the evanescent discard and normalization.
pub(crate) fn raw_spectrum_bins(
    ap: &ApertureSampling,
    window: Window,
    zero_pad: usize,
) -> Result<Vec<Complex64>> {
    let n = ap.n_samples;
    if n < 8 {
        return Err(Error::Validation(format!("angular spectrum needs at least 8 samples, got {n}")));
    }
    if zero_pad < 1 {
        return Err(Error::Validation(format!("zero-pad multiple must be ≥ 1, got {zero_pad}")));
    }
    let total = n * zero_pad;
    let mut buf = vec![Complex64::new(0.0, 0.0); total];
    for (i, &s) in ap.samples.iter().enumerate() {
        let w = match window {
            Window::None => 1.0,
            Window::Hann => {
                0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
            }
        };
        buf[i] = w * s;
    }
    // The unnormalized inverse plan is the positive-exponent transform
    // Σ s_n e^{+j2πmn/N}, which maps an e^{−jk0 ξ sinθ} wave to a bin at
    // positive sinθ.
    FftPlanner::new().plan_fft_inverse(total).process(&mut buf);
    Ok(buf)
}

/// Transform an aperture sampling into its propagating angular spectrum.
pub fn angular_spectrum(
    ap: &ApertureSampling,
    window: Window,
    zero_pad: usize,
) -> Result<AngularSpectrum> {
    let bins = raw_spectrum_bins(ap, window, zero_pad)?;
    let total = bins.len();
    let spacing = ap.spacing();
    // Signed bin m maps to sinθ = m·λ0/(N·Δ). Keep |m| ≤ (N−1)/2 so the grid
    // is symmetric about 0 (for even N this drops the unpaired −N/2 bin),
    // then drop evanescent bins with |sinθ| > 1.
    let half = (total - 1) / 2;
    let bin_width = ap.wavelength / (total as f64 * spacing);
    let mut sin_theta = Vec::new();
    let mut magnitude = Vec::new();
    for ms in -(half as i64)..=(half as i64) {
        let st = ms as f64 * bin_width;
        if st.abs() > 1.0 {
            continue;
        }
        let idx = ms.rem_euclid(total as i64) as usize;
        sin_theta.push(st);
        magnitude.push(bins[idx].norm());
    }
    let peak = magnitude.iter().cloned().fold(0.0f64, f64::max);
    if peak > 0.0 {
        for m in &mut magnitude {
            *m /= peak;
        }
    }
    Ok(AngularSpectrum { sin_theta, magnitude })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    /// Plane wave arriving from direction sinθ0, sampled along the x axis.
    fn plane_wave_aperture(sin_theta0: f64, n: usize, spacing: f64) -> ApertureSampling {
        let lambda = 1.0;
        let k0 = 2.0 * std::f64::consts::PI / lambda;
        let end_x = spacing * (n - 1) as f64;
        ApertureSampling::sample_with(
            Point::new(0.0, 0.0),
            Point::new(end_x, 0.0),
            lambda,
            n,
            |p| Ok(Complex64::new(0.0, -k0 * sin_theta0 * p.x).exp()),
        )
        .unwrap()
    }

    fn peak_position(spec: &AngularSpectrum) -> f64 {
        let (i, _) = spec
            .magnitude
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        spec.sin_theta[i]
    }

    /// Indices of strict local maxima above `floor`.
    fn local_maxima(spec: &AngularSpectrum, floor: f64) -> Vec<usize> {
        let m = &spec.magnitude;
        (1..m.len() - 1)
            .filter(|&i| m[i] > floor && m[i] > m[i - 1] && m[i] > m[i + 1])
            .collect()
    }

    #[test]
    fn sampling_invariants_and_closed_form() {
        // n = 2 keeps exactly the endpoints.
        let ap = ApertureSampling::sample_with(
            Point::new(1.0, 2.0),
            Point::new(1.3, 2.4),
            1.0,
            2,
            |p| Ok(Complex64::new(p.x, p.y)),
        )
        .unwrap();
        assert_eq!(ap.samples, vec![Complex64::new(1.0, 2.0), Complex64::new(1.3, 2.4)]);
        assert_relative_eq!(ap.spacing(), 0.5, epsilon = 1e-15);

        // A synthetic plane wave matches its closed form at every point.
        let sin_t = 0.37;
        let ap = plane_wave_aperture(sin_t, 16, 0.25);
        for (i, s) in ap.samples.iter().enumerate() {
            let x = 0.25 * i as f64;
            let want = Complex64::new(0.0, -2.0 * std::f64::consts::PI * sin_t * x).exp();
            assert_abs_diff_eq!((s - want).norm(), 0.0, epsilon = 1e-12);
        }

        // Nyquist and degenerate-segment violations.
        let coarse = ApertureSampling::from_samples(
            Point::new(0.0, 0.0),
            Point::new(10.0, 0.0),
            1.0,
            vec![Complex64::new(1.0, 0.0); 4],
        );
        assert!(matches!(coarse, Err(Error::Config(_))));
        assert!(ApertureSampling::from_samples(
            Point::new(0.0, 0.0),
            Point::new(0.0, 0.0),
            1.0,
            vec![Complex64::new(1.0, 0.0); 4],
        )
        .is_err());
        assert!(ApertureSampling::from_samples(
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            1.0,
            vec![Complex64::new(1.0, 0.0)],
        )
        .is_err());
    }

    #[test]
    fn plane_wave_peaks_at_its_arrival_angle() {
        let ap = plane_wave_aperture(0.5, 64, 0.25);
        let spec = angular_spectrum(&ap, Window::None, 4).unwrap();
        // 256 padded bins at λ/4 spacing → sinθ resolution 1/64.
        let bin = 1.0 / 64.0;
        assert!((peak_position(&spec) - 0.5).abs() <= bin + 1e-12);

        // Off-grid angle still lands within one bin.
        let ap = plane_wave_aperture(-0.313, 64, 0.25);
        let spec = angular_spectrum(&ap, Window::None, 4).unwrap();
        assert!((peak_position(&spec) + 0.313).abs() <= bin + 1e-12);

        // The sinθ grid is symmetric about zero and clipped to [−1, 1].
        let n = spec.sin_theta.len();
        for i in 0..n {
            assert_abs_diff_eq!(spec.sin_theta[i] + spec.sin_theta[n - 1 - i], 0.0, epsilon = 1e-12);
            assert!(spec.sin_theta[i].abs() <= 1.0);
        }
        // Peak-normalized magnitudes.
        let max = spec.magnitude.iter().cloned().fold(0.0f64, f64::max);
        assert_abs_diff_eq!(max, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_plane_waves_give_equal_peaks() {
        let lambda = 1.0;
        let k0 = 2.0 * std::f64::consts::PI / lambda;
        let ap = ApertureSampling::sample_with(
            Point::new(0.0, 0.0),
            Point::new(0.25 * 63.0, 0.0),
            lambda,
            64,
            |p| {
                Ok(Complex64::new(0.0, -k0 * 0.5 * p.x).exp()
                    + Complex64::new(0.0, k0 * 0.5 * p.x).exp())
            },
        )
        .unwrap();
        let spec = angular_spectrum(&ap, Window::None, 4).unwrap();
        let peaks = local_maxima(&spec, 0.5);
        assert_eq!(peaks.len(), 2, "expected two dominant peaks, got {peaks:?}");
        let bin = 1.0 / 64.0;
        let (a, b) = (peaks[0], peaks[1]);
        assert!((spec.sin_theta[a] + 0.5).abs() <= bin + 1e-12);
        assert!((spec.sin_theta[b] - 0.5).abs() <= bin + 1e-12);
        // Superposition oracle: equal drive amplitudes → equal peak heights.
        let ratio = spec.magnitude[a] / spec.magnitude[b];
        assert!((ratio - 1.0).abs() < 0.05, "peak imbalance {ratio}");
    }

    #[test]
    fn cylindrical_wave_is_angularly_rich() {
        // A nearby line source illuminates the aperture over a wide angular
        // range, so its spectrum has broad support and several lobes rather
        // than a single delta-like peak.
        let lambda = 1.0;
        let k0 = 2.0 * std::f64::consts::PI / lambda;
        let src = Point::new(7.875, 1.0);
        let ap = ApertureSampling::sample_with(
            Point::new(0.0, 0.0),
            Point::new(15.75, 0.0),
            lambda,
            64,
            |p| greens_free_space(p, src, k0),
        )
        .unwrap();
        let spec = angular_spectrum(&ap, Window::None, 4).unwrap();
        let plane = angular_spectrum(&plane_wave_aperture(0.5, 64, 0.25), Window::None, 4).unwrap();

        let support = |s: &AngularSpectrum| s.magnitude.iter().filter(|&&m| m > 0.1).count();
        assert!(
            support(&spec) >= 4 * support(&plane),
            "cylindrical support {} vs plane-wave support {}",
            support(&spec),
            support(&plane)
        );
        assert!(
            local_maxima(&spec, 0.05).len() >= 3,
            "expected several lobes, got {:?}",
            local_maxima(&spec, 0.05)
        );
    }

    #[test]
    fn hann_window_suppresses_leakage() {
        // An off-bin plane wave leaks strongly with a rectangular window; the
        // Hann taper pushes distant sidelobes down.
        let ap = plane_wave_aperture(0.313, 64, 0.25);
        let rect = angular_spectrum(&ap, Window::None, 4).unwrap();
        let hann = angular_spectrum(&ap, Window::Hann, 4).unwrap();
        let far_level = |s: &AngularSpectrum| {
            s.sin_theta
                .iter()
                .zip(&s.magnitude)
                .filter(|(&st, _)| (st - 0.313).abs() > 0.3)
                .map(|(_, &m)| m)
                .fold(0.0f64, f64::max)
        };
        assert!(
            far_level(&hann) < 0.2 * far_level(&rect),
            "hann {} vs rect {}",
            far_level(&hann),
            far_level(&rect)
        );
    }

    #[test]
    fn parseval_and_dft_oracle() {
        // Independent O(N²) positive-exponent DFT.
        let naive_dft = |s: &[Complex64]| -> Vec<Complex64> {
            let n = s.len();
            (0..n)
                .map(|m| {
                    (0..n)
                        .map(|k| {
                            s[k] * Complex64::new(
                                0.0,
                                2.0 * std::f64::consts::PI * (m * k) as f64 / n as f64,
                            )
                            .exp()
                        })
                        .sum()
                })
                .collect()
        };
        let ap = plane_wave_aperture(0.4, 16, 0.25);
        for pad in [1usize, 2] {
            let bins = raw_spectrum_bins(&ap, Window::None, pad).unwrap();
            let mut padded = ap.samples.clone();
            padded.resize(16 * pad, Complex64::new(0.0, 0.0));
            let oracle = naive_dft(&padded);
            for (b, o) in bins.iter().zip(&oracle) {
                assert_abs_diff_eq!((b - o).norm(), 0.0, epsilon = 1e-9);
            }
            // Parseval before discard/normalization.
            let time: f64 = ap.samples.iter().map(|s| s.norm_sqr()).sum();
            let freq: f64 = bins.iter().map(|b| b.norm_sqr()).sum::<f64>() / bins.len() as f64;
            assert_relative_eq!(time, freq, max_relative = 1e-9);
        }
    }

    #[test]
    fn aperture_shift_preserves_magnitudes() {
        let lambda = 1.0;
        let k0 = 2.0 * std::f64::consts::PI / lambda;
        let wave = |p: Point| Ok(Complex64::new(0.0, -k0 * 0.5 * p.x).exp());
        let a = ApertureSampling::sample_with(
            Point::new(0.0, 0.0),
            Point::new(15.75, 0.0),
            lambda,
            64,
            wave,
        )
        .unwrap();
        let b = ApertureSampling::sample_with(
            Point::new(0.3, 0.0),
            Point::new(16.05, 0.0),
            lambda,
            64,
            wave,
        )
        .unwrap();
        let sa = angular_spectrum(&a, Window::None, 4).unwrap();
        let sb = angular_spectrum(&b, Window::None, 4).unwrap();
        for (ma, mb) in sa.magnitude.iter().zip(&sb.magnitude) {
            assert_abs_diff_eq!(ma, mb, epsilon = 1e-10);
        }
    }

    #[test]
    fn scattered_field_in_free_space_is_zero() {
        let mut scn = Scenario::reference(1);
        scn.wall = crate::wall::WallModel::FreeSpace;
        let lam = scn.room.wavelength();
        let excitation = vec![Complex64::new(1.0, 0.0)];
        let start = Point::new(0.5 * lam, 0.5 * lam);
        let end = Point::new(0.5 * lam, 29.5 * lam);
        let ap = sample_aperture(&scn, &excitation, start, end, 256).unwrap();
        assert!(ap.samples.iter().all(|s| s.norm() == 0.0));
        // An all-zero aperture transforms to all-zero magnitudes without a
        // normalization blow-up.
        let spec = angular_spectrum(&ap, Window::None, 4).unwrap();
        assert!(spec.magnitude.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn pec_scattered_aperture_is_nontrivial_and_guarded() {
        let mut scn = Scenario::reference(1);
        scn.wall = crate::wall::WallModel::Pec;
        scn.limits.max_image_order = 6;
        let lam = scn.room.wavelength();
        let excitation = vec![Complex64::new(1.0, 0.0)];
        let start = Point::new(0.5 * lam, 0.5 * lam);
        let end = Point::new(0.5 * lam, 29.5 * lam);
        let ap = sample_aperture(&scn, &excitation, start, end, 256).unwrap();
        assert!(ap.samples.iter().any(|s| s.norm() > 0.0));

        // Preconditions: wrong excitation length, aperture leaving the room,
        // Nyquist-violating sampling.
        assert!(matches!(
            sample_aperture(&scn, &[], start, end, 256),
            Err(Error::Shape(_))
        ));
        let outside = Point::new(-lam, 0.5 * lam);
        assert!(sample_aperture(&scn, &excitation, outside, end, 256).is_err());
        assert!(matches!(
            sample_aperture(&scn, &excitation, start, end, 4),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn spectrum_preconditions() {
        let ap = plane_wave_aperture(0.5, 8, 0.25);
        assert!(angular_spectrum(&ap, Window::None, 1).is_ok());
        let short = ApertureSampling::from_samples(
            Point::new(0.0, 0.0),
            Point::new(1.5, 0.0),
            1.0,
            vec![Complex64::new(1.0, 0.0); 7],
        )
        .unwrap();
        assert!(angular_spectrum(&short, Window::None, 4).is_err());
        assert!(angular_spectrum(&ap, Window::None, 0).is_err());
        assert_eq!(Window::from_name("Hann").unwrap(), Window::Hann);
        assert!(Window::from_name("hamming").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn parseval_holds_for_random_signals(
            re in prop::collection::vec(-1.0f64..1.0, 8..48),
            pad in 1usize..4,
        ) {
            let n = re.len();
            let samples: Vec<Complex64> = re
                .iter()
                .enumerate()
                .map(|(i, &r)| Complex64::new(r, (i as f64 * 0.7).sin()))
                .collect();
            let ap = ApertureSampling::from_samples(
                Point::new(0.0, 0.0),
                Point::new(0.25 * (n - 1) as f64, 0.0),
                1.0,
                samples,
            )
            .unwrap();
            let bins = raw_spectrum_bins(&ap, Window::None, pad).unwrap();
            let time: f64 = ap.samples.iter().map(|s| s.norm_sqr()).sum();
            let freq: f64 =
                bins.iter().map(|b| b.norm_sqr()).sum::<f64>() / bins.len() as f64;
            prop_assert!((time - freq).abs() <= 1e-9 * time.max(1e-30));

            let spec = angular_spectrum(&ap, Window::None, pad).unwrap();
            prop_assert!(spec.magnitude.iter().all(|&m| (0.0..=1.0 + 1e-12).contains(&m)));
        }
    }
}
