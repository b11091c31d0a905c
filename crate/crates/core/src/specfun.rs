//! Scalar special functions: J0, Y0, H0^(2), and ln I0.
//!
//! The cylindrical-wave kernels downstream need the order-zero Hankel function
//! of the second kind (outgoing waves under the e^{jωt} convention) and the
//! fading log-likelihoods need ln I0. Both are built from truncated ascending
//! series for small arguments and Hankel's asymptotic expansion for large
//! ones. The switchover at x = 14 keeps either branch below ~5e-12 absolute
//! error, comfortably inside the 1e-10 accuracy target; for ln I0 the series
//! stays cancellation-free (all terms positive) so the switch sits at x = 30.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};

/// Series/asymptotic switchover for J0, Y0, H0^(2).
const HANKEL_SWITCH: f64 = 14.0;
/// Series/asymptotic switchover for ln I0.
const LOG_I0_SWITCH: f64 = 30.0;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Bessel function of the first kind, order zero. `x` may be any finite real
/// (J0 is even); accurate to ~1e-10 absolute for |x| ≤ 2000.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("bessel_j0: non-finite argument {x}")));
    }
    Ok(j0_raw(x.abs()))
}

/// Bessel function of the second kind, order zero. Requires x > 0
/// (logarithmic singularity at the origin).
pub fn bessel_y0(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("bessel_y0: argument must be finite and > 0, got {x}")));
    }
    Ok(y0_raw(x))
}

/// Hankel function of the second kind, order zero: J0(x) − j·Y0(x).
pub fn hankel2_0(x: f64) -> Result<Complex64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("hankel2_0: argument must be finite and > 0, got {x}")));
    }
    Ok(hankel2_raw(x))
}

/// ln I0(x) for x ≥ 0, overflow-free far beyond x = 1e5.
pub fn log_bessel_i0(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("log_bessel_i0: argument must be finite and >= 0, got {x}")));
    }
    Ok(log_i0_raw(x))
}

/// Unchecked J0 for hot loops; caller guarantees a finite argument.
pub(crate) fn j0_raw(x: f64) -> f64 {
    let x = x.abs();
    if x < HANKEL_SWITCH {
        j0_series(x)
    } else {
        hankel2_asymptotic(x).re
    }
}

pub(crate) fn y0_raw(x: f64) -> f64 {
    if x < HANKEL_SWITCH {
        y0_series(x)
    } else {
        -hankel2_asymptotic(x).im
    }
}

/// Unchecked H0^(2) for hot loops; caller guarantees x > 0.
pub(crate) fn hankel2_raw(x: f64) -> Complex64 {
    if x < HANKEL_SWITCH {
        Complex64::new(j0_series(x), -y0_series(x))
    } else {
        hankel2_asymptotic(x)
    }
}

pub(crate) fn log_i0_raw(x: f64) -> f64 {
    let x = x.abs();
    if x < LOG_I0_SWITCH {
        // ln Σ_k q^k/(k!)², q = (x/2)²; all terms positive, no cancellation.
        let q = 0.25 * x * x;
        let mut term = 1.0_f64;
        let mut sum = 1.0_f64;
        for k in 1..400 {
            term *= q / ((k * k) as f64);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum.ln()
    } else {
        // I0(x) ~ e^x/√(2πx) · Σ_k t_k with t_k = t_{k-1}·(2k−1)²/(8kx);
        // the log form never overflows.
        x - 0.5 * (2.0 * PI * x).ln() + asymptotic_tail(x, false).re.ln()
    }
}

/// Ascending series J0(x) = Σ (−1)^k (x/2)^{2k}/(k!)².
fn j0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 1..400 {
        term *= -q / ((k * k) as f64);
        sum += term;
        if term.abs() < 1e-18 * (1.0 + sum.abs()) {
            break;
        }
    }
    sum
}

/// Series with log term:
/// Y0(x) = (2/π)[(ln(x/2) + γ)·J0(x) + Σ_{k≥1} (−1)^{k+1} H_k (x/2)^{2k}/(k!)²].
fn y0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0_f64; // (−q)^k/(k!)² at current k
    let mut harmonic = 0.0_f64;
    let mut sum = 0.0_f64;
    for k in 1..400 {
        term *= -q / ((k * k) as f64);
        harmonic += 1.0 / k as f64;
        sum -= term * harmonic; // (−1)^{k+1} q^k/(k!)² H_k
        if term.abs() < 1e-18 * (1.0 + sum.abs()) {
            break;
        }
    }
    std::f64::consts::FRAC_2_PI * (((0.5 * x).ln() + EULER_GAMMA) * j0_series(x) + sum)
}

/// Truncated Stokes sum Σ_k a_k with a_k = a_{k-1}·(±j)(2k−1)²/(8kx); the
/// `+j` variant belongs to H0^(2), the all-real variant (signless) to I0.
fn asymptotic_tail(x: f64, hankel: bool) -> Complex64 {
    let mut a = Complex64::new(1.0, 0.0);
    let mut sum = a;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let ratio = (2.0 * kf - 1.0).powi(2) / (8.0 * kf * x);
        a *= if hankel { Complex64::new(0.0, ratio) } else { Complex64::new(ratio, 0.0) };
        let mag = a.norm();
        if mag >= prev {
            break; // asymptotic series began to diverge; stop at its floor
        }
        sum += a;
        prev = mag;
        if mag < 1e-18 {
            break;
        }
    }
    sum
}

/// H0^(2)(x) = √(2/(πx)) e^{−j(x−π/4)} Σ_k a_k for x ≥ 14.
fn hankel2_asymptotic(x: f64) -> Complex64 {
    let amp = (2.0 / (PI * x)).sqrt();
    amp * Complex64::from_polar(1.0, -(x - FRAC_PI_4)) * asymptotic_tail(x, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    // Reference values computed with 30-digit arithmetic (mpmath), frozen.
    const J0_REF: &[(f64, f64)] = &[
        (0.5, 0.9384698072408129),
        (1.0, 0.7651976865579666),
        (5.0, -0.1775967713143383),
        (10.0, -0.2459357644513483),
        (13.9, 0.1835798554578697),
        (14.1, 0.1569528770326012),
        (100.0, 0.0199858503042231),
        (500.0, -0.0341005568807320),
        (2000.0, 0.0070983418331996),
    ];
    const Y0_REF: &[(f64, f64)] = &[
        (0.5, -0.4445187335067066),
        (1.0, 0.0882569642156769),
        (5.0, -0.3085176252490338),
        (10.0, 0.0556711672835994),
        (13.9, 0.1098591894595265),
        (14.1, 0.1431362286225446),
        (100.0, -0.0772443133650832),
        (500.0, 0.0105067087398314),
        (2000.0, 0.0163683664259956),
    ];

    #[test]
    fn j0_matches_reference() {
        for &(x, want) in J0_REF {
            assert_abs_diff_eq!(bessel_j0(x).unwrap(), want, epsilon = 1e-10);
        }
        assert_eq!(bessel_j0(0.0).unwrap(), 1.0);
        // even function
        assert_eq!(bessel_j0(-5.0).unwrap(), bessel_j0(5.0).unwrap());
    }

    #[test]
    fn y0_matches_reference() {
        for &(x, want) in Y0_REF {
            assert_abs_diff_eq!(bessel_y0(x).unwrap(), want, epsilon = 1e-10);
        }
    }

    #[test]
    fn first_zeros() {
        // Leading zeros of J0 and Y0, frozen from high-precision root finding.
        assert_abs_diff_eq!(bessel_j0(2.404825557695773).unwrap(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(bessel_y0(0.8935769662791675).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn independent_series_oracle() {
        // 40-term ascending series evaluated in-place, written out separately
        // from the production code paths.
        let oracle_j0 = |x: f64| {
            let mut s = 0.0;
            let mut fact = 1.0; // k!
            for k in 0..40u32 {
                if k > 0 {
                    fact *= k as f64;
                }
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                s += sign * (0.5 * x).powi(2 * k as i32) / (fact * fact);
            }
            s
        };
        let oracle_y0 = |x: f64| {
            let mut s = 0.0;
            let mut fact = 1.0;
            let mut h = 0.0;
            for k in 1..40u32 {
                fact *= k as f64;
                h += 1.0 / k as f64;
                let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
                s += sign * h * (0.5 * x).powi(2 * k as i32) / (fact * fact);
            }
            std::f64::consts::FRAC_2_PI * (((0.5 * x).ln() + EULER_GAMMA) * oracle_j0(x) + s)
        };
        let mut x = 0.01;
        while x <= 10.0 {
            assert_abs_diff_eq!(bessel_j0(x).unwrap(), oracle_j0(x), epsilon = 1e-9);
            assert_abs_diff_eq!(bessel_y0(x).unwrap(), oracle_y0(x), epsilon = 1e-9);
            x += 0.37;
        }
    }

    #[test]
    fn hankel_combines_j0_y0() {
        for x in [0.3, 1.0, 7.5, 20.0, 150.0] {
            let h = hankel2_0(x).unwrap();
            assert_eq!(h.re, bessel_j0(x).unwrap());
            assert_eq!(h.im, -bessel_y0(x).unwrap());
        }
    }

    #[test]
    fn hankel_far_field_amplitude_and_phase() {
        // |H0^(2)(x)| → √(2/(πx)) and arg → −(x − π/4) + 1/(8x) for large x
        // (the 1/(8x) term is the first phase correction of the asymptotic
        // series; at x = 100 it is 1.25e-3, well above the check tolerance).
        for x in [100.0, 250.0, 94.2478] {
            let h = hankel2_0(x).unwrap();
            let amp = (2.0 / (PI * x)).sqrt();
            assert!((h.norm() - amp).abs() / amp < 1e-3, "magnitude off at x={x}");
            let want = -(x - FRAC_PI_4) + (1.0 / (8.0 * x)).atan();
            let diff = (h.arg() - want).rem_euclid(2.0 * PI);
            let diff = diff.min(2.0 * PI - diff);
            assert!(diff < 1e-6, "phase off at x={x}: {diff}");
        }
        // Anchor at k0·15λ = 30π, frozen from 30-digit arithmetic.
        let h = hankel2_0(94.24777960769380).unwrap();
        assert_abs_diff_eq!(h.re, 0.0580376358192795, epsilon = 1e-12);
        assert_abs_diff_eq!(h.im, 0.0581917809258410, epsilon = 1e-12);
    }

    #[test]
    fn switchover_continuity() {
        // Both branches evaluated at the switch point itself.
        assert_abs_diff_eq!(j0_series(HANKEL_SWITCH), hankel2_asymptotic(HANKEL_SWITCH).re, epsilon = 1e-11);
        assert_abs_diff_eq!(y0_series(HANKEL_SWITCH), -hankel2_asymptotic(HANKEL_SWITCH).im, epsilon = 1e-11);
        // And across it through the public API.
        let eps = 1e-10;
        assert_abs_diff_eq!(
            bessel_j0(HANKEL_SWITCH - eps).unwrap(),
            bessel_j0(HANKEL_SWITCH + eps).unwrap(),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            bessel_y0(HANKEL_SWITCH - eps).unwrap(),
            bessel_y0(HANKEL_SWITCH + eps).unwrap(),
            epsilon = 1e-9
        );
        let lo = log_i0_raw(LOG_I0_SWITCH - eps);
        let hi = log_i0_raw(LOG_I0_SWITCH + eps);
        assert!((lo - hi).abs() < 1e-9 * lo.abs());
    }

    #[test]
    fn log_i0_matches_reference() {
        // ln I0 at small/large arguments, frozen from 30-digit arithmetic.
        assert_eq!(log_bessel_i0(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(log_bessel_i0(1.0).unwrap(), 0.2359143585071786, epsilon = 1e-12);
        assert_abs_diff_eq!(log_bessel_i0(10.0).unwrap(), 7.942972083118696, epsilon = 1e-11);
        assert_abs_diff_eq!(
            log_bessel_i0(50.0).unwrap(),
            47.12757550187180,
            epsilon = 1e-10 * 47.0
        );
        assert_abs_diff_eq!(
            log_bessel_i0(1e4).unwrap(),
            9994.475903781432,
            epsilon = 1e-9 * 1e4
        );
        assert_abs_diff_eq!(
            log_bessel_i0(1.0).unwrap(),
            1.2660658777520084_f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn domain_errors() {
        assert!(bessel_j0(f64::NAN).is_err());
        assert!(bessel_j0(f64::INFINITY).is_err());
        assert!(bessel_y0(0.0).is_err());
        assert!(bessel_y0(-1.0).is_err());
        assert!(hankel2_0(0.0).is_err());
        assert!(hankel2_0(-3.0).is_err());
        assert!(log_bessel_i0(-1e-9).is_err());
    }

    #[test]
    fn log_i0_convex_nondecreasing() {
        // Finite-difference convexity check on a sampled grid.
        let xs: Vec<f64> = (0..200).map(|i| 0.5 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| log_bessel_i0(x).unwrap()).collect();
        for w in ys.windows(3) {
            assert!(w[1] <= w[2] + 1e-12, "not nondecreasing");
            assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-9, "not convex");
        }
    }

    proptest! {
        #[test]
        fn hankel_magnitude_decreases(a in 0.05f64..600.0, f in 1.01f64..10.0) {
            let b = a * f;
            let ha = hankel2_raw(a).norm();
            let hb = hankel2_raw(b).norm();
            prop_assert!(hb < ha + 1e-9);
        }

        #[test]
        fn j0_bounded(x in -2000.0f64..2000.0) {
            prop_assert!(bessel_j0(x).unwrap().abs() <= 1.0 + 1e-10);
        }

        #[test]
        fn log_i0_even_in_sign_of_argument(x in 0.0f64..100.0) {
            // I0 is even; the public API rejects negatives, so probe the raw path.
            prop_assert_eq!(log_i0_raw(x), log_i0_raw(-x));
        }
    }
}
