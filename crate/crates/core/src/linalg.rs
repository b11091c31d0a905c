//! Singular values of small dense complex matrices.
//!
//! Channel matrices here are at most a handful of elements per side, so a
//! one-sided Jacobi (Hestenes) iteration is plenty: orthogonalize the columns
//! pairwise until every normalized inner product falls below tolerance, then
//! read the singular values off as column norms. Jacobi is unconditionally
//! stable and accurate to machine precision for these sizes — no pivoting or
//! blocking needed.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative off-diagonal tolerance: |c_p^H c_q| ≤ tol·‖c_p‖‖c_q‖ counts as
/// orthogonal.
const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Singular values of the `rows` × `cols` matrix stored row-major in
/// `entries`, sorted descending. Always returns min(rows, cols) values.
pub fn singular_values(entries: &[Complex64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    if entries.len() != rows * cols {
        return Err(Error::Shape(format!(
            "matrix claims {rows} x {cols} = {} entries but holds {}",
            rows * cols,
            entries.len()
        )));
    }
    if rows == 0 || cols == 0 {
        return Ok(Vec::new());
    }
    // Work on whichever orientation has the fewer columns; the singular
    // values of A and A^H coincide.
    let mut col: Vec<Vec<Complex64>> = if cols <= rows {
        (0..cols)
            .map(|j| (0..rows).map(|i| entries[i * cols + j]).collect())
            .collect()
    } else {
        (0..rows)
            .map(|i| (0..cols).map(|j| entries[i * cols + j].conj()).collect())
            .collect()
    };
    let n = col.len();

    for _ in 0..MAX_SWEEPS {
        let mut max_ratio = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let hpp: f64 = col[p].iter().map(|z| z.norm_sqr()).sum();
                let hqq: f64 = col[q].iter().map(|z| z.norm_sqr()).sum();
                if hpp == 0.0 || hqq == 0.0 {
                    continue;
                }
                let hpq: Complex64 = col[p].iter().zip(&col[q]).map(|(a, b)| a.conj() * b).sum();
                let ratio = hpq.norm() / (hpp * hqq).sqrt();
                max_ratio = max_ratio.max(ratio);
                if ratio <= JACOBI_TOL {
                    continue;
                }
                // Absorb the phase into column q, then a real Givens rotation
                // diagonalizes the 2×2 Gram block.
                let phase = Complex64::from_polar(1.0, -hpq.arg());
                let rho = hpq.norm();
                let tau = (hqq - hpp) / (2.0 * rho);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..col[p].len() {
                    let a = col[p][i];
                    let b = col[q][i] * phase;
                    col[p][i] = a * c - b * s;
                    col[q][i] = a * s + b * c;
                }
            }
        }
        if max_ratio <= JACOBI_TOL {
            let mut sv: Vec<f64> = col
                .iter()
                .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
                .collect();
            sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
            return Ok(sv);
        }
    }
    Err(Error::Convergence(format!(
        "Jacobi SVD did not orthogonalize a {rows} x {cols} matrix within {MAX_SWEEPS} sweeps"
    )))
}
