//! Singular values of stacked node-feature matrices via cyclic Jacobi on
//! the Gram matrix.

use crate::error::{Error, Result};

const JACOBI_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Singular values of a `rows x cols` matrix, sorted descending.
///
/// Computes the symmetric eigendecomposition of `A^T A` with cyclic Jacobi
/// rotations (off-diagonal tolerance 1e-10 relative to the Frobenius norm)
/// and takes square roots. Returns `min(rows, cols)` values.
pub fn feature_spectrum(matrix: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    if rows == 0 || cols == 0 || matrix.len() != rows * cols {
        return Err(Error::invalid("feature_spectrum", "bad matrix dimensions"));
    }
    // Gram matrix G = A^T A (cols x cols).
    let d = cols;
    let mut g = vec![0.0; d * d];
    for r in 0..rows {
        let row = &matrix[r * d..(r + 1) * d];
        for i in 0..d {
            if row[i] != 0.0 {
                for j in i..d {
                    g[i * d + j] += row[i] * row[j];
                }
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            g[i * d + j] = g[j * d + i];
        }
    }

    let fro: f64 = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = JACOBI_TOL * (1.0 + fro);

    let off = |g: &[f64]| -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                m = m.max(g[i * d + j].abs());
            }
        }
        m
    };

    let mut sweeps = 0;
    while off(&g) > threshold {
        sweeps += 1;
        if sweeps > MAX_SWEEPS {
            return Err(Error::NonFinite(
                "feature_spectrum: Jacobi did not converge in 100 sweeps".into(),
            ));
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = g[p * d + q];
                if apq.abs() <= threshold * 1e-2 {
                    continue;
                }
                let app = g[p * d + p];
                let aqq = g[q * d + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // rotate rows/columns p and q
                for k in 0..d {
                    let gkp = g[k * d + p];
                    let gkq = g[k * d + q];
                    g[k * d + p] = c * gkp - s * gkq;
                    g[k * d + q] = s * gkp + c * gkq;
                }
                for k in 0..d {
                    let gpk = g[p * d + k];
                    let gqk = g[q * d + k];
                    g[p * d + k] = c * gpk - s * gqk;
                    g[q * d + k] = s * gpk + c * gqk;
                }
            }
        }
    }

    let mut sigmas: Vec<f64> = (0..d).map(|i| g[i * d + i].max(0.0).sqrt()).collect();
    sigmas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sigmas.truncate(rows.min(cols));
    Ok(sigmas)
}
