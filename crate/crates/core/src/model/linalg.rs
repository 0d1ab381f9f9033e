//! Moore–Penrose pseudo-inverse with a relative singular-value cutoff.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Singular values below `DEFAULT_RCOND * σ_max` are treated as zero.
pub const DEFAULT_RCOND: f64 = 1e-8;

/// Pseudo-inverse using [`DEFAULT_RCOND`].
pub fn pseudo_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    pseudo_inverse_with_cutoff(m, DEFAULT_RCOND)
}

/// Pseudo-inverse through a one-sided Jacobi SVD. Singular values
/// `σ <= rcond * σ_max` are dropped, so an all-zero matrix maps to an
/// all-zero transpose-shaped result.
pub fn pseudo_inverse_with_cutoff(m: &DMatrix<f64>, rcond: f64) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("pseudo-inverse of a matrix with non-finite entries"));
    }
    if !(rcond >= 0.0) {
        return Err(Error::validation(format!("invalid singular-value cutoff {rcond}")));
    }
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(DMatrix::zeros(cols, rows));
    }

    // Orthogonalise the columns of the tall orientation: B·V = W, W = U·Σ.
    let wide = rows < cols;
    let mut w = if wide { m.transpose() } else { m.clone() };
    let v = jacobi_orthogonalize(&mut w)?;

    let norms: Vec<f64> = (0..w.ncols()).map(|k| w.column(k).norm()).collect();
    let sigma_max = norms.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = rcond * sigma_max;

    // B⁺ = Σ v_k w_kᵀ / σ_k²
    let mut out = DMatrix::zeros(w.ncols(), w.nrows());
    for (k, &s) in norms.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += (v.column(k) * w.column(k).transpose()) / (s * s);
        }
    }
    Ok(if wide { out.transpose() } else { out })
}

fn jacobi_orthogonalize(w: &mut DMatrix<f64>) -> Result<DMatrix<f64>> {
    const MAX_SWEEPS: usize = 60;
    let n = w.ncols();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = w.column(i).norm_squared();
                let beta = w.column(j).norm_squared();
                let gamma = w.column(i).dot(&w.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(w, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            return Ok(v);
        }
    }
    Err(Error::Numeric("Jacobi SVD did not converge".into()))
}

fn rotate(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let (a, b) = (m[(r, i)], m[(r, j)]);
        m[(r, i)] = c * a - s * b;
        m[(r, j)] = s * a + c * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_maps_to_identity() {
        let i = DMatrix::<f64>::identity(3, 3);
        let p = pseudo_inverse(&i).unwrap();
        assert!((p - i).norm() < 1e-15);
    }

    #[test]
    fn rank_deficient_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0, 0.0]));
        let p = pseudo_inverse(&m).unwrap();
        let expected =
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 1.0, 0.0]));
        assert!((p - expected).norm() < 1e-15);
    }

    #[test]
    fn single_column_is_scaled_transpose() {
        let j = DMatrix::from_column_slice(3, 1, &[0.3, -0.4, 1.2]);
        let p = pseudo_inverse(&j).unwrap();
        let expected = j.transpose() / j.norm_squared();
        assert!((p - expected).norm() < 1e-14);
    }

    #[test]
    fn zero_matrix_gives_zero() {
        let p = pseudo_inverse(&DMatrix::zeros(3, 2)).unwrap();
        assert_eq!(p.shape(), (2, 3));
        assert_eq!(p.norm(), 0.0);
    }

    #[test]
    fn rejects_nan() {
        let mut m = DMatrix::<f64>::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(pseudo_inverse(&m), Err(Error::Validation(_))));
    }
}
