//! Dense linear solves for the tiny systems that appear in regression and
//! curve fitting (never more than ~8 unknowns).

/// Solves `a x = b` in place via Gaussian elimination with partial pivoting.
/// Returns `None` when the matrix is singular to working precision.
pub(crate) fn solve_linear_system(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|row| row.len() == n));

    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot_row][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);

        let pivot = a[col][col];
        for row in col + 1..n {
            let factor = a[row][col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }

    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Least-squares solve of an overdetermined system via the normal equations.
/// `rows` are the design-matrix rows, `rhs` the observations, `weights` the
/// per-row weights (1/sigma^2). Returns the coefficient vector and the
/// unscaled covariance matrix (XᵀWX)⁻¹.
pub(crate) fn weighted_least_squares(
    rows: &[Vec<f64>],
    rhs: &[f64],
    weights: &[f64],
) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = rows.len();
    let m = rows.first()?.len();
    if n < m {
        return None;
    }
    let mut ata = vec![vec![0.0; m]; m];
    let mut atb = vec![0.0; m];
    for i in 0..n {
        let w = weights[i];
        for j in 0..m {
            atb[j] += w * rows[i][j] * rhs[i];
            for k in j..m {
                ata[j][k] += w * rows[i][j] * rows[i][k];
            }
        }
    }
    for j in 0..m {
        for k in 0..j {
            ata[j][k] = ata[k][j];
        }
    }

    let coeffs = solve_linear_system(ata.clone(), atb)?;
    // Covariance columns: (XᵀWX)⁻¹ e_j.
    let mut cov = vec![vec![0.0; m]; m];
    for j in 0..m {
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        let col = solve_linear_system(ata.clone(), e)?;
        for (k, v) in col.into_iter().enumerate() {
            cov[k][j] = v;
        }
    }
    Some((coeffs, cov))
}
