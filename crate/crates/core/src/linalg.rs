//! Dense least squares by Householder QR on column-equilibrated designs.
//!
//! Problems here are tall and skinny (about a hundred rows, at most a couple
//! dozen columns), so everything is plain column-major `Vec<f64>`.

/// Reciprocal 1-norm condition estimate below which a design is rejected.
pub const RCOND_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singular {
    pub rcond: f64,
}

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coef: Vec<f64>,
    /// Reciprocal condition number of the equilibrated design.
    pub rcond: f64,
    /// Inverse of the triangular factor of the equilibrated design.
    r_inv: Vec<f64>,
    scale: Vec<f64>,
}

impl LeastSquares {
    /// Diagonal entry `j` of `(X'X)^{-1}` for the original (unscaled) design.
    pub fn inv_gram_diag(&self, j: usize) -> f64 {
        let k = self.coef.len();
        let row: f64 = (j..k).map(|l| self.r_inv[j * k + l].powi(2)).sum();
        row / (self.scale[j] * self.scale[j])
    }
}

/// Minimise `|y - X b|` where `columns[j]` is column `j` of `X`.
pub fn solve(columns: &[&[f64]], y: &[f64], rcond_threshold: f64) -> Result<LeastSquares, Singular> {
    let n = y.len();
    let k = columns.len();
    debug_assert!(columns.iter().all(|c| c.len() == n));
    if n < k {
        return Err(Singular { rcond: 0.0 });
    }

    let mut scale = Vec::with_capacity(k);
    let mut a = Vec::with_capacity(n * k);
    for col in columns {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Singular { rcond: 0.0 });
        }
        scale.push(norm);
        a.extend(col.iter().map(|v| v / norm));
    }
    let mut qty = y.to_vec();

    let mut v = vec![0.0; n];
    for j in 0..k {
        let col = &a[j * n..(j + 1) * n];
        let norm = col[j..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Singular { rcond: 0.0 });
        }
        let alpha = if col[j] > 0.0 { -norm } else { norm };
        v[j..].copy_from_slice(&col[j..]);
        v[j] -= alpha;
        let vtv: f64 = v[j..].iter().map(|x| x * x).sum();
        if vtv > 0.0 {
            for c in j + 1..k {
                let target = &mut a[c * n..(c + 1) * n];
                let tau = 2.0 * dot(&v[j..], &target[j..]) / vtv;
                axpy(-tau, &v[j..], &mut target[j..]);
            }
            let tau = 2.0 * dot(&v[j..], &qty[j..]) / vtv;
            axpy(-tau, &v[j..], &mut qty[j..]);
        }
        a[j * n + j] = alpha;
        for i in j + 1..n {
            a[j * n + i] = 0.0;
        }
    }

    // R is upper triangular: R[i][j] = a[j*n + i], i <= j.
    let r = |i: usize, j: usize| a[j * n + i];
    let mut r_inv = vec![0.0; k * k]; // row-major, r_inv[i*k + j]
    for j in (0..k).rev() {
        r_inv[j * k + j] = 1.0 / r(j, j);
        for i in (0..j).rev() {
            let s: f64 = (i + 1..=j).map(|l| r(i, l) * r_inv[l * k + j]).sum();
            r_inv[i * k + j] = -s / r(i, i);
        }
    }
    let norm1_r = (0..k)
        .map(|j| (0..=j).map(|i| r(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let norm1_rinv = (0..k)
        .map(|j| (0..=j).map(|i| r_inv[i * k + j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let rcond = 1.0 / (norm1_r * norm1_rinv);
    if !rcond.is_finite() || rcond < rcond_threshold {
        return Err(Singular {
            rcond: if rcond.is_finite() { rcond } else { 0.0 },
        });
    }

    let coef = (0..k)
        .map(|i| {
            let z: f64 = (i..k).map(|l| r_inv[i * k + l] * qty[l]).sum();
            z / scale[i]
        })
        .collect();
    Ok(LeastSquares {
        coef,
        rcond,
        r_inv,
        scale,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_line_exactly() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let one = [1.0; 4];
        let y = [2.0, 5.0, 8.0, 11.0];
        let ls = solve(&[&x, &one], &y, RCOND_THRESHOLD).unwrap();
        assert!((ls.coef[0] - 3.0).abs() < 1e-12);
        assert!((ls.coef[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_gram_diagonal_matches_closed_form() {
        // For [x, 1] the (0,0) entry of (X'X)^{-1} is 1 / sum((x - mean)^2).
        let x = [1.0, 2.0, 4.0, 7.0, 11.0];
        let one = [1.0; 5];
        let y = [0.3, 0.1, 0.4, 0.1, 0.5];
        let ls = solve(&[&x, &one], &y, RCOND_THRESHOLD).unwrap();
        let mean = x.iter().sum::<f64>() / 5.0;
        let sxx: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        assert!((ls.inv_gram_diag(0) - 1.0 / sxx).abs() < 1e-14);
        let diag1 = x.iter().map(|v| v * v).sum::<f64>() / (5.0 * sxx);
        assert!((ls.inv_gram_diag(1) - diag1).abs() < 1e-13);
    }

    #[test]
    fn duplicate_column_is_singular() {
        let x = [1.0, 2.0, 4.0, 7.0];
        let x3: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let one = [1.0; 4];
        let y = [1.0, 0.0, 1.0, 0.0];
        assert!(solve(&[&x, &x3, &one], &y, RCOND_THRESHOLD).is_err());
    }

    #[test]
    fn zero_column_is_singular() {
        let z = [0.0; 3];
        let one = [1.0; 3];
        assert_eq!(solve(&[&z, &one], &[1.0, 2.0, 3.0], RCOND_THRESHOLD).unwrap_err().rcond, 0.0);
    }
}
