//! Factorizations for small dense matrices: Householder QR, one-sided Jacobi
//! SVD, numerical rank, kernel bases and the right pseudo-inverse.
//!
//! Every routine is deterministic in its input. Rank decisions use the
//! relative threshold `tol * sigma_max`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{dot, norm2, DenseMatrix, MatrixError};

/// Default relative rank threshold.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("Jacobi SVD did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix is rank deficient: rank {rank} < {required}")]
    RankDeficient { rank: usize, required: usize },
    #[error("singular linear system")]
    Singular,
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Orthonormal basis of a numerical null space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelBasis {
    pub ambient_dim: usize,
    pub vectors: Vec<Vec<f64>>,
    pub tol: f64,
}

impl KernelBasis {
    pub fn empty(ambient_dim: usize, tol: f64) -> Self {
        Self {
            ambient_dim,
            vectors: Vec::new(),
            tol,
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `sum_j coeffs[j] * vectors[j]`.
    pub fn combine(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.vectors.len());
        let mut out = vec![0.0; self.ambient_dim];
        for (c, v) in coeffs.iter().zip(&self.vectors) {
            for (o, x) in out.iter_mut().zip(v) {
                *o += c * x;
            }
        }
        out
    }
}

/// Thin singular value decomposition data produced by the Jacobi sweep:
/// `M V = W` where the columns of `W` are mutually orthogonal with norms
/// `sigma`, sorted nonincreasing. `V` is `cols x cols` orthogonal.
struct JacobiSvd {
    sigma: Vec<f64>,
    /// Columns of V, one `Vec` per singular value, in the same order.
    v_cols: Vec<Vec<f64>>,
}

fn jacobi_svd(m: &DenseMatrix) -> Result<JacobiSvd, LinalgError> {
    let (rows, cols) = m.shape();
    let mut w: Vec<Vec<f64>> = m.columns();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0.0; cols];
            e[j] = 1.0;
            e
        })
        .collect();
    let max_sweeps = 100 * cols.max(1);
    let eps = f64::EPSILON;
    // Columns at round-off level relative to the whole matrix are treated as
    // zero; rotating them against each other only shuffles noise.
    let floor = (eps * m.frobenius_norm()).powi(2);
    // Nearly parallel columns stall a little above eps.
    let orth_tol = eps * (rows.max(2) as f64);
    let mut converged = cols < 2;
    for _ in 0..max_sweeps {
        if converged {
            break;
        }
        let mut rotated = false;
        for i in 0..cols {
            for j in (i + 1)..cols {
                let alpha = dot(&w[i], &w[i]);
                let beta = dot(&w[j], &w[j]);
                let gamma = dot(&w[i], &w[j]);
                if alpha <= floor || beta <= floor {
                    continue;
                }
                if gamma.abs() <= orth_tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let a = w[i][r];
                    let b = w[j][r];
                    w[i][r] = c * a - s * b;
                    w[j][r] = s * a + c * b;
                }
                for r in 0..cols {
                    let a = v[i][r];
                    let b = v[j][r];
                    v[i][r] = c * a - s * b;
                    v[j][r] = s * a + c * b;
                }
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence { sweeps: max_sweeps });
    }
    let mut order: Vec<(f64, usize)> = w.iter().map(|c| norm2(c)).zip(0..).collect();
    // Stable sort keeps ties in column order, so the output is a pure
    // function of the input.
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(JacobiSvd {
        sigma: order.iter().map(|&(s, _)| s).collect(),
        v_cols: order.iter().map(|&(_, j)| v[j].clone()).collect(),
    })
}

/// Singular values in nonincreasing order; `min(rows, cols)` of them.
pub fn svd_values(m: &DenseMatrix) -> Result<Vec<f64>, LinalgError> {
    // Sweeping the shorter side keeps the rotation count down.
    let (rows, cols) = m.shape();
    let svd = if cols > rows {
        jacobi_svd(&m.transpose())?
    } else {
        jacobi_svd(m)?
    };
    Ok(svd.sigma.into_iter().take(rows.min(cols)).collect())
}

/// Smallest of the `min(rows, cols)` singular values. For a full row rank
/// matrix this is the smallest nonzero one.
pub fn min_singular_value(m: &DenseMatrix) -> Result<f64, LinalgError> {
    let s = svd_values(m)?;
    Ok(*s.last().expect("matrices are never empty"))
}

/// Numerical rank: the count of singular values above `tol * sigma_max`.
pub fn rank(m: &DenseMatrix, tol: f64) -> Result<usize, LinalgError> {
    if !(tol > 0.0) {
        return Err(LinalgError::BadTolerance(tol));
    }
    let s = svd_values(m)?;
    Ok(rank_from_sigma(&s, tol))
}

fn rank_from_sigma(sigma: &[f64], tol: f64) -> usize {
    let smax = sigma.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > tol * smax).count()
}

/// Orthonormal basis of the numerical null space of `m`.
///
/// The basis has exactly `cols - rank(m, tol)` vectors.
pub fn kernel_basis(m: &DenseMatrix, tol: f64) -> Result<KernelBasis, LinalgError> {
    if !(tol > 0.0) {
        return Err(LinalgError::BadTolerance(tol));
    }
    let cols = m.cols();
    // Rank is taken from the same singular values `rank` sees so that
    // rank + nullity = cols holds exactly.
    let r = rank(m, tol)?;
    let svd = jacobi_svd(m)?;
    let vectors = svd.v_cols.into_iter().skip(r).collect();
    Ok(KernelBasis {
        ambient_dim: cols,
        vectors,
        tol,
    })
}

/// All `cols` singular values of `m` (zeros included, nonincreasing) with the
/// matching right singular vectors.
pub fn right_singular_pairs(m: &DenseMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>), LinalgError> {
    let svd = jacobi_svd(m)?;
    Ok((svd.sigma, svd.v_cols))
}

/// Householder QR. Returns thin `Q` (`rows x p`) and `R` (`p x cols`) with
/// `p = min(rows, cols)`, `R` upper triangular with a nonnegative diagonal.
pub fn qr_decompose(m: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (rows, cols) = m.shape();
    let p = rows.min(cols);
    let mut r = m.clone();
    let mut q = DenseMatrix::identity(rows);
    for j in 0..p {
        let x: Vec<f64> = (j..rows).map(|i| r[(i, j)]).collect();
        let alpha = norm2(&x);
        if alpha == 0.0 {
            continue;
        }
        let mut v = x;
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vnorm2 = dot(&v, &v);
        if vnorm2 == 0.0 {
            continue;
        }
        // R <- H R on rows j..
        for c in j..cols {
            let s: f64 = (j..rows).map(|i| v[i - j] * r[(i, c)]).sum::<f64>() * 2.0 / vnorm2;
            for i in j..rows {
                r[(i, c)] -= s * v[i - j];
            }
        }
        // Q <- Q H on columns j..
        for row in 0..rows {
            let s: f64 = (j..rows).map(|i| q[(row, i)] * v[i - j]).sum::<f64>() * 2.0 / vnorm2;
            for i in j..rows {
                q[(row, i)] -= s * v[i - j];
            }
        }
        for i in (j + 1)..rows {
            r[(i, j)] = 0.0;
        }
    }
    let mut q_thin = DenseMatrix::zeros(rows, p);
    let mut r_thin = DenseMatrix::zeros(p, cols);
    for k in 0..p {
        let flip = if r[(k, k)] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..rows {
            q_thin[(i, k)] = flip * q[(i, k)];
        }
        for c in k..cols {
            r_thin[(k, c)] = flip * r[(k, c)];
        }
    }
    (q_thin, r_thin)
}

/// Solves `a x = b` for square `a` by Gaussian elimination with partial
/// pivoting. `b` may have several columns.
pub fn solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    let n = a.rows();
    if a.cols() != n || b.rows() != n {
        return Err(MatrixError::Shape(format!(
            "solve needs square system, got {}x{} with rhs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        ))
        .into());
    }
    let k = b.cols();
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs();
    if scale == 0.0 {
        return Err(LinalgError::Singular);
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| lu[(i, col)].abs().total_cmp(&lu[(j, col)].abs()))
            .expect("nonempty range");
        if lu[(piv, col)].abs() <= 1e-14 * scale {
            return Err(LinalgError::Singular);
        }
        if piv != col {
            for c in 0..n {
                let t = lu[(col, c)];
                lu[(col, c)] = lu[(piv, c)];
                lu[(piv, c)] = t;
            }
            for c in 0..k {
                let t = x[(col, c)];
                x[(col, c)] = x[(piv, c)];
                x[(piv, c)] = t;
            }
        }
        let p = lu[(col, col)];
        for r in (col + 1)..n {
            let f = lu[(r, col)] / p;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                lu[(r, c)] -= f * lu[(col, c)];
            }
            for c in 0..k {
                x[(r, c)] -= f * x[(col, c)];
            }
        }
    }
    for c in 0..k {
        for r in (0..n).rev() {
            let mut s = x[(r, c)];
            for j in (r + 1)..n {
                s -= lu[(r, j)] * x[(j, c)];
            }
            x[(r, c)] = s / lu[(r, r)];
        }
    }
    Ok(x)
}

/// `Dᵀ (D Dᵀ)⁻¹` for a full row rank `D`.
pub fn right_pseudoinverse(d: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    let r = rank(d, DEFAULT_RANK_TOL)?;
    if r < d.rows() {
        return Err(LinalgError::RankDeficient {
            rank: r,
            required: d.rows(),
        });
    }
    let dt = d.transpose();
    let gram = d.matmul(&dt)?;
    let inv = solve(&gram, &DenseMatrix::identity(d.rows()))?;
    Ok(dt.matmul(&inv)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn qr_of_identity_and_single_column() {
        let (q, r) = qr_decompose(&DenseMatrix::identity(3));
        assert_eq!(q, DenseMatrix::identity(3));
        assert_eq!(r, DenseMatrix::identity(3));
        let (q, r) = qr_decompose(&m(&[&[3.0], &[4.0]]));
        assert!((r[(0, 0)] - 5.0).abs() < 1e-15);
        assert!((q[(0, 0)] - 0.6).abs() < 1e-15 && (q[(1, 0)] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn qr_handles_rank_deficient_and_wide() {
        let a = m(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]]);
        let (q, r) = qr_decompose(&a);
        assert_eq!(q.shape(), (2, 2));
        assert_eq!(r.shape(), (2, 3));
        let back = q.matmul(&r).unwrap();
        assert!(back.sub(&a).unwrap().frobenius_norm() < 1e-12);
        let z = DenseMatrix::zeros(3, 2);
        let (q, r) = qr_decompose(&z);
        assert!(q.matmul(&r).unwrap().frobenius_norm() == 0.0);
    }

    #[test]
    fn svd_small_cases() {
        assert_eq!(svd_values(&DenseMatrix::diag(&[2.0, 3.0])).unwrap(), vec![3.0, 2.0]);
        assert_eq!(svd_values(&DenseMatrix::identity(4)).unwrap(), vec![1.0; 4]);
        let s = svd_values(&m(&[&[1.0, 1.0], &[0.0, 0.0]])).unwrap();
        assert!((s[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!(s[1].abs() < 1e-15);
    }

    #[test]
    fn min_singular_value_cases() {
        assert_eq!(min_singular_value(&DenseMatrix::identity(3)).unwrap(), 1.0);
        assert_eq!(min_singular_value(&DenseMatrix::diag(&[2.0, 3.0])).unwrap(), 2.0);
        let s = min_singular_value(&m(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]])).unwrap();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_cases() {
        let k = kernel_basis(&m(&[&[1.0, -1.0]]), 1e-9).unwrap();
        assert_eq!(k.dim(), 1);
        let v = &k.vectors[0];
        let h = 0.5f64.sqrt();
        assert!((v[0].abs() - h).abs() < 1e-14 && (v[0] - v[1]).abs() < 1e-14);

        let full = kernel_basis(&m(&[&[1.0, 2.0], &[0.0, 1.0], &[5.0, 5.0]]), 1e-9).unwrap();
        assert!(full.is_trivial());

        let d = m(&[&[1.0, 0.0, 0.9], &[0.0, 1.0, 0.1]]);
        let k = kernel_basis(&d, 1e-9).unwrap();
        assert_eq!(k.dim(), 1);
        let expected = [0.9, 0.1, -1.0];
        let en = norm2(&expected);
        let v = &k.vectors[0];
        let s = if v[2] < 0.0 { 1.0 } else { -1.0 };
        for i in 0..3 {
            assert!((s * v[i] - expected[i] / en).abs() < 1e-13);
        }
    }

    #[test]
    fn rank_cases() {
        assert_eq!(rank(&DenseMatrix::zeros(3, 4), 1e-9).unwrap(), 0);
        assert_eq!(rank(&DenseMatrix::identity(5), 1e-9).unwrap(), 5);
        assert_eq!(rank(&m(&[&[1.0, 2.0], &[2.0, 4.0]]), 1e-9).unwrap(), 1);
        assert!(matches!(
            rank(&DenseMatrix::identity(2), 0.0),
            Err(LinalgError::BadTolerance(_))
        ));
    }

    #[test]
    fn pseudoinverse_cases() {
        let p = right_pseudoinverse(&DenseMatrix::identity(3)).unwrap();
        assert!(p.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-15);
        let p = right_pseudoinverse(&m(&[&[2.0, 0.0]])).unwrap();
        assert_eq!(p.shape(), (2, 1));
        assert!((p[(0, 0)] - 0.5).abs() < 1e-15 && p[(1, 0)] == 0.0);
        let d = m(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]);
        let p = right_pseudoinverse(&d).unwrap();
        let id = d.matmul(&p).unwrap();
        assert!(id.sub(&DenseMatrix::identity(2)).unwrap().max_abs() < 1e-9);
        assert!(matches!(
            right_pseudoinverse(&m(&[&[1.0, 1.0], &[2.0, 2.0]])),
            Err(LinalgError::RankDeficient { rank: 1, required: 2 })
        ));
    }

    #[test]
    fn solve_detects_singular() {
        let a = m(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(
            solve(&a, &DenseMatrix::identity(2)),
            Err(LinalgError::Singular)
        ));
    }
}
