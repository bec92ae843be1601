//! Exact D-NSP decision by dual vertex enumeration.
//!
//! `min_{u ∈ ker D} ‖w + u‖₁ = max ⟨y, w⟩` over the polytope
//! `P = {y ∈ range Dᵀ : ‖y‖∞ ≤ 1}`, so the pairs `(v, T)` breaking the
//! inequality are the union over vertices `y` of the polyhedral cones
//! `{v ∈ ker(AD) : ⟨y_T, v_T⟩ ≥ ‖v_{T^c}‖₁}`. The property fails exactly
//! when one of those cones leaves `ker D`, which two LPs per cone detect:
//! maximize `±⟨g, Dv⟩` for a fixed generic `g`.

use std::collections::HashSet;

use super::CheckError;
use crate::linalg::{solve, KernelBasis};
use crate::lp::{solve_lp, LinearProgram, LpStatus, DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL};
use crate::matrix::DenseMatrix;
use crate::support::{binomial, sign_patterns, SupportSet};

/// Linear systems allowed while enumerating vertices of `P`.
pub const VERTEX_BUDGET: u128 = 200_000;

/// Vertices of `P`, one of each `±y` pair, or `None` over budget.
pub(crate) fn dual_vertices(d: &DenseMatrix) -> Result<Option<Vec<Vec<f64>>>, CheckError> {
    let (rows, n) = d.shape();
    let systems = binomial(n, rows).saturating_mul(1u128 << (rows - 1).min(100));
    if systems > VERTEX_BUDGET {
        return Ok(None);
    }
    let cols = d.columns();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let patterns: Vec<Vec<f64>> = sign_patterns(rows).into_iter().filter(|s| s[0] > 0.0).collect();
    for j in SupportSet::all_of_size(n, rows) {
        let dj = DenseMatrix::from_rows(&j.indices().iter().map(|&c| cols[c].clone()).collect::<Vec<_>>())?;
        for s in &patterns {
            let rhs = DenseMatrix::column_vector(s)?;
            let Ok(lambda) = solve(&dj, &rhs) else {
                continue;
            };
            let lambda = lambda.as_slice();
            let y: Vec<f64> = cols.iter().map(|c| c.iter().zip(lambda).map(|(a, b)| a * b).sum()).collect();
            if y.iter().any(|v| !v.is_finite() || v.abs() > 1.0 + 1e-9) {
                continue;
            }
            let y = canonical_sign(y);
            if seen.insert(key(&y)) {
                out.push(y);
            }
        }
    }
    Ok(Some(out))
}

fn canonical_sign(mut y: Vec<f64>) -> Vec<f64> {
    if let Some(first) = y.iter().find(|v| v.abs() > 1e-9) {
        if *first < 0.0 {
            y.iter_mut().for_each(|v| *v = -*v);
        }
    }
    y
}

fn key(y: &[f64]) -> Vec<i64> {
    y.iter().map(|v| (v * 1e8).round() as i64).collect()
}

/// The distinct restrictions `y_T` up to sign.
pub(crate) fn restricted(vertices: &[Vec<f64>], t: &SupportSet) -> Vec<Vec<f64>> {
    let mut seen = HashSet::new();
    vertices
        .iter()
        .map(|y| canonical_sign(t.restrict(y)))
        .filter(|yt| seen.insert(key(yt)))
        .collect()
}

/// Maximizes `⟨dir, Dv⟩` over `v = Kθ`, `‖θ‖∞ ≤ 1`, with
/// `⟨y_T, v_T⟩ ≥ (1 − strict) ‖v_{T^c}‖₁`. `dk` is `D K`. Returns the
/// optimal value and `v`.
pub(crate) fn cone_maximum(
    kernel: &KernelBasis,
    dk: &DenseMatrix,
    t: &SupportSet,
    y_t: &[f64],
    dir: &[f64],
    strict: f64,
) -> Result<(f64, Vec<f64>), CheckError> {
    let r = kernel.dim();
    let tc = t.complement();
    let q = tc.len();
    // θ⁺, θ⁻, p, q', box slacks for θ⁺ and θ⁻, cone slack.
    let nv = 4 * r + 2 * q + 1;
    let rows = q + 1 + 2 * r;
    let mut e = DenseMatrix::zeros(rows, nv);
    let mut f = vec![0.0; rows];
    for (row, &j) in tc.iter().enumerate() {
        for i in 0..r {
            let kji = kernel.vectors[i][j];
            e[(row, i)] = kji;
            e[(row, r + i)] = -kji;
        }
        e[(row, 2 * r + row)] = -1.0;
        e[(row, 2 * r + q + row)] = 1.0;
    }
    let cone = q;
    for i in 0..r {
        let s: f64 = t.indices().iter().zip(y_t).map(|(&j, y)| y * kernel.vectors[i][j]).sum();
        e[(cone, i)] = s;
        e[(cone, r + i)] = -s;
    }
    for c in 2 * r..2 * r + 2 * q {
        e[(cone, c)] = -(1.0 - strict);
    }
    e[(cone, nv - 1)] = -1.0;
    for i in 0..2 * r {
        let row = q + 1 + i;
        e[(row, i)] = 1.0;
        e[(row, 2 * r + 2 * q + i)] = 1.0;
        f[row] = 1.0;
    }
    let mut c = vec![0.0; nv];
    for i in 0..r {
        let gi: f64 = (0..dk.rows()).map(|row| dir[row] * dk[(row, i)]).sum();
        c[i] = -gi;
        c[r + i] = gi;
    }
    let lp = LinearProgram::new(c, e, f)?;
    let sol = solve_lp(&lp, DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL)?;
    if sol.status != LpStatus::Optimal {
        // θ = 0 is feasible and the box bounds everything.
        return Err(CheckError::Precondition(format!(
            "cone program for support {:?} ended {:?}",
            t.indices(),
            sol.status
        )));
    }
    let theta: Vec<f64> = (0..r).map(|i| sol.x[i] - sol.x[r + i]).collect();
    Ok((-sol.objective_value, kernel.combine(&theta)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_polytope_is_the_cube() {
        let v = dual_vertices(&DenseMatrix::identity(2)).unwrap().unwrap();
        // (1, 1) and (1, -1), one of each sign pair.
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|y| y.iter().all(|x| x.abs() == 1.0)));
    }

    #[test]
    fn duplicated_column_vertices() {
        // D = [e1, e2, e1]: y = Dᵀλ has y1 = y3, so vertices are (±1, ±1, ±1) with y1 = y3.
        let d = DenseMatrix::from_rows(&[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let v = dual_vertices(&d).unwrap().unwrap();
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|y| y[0] == y[2]));
    }
}
