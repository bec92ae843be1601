//! Standard-form linear programming by a dense two-phase simplex with
//! Bland's anti-cycling rule, plus the two ℓ¹ programs built on it.
//!
//! Problems have the form `min cᵀx  s.t.  E x = f, x ≥ 0`. Free variables are
//! always written as differences of two nonnegative ones.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::matrix::{norm1, norm_inf, DenseMatrix, MatrixError};

pub const DEFAULT_FEAS_TOL: f64 = 1e-9;
pub const DEFAULT_OPT_TOL: f64 = 1e-9;

/// Pivot elements below this magnitude are never used.
const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error("simplex exceeded {0} iterations without terminating")]
    IterationLimit(usize),
    #[error("program is infeasible")]
    Infeasible,
    #[error("program is unbounded")]
    Unbounded,
    #[error("numerical breakdown: {0}")]
    Numerical(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: DenseMatrix,
    pub rhs: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Empty unless `status` is `Optimal`.
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, constraints: DenseMatrix, rhs: Vec<f64>) -> Result<Self, LpError> {
        if objective.len() != constraints.cols() {
            return Err(LpError::Dimensions(format!(
                "objective has {} entries, constraints have {} columns",
                objective.len(),
                constraints.cols()
            )));
        }
        if rhs.len() != constraints.rows() {
            return Err(LpError::Dimensions(format!(
                "rhs has {} entries, constraints have {} rows",
                rhs.len(),
                constraints.rows()
            )));
        }
        if objective.iter().chain(&rhs).any(|x| !x.is_finite()) {
            return Err(LpError::Dimensions("non-finite objective or rhs".into()));
        }
        Ok(Self {
            objective,
            constraints,
            rhs,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_eq(&self) -> usize {
        self.rhs.len()
    }

    /// Packs the program into one matrix for the shared text format: row 0 is
    /// `[c, 0]`, the remaining rows are `[E | f]`.
    pub fn to_matrix(&self) -> DenseMatrix {
        let n = self.n_vars();
        let mut m = DenseMatrix::zeros(self.n_eq() + 1, n + 1);
        for (j, &c) in self.objective.iter().enumerate() {
            m[(0, j)] = c;
        }
        for i in 0..self.n_eq() {
            for j in 0..n {
                m[(i + 1, j)] = self.constraints[(i, j)];
            }
            m[(i + 1, n)] = self.rhs[i];
        }
        m
    }

    pub fn from_matrix(m: &DenseMatrix) -> Result<Self, LpError> {
        let (rows, cols) = m.shape();
        if rows < 2 || cols < 2 {
            return Err(LpError::Dimensions("packed program needs at least 2x2".into()));
        }
        let n = cols - 1;
        let objective = m.row(0)[..n].to_vec();
        let e_rows: Vec<Vec<f64>> = (1..rows).map(|i| m.row(i)[..n].to_vec()).collect();
        let rhs = (1..rows).map(|i| m[(i, n)]).collect();
        Self::new(objective, DenseMatrix::from_rows(&e_rows)?, rhs)
    }
}

/// Pivots between refactorizations of the tableau.
const REFACTOR_EVERY: usize = 32;

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    a: Vec<f64>,
    rows: usize,
    cols: usize,
    basis: Vec<usize>,
    /// Reduced costs, last entry is minus the objective value.
    cost: Vec<f64>,
    /// The tableau and costs it started from, used to rebuild it for the
    /// current basis once round-off has built up.
    source: DenseMatrix,
    source_cost: Vec<f64>,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width();
        let p = self.a[r * w + c];
        for j in 0..w {
            self.a[r * w + j] /= p;
        }
        self.a[r * w + c] = 1.0;
        let prow: Vec<f64> = self.a[r * w..(r + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.a[i * w + c];
            if f == 0.0 {
                continue;
            }
            for j in 0..w {
                self.a[i * w + j] -= f * prow[j];
            }
            self.a[i * w + c] = 0.0;
        }
        let f = self.cost[c];
        if f != 0.0 {
            for j in 0..w {
                self.cost[j] -= f * prow[j];
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Recomputes the tableau as `B⁻¹ [E | f]` from the source data and the
    /// reduced costs from it. Returns false, leaving the tableau alone, when
    /// the basis matrix is numerically singular.
    fn refactor(&mut self) -> bool {
        let w = self.width();
        if self.rows == 0 {
            self.cost[..self.cols].copy_from_slice(&self.source_cost);
            self.cost[self.cols] = 0.0;
            return true;
        }
        let mut b = DenseMatrix::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for (k, &j) in self.basis.iter().enumerate() {
                b[(i, k)] = self.source[(i, j)];
            }
        }
        let Ok(x) = linalg::solve(&b, &self.source) else {
            return false;
        };
        let mut cost = vec![0.0; w];
        cost[..self.cols].copy_from_slice(&self.source_cost);
        for i in 0..self.rows {
            let cb = self.source_cost[self.basis[i]];
            for j in 0..w {
                let v = x[(i, j)];
                self.a[i * w + j] = v;
                cost[j] -= cb * v;
            }
        }
        // Basic columns are exact unit vectors by construction.
        for (i, &bj) in self.basis.iter().enumerate() {
            for r in 0..self.rows {
                self.a[r * w + bj] = if r == i { 1.0 } else { 0.0 };
            }
            cost[bj] = 0.0;
        }
        self.cost = cost;
        true
    }

    /// Bland's rule: the lowest-index column with negative reduced cost
    /// enters; among minimum-ratio rows the lowest basic index leaves.
    ///
    /// A terminal verdict is only accepted on a freshly rebuilt tableau.
    fn run(&mut self, allowed: usize, opt_tol: f64, iterations: &mut usize, cap: usize) -> Result<bool, LpError> {
        let mut fresh = false;
        let mut since_rebuild = 0;
        loop {
            if since_rebuild >= REFACTOR_EVERY {
                fresh = self.refactor();
                since_rebuild = 0;
            }
            let Some(enter) = (0..allowed).find(|&j| self.cost[j] < -opt_tol) else {
                if fresh || !self.refactor() {
                    return Ok(true);
                }
                fresh = true;
                continue;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let aij = self.at(i, enter);
                if aij <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / aij;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        let tie = (ratio - lr).abs() <= 1e-12 * (1.0 + lr.abs());
                        if ratio < lr && !tie || tie && self.basis[i] < self.basis[li] {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                if fresh || !self.refactor() {
                    return Ok(false);
                }
                fresh = true;
                continue;
            };
            self.pivot(r, enter);
            fresh = false;
            since_rebuild += 1;
            *iterations += 1;
            if *iterations > cap {
                return Err(LpError::IterationLimit(cap));
            }
        }
    }
}

/// Solves a standard-form program.
///
/// Infeasible and unbounded programs are reported through `status`; only the
/// iteration cap produces an error.
pub fn solve_lp(lp: &LinearProgram, feas_tol: f64, opt_tol: f64) -> Result<LpSolution, LpError> {
    let m = lp.n_eq();
    let n = lp.n_vars();
    let cap = 10_000 + 200 * (n + m);
    let mut iterations = 0;

    // Phase 1 tableau: original columns, one artificial per row.
    let cols = n + m;
    let w = cols + 1;
    let mut a = vec![0.0; m * w];
    for i in 0..m {
        let sign = if lp.rhs[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            a[i * w + j] = sign * lp.constraints[(i, j)];
        }
        a[i * w + n + i] = 1.0;
        a[i * w + cols] = sign * lp.rhs[i];
    }
    let mut cost = vec![0.0; w];
    for i in 0..m {
        for j in 0..n {
            cost[j] -= a[i * w + j];
        }
        cost[cols] -= a[i * w + cols];
    }
    let source = DenseMatrix::from_row_major(m, w, a.clone())?;
    let mut source_cost = vec![0.0; cols];
    source_cost[n..].iter_mut().for_each(|c| *c = 1.0);
    let mut t = Tableau {
        a,
        rows: m,
        cols,
        basis: (n..n + m).collect(),
        cost,
        source,
        source_cost,
    };
    if !t.run(cols, opt_tol, &mut iterations, cap)? {
        return Err(LpError::Numerical("phase 1 reported an unbounded direction".into()));
    }
    let infeasibility = -t.cost[cols];
    let scale = 1.0 + norm_inf(&lp.rhs);
    if infeasibility > feas_tol * scale {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            objective_value: f64::NAN,
            iterations,
        });
    }

    // Drive artificials out of the basis; rows where that is impossible are
    // redundant and get dropped.
    let mut keep = vec![true; m];
    for r in 0..m {
        if t.basis[r] < n {
            continue;
        }
        let best = (0..n)
            .filter(|&j| t.at(r, j).abs() > PIVOT_TOL)
            .max_by(|&x, &y| t.at(r, x).abs().total_cmp(&t.at(r, y).abs()));
        match best {
            Some(j) => {
                t.pivot(r, j);
                iterations += 1;
            }
            None => keep[r] = false,
        }
    }

    // Phase 2 tableau without artificial columns.
    let rows: Vec<usize> = (0..m).filter(|&r| keep[r]).collect();
    let w2 = n + 1;
    let mut a2 = Vec::with_capacity(rows.len() * w2);
    for &r in &rows {
        a2.extend((0..n).map(|j| t.at(r, j)));
        a2.push(t.rhs(r));
    }
    let basis: Vec<usize> = rows.iter().map(|&r| t.basis[r]).collect();
    let mut cost2 = vec![0.0; w2];
    cost2[..n].copy_from_slice(&lp.objective);
    for (i, &b) in basis.iter().enumerate() {
        let cb = lp.objective[b];
        if cb == 0.0 {
            continue;
        }
        for j in 0..w2 {
            cost2[j] -= cb * a2[i * w2 + j];
        }
    }
    // Phase 2 refactors against the phase-1 rows it kept, restricted to the
    // original columns; those rows are row operations on `[E | f]`.
    let mut src2 = Vec::with_capacity(rows.len().max(1) * w2);
    for &r in &rows {
        src2.extend((0..n).map(|j| t.source[(r, j)]));
        src2.push(t.source[(r, cols)]);
    }
    if rows.is_empty() {
        src2.resize(w2, 0.0);
    }
    let mut t2 = Tableau {
        source: DenseMatrix::from_row_major(rows.len().max(1), w2, src2)?,
        source_cost: lp.objective.clone(),
        a: a2,
        rows: rows.len(),
        cols: n,
        basis,
        cost: cost2,
    };
    let bounded = t2.run(n, opt_tol, &mut iterations, cap)?;
    if !bounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            objective_value: f64::NEG_INFINITY,
            iterations,
        });
    }

    let mut x = vec![0.0; n];
    for (i, &b) in t2.basis.iter().enumerate() {
        x[b] = t2.rhs(i);
    }
    if let Some(refined) = refine_basic_solution(lp, &rows, &t2.basis) {
        if refined.iter().all(|&v| v >= -feas_tol) {
            x = refined;
        }
    }
    for v in &mut x {
        if *v < 0.0 && *v >= -feas_tol {
            *v = 0.0;
        }
    }
    let objective_value = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective_value,
        iterations,
    })
}

/// Re-solves `E_B x_B = f` on the kept rows from the original data, which
/// removes the round-off the tableau accumulates over many pivots.
fn refine_basic_solution(lp: &LinearProgram, rows: &[usize], basis: &[usize]) -> Option<Vec<f64>> {
    let k = rows.len();
    if k == 0 {
        return Some(vec![0.0; lp.n_vars()]);
    }
    let mut eb = DenseMatrix::zeros(k, k);
    let mut fb = DenseMatrix::zeros(k, 1);
    for (ii, &r) in rows.iter().enumerate() {
        for (jj, &b) in basis.iter().enumerate() {
            eb[(ii, jj)] = lp.constraints[(r, b)];
        }
        fb[(ii, 0)] = lp.rhs[r];
    }
    let xb = linalg::solve(&eb, &fb).ok()?;
    let mut x = vec![0.0; lp.n_vars()];
    for (jj, &b) in basis.iter().enumerate() {
        x[b] = xb[(jj, 0)];
    }
    Some(x)
}

/// A solved `min ‖c0 + u‖₁` over a subspace.
#[derive(Clone, Debug)]
pub struct AffineL1 {
    pub min_value: f64,
    /// The minimizing subspace element `u* = K w*`.
    pub u_star: Vec<f64>,
    pub iterations: usize,
}

/// `min_{u ∈ span(basis)} ‖c0 + u‖₁`.
///
/// Written as `K w⁺ − K w⁻ − e⁺ + e⁻ = −c0` with objective `Σ e⁺ + e⁻`.
/// An empty basis returns `‖c0‖₁` without solving anything.
pub fn min_l1_affine(c0: &[f64], basis: &[Vec<f64>]) -> Result<AffineL1, LpError> {
    let n = c0.len();
    if basis.is_empty() {
        return Ok(AffineL1 {
            min_value: norm1(c0),
            u_star: vec![0.0; n],
            iterations: 0,
        });
    }
    if basis.iter().any(|b| b.len() != n) {
        return Err(LpError::Dimensions("basis vectors must match c0 length".into()));
    }
    let p = basis.len();
    let nv = 2 * p + 2 * n;
    let mut e = DenseMatrix::zeros(n, nv);
    for i in 0..n {
        for (j, b) in basis.iter().enumerate() {
            e[(i, j)] = b[i];
            e[(i, p + j)] = -b[i];
        }
        e[(i, 2 * p + i)] = -1.0;
        e[(i, 2 * p + n + i)] = 1.0;
    }
    let mut c = vec![0.0; nv];
    for v in &mut c[2 * p..] {
        *v = 1.0;
    }
    let rhs: Vec<f64> = c0.iter().map(|x| -x).collect();
    let lp = LinearProgram::new(c, e, rhs)?;
    let sol = solve_lp(&lp, DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(LpError::Infeasible),
        LpStatus::Unbounded => return Err(LpError::Unbounded),
    }
    let mut u = vec![0.0; n];
    for (j, b) in basis.iter().enumerate() {
        let wj = sol.x[j] - sol.x[p + j];
        for (ui, bi) in u.iter_mut().zip(b) {
            *ui += wj * bi;
        }
    }
    let min_value = c0.iter().zip(&u).map(|(a, b)| (a + b).abs()).sum();
    Ok(AffineL1 {
        min_value,
        u_star: u,
        iterations: sol.iterations,
    })
}

/// A solved `min ‖z‖₁ s.t. E z = f`.
#[derive(Clone, Debug)]
pub struct L1Solution {
    pub z: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// The `p − q` split program for `min ‖z‖₁ s.t. E z = f`.
pub fn l1_split_program(e: &DenseMatrix, f: &[f64]) -> Result<LinearProgram, LpError> {
    let (m, n) = e.shape();
    if f.len() != m {
        return Err(LpError::Dimensions(format!(
            "rhs has {} entries, matrix has {m} rows",
            f.len()
        )));
    }
    let mut big = DenseMatrix::zeros(m, 2 * n);
    for i in 0..m {
        for j in 0..n {
            big[(i, j)] = e[(i, j)];
            big[(i, n + j)] = -e[(i, j)];
        }
    }
    LinearProgram::new(vec![1.0; 2 * n], big, f.to_vec())
}

/// `min ‖z‖₁ s.t. E z = f`; `Err(Infeasible)` when `f` is outside the range.
pub fn min_l1_subject_to(e: &DenseMatrix, f: &[f64]) -> Result<L1Solution, LpError> {
    let n = e.cols();
    let lp = l1_split_program(e, f)?;
    let sol = solve_lp(&lp, DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(LpError::Infeasible),
        LpStatus::Unbounded => return Err(LpError::Unbounded),
    }
    let z: Vec<f64> = (0..n).map(|j| sol.x[j] - sol.x[n + j]).collect();
    Ok(L1Solution {
        value: norm1(&z),
        z,
        iterations: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(c: &[f64], rows: &[&[f64]], f: &[f64]) -> LinearProgram {
        let e = DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
        LinearProgram::new(c.to_vec(), e, f.to_vec()).unwrap()
    }

    #[test]
    fn single_variable_optimum() {
        let s = solve_lp(&lp(&[1.0], &[&[1.0]], &[1.0]), 1e-9, 1e-9).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-15);
        assert!((s.objective_value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unbounded_detected() {
        let s = solve_lp(&lp(&[-1.0], &[&[0.0]], &[0.0]), 1e-9, 1e-9).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn infeasible_detected() {
        let s = solve_lp(
            &lp(&[1.0, 1.0], &[&[1.0, 1.0], &[1.0, -1.0]], &[1.0, 3.0]),
            1e-9,
            1e-9,
        )
        .unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let s = solve_lp(
            &lp(&[1.0, 2.0], &[&[1.0, 1.0], &[2.0, 2.0]], &[1.0, 2.0]),
            1e-9,
            1e-9,
        )
        .unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_rows_are_flipped() {
        let s = solve_lp(&lp(&[1.0, 1.0], &[&[-1.0, -2.0]], &[-4.0]), 1e-9, 1e-9).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn packed_matrix_round_trip() {
        let p = lp(&[1.0, -2.0], &[&[1.0, 1.0], &[0.5, 3.0]], &[4.0, -1.0]);
        let back = LinearProgram::from_matrix(&DenseMatrix::from_text(&p.to_matrix().to_text()).unwrap()).unwrap();
        assert_eq!(back.objective, p.objective);
        assert_eq!(back.rhs, p.rhs);
        assert_eq!(back.constraints, p.constraints);
    }

    #[test]
    fn affine_l1_empty_and_contained() {
        let r = min_l1_affine(&[1.0, -2.0], &[]).unwrap();
        assert_eq!(r.min_value, 3.0);
        assert_eq!(r.u_star, vec![0.0, 0.0]);
        let r = min_l1_affine(&[1.0, 0.0], &[vec![1.0, 0.0]]).unwrap();
        assert!(r.min_value.abs() < 1e-12);
    }

    #[test]
    fn affine_l1_matches_one_dimensional_scan() {
        // c0 = v_T for v = (0.9, 0.1, -1), T = {1, 3}; subspace spanned by v.
        let c0 = [0.9, 0.0, -1.0];
        let u = [0.9, 0.1, -1.0];
        let r = min_l1_affine(&c0, &[u.to_vec()]).unwrap();
        let f = |a: f64| (0..3).map(|i| (c0[i] + a * u[i]).abs()).sum::<f64>();
        // Ternary search on the convex 1-D function, then a dense scan.
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if f(m1) < f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let ternary = f(0.5 * (lo + hi));
        let scan = (0..=200_000)
            .map(|i| f(-10.0 + 20.0 * i as f64 / 200_000.0))
            .fold(f64::INFINITY, f64::min);
        assert!((r.min_value - ternary).abs() < 1e-9, "{} vs {ternary}", r.min_value);
        assert!(r.min_value <= scan + 1e-12);
        // The optimum is at α = -1: ‖(0, -0.1, 0)‖₁ = 0.1.
        assert!((r.min_value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn l1_subject_to_examples() {
        let id = DenseMatrix::identity(2);
        let s = min_l1_subject_to(&id, &[1.0, 0.0]).unwrap();
        assert!((s.z[0] - 1.0).abs() < 1e-15 && s.z[1].abs() < 1e-15);
        assert!((s.value - 1.0).abs() < 1e-15);

        let e = DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let s = min_l1_subject_to(&e, &[2.0]).unwrap();
        assert!((s.value - 2.0).abs() < 1e-12);
        assert!(s.z == vec![2.0, 0.0] || s.z == vec![0.0, 2.0]);

        let e = DenseMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let s = min_l1_subject_to(&e, &[2.0]).unwrap();
        assert!(s.z[0].abs() < 1e-15 && (s.z[1] - 1.0).abs() < 1e-15);

        let e = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(min_l1_subject_to(&e, &[1.0, 2.0]), Err(LpError::Infeasible)));
    }
}
