use serde::{Deserialize, Serialize};

use super::CheckError;
use crate::linalg::{kernel_basis, right_singular_pairs, KernelBasis};
use crate::lp::{solve_lp, LinearProgram, LpStatus, DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL};
use crate::matrix::{norm_inf, DenseMatrix};
use crate::support::{sign_patterns, SupportSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NspReport {
    pub holds: bool,
    /// Largest `‖v_T‖₁` over kernel vectors with `‖v_{T^c}‖₁ ≤ 1`; infinite
    /// when some kernel vector lives on a single `T`.
    #[serde(with = "crate::serde_float")]
    pub worst_ratio: f64,
    pub order: usize,
    pub kernel_dim: usize,
    pub witness_v: Option<Vec<f64>>,
    pub witness_t: Option<SupportSet>,
    pub lps_solved: usize,
}

/// One optimum of the per-`(T, sigma)` program.
#[derive(Clone, Debug)]
pub(crate) struct NspVertex {
    pub ratio: f64,
    pub v: Vec<f64>,
    pub t: SupportSet,
}

/// Exact k-NSP test for `m` at tolerance.
///
/// For each `|T| = k` and sign pattern on `T` (first sign fixed, the other
/// half follows from `v -> -v`) the program `max sigma·v_T` over
/// `v ∈ ker m, ‖v_{T^c}‖₁ ≤ 1` is solved. The property holds iff every
/// optimum is below `1 - strict_margin`.
pub fn check_nsp(m: &DenseMatrix, k: usize, tol: f64, strict_margin: f64) -> Result<NspReport, CheckError> {
    let n = m.cols();
    if k == 0 || k > n {
        return Err(CheckError::BadOrder { k, max: n });
    }
    let kernel = kernel_basis(m, tol)?;
    nsp_on_kernel(&kernel, k, tol, strict_margin)
}

pub(crate) fn nsp_on_kernel(
    kernel: &KernelBasis,
    k: usize,
    tol: f64,
    strict_margin: f64,
) -> Result<NspReport, CheckError> {
    let n = kernel.ambient_dim;
    let mut report = NspReport {
        holds: true,
        worst_ratio: 0.0,
        order: k,
        kernel_dim: kernel.dim(),
        witness_v: None,
        witness_t: None,
        lps_solved: 0,
    };
    if kernel.is_trivial() {
        return Ok(report);
    }
    let mut best: Option<NspVertex> = None;
    for t in SupportSet::all_of_size(n, k) {
        let (vertices, solved) = vertices_for_support(kernel, &t, tol)?;
        report.lps_solved += solved;
        for vx in vertices {
            if best.as_ref().is_none_or(|b| vx.ratio > b.ratio) {
                best = Some(vx);
            }
        }
        // An infinite ratio cannot be beaten.
        if best.as_ref().is_some_and(|b| b.ratio.is_infinite()) {
            break;
        }
    }
    let best = best.expect("nontrivial kernel yields at least one vertex");
    report.worst_ratio = best.ratio;
    report.holds = best.ratio < 1.0 - strict_margin;
    if !report.holds {
        report.witness_v = Some(best.v);
        report.witness_t = Some(best.t);
    }
    Ok(report)
}

/// Optima of the NSP programs for one support, one per sign pattern with a
/// leading `+1`. When a kernel vector is supported inside `T` that vector is
/// returned alone with an infinite ratio.
pub(crate) fn vertices_for_support(
    kernel: &KernelBasis,
    t: &SupportSet,
    tol: f64,
) -> Result<(Vec<NspVertex>, usize), CheckError> {
    let tc = t.complement();
    let p = kernel.dim();
    if let Some(v) = kernel_vector_inside(kernel, &tc, tol)? {
        return Ok((
            vec![NspVertex {
                ratio: f64::INFINITY,
                v,
                t: t.clone(),
            }],
            0,
        ));
    }
    let q = tc.len();
    let nv = 2 * p + 2 * q + 1;
    let mut e = DenseMatrix::zeros(q + 1, nv);
    for (r, &i) in tc.iter().enumerate() {
        for j in 0..p {
            let kij = kernel.vectors[j][i];
            e[(r, j)] = kij;
            e[(r, p + j)] = -kij;
        }
        e[(r, 2 * p + r)] = -1.0;
        e[(r, 2 * p + q + r)] = 1.0;
    }
    for c in 2 * p..nv {
        e[(q, c)] = 1.0;
    }
    let mut rhs = vec![0.0; q + 1];
    rhs[q] = 1.0;

    let mut out = Vec::new();
    let mut solved = 0;
    for sigma in sign_patterns(t.len()).into_iter().filter(|s| s[0] > 0.0) {
        let mut c = vec![0.0; nv];
        for (s, &i) in sigma.iter().zip(t.indices()) {
            for j in 0..p {
                let kij = kernel.vectors[j][i];
                c[j] -= s * kij;
                c[p + j] += s * kij;
            }
        }
        let lp = LinearProgram::new(c, e.clone(), rhs.clone())?;
        let sol = solve_lp(&lp, DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL)?;
        solved += 1;
        if sol.status != LpStatus::Optimal {
            // The feasible set is bounded in `v` once the pre-check passed,
            // and `v = 0` is feasible.
            return Err(CheckError::Precondition(format!(
                "NSP program for support {:?} ended {:?}",
                t.indices(),
                sol.status
            )));
        }
        let w: Vec<f64> = (0..p).map(|j| sol.x[j] - sol.x[p + j]).collect();
        let v = kernel.combine(&w);
        let off: f64 = tc.iter().map(|&i| v[i].abs()).sum();
        let on = t.norm1_on(&v);
        // Re-evaluate on the recovered vector rather than trusting the LP
        // value, so the ratio is exactly the one the witness exhibits.
        let ratio = if off > 0.0 { on / off } else if on > 0.0 { f64::INFINITY } else { 0.0 };
        out.push(NspVertex {
            ratio,
            v,
            t: t.clone(),
        });
    }
    Ok((out, solved))
}

/// A nonzero kernel vector vanishing on `tc`, scaled to unit max-norm.
///
/// Kernel vectors are orthonormal, so the smallest singular value of the
/// `tc` rows is the least off-support mass a unit combination can have; at
/// or below `tol` that combination is treated as living on the support.
fn kernel_vector_inside(kernel: &KernelBasis, tc: &[usize], tol: f64) -> Result<Option<Vec<f64>>, CheckError> {
    let p = kernel.dim();
    if tc.is_empty() {
        return Ok(Some(unit_inf(kernel.vectors[0].clone())));
    }
    let mut sub = DenseMatrix::zeros(tc.len(), p);
    for (r, &i) in tc.iter().enumerate() {
        for j in 0..p {
            sub[(r, j)] = kernel.vectors[j][i];
        }
    }
    let (sigma, v_cols) = right_singular_pairs(&sub)?;
    if *sigma.last().expect("nonempty") > tol {
        return Ok(None);
    }
    let w = v_cols.last().expect("nonempty");
    Ok(Some(unit_inf(kernel.combine(w))))
}

fn unit_inf(mut v: Vec<f64>) -> Vec<f64> {
    let s = norm_inf(&v);
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn invertible_square_holds_everywhere() {
        let a = m(&[&[2.0, 1.0], &[1.0, 3.0]]);
        for k in 1..=2 {
            let r = check_nsp(&a, k, 1e-9, 1e-7).unwrap();
            assert!(r.holds);
            assert_eq!(r.worst_ratio, 0.0);
        }
    }

    #[test]
    fn difference_row_fails_at_equality() {
        let r = check_nsp(&m(&[&[1.0, -1.0]]), 1, 1e-9, 1e-7).unwrap();
        assert!(!r.holds);
        assert!((r.worst_ratio - 1.0).abs() < 1e-12);
        let v = r.witness_v.unwrap();
        assert!((v[0] - v[1]).abs() < 1e-12);
    }

    #[test]
    fn all_ones_kernel_ratio_half() {
        let r = check_nsp(&m(&[&[1.0, 0.0, -1.0], &[0.0, 1.0, -1.0]]), 1, 1e-9, 1e-7).unwrap();
        assert!(r.holds);
        assert!((r.worst_ratio - 0.5).abs() < 1e-12);
        let r2 = check_nsp(&m(&[&[1.0, 0.0, -1.0], &[0.0, 1.0, -1.0]]), 2, 1e-9, 1e-7).unwrap();
        assert!(!r2.holds);
        assert!((r2.worst_ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_on_support_is_infinite() {
        // Kernel spanned by e3.
        let a = m(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let r = check_nsp(&a, 1, 1e-9, 1e-7).unwrap();
        assert!(!r.holds);
        assert!(r.worst_ratio.is_infinite());
        assert_eq!(r.witness_t.unwrap().indices(), &[2]);
        let json = serde_json::to_value(&check_nsp(&a, 1, 1e-9, 1e-7).unwrap()).unwrap();
        assert_eq!(json["worst_ratio"], "inf");
    }

    #[test]
    fn order_is_validated() {
        assert!(matches!(
            check_nsp(&m(&[&[1.0, 1.0]]), 3, 1e-9, 1e-7),
            Err(CheckError::BadOrder { .. })
        ));
    }
}
