use serde::{Deserialize, Serialize};

use super::{CheckError, DEFAULT_STRICT_MARGIN, DEFAULT_SUPP_TOL};
use crate::linalg::{kernel_basis, KernelBasis};
use crate::matrix::{norm_inf, DenseMatrix};
use crate::support::SupportSet;

/// The two conditions on a kernel vector `u` and support `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaChecks {
    pub u_t_norm1: f64,
    pub u_tc_norm1: f64,
    /// `(‖u_T‖₁ − ‖u_{T^c}‖₁) / ‖u_{T^c}‖₁`; must exceed the strict margin.
    #[serde(with = "crate::serde_float")]
    pub dominance_margin: f64,
    pub dominance: bool,
    /// Smallest `|u_i|` over `T^c`, infinite when `T^c` is empty.
    #[serde(with = "crate::serde_float")]
    pub min_abs_off_support: f64,
    pub off_support_nonzero: bool,
}

impl LemmaChecks {
    pub fn evaluate(u: &[f64], t: &SupportSet, strict_margin: f64, supp_tol: f64) -> Self {
        let on = t.norm1_on(u);
        let off = t.norm1_off(u);
        let dominance_margin = if off > 0.0 { (on - off) / off } else { f64::INFINITY };
        let min_abs_off_support = t
            .complement()
            .iter()
            .map(|&i| u[i].abs())
            .fold(f64::INFINITY, f64::min);
        Self {
            u_t_norm1: on,
            u_tc_norm1: off,
            dominance_margin,
            dominance: dominance_margin > strict_margin,
            min_abs_off_support,
            off_support_nonzero: min_abs_off_support > supp_tol,
        }
    }

    pub fn passed(&self) -> bool {
        self.dominance && self.off_support_nonzero
    }
}

/// Evidence that `D` admits no `|T|`-D-NSP sensing matrix with `m < d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Kernel vector of `D`, scaled to max-norm 1 with its first nonzero
    /// entry positive.
    pub u: Vec<f64>,
    pub t: SupportSet,
    pub checks: LemmaChecks,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome")]
pub enum CertificateSearch {
    Found(Certificate),
    NotFound,
    /// The certificate is only defined for a one-dimensional `ker D`.
    NotApplicable { kernel_dim: usize },
}

impl CertificateSearch {
    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            CertificateSearch::Found(c) => Some(c),
            _ => None,
        }
    }
}

/// Searches every `|T| = k`, heaviest `‖u_T‖₁` first, for a support meeting
/// both conditions.
pub fn inadmissibility_certificate(d: &DenseMatrix, k: usize, tol: f64) -> Result<CertificateSearch, CheckError> {
    let kernel = kernel_basis(d, tol)?;
    certificate_from_kernel(&kernel, k, DEFAULT_STRICT_MARGIN, DEFAULT_SUPP_TOL)
}

pub fn certificate_from_kernel(
    kernel: &KernelBasis,
    k: usize,
    strict_margin: f64,
    supp_tol: f64,
) -> Result<CertificateSearch, CheckError> {
    let n = kernel.ambient_dim;
    if k < 2 || k > n {
        return Err(CheckError::BadOrder { k, max: n });
    }
    if kernel.dim() != 1 {
        return Ok(CertificateSearch::NotApplicable {
            kernel_dim: kernel.dim(),
        });
    }
    let u = canonical(&kernel.vectors[0]);
    let mut supports: Vec<(f64, SupportSet)> = SupportSet::all_of_size(n, k)
        .map(|t| (t.norm1_on(&u), t))
        .collect();
    // Stable sort keeps lexicographic order among equal weights.
    supports.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (_, t) in supports {
        let checks = LemmaChecks::evaluate(&u, &t, strict_margin, supp_tol);
        if checks.passed() {
            return Ok(CertificateSearch::Found(Certificate { u, t, checks }));
        }
    }
    Ok(CertificateSearch::NotFound)
}

fn canonical(v: &[f64]) -> Vec<f64> {
    let s = norm_inf(v);
    let lead = v.iter().find(|x| x.abs() > 1e-12 * s).copied().unwrap_or(1.0);
    let scale = lead.signum() * s;
    v.iter().map(|x| x / scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols(c: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_columns(&c.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn correlated_third_column_is_certified() {
        let d = cols(&[&[1.0, 0.0], &[0.0, 1.0], &[0.9, 0.1]]);
        let found = inadmissibility_certificate(&d, 2, 1e-9).unwrap();
        let c = found.certificate().expect("certificate");
        assert_eq!(c.t.indices(), &[0, 2]);
        for (x, want) in c.u.iter().zip([0.9, 0.1, -1.0]) {
            assert!((x - want).abs() < 1e-12);
        }
        assert!((c.checks.u_t_norm1 - 1.9).abs() < 1e-12);
        assert!((c.checks.u_tc_norm1 - 0.1).abs() < 1e-12);
        assert!(c.checks.passed());
    }

    #[test]
    fn exact_duplicate_has_no_certificate() {
        let d = cols(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(inadmissibility_certificate(&d, 2, 1e-9).unwrap(), CertificateSearch::NotFound);
    }

    #[test]
    fn trivial_kernel_is_not_applicable() {
        assert_eq!(
            inadmissibility_certificate(&DenseMatrix::identity(3), 2, 1e-9).unwrap(),
            CertificateSearch::NotApplicable { kernel_dim: 0 }
        );
    }

    #[test]
    fn order_one_is_rejected() {
        let d = cols(&[&[1.0, 0.0], &[0.0, 1.0], &[0.9, 0.1]]);
        assert!(inadmissibility_certificate(&d, 1, 1e-9).is_err());
    }
}
