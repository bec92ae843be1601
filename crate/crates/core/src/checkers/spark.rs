use serde::{Deserialize, Serialize};

use super::{CheckError, SPARK_SUBSET_BUDGET};
use crate::linalg::svd_values;
use crate::matrix::DenseMatrix;
use crate::support::{binomial, SupportSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SparkValue {
    Finite(usize),
    /// Every column subset is independent.
    NoDependence(NoDependenceTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoDependenceTag {
    NoDependence,
}

impl SparkValue {
    pub fn finite(self) -> Option<usize> {
        match self {
            SparkValue::Finite(s) => Some(s),
            SparkValue::NoDependence(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparkReport {
    pub spark: SparkValue,
    pub full_spark: bool,
    /// Lexicographically first dependent subset of minimal size.
    pub witness: Option<SupportSet>,
    /// Smallest singular value of the witness columns.
    pub witness_sigma_min: Option<f64>,
    pub subsets_checked: u128,
}

/// Exact spark by enumerating column subsets in increasing size.
///
/// A subset counts as dependent when its smallest singular value is at most
/// `tol * sigma_max(D)`. `full_spark` means every `d`-column subset has rank
/// `d`; it is false whenever `n < d`.
pub fn spark(d: &DenseMatrix, tol: f64) -> Result<SparkReport, CheckError> {
    let (rows, n) = d.shape();
    let max_size = n.min(rows + 1);
    let needed: u128 = (1..=max_size).map(|s| binomial(n, s)).sum();
    if needed > SPARK_SUBSET_BUDGET {
        return Err(CheckError::SparkBudget {
            subsets: needed,
            budget: SPARK_SUBSET_BUDGET,
        });
    }
    let scale = svd_values(d)?[0];
    let threshold = tol * scale;
    let mut checked = 0u128;
    for size in 1..=max_size {
        for t in SupportSet::all_of_size(n, size) {
            checked += 1;
            let sub = d.select_columns(t.indices())?;
            let sv = svd_values(&sub)?;
            // A subset wider than the row count is always dependent.
            let smin = if size > rows { 0.0 } else { *sv.last().expect("nonempty") };
            if smin <= threshold {
                return Ok(SparkReport {
                    spark: SparkValue::Finite(size),
                    full_spark: n >= rows && size > rows,
                    witness: Some(t),
                    witness_sigma_min: Some(smin),
                    subsets_checked: checked,
                });
            }
        }
    }
    Ok(SparkReport {
        spark: SparkValue::NoDependence(NoDependenceTag::NoDependence),
        full_spark: n >= rows,
        witness: None,
        witness_sigma_min: None,
        subsets_checked: checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicated_column() {
        let d = DenseMatrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let r = spark(&d, 1e-9).unwrap();
        assert_eq!(r.spark, SparkValue::Finite(2));
        assert!(!r.full_spark);
        assert_eq!(r.witness.unwrap().indices(), &[0, 2]);
    }

    #[test]
    fn identity_plus_diagonal_column_is_full_spark() {
        let d = DenseMatrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let r = spark(&d, 1e-9).unwrap();
        assert_eq!(r.spark, SparkValue::Finite(3));
        assert!(r.full_spark);
        assert_eq!(r.subsets_checked, 3 + 3 + 1);
    }

    #[test]
    fn identity_has_no_dependence() {
        let r = spark(&DenseMatrix::identity(3), 1e-9).unwrap();
        assert_eq!(r.spark.finite(), None);
        assert!(r.full_spark);
        assert!(r.witness.is_none());
        let json = serde_json::to_string(&r.spark).unwrap();
        assert_eq!(json, "\"NoDependence\"");
    }

    #[test]
    fn zero_column_has_spark_one() {
        let d = DenseMatrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let r = spark(&d, 1e-9).unwrap();
        assert_eq!(r.spark, SparkValue::Finite(1));
    }

    #[test]
    fn budget_is_enforced() {
        let d = DenseMatrix::from_row_major(12, 40, (0..480).map(|i| (i as f64).sin()).collect()).unwrap();
        assert!(matches!(spark(&d, 1e-9), Err(CheckError::SparkBudget { .. })));
    }
}
