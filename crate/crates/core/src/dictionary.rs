//! Seeded dictionary families. Each constructor checks full row rank and
//! caches the spark report and the kernel basis of the result.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkers::{certificate_from_kernel, spark, CertificateSearch, CheckError, LemmaChecks, SparkReport};
use crate::checkers::{Certificate, DEFAULT_STRICT_MARGIN, DEFAULT_SUPP_TOL};
use crate::linalg::{kernel_basis, qr_decompose, rank, KernelBasis, LinalgError, DEFAULT_RANK_TOL};
use crate::matrix::{dot, norm1, DenseMatrix, MatrixError};
use crate::rng::{gaussian_matrix, seeded, unit_vec};
use crate::support::SupportSet;

/// Draws of `w` allowed before the perturbed basis constructor gives up.
pub const PERTURBED_ONB_REDRAW_CAP: usize = 100;

/// `|⟨v, φ_i⟩|` at or below this counts as lying on a coordinate hyperplane.
const HYPERPLANE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("dictionary must have full row rank ({rank} < {rows})")]
    RankDeficient { rank: usize, rows: usize },
    #[error("no admissible perturbation found in {attempts} draws at r = {r}; try a smaller r")]
    RedrawCap { attempts: usize, r: f64 },
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Identity { d: usize },
    Gaussian { d: usize, n: usize, seed: u64 },
    PerturbedOnb { d: usize, r: f64, seed: Option<u64>, draws: usize },
    RepeatColumns { base: Box<Family>, repeated: Vec<usize> },
    AugmentColumn { base: Box<Family>, alpha: Vec<f64> },
    HarmonicFrame { d: usize, n: usize },
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    matrix: DenseMatrix,
    family: Family,
    /// `None` only when the spark subset budget was exceeded.
    spark: Option<SparkReport>,
    kernel: KernelBasis,
    certificate: Option<Certificate>,
}

/// What the sidecar file next to a dictionary matrix records.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DictionaryMetadata {
    pub family: Family,
    pub rows: usize,
    pub cols: usize,
    pub spark: Option<SparkReport>,
    pub kernel_dim: usize,
    pub certificate: Option<Certificate>,
}

impl Dictionary {
    fn build(matrix: DenseMatrix, family: Family) -> Result<Self, DictionaryError> {
        let (d, n) = matrix.shape();
        if n < d {
            return Err(DictionaryError::BadParameter(format!("need n >= d, got {d}x{n}")));
        }
        let r = rank(&matrix, DEFAULT_RANK_TOL)?;
        if r < d {
            return Err(DictionaryError::RankDeficient { rank: r, rows: d });
        }
        let spark = match spark(&matrix, DEFAULT_RANK_TOL) {
            Ok(s) => Some(s),
            Err(CheckError::SparkBudget { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        let kernel = kernel_basis(&matrix, DEFAULT_RANK_TOL)?;
        Ok(Self {
            matrix,
            family,
            spark,
            kernel,
            certificate: None,
        })
    }

    /// Wraps an arbitrary full row rank matrix.
    pub fn from_matrix(matrix: DenseMatrix) -> Result<Self, DictionaryError> {
        Self::build(matrix, Family::Custom)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn spark(&self) -> Option<&SparkReport> {
        self.spark.as_ref()
    }

    pub fn is_full_spark(&self) -> bool {
        self.spark.as_ref().is_some_and(|s| s.full_spark)
    }

    pub fn kernel(&self) -> &KernelBasis {
        &self.kernel
    }

    /// The inadmissibility certificate verified at construction, if the
    /// family provides one.
    pub fn certificate(&self) -> Option<&Certificate> {
        self.certificate.as_ref()
    }

    pub fn d(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n(&self) -> usize {
        self.matrix.cols()
    }

    pub fn metadata(&self) -> DictionaryMetadata {
        DictionaryMetadata {
            family: self.family.clone(),
            rows: self.d(),
            cols: self.n(),
            spark: self.spark.clone(),
            kernel_dim: self.kernel.dim(),
            certificate: self.certificate.clone(),
        }
    }

    /// Writes the matrix to `path` and the metadata to `path` + `.meta.json`.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), MatrixError> {
        let path = path.as_ref();
        self.matrix.write_file(path)?;
        let mut meta = path.as_os_str().to_owned();
        meta.push(".meta.json");
        let text = serde_json::to_string_pretty(&self.metadata()).expect("metadata is always serializable");
        std::fs::write(&meta, text).map_err(|source| MatrixError::Io {
            path: meta.to_string_lossy().into_owned(),
            source,
        })
    }
}

pub fn identity_dictionary(d: usize) -> Result<Dictionary, DictionaryError> {
    if d == 0 {
        return Err(DictionaryError::BadParameter("d must be positive".into()));
    }
    Dictionary::build(DenseMatrix::identity(d), Family::Identity { d })
}

/// I.i.d. standard normal entries.
pub fn gaussian_dictionary(d: usize, n: usize, seed: u64) -> Result<Dictionary, DictionaryError> {
    if d == 0 || n < d {
        return Err(DictionaryError::BadParameter(format!("need 1 <= d <= n, got d = {d}, n = {n}")));
    }
    let m = gaussian_matrix(&mut seeded(seed), d, n);
    Dictionary::build(m, Family::Gaussian { d, n, seed })
}

/// `[Φ, φ₁ + r w]` with `Φ` a random orthonormal basis and `w` a random unit
/// vector, redrawn until the appended column is off every coordinate
/// hyperplane of `Φ` and the kernel vector passes both certificate
/// conditions on `T = {1, d+1}`.
pub fn perturbed_onb_dictionary(d: usize, r: f64, seed: u64) -> Result<Dictionary, DictionaryError> {
    if d < 2 {
        return Err(DictionaryError::BadParameter("d must be at least 2".into()));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(DictionaryError::BadParameter(format!("r must be positive, got {r}")));
    }
    let mut rng = seeded(seed);
    let (phi, _) = qr_decompose(&gaussian_matrix(&mut rng, d, d));
    for attempt in 1..=PERTURBED_ONB_REDRAW_CAP {
        let w = unit_vec(&mut rng, d);
        let family = Family::PerturbedOnb {
            d,
            r,
            seed: Some(seed),
            draws: attempt,
        };
        if let Some(dict) = try_perturbed(&phi, &w, r, family)? {
            return Ok(dict);
        }
    }
    Err(DictionaryError::RedrawCap {
        attempts: PERTURBED_ONB_REDRAW_CAP,
        r,
    })
}

/// The perturbed basis construction with `Φ` and `w` given; `w` is scaled
/// to unit length. Fails if the result does not carry a certificate.
pub fn perturbed_onb_from_parts(phi: &DenseMatrix, w: &[f64], r: f64) -> Result<Dictionary, DictionaryError> {
    let d = phi.rows();
    if phi.cols() != d || w.len() != d || d < 2 {
        return Err(DictionaryError::BadParameter("need a square basis of size >= 2 and matching w".into()));
    }
    let s = crate::matrix::norm2(w);
    if s == 0.0 {
        return Err(DictionaryError::BadParameter("w must be nonzero".into()));
    }
    let w: Vec<f64> = w.iter().map(|x| x / s).collect();
    let family = Family::PerturbedOnb {
        d,
        r,
        seed: None,
        draws: 1,
    };
    try_perturbed(phi, &w, r, family)?.ok_or(DictionaryError::RedrawCap { attempts: 1, r })
}

fn try_perturbed(phi: &DenseMatrix, w: &[f64], r: f64, family: Family) -> Result<Option<Dictionary>, DictionaryError> {
    let d = phi.rows();
    let phi1 = phi.column(0);
    let v: Vec<f64> = phi1.iter().zip(w).map(|(p, x)| p + r * x).collect();
    if (0..d).any(|i| dot(&v, &phi.column(i)).abs() <= HYPERPLANE_TOL) {
        return Ok(None);
    }
    let matrix = phi.hcat(&DenseMatrix::column_vector(&v)?)?;
    let mut dict = Dictionary::build(matrix, family)?;
    let t = SupportSet::new(vec![0, d], d + 1).expect("indices in range");
    let Some(u) = dict.kernel.vectors.first() else {
        return Ok(None);
    };
    if !LemmaChecks::evaluate(u, &t, DEFAULT_STRICT_MARGIN, DEFAULT_SUPP_TOL).passed() {
        return Ok(None);
    }
    match certificate_from_kernel(&dict.kernel, 2, DEFAULT_STRICT_MARGIN, DEFAULT_SUPP_TOL)? {
        CertificateSearch::Found(c) => dict.certificate = Some(c),
        _ => return Ok(None),
    }
    Ok(Some(dict))
}

/// `[D, D_I]`: the columns of `D` followed by copies of the columns in
/// `repeated` (0-based).
pub fn repeat_columns(base: &Dictionary, repeated: &[usize]) -> Result<Dictionary, DictionaryError> {
    if let Some(&bad) = repeated.iter().find(|&&i| i >= base.n()) {
        return Err(DictionaryError::BadParameter(format!("column {bad} out of range")));
    }
    let mut matrix = base.matrix.clone();
    if !repeated.is_empty() {
        matrix = matrix.hcat(&base.matrix.select_columns(repeated)?)?;
    }
    Dictionary::build(
        matrix,
        Family::RepeatColumns {
            base: Box::new(base.family.clone()),
            repeated: repeated.to_vec(),
        },
    )
}

/// `[B, Bα]` for `‖α‖₁ ≤ 1`.
pub fn augment_column(base: &Dictionary, alpha: &[f64]) -> Result<Dictionary, DictionaryError> {
    if alpha.len() != base.n() {
        return Err(DictionaryError::BadParameter(format!(
            "alpha has {} entries, B has {} columns",
            alpha.len(),
            base.n()
        )));
    }
    let l1 = norm1(alpha);
    if !(l1 <= 1.0 + 1e-12) {
        return Err(DictionaryError::BadParameter(format!("need ‖alpha‖₁ <= 1, got {l1}")));
    }
    let v = base.matrix.mul_vec(alpha);
    let matrix = base.matrix.hcat(&DenseMatrix::column_vector(&v)?)?;
    Dictionary::build(
        matrix,
        Family::AugmentColumn {
            base: Box::new(base.family.clone()),
            alpha: alpha.to_vec(),
        },
    )
}

/// The first `d` rows of the real Fourier basis sampled at `n` equispaced
/// points, ordered `cos 1, sin 1, cos 2, sin 2, …`, then the constant row,
/// then (for even `n`) the alternating row. Rows are orthonormal; full spark
/// is whatever the spark check reports.
pub fn harmonic_frame(d: usize, n: usize) -> Result<Dictionary, DictionaryError> {
    if d == 0 || n < d {
        return Err(DictionaryError::BadParameter(format!("need 1 <= d <= n, got d = {d}, n = {n}")));
    }
    let tau = 2.0 * std::f64::consts::PI / n as f64;
    let wave = (2.0 / n as f64).sqrt();
    let flat = (1.0 / n as f64).sqrt();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 1..n.div_ceil(2) {
        rows.push((0..n).map(|t| wave * (tau * (j * t) as f64).cos()).collect());
        rows.push((0..n).map(|t| wave * (tau * (j * t) as f64).sin()).collect());
    }
    rows.push(vec![flat; n]);
    if n % 2 == 0 {
        rows.push((0..n).map(|t| if t % 2 == 0 { flat } else { -flat }).collect());
    }
    rows.truncate(d);
    Dictionary::build(DenseMatrix::from_rows(&rows)?, Family::HarmonicFrame { d, n })
}
