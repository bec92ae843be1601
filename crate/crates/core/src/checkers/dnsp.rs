use serde::{Deserialize, Serialize};

use super::certificate::{certificate_from_kernel, Certificate, CertificateSearch};
use super::nsp::{nsp_on_kernel, vertices_for_support, NspReport};
use super::spark::{spark, SparkReport};
use super::vertex::{cone_maximum, dual_vertices, restricted};
use super::{CheckError, DEFAULT_SAMPLING_BUDGET, DEFAULT_STRICT_MARGIN, DEFAULT_SUPP_TOL};
use crate::linalg::{kernel_basis, svd_values, KernelBasis, DEFAULT_RANK_TOL};
use crate::lp::{min_l1_affine, min_l1_subject_to};
use crate::matrix::{norm1, norm2, norm_inf, sub_vec, DenseMatrix};
use crate::recovery::{optimal_face_extremes, RecoveryError, RecoveryProblem};
use crate::rng::{gaussian_vec, seeded};
use crate::support::{sign_patterns, SupportSet};

/// Search candidates with `‖Dv‖₂` below this fraction of `σ_max(D)‖v‖₂` are
/// ignored: they sit next to `ker D`, where the margin is close to zero
/// for reasons unrelated to recovery.
const SYNTHESIS_FLOOR: f64 = 1e-6;

/// Relative residual allowed for `ADv = 0`.
const KERNEL_RESIDUAL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnspOptions {
    pub tol: f64,
    pub strict_margin: f64,
    pub sampling_budget: usize,
    pub supp_tol: f64,
    pub seed: u64,
}

impl Default for DnspOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_RANK_TOL,
            strict_margin: DEFAULT_STRICT_MARGIN,
            sampling_budget: DEFAULT_SAMPLING_BUDGET,
            supp_tol: DEFAULT_SUPP_TOL,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DnspDecision {
    Holds,
    Fails,
    Undecided,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionMethod {
    /// `D` is full spark, so the property is the plain NSP of `AD`.
    FullSparkReduction,
    /// `AD` has the NSP, which is sufficient for any `D`.
    NspSufficiency,
    LemmaCertificate,
    Falsification,
    /// Exact search over the vertices of the dual polytope of `D`.
    VertexEnumeration,
    SamplingOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessSource {
    NspVertex,
    RecoveryFailure,
    RandomDirection,
    LemmaConstruction,
    DualVertex,
}

/// A pair `(v, T)` with `ADv = 0`, `Dv ≠ 0` and no `u ∈ ker D` making
/// `‖v_T + u‖₁` smaller than `‖v_{T^c}‖₁` by more than the margin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnspWitness {
    pub v: Vec<f64>,
    pub t: SupportSet,
    /// `min_u ‖v_T + u‖₁ − ‖v_{T^c}‖₁`.
    pub margin: f64,
    pub normalized_margin: f64,
    pub dv_norm: f64,
    pub source: WitnessSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalsificationOutcome {
    pub witness: Option<DnspWitness>,
    /// Largest normalized margin seen; `-inf` when nothing was examined.
    #[serde(with = "crate::serde_float")]
    pub worst_margin: f64,
    pub candidates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnspReport {
    pub decision: DnspDecision,
    pub method: DecisionMethod,
    pub order: usize,
    pub witness: Option<DnspWitness>,
    pub certificate: Option<Certificate>,
    pub nsp: Option<NspReport>,
    pub full_spark: Option<bool>,
    /// Largest normalized margin met by the falsification search.
    #[serde(with = "crate::serde_float")]
    pub worst_margin: f64,
    pub candidates_examined: usize,
    pub notes: Vec<String>,
}

/// `A`, `D` and everything the D-NSP routines derive from them.
#[derive(Clone, Debug)]
pub struct DnspContext {
    pub a: DenseMatrix,
    pub d: DenseMatrix,
    pub ad: DenseMatrix,
    pub ker_d: KernelBasis,
    pub ker_ad: KernelBasis,
    pub d_sigma_max: f64,
    /// `None` when the subset budget was too small to decide.
    pub spark: Option<SparkReport>,
    tol: f64,
}

impl DnspContext {
    pub fn new(a: &DenseMatrix, d: &DenseMatrix, tol: f64) -> Result<Self, CheckError> {
        let report = match spark(d, tol) {
            Ok(r) => Some(r),
            Err(CheckError::SparkBudget { .. }) => None,
            Err(e) => return Err(e),
        };
        Self::with_spark(a, d, tol, report)
    }

    /// As [`DnspContext::new`] with a spark report computed elsewhere.
    pub fn with_spark(a: &DenseMatrix, d: &DenseMatrix, tol: f64, spark: Option<SparkReport>) -> Result<Self, CheckError> {
        if a.cols() != d.rows() {
            return Err(CheckError::Dimensions(format!(
                "A is {}x{} but D has {} rows",
                a.rows(),
                a.cols(),
                d.rows()
            )));
        }
        let ad = a.matmul(d)?;
        Ok(Self {
            ker_d: kernel_basis(d, tol)?,
            ker_ad: kernel_basis(&ad, tol)?,
            d_sigma_max: svd_values(d)?[0],
            a: a.clone(),
            d: d.clone(),
            ad,
            spark,
            tol,
        })
    }

    pub fn n(&self) -> usize {
        self.d.cols()
    }

    /// `min_{u ∈ ker D} ‖v_T + u‖₁ − ‖v_{T^c}‖₁`, without precondition checks.
    pub fn raw_margin(&self, v: &[f64], t: &SupportSet) -> Result<f64, CheckError> {
        let inner = min_l1_affine(&t.restrict(v), &self.ker_d.vectors)?;
        Ok(inner.min_value - t.norm1_off(v))
    }

    /// `raw_margin` after checking `ADv ≈ 0` and `Dv ≠ 0`.
    pub fn margin(&self, v: &[f64], t: &SupportSet) -> Result<f64, CheckError> {
        if v.len() != self.n() || t.ambient() != self.n() {
            return Err(CheckError::Dimensions(format!("expected vectors of length {}", self.n())));
        }
        let vn = norm2(v);
        let adv = norm2(&self.ad.mul_vec(v));
        if adv > KERNEL_RESIDUAL * self.a.frobenius_norm() * self.d.frobenius_norm() * vn {
            return Err(CheckError::Precondition(format!("Dv is not in ker A (residual {adv:.3e})")));
        }
        let dv = norm2(&self.d.mul_vec(v));
        if dv <= 1e-12 * self.d.frobenius_norm() * vn {
            return Err(CheckError::Precondition("Dv = 0".into()));
        }
        self.raw_margin(v, t)
    }

    fn normalizer(v: &[f64], t: &SupportSet) -> f64 {
        let off = t.norm1_off(v);
        if off > 0.0 {
            off
        } else {
            norm1(v).max(f64::MIN_POSITIVE)
        }
    }

    /// Scores a search candidate. Returns its normalized margin, or `None`
    /// when it is too close to `ker D` or off `ker(AD)` to count.
    fn score(&self, v: &[f64], t: &SupportSet) -> Result<Option<(f64, f64, f64)>, CheckError> {
        let vn = norm2(v);
        if vn == 0.0 {
            return Ok(None);
        }
        let dv = norm2(&self.d.mul_vec(v));
        if dv < SYNTHESIS_FLOOR * self.d_sigma_max * vn {
            return Ok(None);
        }
        let adv = norm2(&self.ad.mul_vec(v));
        if adv > KERNEL_RESIDUAL * self.a.frobenius_norm() * self.d.frobenius_norm() * vn {
            return Ok(None);
        }
        let raw = self.raw_margin(v, t)?;
        Ok(Some((raw, raw / Self::normalizer(v, t), dv)))
    }

    /// Deterministic search for a witness: NSP vertices of `ker(AD)`, then
    /// failed recoveries of sign-vertex signals, then random directions.
    pub fn falsify(&self, k: usize, opts: &DnspOptions) -> Result<FalsificationOutcome, CheckError> {
        let n = self.n();
        if k == 0 || k > n {
            return Err(CheckError::BadOrder { k, max: n });
        }
        let mut search = Search {
            ctx: self,
            strict: opts.strict_margin,
            worst: f64::NEG_INFINITY,
            candidates: 0,
        };
        let empty = FalsificationOutcome {
            witness: None,
            worst_margin: f64::NEG_INFINITY,
            candidates: 0,
        };
        if self.ker_ad.is_trivial() {
            return Ok(empty);
        }
        for t in SupportSet::all_of_size(n, k) {
            let (vertices, _) = vertices_for_support(&self.ker_ad, &t, self.tol)?;
            for vx in vertices {
                if let Some(w) = search.offer(&vx.v, &t, WitnessSource::NspVertex)? {
                    return Ok(search.finish(Some(w)));
                }
            }
        }
        for t in SupportSet::all_of_size(n, k) {
            for sigma in sign_patterns(k).into_iter().filter(|s| s[0] > 0.0) {
                for v in self.recovery_candidates(&t, &sigma)? {
                    if let Some(w) = search.offer(&v, &t, WitnessSource::RecoveryFailure)? {
                        return Ok(search.finish(Some(w)));
                    }
                }
            }
        }
        let mut rng = seeded(opts.seed);
        for _ in 0..opts.sampling_budget {
            let g = gaussian_vec(&mut rng, self.ker_ad.dim());
            let v = self.ker_ad.combine(&g);
            let t = SupportSet::top_k(&v, k);
            if let Some(w) = search.offer(&v, &t, WitnessSource::RandomDirection)? {
                return Ok(search.finish(Some(w)));
            }
        }
        Ok(search.finish(None))
    }

    /// `z0 − ẑ` for the returned minimizer and for every extreme point of
    /// the optimal face, where `z0` carries `sigma` on `t`.
    fn recovery_candidates(&self, t: &SupportSet, sigma: &[f64]) -> Result<Vec<Vec<f64>>, CheckError> {
        let mut z0 = vec![0.0; self.n()];
        for (s, &i) in sigma.iter().zip(t.indices()) {
            z0[i] = *s;
        }
        let y = self.ad.mul_vec(&z0);
        let sol = min_l1_subject_to(&self.ad, &y)?;
        let problem = RecoveryProblem::new(self.a.clone(), self.d.clone(), y, 0.0).map_err(recovery_err)?;
        let mut out = vec![sub_vec(&z0, &sol.z)];
        for z in optimal_face_extremes(&problem, sol.value).map_err(recovery_err)? {
            out.push(sub_vec(&z0, &z));
        }
        Ok(out)
    }

    /// Exact decision by the dual cones; `Ok(Err(note))` when it cannot
    /// settle the question.
    fn vertex_search(&self, k: usize, opts: &DnspOptions) -> Result<Result<Option<DnspWitness>, String>, CheckError> {
        let Some(vertices) = dual_vertices(&self.d)? else {
            return Ok(Err("dual vertex enumeration over budget".into()));
        };
        let dk = DenseMatrix::from_columns(
            &self.ker_ad.vectors.iter().map(|v| self.d.mul_vec(v)).collect::<Vec<_>>(),
        )?;
        let g = gaussian_vec(&mut seeded(opts.seed), self.d.rows());
        let neg: Vec<f64> = g.iter().map(|x| -x).collect();
        // Kernel vectors are orthonormal and θ lies in the unit box, so this
        // compares against the largest attainable ⟨g, Dv⟩.
        let zero = 1e-8 * self.d_sigma_max * norm2(&g) * (self.ker_ad.dim() as f64).sqrt();
        let mut search = Search {
            ctx: self,
            strict: opts.strict_margin,
            worst: f64::NEG_INFINITY,
            candidates: 0,
        };
        let mut unresolved = 0;
        for t in SupportSet::all_of_size(self.n(), k) {
            for y_t in restricted(&vertices, &t) {
                for dir in [&g, &neg] {
                    let (value, v) = cone_maximum(&self.ker_ad, &dk, &t, &y_t, dir, opts.strict_margin)?;
                    if value <= zero {
                        continue;
                    }
                    match search.offer(&v, &t, WitnessSource::DualVertex)? {
                        Some(w) => return Ok(Ok(Some(w))),
                        None => unresolved += 1,
                    }
                }
            }
        }
        if unresolved > 0 {
            return Ok(Err(format!("{unresolved} dual cones leave ker D only below the synthesis floor")));
        }
        Ok(Ok(None))
    }

    /// The witness from the inadmissibility argument: with `v0 ∈ ker(AD)`,
    /// `Dv0 ≠ 0`, one of `±v0 + αu` fails the inequality on `T`.
    fn lemma_witness(&self, cert: &Certificate, strict: f64) -> Result<Option<DnspWitness>, CheckError> {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for b in &self.ker_ad.vectors {
            let dv = norm2(&self.d.mul_vec(b));
            if best.as_ref().is_none_or(|(s, _)| dv > *s) {
                best = Some((dv, b.clone()));
            }
        }
        let Some((dv0, v0)) = best else {
            return Ok(None);
        };
        if dv0 <= 1e-12 * self.d_sigma_max {
            return Ok(None);
        }
        let s = norm_inf(&v0);
        let v0: Vec<f64> = v0.iter().map(|x| x / s).collect();
        let u_min = cert
            .t
            .complement()
            .iter()
            .map(|&i| cert.u[i].abs())
            .fold(f64::INFINITY, f64::min);
        let alpha = if u_min.is_finite() { 2.0 / u_min } else { 1.0 };
        for sign in [1.0, -1.0] {
            let v: Vec<f64> = v0.iter().zip(&cert.u).map(|(a, b)| sign * a + alpha * b).collect();
            let raw = self.raw_margin(&v, &cert.t)?;
            let normalized = raw / Self::normalizer(&v, &cert.t);
            if normalized >= -strict {
                return Ok(Some(DnspWitness {
                    dv_norm: norm2(&self.d.mul_vec(&v)),
                    v,
                    t: cert.t.clone(),
                    margin: raw,
                    normalized_margin: normalized,
                    source: WitnessSource::LemmaConstruction,
                }));
            }
        }
        Ok(None)
    }

    /// The tri-state D-NSP decision.
    ///
    /// Order: inadmissibility certificate (when `m < d`), full-spark
    /// reduction, NSP of `AD` as a sufficient condition, falsification
    /// search, the dual vertex search, and finally `Undecided` with the
    /// closest margin observed.
    pub fn check(&self, k: usize, opts: &DnspOptions) -> Result<DnspReport, CheckError> {
        let n = self.n();
        if k == 0 || k > n {
            return Err(CheckError::BadOrder { k, max: n });
        }
        let full_spark = self.spark.as_ref().map(|s| s.full_spark);
        let mut report = DnspReport {
            decision: DnspDecision::Undecided,
            method: DecisionMethod::SamplingOnly,
            order: k,
            witness: None,
            certificate: None,
            nsp: None,
            full_spark,
            worst_margin: f64::NEG_INFINITY,
            candidates_examined: 0,
            notes: Vec::new(),
        };
        if full_spark.is_none() {
            report.notes.push("spark budget exceeded; full-spark reduction skipped".into());
        }

        if self.a.rows() < self.d.rows() && k >= 2 {
            if let CertificateSearch::Found(cert) =
                certificate_from_kernel(&self.ker_d, k, opts.strict_margin, opts.supp_tol)?
            {
                report.decision = DnspDecision::Fails;
                report.method = DecisionMethod::LemmaCertificate;
                report.witness = self.lemma_witness(&cert, opts.strict_margin)?;
                if report.witness.is_none() {
                    let f = self.falsify(k, opts)?;
                    report.candidates_examined = f.candidates;
                    report.worst_margin = f.worst_margin;
                    report.witness = f.witness;
                }
                report.certificate = Some(cert);
                return Ok(report);
            }
        } else if k >= 2 {
            report.notes.push("certificate gate closed: requires m < d".into());
        }

        let nsp = nsp_on_kernel(&self.ker_ad, k, self.tol, opts.strict_margin)?;
        let nsp_holds = nsp.holds;
        report.nsp = Some(nsp);

        if full_spark == Some(true) {
            report.method = DecisionMethod::FullSparkReduction;
            if nsp_holds {
                report.decision = DnspDecision::Holds;
            } else {
                report.decision = DnspDecision::Fails;
                let f = self.falsify(k, opts)?;
                report.candidates_examined = f.candidates;
                report.worst_margin = f.worst_margin;
                if f.witness.is_none() {
                    report.notes.push("no explicit witness found for the failing reduction".into());
                }
                report.witness = f.witness;
            }
            return Ok(report);
        }
        if nsp_holds {
            report.decision = DnspDecision::Holds;
            report.method = DecisionMethod::NspSufficiency;
            return Ok(report);
        }

        let f = self.falsify(k, opts)?;
        report.candidates_examined = f.candidates;
        report.worst_margin = f.worst_margin;
        if f.witness.is_some() {
            report.decision = DnspDecision::Fails;
            report.method = DecisionMethod::Falsification;
            report.witness = f.witness;
            return Ok(report);
        }
        match self.vertex_search(k, opts)? {
            Ok(None) => {
                report.decision = DnspDecision::Holds;
                report.method = DecisionMethod::VertexEnumeration;
            }
            Ok(Some(w)) => {
                report.decision = DnspDecision::Fails;
                report.method = DecisionMethod::VertexEnumeration;
                report.worst_margin = report.worst_margin.max(w.normalized_margin);
                report.witness = Some(w);
            }
            Err(note) => report.notes.push(note),
        }
        Ok(report)
    }
}

fn recovery_err(e: RecoveryError) -> CheckError {
    match e {
        RecoveryError::Lp(e) => CheckError::Lp(e),
        RecoveryError::Linalg(e) => CheckError::Linalg(e),
        RecoveryError::Matrix(e) => CheckError::Matrix(e),
        other => CheckError::Precondition(other.to_string()),
    }
}

struct Search<'a> {
    ctx: &'a DnspContext,
    strict: f64,
    worst: f64,
    candidates: usize,
}

impl Search<'_> {
    fn offer(&mut self, v: &[f64], t: &SupportSet, source: WitnessSource) -> Result<Option<DnspWitness>, CheckError> {
        let Some((raw, normalized, dv)) = self.ctx.score(v, t)? else {
            return Ok(None);
        };
        self.candidates += 1;
        self.worst = self.worst.max(normalized);
        if normalized >= -self.strict {
            return Ok(Some(DnspWitness {
                v: v.to_vec(),
                t: t.clone(),
                margin: raw,
                normalized_margin: normalized,
                dv_norm: dv,
                source,
            }));
        }
        Ok(None)
    }

    fn finish(self, witness: Option<DnspWitness>) -> FalsificationOutcome {
        FalsificationOutcome {
            witness,
            worst_margin: self.worst,
            candidates: self.candidates,
        }
    }
}

/// `min_{u ∈ ker D} ‖v_T + u‖₁ − ‖v_{T^c}‖₁`; negative means the D-NSP
/// inequality holds for this pair.
pub fn dnsp_margin(a: &DenseMatrix, d: &DenseMatrix, v: &[f64], t: &SupportSet, tol: f64) -> Result<f64, CheckError> {
    DnspContext::with_spark(a, d, tol, None)?.margin(v, t)
}

pub fn check_dnsp(a: &DenseMatrix, d: &DenseMatrix, k: usize, opts: &DnspOptions) -> Result<DnspReport, CheckError> {
    DnspContext::new(a, d, opts.tol)?.check(k, opts)
}

pub fn falsify_dnsp(a: &DenseMatrix, d: &DenseMatrix, k: usize, opts: &DnspOptions) -> Result<FalsificationOutcome, CheckError> {
    DnspContext::with_spark(a, d, opts.tol, None)?.falsify(k, opts)
}
