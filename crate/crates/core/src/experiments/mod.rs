//! Seeded sweeps that test each structural claim on random desk-scale
//! instances, and the JSON reports they produce.
//!
//! Instance `i` of a sweep draws everything from the generator seeded with
//! [`instance_seed`]`(seed, i)`, which each record stores, so any record can
//! be regenerated from the config alone.
//! Instances run in parallel; records are collected in index order.

mod augmented;
mod equivalence;
mod fullspark;
mod inadmissible;
mod repeat;
mod stability;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkers::{
    DnspContext, DnspDecision, DnspOptions, DnspReport, DnspWitness, DEFAULT_SAMPLING_BUDGET, DEFAULT_STRICT_MARGIN,
    DEFAULT_SUPP_TOL,
};
use crate::dictionary::{
    augment_column, gaussian_dictionary, harmonic_frame, identity_dictionary, perturbed_onb_dictionary,
    repeat_columns, Dictionary, DictionaryError,
};
use crate::linalg::DEFAULT_RANK_TOL;
use crate::matrix::{norm2, sub_vec, DenseMatrix};
use crate::recovery::{l1_synthesis_exact, recovery_success, success_tol, RecoveryProblem, SparseSignal};
use crate::rng::{gaussian_matrix, gaussian_vec, instance_seed, uniform, uniform_usize, SeededRng};

pub const SCHEMA_VERSION: u32 = 1;

/// Largest dimensions a config may ask for.
pub const MAX_D: usize = 8;
pub const MAX_N: usize = 12;
pub const MAX_INSTANCES: usize = 10_000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown experiment {0:?}")]
    UnknownExperiment(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("config is not valid JSON for this experiment: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Equivalence,
    FullsparkEquivalence,
    Inadmissible,
    RepeatInvariance,
    AugmentedImplication,
    Stability,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Equivalence,
        ExperimentKind::FullsparkEquivalence,
        ExperimentKind::Inadmissible,
        ExperimentKind::RepeatInvariance,
        ExperimentKind::AugmentedImplication,
        ExperimentKind::Stability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Equivalence => "equivalence",
            ExperimentKind::FullsparkEquivalence => "fullspark-equivalence",
            ExperimentKind::Inadmissible => "inadmissible",
            ExperimentKind::RepeatInvariance => "repeat-invariance",
            ExperimentKind::AugmentedImplication => "augmented-implication",
            ExperimentKind::Stability => "stability",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ConfigError::UnknownExperiment(s.to_string()))
    }
}

/// Dictionary families an experiment may draw from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Identity,
    Gaussian,
    Harmonic,
    Repeated,
    Augmented,
    PerturbedOnb,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub instances: usize,
    pub seed: u64,
    pub d_min: usize,
    pub d_max: usize,
    /// `n − d` is drawn from this range.
    pub n_extra_min: usize,
    pub n_extra_max: usize,
    /// Ends of the `m` range, both capped at `d − 1`; `None` means `d − 1`.
    pub m_min: Option<usize>,
    pub m_max: Option<usize>,
    pub orders: Vec<usize>,
    pub families: Vec<FamilyKind>,
    pub tol: f64,
    pub strict_margin: f64,
    pub supp_tol: f64,
    pub sampling_budget: usize,
    /// Gaussian coefficient vectors per support in the recovery oracle.
    pub oracle_draws: usize,
    /// Sensing matrices per dictionary (inadmissible sweep).
    pub a_draws: usize,
    /// Perturbation radius for perturbed-basis dictionaries.
    pub perturbation_r: f64,
    /// Noise levels cycled through by the stability sweep.
    pub noise_levels: Vec<f64>,
    pub trials_per_instance: usize,
    /// Most columns repeated by the repeat-invariance sweep.
    pub max_repeats: usize,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// The defaults for `kind`; every field can be overridden from JSON.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let base = Self {
            experiment: kind,
            instances: 200,
            seed: 0,
            d_min: 2,
            d_max: 5,
            n_extra_min: 0,
            n_extra_max: 3,
            m_min: Some(1),
            m_max: None,
            orders: vec![1, 2],
            families: vec![
                FamilyKind::Identity,
                FamilyKind::Gaussian,
                FamilyKind::Harmonic,
                FamilyKind::Repeated,
                FamilyKind::Augmented,
                FamilyKind::PerturbedOnb,
            ],
            tol: DEFAULT_RANK_TOL,
            strict_margin: DEFAULT_STRICT_MARGIN,
            supp_tol: DEFAULT_SUPP_TOL,
            sampling_budget: DEFAULT_SAMPLING_BUDGET,
            oracle_draws: 8,
            a_draws: 100,
            perturbation_r: 0.1,
            noise_levels: vec![0.0, 1e-3, 1e-2, 1e-1],
            trials_per_instance: 20,
            max_repeats: 2,
            output: None,
        };
        match kind {
            ExperimentKind::Equivalence => base,
            ExperimentKind::FullsparkEquivalence => Self {
                instances: 100,
                m_min: None,
                families: vec![FamilyKind::Gaussian, FamilyKind::Harmonic],
                oracle_draws: 4,
                ..base
            },
            ExperimentKind::Inadmissible => Self {
                instances: 50,
                orders: vec![2],
                families: vec![FamilyKind::PerturbedOnb],
                ..base
            },
            ExperimentKind::RepeatInvariance => Self {
                instances: 100,
                n_extra_max: 2,
                families: vec![FamilyKind::Gaussian, FamilyKind::Harmonic, FamilyKind::PerturbedOnb],
                ..base
            },
            ExperimentKind::AugmentedImplication => Self {
                instances: 100,
                m_min: None,
                n_extra_min: 1,
                families: vec![FamilyKind::Augmented],
                ..base
            },
            ExperimentKind::Stability => Self {
                instances: 25,
                d_min: 3,
                d_max: 5,
                n_extra_min: 0,
                n_extra_max: 1,
                m_min: None,
                families: vec![FamilyKind::Gaussian],
                ..base
            },
        }
    }

    /// Defaults for `kind` with the keys of `overrides` (a JSON object)
    /// laid on top.
    pub fn with_overrides(kind: ExperimentKind, overrides: &serde_json::Value) -> Result<Self, ConfigError> {
        let mut value = serde_json::to_value(Self::default_for(kind))?;
        let serde_json::Value::Object(over) = overrides else {
            return Err(ConfigError::Invalid("config must be a JSON object".into()));
        };
        if let Some(name) = over.get("experiment").and_then(|v| v.as_str()) {
            if name != kind.name() {
                return Err(ConfigError::Invalid(format!(
                    "config is for {name:?} but {kind} was requested"
                )));
            }
        }
        let target = value.as_object_mut().expect("config serializes to an object");
        for (k, v) in over {
            target.insert(k.clone(), v.clone());
        }
        let cfg: Self = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.d_min == 0 || self.d_min > self.d_max || self.d_max > MAX_D {
            return bad(format!("need 1 <= d_min <= d_max <= {MAX_D}"));
        }
        if self.n_extra_min > self.n_extra_max || self.d_max + self.n_extra_max > MAX_N {
            return bad(format!("need n_extra_min <= n_extra_max and d_max + n_extra_max <= {MAX_N}"));
        }
        if self.instances > MAX_INSTANCES {
            return bad(format!("at most {MAX_INSTANCES} instances"));
        }
        if self.m_min == Some(0) || self.m_max == Some(0) {
            return bad("m must be positive".into());
        }
        if let (Some(lo), Some(hi)) = (self.m_min, self.m_max) {
            if lo > hi {
                return bad("need m_min <= m_max".into());
            }
        }
        if self.d_min < 2 && self.experiment != ExperimentKind::Stability {
            return bad("m < d needs d >= 2".into());
        }
        if self.m_min.is_some_and(|m| m > self.d_min - 1) {
            return bad("m_min must stay below d_min so that m < d".into());
        }
        if self.orders.is_empty() || self.orders.contains(&0) {
            return bad("orders must be a nonempty list of positive integers".into());
        }
        if self.families.is_empty() {
            return bad("at least one dictionary family is required".into());
        }
        if !(self.tol > 0.0 && self.strict_margin >= 0.0 && self.supp_tol >= 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.noise_levels.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return bad("noise levels must be finite and nonnegative".into());
        }
        match self.experiment {
            ExperimentKind::Inadmissible => {
                if self.d_min < 2 || self.families != [FamilyKind::PerturbedOnb] {
                    return bad("inadmissible sweeps use perturbed_onb dictionaries with d >= 2".into());
                }
                if !(self.perturbation_r > 0.0) {
                    return bad("perturbation_r must be positive".into());
                }
            }
            ExperimentKind::Stability if self.noise_levels.is_empty() || self.trials_per_instance == 0 => {
                return bad("stability needs noise levels and at least one trial per instance".into());
            }
            _ => {}
        }
        Ok(())
    }

    /// Inclusive range of `m` for dictionaries with `d` rows.
    pub fn m_range(&self, d: usize) -> (usize, usize) {
        let hi = self.m_max.unwrap_or(d - 1).min(d - 1);
        (self.m_min.unwrap_or(d - 1).min(hi), hi)
    }

    pub fn dnsp_options(&self, seed: u64) -> DnspOptions {
        DnspOptions {
            tol: self.tol,
            strict_margin: self.strict_margin,
            sampling_budget: self.sampling_budget,
            supp_tol: self.supp_tol,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Agreement,
    Violation,
    Undecided,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub index: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub detail: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceError {
    pub index: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub instances: usize,
    pub agreements: usize,
    pub violations: usize,
    pub undecided: usize,
    pub skipped: usize,
    pub errors: usize,
    /// Experiment-specific counters and statistics.
    pub extra: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub records: Vec<InstanceRecord>,
    pub aggregates: Aggregates,
    /// Indices of records whose outcome is a violation.
    pub violations: Vec<usize>,
    pub errors: Vec<InstanceError>,
    pub wall_time_secs: f64,
}

impl ExperimentReport {
    /// No violations and no quarantined errors.
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.errors.is_empty()
    }

    fn assemble(config: &ExperimentConfig, results: Vec<(usize, u64, Result<InstanceRecord, String>)>, started: Instant) -> Self {
        let mut records = Vec::new();
        let mut errors = Vec::new();
        for (index, seed, r) in results {
            match r {
                Ok(rec) => records.push(rec),
                Err(message) => errors.push(InstanceError { index, seed, message }),
            }
        }
        let mut agg = Aggregates {
            instances: records.len() + errors.len(),
            errors: errors.len(),
            ..Aggregates::default()
        };
        for r in &records {
            match r.outcome {
                Outcome::Agreement => agg.agreements += 1,
                Outcome::Violation => agg.violations += 1,
                Outcome::Undecided => agg.undecided += 1,
                Outcome::Skipped => agg.skipped += 1,
            }
        }
        let violations = records
            .iter()
            .filter(|r| r.outcome == Outcome::Violation)
            .map(|r| r.index)
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: config.experiment,
            config: config.clone(),
            records,
            aggregates: agg,
            violations,
            errors,
            wall_time_secs: started.elapsed().as_secs_f64(),
        }
    }

    /// Sums a numeric field of every record's detail into `aggregates.extra`.
    fn total(&mut self, key: &str) {
        let s: f64 = self
            .records
            .iter()
            .filter_map(|r| r.detail.get(key).and_then(|v| v.as_f64()))
            .sum();
        self.aggregates.extra.insert(key.to_string(), s);
    }
}

/// Runs `f` on every instance index in parallel; results keep index order.
fn sweep<F>(config: &ExperimentConfig, f: F) -> ExperimentReport
where
    F: Fn(usize, u64) -> Result<InstanceRecord, String> + Sync,
{
    let started = Instant::now();
    let results: Vec<_> = (0..config.instances)
        .into_par_iter()
        .map(|i| {
            let seed = instance_seed(config.seed, i as u64);
            (i, seed, f(i, seed))
        })
        .collect();
    ExperimentReport::assemble(config, results, started)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, ConfigError> {
    config.validate()?;
    Ok(match config.experiment {
        ExperimentKind::Equivalence => equivalence::run(config),
        ExperimentKind::FullsparkEquivalence => fullspark::run(config),
        ExperimentKind::Inadmissible => inadmissible::run(config),
        ExperimentKind::RepeatInvariance => repeat::run(config),
        ExperimentKind::AugmentedImplication => augmented::run(config),
        ExperimentKind::Stability => stability::run(config),
    })
}

/// Dimensions and order for one instance.
#[derive(Clone, Copy, Debug, Serialize)]
struct Dims {
    d: usize,
    n: usize,
    m: usize,
    k: usize,
}

fn draw_dims(rng: &mut SeededRng, cfg: &ExperimentConfig) -> Dims {
    let d = uniform_usize(rng, cfg.d_min, cfg.d_max);
    let n = d + uniform_usize(rng, cfg.n_extra_min, cfg.n_extra_max);
    let (m_lo, m_hi) = cfg.m_range(d);
    let m = uniform_usize(rng, m_lo, m_hi);
    let k = cfg.orders[uniform_usize(rng, 0, cfg.orders.len() - 1)].min(n);
    Dims { d, n, m, k }
}

/// A dictionary of the requested family with `d` rows and, where the family
/// allows it, `n` columns. Families with a fixed shape override `n`.
fn draw_dictionary(rng: &mut SeededRng, kind: FamilyKind, d: usize, n: usize, cfg: &ExperimentConfig) -> Result<Dictionary, DictionaryError> {
    let sub_seed = rng_seed(rng);
    match kind {
        FamilyKind::Identity => identity_dictionary(d),
        FamilyKind::Gaussian => gaussian_dictionary(d, n, sub_seed),
        FamilyKind::Harmonic => harmonic_frame(d, n),
        FamilyKind::Repeated => {
            if n == d {
                return gaussian_dictionary(d, n, sub_seed);
            }
            let reps = uniform_usize(rng, 1, (n - d).min(cfg.max_repeats.max(1)));
            let base = gaussian_dictionary(d, n - reps, sub_seed)?;
            let cols: Vec<usize> = (0..reps).map(|_| uniform_usize(rng, 0, base.n() - 1)).collect();
            repeat_columns(&base, &cols)
        }
        FamilyKind::Augmented => {
            if n == d {
                return gaussian_dictionary(d, n, sub_seed);
            }
            let base = gaussian_dictionary(d, n - 1, sub_seed)?;
            let alpha = draw_alpha(rng, base.n());
            augment_column(&base, &alpha)
        }
        FamilyKind::PerturbedOnb => {
            if d < 2 {
                return identity_dictionary(d);
            }
            perturbed_onb_dictionary(d, cfg.perturbation_r, sub_seed)
        }
    }
}

/// A random `alpha` on a support of random size, with `‖alpha‖₁` uniform
/// on `(0, 1]`. Dense `alpha` would make `[B, Bα]` fail the D-NSP for
/// every non-injective `A`, so small supports are kept in play.
fn draw_alpha(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    let s = uniform_usize(rng, 1, n);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..s {
        let j = uniform_usize(rng, i, n - 1);
        idx.swap(i, j);
    }
    let g = gaussian_vec(rng, s);
    let l1: f64 = g.iter().map(|x| x.abs()).sum();
    let target = 1.0 - uniform(rng);
    let mut alpha = vec![0.0; n];
    for (&i, x) in idx[..s].iter().zip(&g) {
        alpha[i] = x * target / l1;
    }
    alpha
}

fn rng_seed(rng: &mut SeededRng) -> u64 {
    use rand::Rng;
    rng.random::<u64>()
}

fn draw_sensing(rng: &mut SeededRng, m: usize, d: usize) -> DenseMatrix {
    gaussian_matrix(rng, m, d)
}

fn decision_label(d: DnspDecision) -> &'static str {
    match d {
        DnspDecision::Holds => "holds",
        DnspDecision::Fails => "fails",
        DnspDecision::Undecided => "undecided",
    }
}

fn finite_or_null(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn err_string<E: fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Decides the D-NSP for `(A, D)`, reusing the spark the dictionary
/// already carries.
fn check_pair(a: &DenseMatrix, dict: &Dictionary, k: usize, opts: &DnspOptions) -> Result<(DnspContext, DnspReport), String> {
    let ctx = DnspContext::with_spark(a, dict.matrix(), opts.tol, dict.spark().cloned()).map_err(err_string)?;
    let report = ctx.check(k, opts).map_err(err_string)?;
    Ok((ctx, report))
}

/// Recovery of the signal behind a D-NSP witness: ℓ¹-synthesis of
/// `x0 = D v_T` from `y = AD v_T`. Returns `(success, error, spread)`.
fn witness_trial(a: &DenseMatrix, d: &DenseMatrix, w: &DnspWitness) -> Result<(bool, f64, f64), String> {
    let signal = SparseSignal::on_support(d, &w.t, &w.t.restrict(&w.v));
    recovery_trial(a, d, &signal)
}

fn recovery_trial(a: &DenseMatrix, d: &DenseMatrix, signal: &SparseSignal) -> Result<(bool, f64, f64), String> {
    let y = a.matmul(d).map_err(err_string)?.mul_vec(&signal.z0);
    let p = RecoveryProblem::new(a.clone(), d.clone(), y, 0.0).map_err(err_string)?;
    let r = l1_synthesis_exact(&p).map_err(err_string)?;
    let tol = success_tol(&signal.x0);
    let error = norm2(&sub_vec(&r.x_hat, &signal.x0));
    Ok((recovery_success(&r, &signal.x0, tol), error, r.alt_synthesis_spread.unwrap_or(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
            assert_eq!(serde_json::to_value(k).unwrap(), k.name());
        }
        assert!("nope".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn overrides_merge_onto_defaults() {
        let over = serde_json::json!({"instances": 3, "seed": 9});
        let cfg = ExperimentConfig::with_overrides(ExperimentKind::Inadmissible, &over).unwrap();
        assert_eq!(cfg.instances, 3);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.orders, vec![2]);
        let bad = serde_json::json!({"d_max": 20});
        assert!(ExperimentConfig::with_overrides(ExperimentKind::Equivalence, &bad).is_err());
        let typo = serde_json::json!({"instnces": 3});
        assert!(ExperimentConfig::with_overrides(ExperimentKind::Equivalence, &typo).is_err());
    }

    #[test]
    fn square_sensing_is_rejected_for_inadmissible() {
        let over = serde_json::json!({"m_min": 2, "d_min": 2});
        assert!(ExperimentConfig::with_overrides(ExperimentKind::Inadmissible, &over).is_err());
        let over = serde_json::json!({"m_min": 0});
        assert!(ExperimentConfig::with_overrides(ExperimentKind::Inadmissible, &over).is_err());
    }

    #[test]
    fn empty_sweep_passes() {
        for kind in ExperimentKind::ALL {
            let mut cfg = ExperimentConfig::default_for(kind);
            cfg.instances = 0;
            let r = run_experiment(&cfg).unwrap();
            assert!(r.passed());
            assert!(r.records.is_empty());
        }
    }
}
