//! The D-NSP checker against brute-force ℓ¹-synthesis recovery.

use serde_json::json;

use super::*;
use crate::recovery::brute_force_recovery_oracle;
use crate::rng::seeded;

pub(super) fn run(cfg: &ExperimentConfig) -> ExperimentReport {
    let mut report = sweep(cfg, |index, seed| instance(cfg, index, seed));
    report.total("oracle_trials");
    report.total("witness_trials");
    report
}

fn instance(cfg: &ExperimentConfig, index: usize, seed: u64) -> Result<InstanceRecord, String> {
    let mut rng = seeded(seed);
    let dims = draw_dims(&mut rng, cfg);
    let family = cfg.families[uniform_usize(&mut rng, 0, cfg.families.len() - 1)];
    let dict = draw_dictionary(&mut rng, family, dims.d, dims.n, cfg).map_err(err_string)?;
    let a = draw_sensing(&mut rng, dims.m, dims.d);
    let k = dims.k.min(dict.n());
    let opts = cfg.dnsp_options(seed);
    let (_, report) = check_pair(&a, &dict, k, &opts)?;
    let oracle = brute_force_recovery_oracle(&a, dict.matrix(), k, cfg.oracle_draws, seed).map_err(err_string)?;

    // A witness names the signal D v_T whose recovery must fail; run it as
    // one more oracle trial.
    let mut witness_trial_result = None;
    if let Some(w) = &report.witness {
        witness_trial_result = Some(witness_trial(&a, dict.matrix(), w)?);
    }
    let recovers = oracle.success && witness_trial_result.is_none_or(|(ok, _, _)| ok);

    let outcome = match report.decision {
        DnspDecision::Undecided => Outcome::Undecided,
        DnspDecision::Holds if recovers => Outcome::Agreement,
        DnspDecision::Fails if !recovers => Outcome::Agreement,
        _ => Outcome::Violation,
    };
    Ok(InstanceRecord {
        index,
        seed,
        outcome,
        detail: json!({
            "dims": dims,
            "d": dict.d(),
            "n": dict.n(),
            "k": k,
            "family": dict.family(),
            "full_spark": report.full_spark,
            "decision": decision_label(report.decision),
            "method": report.method,
            "notes": report.notes,
            "worst_margin": finite_or_null(report.worst_margin),
            "witness_margin": report.witness.as_ref().map(|w| w.normalized_margin),
            "oracle_success": oracle.success,
            "oracle_trials": oracle.trials,
            "oracle_failure_error": oracle.failing_trial.as_ref().map(|f| f.error),
            "oracle_failure_spread": oracle.failing_trial.as_ref().map(|f| f.spread),
            "witness_trials": usize::from(witness_trial_result.is_some()),
            "witness_recovers": witness_trial_result.map(|t| t.0),
            "witness_error": witness_trial_result.map(|t| t.1),
            "witness_spread": witness_trial_result.map(|t| t.2),
        }),
    })
}
