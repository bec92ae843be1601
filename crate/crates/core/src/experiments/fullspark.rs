//! Full-spark dictionaries: NSP of `AD` against the falsification search,
//! exact coefficient recovery, and a positive strong constant.

use serde_json::json;

use super::*;
use crate::checkers::{check_nsp, snsp_on_context};
use crate::rng::seeded;
use crate::support::SupportSet;

/// Coefficient recovery must be exact to this tolerance.
const COEFF_TOL: f64 = 1e-6;
/// Dictionary draws per instance before it is skipped.
const FULL_SPARK_DRAWS: usize = 50;

pub(super) fn run(cfg: &ExperimentConfig) -> ExperimentReport {
    let mut report = sweep(cfg, |index, seed| instance(cfg, index, seed));
    report.total("recovery_trials");
    report.total("recovery_failures");
    let cs: Vec<f64> = report
        .records
        .iter()
        .filter_map(|r| r.detail.get("snsp_c").and_then(|v| v.as_f64()))
        .collect();
    if let Some(min) = cs.iter().copied().reduce(f64::min) {
        report.aggregates.extra.insert("snsp_c_min".into(), min);
    }
    report
}

fn instance(cfg: &ExperimentConfig, index: usize, seed: u64) -> Result<InstanceRecord, String> {
    let mut rng = seeded(seed);
    let mut redraws = 0;
    let (dims, dict) = loop {
        let dims = draw_dims(&mut rng, cfg);
        let family = cfg.families[uniform_usize(&mut rng, 0, cfg.families.len() - 1)];
        let dict = draw_dictionary(&mut rng, family, dims.d, dims.n, cfg).map_err(err_string)?;
        if dict.is_full_spark() {
            break (dims, dict);
        }
        redraws += 1;
        if redraws == FULL_SPARK_DRAWS {
            return Ok(InstanceRecord {
                index,
                seed,
                outcome: Outcome::Skipped,
                detail: json!({"reason": "no full-spark dictionary drawn", "draws": redraws}),
            });
        }
    };
    let a = draw_sensing(&mut rng, dims.m, dims.d);
    let k = dims.k.min(dict.n());
    let base = json!({"dims": dims, "family": dict.family(), "k": k, "redraws": redraws});

    let opts = cfg.dnsp_options(seed);
    let ctx = DnspContext::with_spark(&a, dict.matrix(), cfg.tol, dict.spark().cloned()).map_err(err_string)?;
    let nsp = check_nsp(&ctx.ad, k, cfg.tol, cfg.strict_margin).map_err(err_string)?;
    let search = ctx.falsify(k, &opts).map_err(err_string)?;
    let routes_agree = nsp.holds != search.witness.is_some();

    let mut recovery_trials = 0;
    let mut recovery_failures = 0;
    let mut worst_coeff_error: f64 = 0.0;
    let mut snsp_c = None;
    if nsp.holds {
        let draws = cfg.oracle_draws.max(1);
        for _ in 0..draws {
            let t = random_support(&mut rng, dict.n(), k);
            let coeffs = gaussian_vec(&mut rng, k);
            let signal = SparseSignal::on_support(dict.matrix(), &t, &coeffs);
            let y = ctx.ad.mul_vec(&signal.z0);
            let p = RecoveryProblem::new(a.clone(), dict.matrix().clone(), y, 0.0).map_err(err_string)?;
            let r = l1_synthesis_exact(&p).map_err(err_string)?;
            let e = norm2(&sub_vec(&r.z_hat, &signal.z0));
            recovery_trials += 1;
            if e > COEFF_TOL {
                recovery_failures += 1;
            }
            worst_coeff_error = worst_coeff_error.max(e);
        }
        let est = snsp_on_context(&ctx, k, &opts, Some(DnspDecision::Holds)).map_err(err_string)?;
        snsp_c = Some(est.c);
    }
    let c_positive = snsp_c.is_none_or(|c| c > 0.0);
    let outcome = if routes_agree && recovery_failures == 0 && c_positive {
        Outcome::Agreement
    } else {
        Outcome::Violation
    };
    Ok(InstanceRecord {
        index,
        seed,
        outcome,
        detail: json!({
            "instance": base,
            "nsp_holds": nsp.holds,
            "nsp_worst_ratio": finite_or_null(nsp.worst_ratio),
            "falsification_witness": search.witness.is_some(),
            "witness_source": search.witness.as_ref().map(|w| w.source),
            "candidates": search.candidates,
            "routes_agree": routes_agree,
            "recovery_trials": recovery_trials,
            "recovery_failures": recovery_failures,
            "worst_coefficient_error": worst_coeff_error,
            "snsp_c": snsp_c.map(|c| if c.is_finite() { json!(c) } else { json!("inf") }),
            "snsp_positive": c_positive,
        }),
    })
}

fn random_support(rng: &mut SeededRng, n: usize, k: usize) -> SupportSet {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = uniform_usize(rng, i, n - 1);
        idx.swap(i, j);
    }
    idx.truncate(k);
    SupportSet::new(idx, n).expect("indices in range")
}
