//! Perturbed orthonormal bases with one extra column: every one must carry
//! a certificate, and no sensing matrix with `m < d` may give the 2-D-NSP.

use serde_json::json;

use super::*;
use crate::checkers::{inadmissibility_certificate, DecisionMethod};
use crate::rng::seeded;

pub(super) fn run(cfg: &ExperimentConfig) -> ExperimentReport {
    let mut report = sweep(cfg, |index, seed| instance(cfg, index, seed));
    for key in ["sensing_draws", "holds", "fails", "undecided", "by_certificate", "control_certificates"] {
        report.total(key);
    }
    let with_cert = report
        .records
        .iter()
        .filter(|r| r.detail.get("certificate").and_then(|v| v.as_bool()) == Some(true))
        .count();
    let n = report.records.len().max(1);
    report
        .aggregates
        .extra
        .insert("certificate_presence".into(), with_cert as f64 / n as f64);
    report
}

fn instance(cfg: &ExperimentConfig, index: usize, seed: u64) -> Result<InstanceRecord, String> {
    let mut rng = seeded(seed);
    let d = uniform_usize(&mut rng, cfg.d_min, cfg.d_max);
    let k = cfg.orders[uniform_usize(&mut rng, 0, cfg.orders.len() - 1)].max(2);
    let dict = perturbed_onb_dictionary(d, cfg.perturbation_r, rng_seed(&mut rng)).map_err(err_string)?;
    let has_cert = dict.certificate().is_some();

    // Control: the basis with its first column repeated.
    let phi = dict.matrix().select_columns(&(0..d).collect::<Vec<_>>()).map_err(err_string)?;
    let control = phi.hcat(&phi.select_columns(&[0]).map_err(err_string)?).map_err(err_string)?;
    let control_cert = inadmissibility_certificate(&control, k, cfg.tol)
        .map_err(err_string)?
        .certificate()
        .is_some();

    // `a_draws` matrices with m = d − 1, then one for each smaller m.
    let (m_lo, m_hi) = cfg.m_range(d);
    let mut ms: Vec<usize> = vec![m_hi; cfg.a_draws];
    ms.extend(m_lo..m_hi);
    let opts = cfg.dnsp_options(seed);
    let (mut holds, mut fails, mut undecided, mut by_cert) = (0usize, 0usize, 0usize, 0usize);
    let mut witnesses_checked = 0usize;
    let mut worst_witness_margin = f64::INFINITY;
    for &m in &ms {
        let a = draw_sensing(&mut rng, m, d);
        let (_, report) = check_pair(&a, &dict, k, &opts)?;
        match report.decision {
            DnspDecision::Holds => holds += 1,
            DnspDecision::Fails => fails += 1,
            DnspDecision::Undecided => undecided += 1,
        }
        if report.method == DecisionMethod::LemmaCertificate {
            by_cert += 1;
        }
        if let Some(w) = &report.witness {
            witnesses_checked += 1;
            worst_witness_margin = worst_witness_margin.min(w.normalized_margin);
        }
    }
    let outcome = if !has_cert || holds > 0 || control_cert {
        Outcome::Violation
    } else if undecided > 0 {
        Outcome::Undecided
    } else {
        Outcome::Agreement
    };
    Ok(InstanceRecord {
        index,
        seed,
        outcome,
        detail: json!({
            "d": d,
            "k": k,
            "family": dict.family(),
            "certificate": has_cert,
            "dominance_margin": dict.certificate().map(|c| c.checks.dominance_margin),
            "control_certificates": usize::from(control_cert),
            "sensing_draws": ms.len(),
            "m_values": ms,
            "holds": holds,
            "fails": fails,
            "undecided": undecided,
            "by_certificate": by_cert,
            "witnesses": witnesses_checked,
            "worst_witness_margin": finite_or_null(worst_witness_margin),
        }),
    })
}
