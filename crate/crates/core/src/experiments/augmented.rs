//! `D = [B, Bα]` with `‖α‖₁ ≤ 1`: the D-NSP of `A` must imply its B-NSP.

use serde_json::json;

use super::*;
use crate::matrix::norm1;
use crate::rng::seeded;

pub(super) fn run(cfg: &ExperimentConfig) -> ExperimentReport {
    let mut report = sweep(cfg, |index, seed| instance(cfg, index, seed));
    report.total("premise_holds");
    report
}

fn instance(cfg: &ExperimentConfig, index: usize, seed: u64) -> Result<InstanceRecord, String> {
    let mut rng = seeded(seed);
    let dims = draw_dims(&mut rng, cfg);
    let n_base = (dims.n - 1).max(dims.d);
    let base = gaussian_dictionary(dims.d, n_base, rng_seed(&mut rng)).map_err(err_string)?;
    let alpha = draw_alpha(&mut rng, base.n());
    let dict = augment_column(&base, &alpha).map_err(err_string)?;
    let a = draw_sensing(&mut rng, dims.m, dims.d);
    let k = dims.k.min(base.n());
    let opts = cfg.dnsp_options(seed);
    let (_, on_d) = check_pair(&a, &dict, k, &opts)?;
    let (_, on_b) = check_pair(&a, &base, k, &opts)?;
    let outcome = match (on_d.decision, on_b.decision) {
        (DnspDecision::Holds, DnspDecision::Fails) => Outcome::Violation,
        (DnspDecision::Holds, DnspDecision::Holds) | (DnspDecision::Fails, _) => Outcome::Agreement,
        _ => Outcome::Undecided,
    };
    Ok(InstanceRecord {
        index,
        seed,
        outcome,
        detail: json!({
            "dims": dims,
            "k": k,
            "alpha": alpha,
            "alpha_l1": norm1(&alpha),
            "alpha_support": alpha.iter().filter(|x| **x != 0.0).count(),
            "decision_d": decision_label(on_d.decision),
            "method_d": on_d.method,
            "notes_d": on_d.notes,
            "decision_b": decision_label(on_b.decision),
            "method_b": on_b.method,
            "premise_holds": usize::from(on_d.decision == DnspDecision::Holds),
        }),
    })
}
