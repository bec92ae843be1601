//! Repeating dictionary columns must not change the D-NSP decision.

use serde_json::json;

use super::*;
use crate::rng::seeded;

pub(super) fn run(cfg: &ExperimentConfig) -> ExperimentReport {
    sweep(cfg, |index, seed| instance(cfg, index, seed))
}

fn instance(cfg: &ExperimentConfig, index: usize, seed: u64) -> Result<InstanceRecord, String> {
    let mut rng = seeded(seed);
    let dims = draw_dims(&mut rng, cfg);
    let family = cfg.families[uniform_usize(&mut rng, 0, cfg.families.len() - 1)];
    let dict = draw_dictionary(&mut rng, family, dims.d, dims.n, cfg).map_err(err_string)?;
    let room = MAX_N.saturating_sub(dict.n()).min(cfg.max_repeats);
    let reps = uniform_usize(&mut rng, 0, room);
    let repeated: Vec<usize> = (0..reps).map(|_| uniform_usize(&mut rng, 0, dict.n() - 1)).collect();
    let tilde = repeat_columns(&dict, &repeated).map_err(err_string)?;
    let a = draw_sensing(&mut rng, dims.m, dims.d);
    let k = dims.k.min(dict.n());
    let opts = cfg.dnsp_options(seed);
    let (_, on_d) = check_pair(&a, &dict, k, &opts)?;
    let (_, on_tilde) = check_pair(&a, &tilde, k, &opts)?;
    let outcome = match (on_d.decision, on_tilde.decision) {
        (DnspDecision::Undecided, _) | (_, DnspDecision::Undecided) => Outcome::Undecided,
        (x, y) if x == y => Outcome::Agreement,
        _ => Outcome::Violation,
    };
    Ok(InstanceRecord {
        index,
        seed,
        outcome,
        detail: json!({
            "dims": dims,
            "k": k,
            "family": dict.family(),
            "repeated": repeated,
            "decision_d": decision_label(on_d.decision),
            "method_d": on_d.method,
            "notes_d": on_d.notes,
            "decision_repeated": decision_label(on_tilde.decision),
            "method_repeated": on_tilde.method,
            "notes_repeated": on_tilde.notes,
        }),
    })
}
