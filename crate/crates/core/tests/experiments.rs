use dnsp_core::experiments::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentReport};
use serde_json::json;

fn small(kind: ExperimentKind, seed: u64) -> ExperimentConfig {
    let instances = if kind == ExperimentKind::Stability { 2 } else { 12 };
    ExperimentConfig::with_overrides(kind, &json!({"instances": instances, "seed": seed})).unwrap()
}

fn run(cfg: &ExperimentConfig) -> ExperimentReport {
    let mut r = run_experiment(cfg).unwrap();
    r.wall_time_secs = 0.0;
    r
}

#[test]
fn reports_are_reproducible_and_pass() {
    for kind in ExperimentKind::ALL {
        let cfg = small(kind, 7);
        let (a, b) = (run(&cfg), run(&cfg));
        assert_eq!(a, b, "{kind} differs between runs");
        assert!(a.passed(), "{kind}: violations {:?}, errors {:?}", a.violations, a.errors);
        assert_eq!(a.aggregates.instances, a.records.len() + a.errors.len());
    }
}

#[test]
fn report_json_round_trips() {
    let r = run(&small(ExperimentKind::Equivalence, 3));
    let text = serde_json::to_string(&r).unwrap();
    let back: ExperimentReport = serde_json::from_str(&text).unwrap();
    assert_eq!(r, back);
}

#[test]
fn different_seeds_give_different_instances() {
    let a = run(&small(ExperimentKind::Equivalence, 1));
    let b = run(&small(ExperimentKind::Equivalence, 2));
    let seeds = |r: &ExperimentReport| r.records.iter().map(|x| x.seed).collect::<Vec<_>>();
    assert!(seeds(&a).iter().all(|s| !seeds(&b).contains(s)));
}

#[test]
fn unknown_config_keys_are_rejected() {
    assert!(ExperimentConfig::with_overrides(ExperimentKind::RepeatInvariance, &json!({"instnaces": 3})).is_err());
}
