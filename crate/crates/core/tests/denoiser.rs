mod common;

#[test]
fn admm_matches_lp_at_tiny_eps() {
    for seed in 0..50u64 {
        let gap = common::denoiser_gap(seed).unwrap();
        assert!(gap <= 1e-3, "seed {seed}: gap {gap}");
    }
}
