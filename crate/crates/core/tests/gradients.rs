use adsage_core::nn::gradcheck::run_suite;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn analytic_gradients_match_finite_differences() {
    let reports = run_suite(20, &mut ChaCha8Rng::seed_from_u64(11));
    assert!(!reports.is_empty());
    for r in &reports {
        assert!(r.checked > 0, "{} checked nothing", r.name);
        assert!(r.passes(1e-4), "{}: {:e}", r.name, r.max_relative_error);
    }
}
