use pagas::gradcheck::{check_gradients, GradCheckConfig, GRADIENT_TOLERANCE};

#[test]
fn analytic_gradients_match_finite_differences_on_random_scenes() {
    for seed in 0..4 {
        let r = check_gradients(&GradCheckConfig { seed, ..GradCheckConfig::default() }).unwrap();
        assert!(r.checked > 50, "seed {seed}: only {} components checked", r.checked);
        assert!(r.max_rel_error < GRADIENT_TOLERANCE, "seed {seed} ({}): {:e}", r.scene, r.max_rel_error);
        assert!(r.passed);
    }
}

#[test]
fn negated_gradient_is_caught() {
    let r = check_gradients(&GradCheckConfig { seed: 7, width: 10, height: 10, flip_sign: true, ..GradCheckConfig::default() }).unwrap();
    assert!(!r.passed);
}

#[test]
fn single_context_view_is_supported() {
    let r = check_gradients(&GradCheckConfig { seed: 11, width: 12, height: 12, n_context: 1, ..GradCheckConfig::default() }).unwrap();
    assert!(r.passed, "max relative error {:e}", r.max_rel_error);
}
