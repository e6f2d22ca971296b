use thermoform_wasm::{Correlation, Solution, Sweep};

#[test]
fn free_potential_solution() {
    let s = Solution::compute(0.0, 40).unwrap();
    assert!((s.lambda() - 1.0).abs() < 1e-12);
    assert!(s.psi().iter().all(|v| (v - 1.0).abs() < 1e-10));
    assert_eq!(s.coords().len(), 40);
    assert!(s.coords().windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn ferromagnetic_solution_matches_reference() {
    let s = Solution::compute(0.8, 200).unwrap();
    assert!((s.lambda() - 1.010778145873276).abs() < 1e-10);
    assert!(s.entropy() <= 0.0);
}

#[test]
fn sweep_climbs_toward_max_plus_value() {
    let s = Sweep::compute(0.8, 40, 16.0).unwrap();
    assert_eq!(s.betas(), vec![1.0, 2.0, 4.0, 8.0, 16.0]);
    assert!(s.values().windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!(s.values().iter().all(|v| *v <= s.m() + 1e-12));
}

#[test]
fn correlations_respect_the_class() {
    let ferro = Correlation::compute(0.8, 40, 2, 1000, 0).unwrap();
    assert!(ferro.exact() && ferro.class_e() && ferro.covariance() > 0.0);
    let anti = Correlation::compute(-0.8, 40, 2, 1000, 0).unwrap();
    assert!(!anti.class_e() && anti.covariance() < 0.0);
    let sampled = Correlation::compute(0.8, 40, 6, 5000, 1).unwrap();
    assert!(!sampled.exact() && sampled.standard_error() > 0.0);
}

#[test]
fn demo_limits_are_enforced() {
    assert!(Solution::compute(0.8, 5000).is_err());
    assert!(Sweep::compute(0.8, 40, 0.5).is_err());
    assert!(Correlation::compute(0.8, 40, 0, 10, 0).is_err());
}
