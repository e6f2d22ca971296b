mod common;

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use thermoform::potential::g;
use thermoform::*;

use common::grid;

fn opts() -> SolverOptions {
    SolverOptions::default()
}

/// `𝓛ⁿφ(σⁿy) / 𝓛ⁿ1(σⁿy)` for a range-2 potential and `φ` of `x_1`: iterate on
/// the grid, then take the last step at the off-grid spin `y_{n+1}`.
fn kernel_by_operator(gr: &Arc<GridSpec>, p: &Potential, phi: &GridFunction, n: usize, z: f64) -> f64 {
    let op = TransferOperator::new(Arc::clone(gr), p).unwrap();
    let mut num = phi.clone();
    let mut den = GridFunction::constant(Arc::clone(gr), 1, 1.0);
    for _ in 1..n {
        num = op.apply(&num).unwrap();
        den = op.apply(&den).unwrap();
    }
    let last = |f: &GridFunction| -> f64 {
        gr.nodes()
            .iter()
            .zip(gr.weights())
            .zip(f.values())
            .map(|((&a, w), v)| w * p.eval(&[a, z]).exp() * v)
            .sum()
    };
    last(&num) / last(&den)
}

#[test]
fn kernel_identity_against_operator_iteration() {
    let gr = grid(100);
    let p = Potential::p2(0.8);
    let phi = GridFunction::from_fn(Arc::clone(&gr), 1, |x| g(x[0]));
    for n in 1..=3 {
        for y in [1.0, 0.5, -2.0] {
            let k = SpecKernel::new(&p, Arc::clone(&gr), n, vec![y]).unwrap();
            let exact = k.expectation_exact(&Observable::g_at(1)).unwrap();
            assert_abs_diff_eq!(exact, kernel_by_operator(&gr, &p, &phi, n, y), epsilon = 1e-12);
        }
    }
}

#[test]
fn free_specification_examples() {
    let gr = grid(100);
    let zero = Potential::constant(0.0);
    let budget = ExactBudget::default();
    let k = SpecKernel::new(&zero, Arc::clone(&gr), 1, vec![0.3]).unwrap();
    assert_abs_diff_eq!(k.expectation_exact(&Observable::atan_at(1)).unwrap(), 0.0, epsilon = 1e-14);
    let sol = solve_rpf(&gr, &Potential::custom("zero2", 2, 0.0, 0.0, |_| 0.0).unwrap(), opts()).unwrap();
    let d = dlr_check(&sol, &Potential::custom("zero2", 2, 0.0, 0.0, |_| 0.0).unwrap(), 1, &Observable::g_at(1), budget).unwrap();
    assert!(d.conformal < 1e-14 && d.gibbs < 1e-14);
    let pc = Potential::library("Pc", &[]).unwrap();
    assert!(compatibility_check(&pc, Arc::clone(&gr), 1, 1, &Observable::g_at(1), vec![0.1], budget).unwrap() < 1e-14);
    assert!(eta_decomposition_check(&pc, Arc::clone(&gr), 1, &Observable::g_at(1), vec![0.1], budget).unwrap().residual < 1e-14);
    let probe = thermo_limit_probe(&zero, gr, vec![1.0], &Observable::g_at(1), &[1, 2, 3], budget, ChainOptions::default(), None)
        .unwrap();
    assert!(probe.cauchy_defect < 1e-14);
}

#[test]
fn thermodynamic_limit_trend() {
    // M = 40 keeps volume 4 exact.
    let gr = grid(40);
    let p = Potential::p2(0.8);
    let sol = solve_rpf(&gr, &p, opts()).unwrap();
    let phi = Observable::g_at(1);
    let budget = ExactBudget::default();
    let exact = thermo_limit_probe(&p, Arc::clone(&gr), vec![1.0], &phi, &[1, 2, 3, 4], budget, ChainOptions::default(), Some(&sol))
        .unwrap();
    let values: Vec<f64> = exact.points.iter().map(|pt| pt.value).collect();
    let defects: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(defects.windows(2).all(|w| w[1] < w[0]));
    assert!(exact.gap_to_conformal.unwrap().abs() <= 1e-3);
    let ratio = values[3] / values[2];
    // Sampled volumes follow the geometric extrapolation of the exact trend.
    let chain = ChainOptions { sweeps: 20_000, burn_in: None, seed: 5 };
    let mc = thermo_limit_probe(&p, Arc::clone(&gr), vec![1.0], &phi, &[6, 8, 12], ExactBudget { max_points: 1000 }, chain, Some(&sol))
        .unwrap();
    for pt in &mc.points {
        assert!(!pt.exact);
        let predicted = values[3] * ratio.powi(pt.volume as i32 - 4);
        assert!((pt.value - predicted).abs() <= 3.0 * pt.standard_error, "{pt:?} vs {predicted}");
    }
}

#[test]
fn sampler_examples() {
    let gr = grid(100);
    let free = SpecKernel::new(&Potential::constant(0.0), Arc::clone(&gr), 3, vec![0.0]).unwrap();
    let out = run_chain(&free, &[Observable::atan_at(1)], ChainOptions { sweeps: 20_000, burn_in: None, seed: 1 }).unwrap();
    let (mean, se) = out.estimate(0);
    assert!(mean.abs() <= 3.0 * se);

    // Split-half stationarity at n = 10.
    let k = SpecKernel::new(&Potential::p2(0.8), Arc::clone(&gr), 10, vec![0.0]).unwrap();
    let out = run_chain(&k, &[Observable::g_at(5)], ChainOptions { sweeps: 40_000, burn_in: None, seed: 2 }).unwrap();
    let (first, second) = out.series[0].split_at(20_000);
    let (m1, s1) = batch_means(first, 32);
    let (m2, s2) = batch_means(second, 32);
    assert!(m1.is_finite() && m2.is_finite());
    assert!((m1 - m2).abs() <= 3.0 * (s1 * s1 + s2 * s2).sqrt());
}

#[test]
fn fkg_examples() {
    let gr = grid(100);
    let zero = Potential::constant(0.0);
    let k1 = SpecKernel::new(&zero, Arc::clone(&gr), 1, vec![0.0]).unwrap();
    let var = fkg_exact(&k1, &Observable::g_at(1), &Observable::g_at(1)).unwrap();
    let expected = gr.integrate(|a| g(a).powi(2)) - gr.integrate(g).powi(2);
    assert_abs_diff_eq!(var.covariance, expected, epsilon = 1e-14);
    assert!(var.passed && var.covariance > 0.0);
    let k2 = SpecKernel::new(&zero, Arc::clone(&gr), 2, vec![0.0]).unwrap();
    let chain = ChainOptions { sweeps: 20_000, burn_in: None, seed: 3 };
    let ind = fkg_test(&k2, &Observable::g_at(1), &Observable::g_at(2), chain).unwrap();
    assert!(ind.covariance.abs() <= 3.0 * ind.standard_error);
    let anti = SpecKernel::new(&Potential::p2(-0.8), gr, 2, vec![0.0]).unwrap();
    let r = fkg_exact(&anti, &Observable::g_at(1), &Observable::g_at(2)).unwrap();
    assert!(r.warning.is_some() && !r.class_e.passed);
}

#[test]
fn monotone_map_examples() {
    let gr = grid(100);
    let budget = ExactBudget::default();
    let ts = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let up = monotone_map_check(&Potential::p2(0.8), Arc::clone(&gr), 2, vec![0.0], &Observable::g_at(1), &ts, budget).unwrap();
    assert!(up.passed && up.warning.is_none());
    assert!(up.values.windows(2).all(|w| w[1] > w[0]));
    let flat = monotone_map_check(&Potential::constant(0.0), Arc::clone(&gr), 2, vec![0.0], &Observable::g_at(1), &ts, budget).unwrap();
    assert!(flat.passed);
    let down = monotone_map_check(&Potential::p2(-0.8), gr, 1, vec![0.0], &Observable::g_at(1), &ts, budget).unwrap();
    assert!(!down.passed && down.warning.is_some());
}

#[test]
fn zero_temperature_examples() {
    let gr = grid(100);
    let betas = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
    let c = beta_sweep(&gr, &Potential::constant(0.3), &betas, opts(), false).unwrap();
    assert!(c.values.iter().all(|v| (v - 0.3).abs() < 1e-12));
    let p1 = beta_sweep(&gr, &Potential::p1(), &betas, opts(), true).unwrap();
    assert!(p1.values.windows(2).all(|w| w[1] >= w[0]));
    assert!(p1.values.iter().all(|v| *v <= p1.max_plus_m + 1e-12));
    let test_fn = GridFunction::from_fn(Arc::clone(&gr), 1, |x| x[0].atan().powi(2));
    let report = ground_state_diagnostic(&p1, &[test_fn]).unwrap();
    assert!(*report.trajectories[0].last().unwrap() <= 0.05);
    let p3 = beta_sweep(&gr, &Potential::p3(), &[16.0, 32.0, 64.0], opts(), true).unwrap();
    assert!((p3.values[2] - max_mean_cycle(&gr, &Potential::p3()).unwrap()).abs() <= 0.05);
    let at = GridFunction::from_fn(Arc::clone(&gr), 1, |x| x[0].atan());
    let r3 = ground_state_diagnostic(&p3, &[at]).unwrap();
    assert!(r3.cauchy_defects[0] <= 0.02);
}

#[test]
fn markov_examples() {
    let gr = grid(60);
    let u = Potential::custom("u(x2)", 2, 1.0, 4.0, |x| g(x[1])).unwrap();
    let sol = solve_rpf(&gr, &u, opts()).unwrap();
    let model = gibbs_to_markov(&sol, opts()).unwrap();
    let m = gr.size();
    let norm: f64 = gr.integrate(|b| g(b).exp());
    for i in [0, 17, 42] {
        for j in 0..m {
            assert_abs_diff_eq!(model.kernel()[i * m + j], g(gr.nodes()[j]).exp() / norm, epsilon = 1e-10);
        }
    }
}

#[test]
fn involution_examples() {
    let gr = grid(60);
    let p1 = Potential::p1();
    let ik = InvolutionKernel::new(&p1, 40).unwrap();
    assert_eq!(ik.w(&[0.3, 1.0], &[2.0, -1.0]), 0.0);
    let (mean, spread) = ik.adjoint_potential(&[0.7, -0.2], &[vec![1.0], vec![-3.0, 2.0]]).unwrap();
    assert_abs_diff_eq!(mean, p1.eval(&[0.7]), epsilon = 1e-12);
    assert!(spread <= 1e-12);
    let sol = solve_rpf(&gr, &p1, opts()).unwrap();
    let bk = bilateral_normalize(&ik, &sol, &sol).unwrap();
    assert_abs_diff_eq!(bk.c(), 0.0, epsilon = 1e-12);
    assert_eq!(bk.eigenfunction_gradient(1).unwrap().values().iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.0);

    let p2 = Potential::p2(0.8);
    let ik2 = InvolutionKernel::new(&p2, 40).unwrap();
    let (y, x) = ([0.4, -1.0], [1.3, 0.2]);
    assert_abs_diff_eq!(ik2.w(&y, &x), p2.eval(&[0.4, 1.3]) - p2.eval(&[0.4, 0.0]), epsilon = 1e-14);
    let d1 = ik2.kernel_gradient(1, &y, &x).unwrap();
    assert_abs_diff_eq!(d1, 0.8 * g(0.4) * thermoform::potential::g_prime(1.3), epsilon = 1e-14);
    assert_eq!(ik2.kernel_gradient(2, &y, &x).unwrap(), 0.0);
}
