use std::sync::Arc;

use thermoform::*;

use crate::config::RunConfig;
use crate::record::{Cell, Record, Table, Verdict};

/// Tolerance of the finite-difference gradient comparison.
const FD_TOLERANCE: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;

struct Setup {
    grid: Arc<GridSpec>,
    potential: Potential,
    opts: SolverOptions,
}

fn build_grid(cfg: &RunConfig, size: usize) -> Result<Arc<GridSpec>> {
    let density = AprioriDensity::by_name(&cfg.grid.density)?;
    Ok(Arc::new(GridSpec::build(&density, size, QuadratureScheme::CompactifiedGaussLegendre)?))
}

fn setup(cfg: &RunConfig) -> Result<Setup> {
    let potential = Potential::library(&cfg.potential.id, &cfg.potential.params)?;
    let opts = SolverOptions {
        tol: cfg.tolerances.solver,
        max_iter: cfg.tolerances.max_iter,
    };
    opts.validate()?;
    Ok(Setup {
        grid: build_grid(cfg, cfg.grid.size)?,
        potential,
        opts,
    })
}

fn require_range_two(p: &Potential, what: &str) -> Result<()> {
    if p.range() != 2 {
        return Err(Error::Capability(format!(
            "{what} needs a range-2 potential, '{}' has range {}",
            p.name(),
            p.range()
        )));
    }
    Ok(())
}

fn budget(cfg: &RunConfig) -> ExactBudget {
    ExactBudget {
        max_points: cfg.spec.budget,
    }
}

fn boundary_label(y: &[f64]) -> String {
    y.iter().map(|v| v.cell()).collect::<Vec<_>>().join(";")
}

fn base_record(cfg: &RunConfig, name: &str, s: &Setup) -> Record {
    let mut rec = Record::new(name, cfg.digest());
    rec.scalar("potential", s.potential.name());
    rec.scalar("grid_size", s.grid.size());
    rec.scalar("density", s.grid.density_name());
    rec
}

fn sup(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

pub fn solve(cfg: &RunConfig) -> Result<Record> {
    let s = setup(cfg)?;
    let tol = cfg.tolerances.residual;
    let sol = solve_rpf(&s.grid, &s.potential, s.opts)?;
    let mut rec = base_record(cfg, "solve", &s);
    rec.scalar("lambda", sol.lambda());
    rec.scalar("pressure", sol.pressure());
    rec.scalar("gibbs_entropy", sol.gibbs_entropy());
    rec.scalar("mean_energy", sol.mean_energy());
    rec.scalar("primal_iterations", sol.residuals().primal_iterations);
    rec.scalar("dual_iterations", sol.residuals().dual_iterations);

    let r = sol.residuals();
    rec.at_most("eigen_residual", "primal", r.operator, tol);
    rec.at_most("eigen_residual", "dual", r.dual, tol);
    rec.at_most("shift_consistency", "mu_A", r.shift_consistency, tol);
    let op = TransferOperator::new(Arc::clone(&s.grid), &s.potential)?;
    for k in 1..=5 {
        let phi = GridFunction::from_fn(Arc::clone(&s.grid), sol.arity(), |x| (k as f64 * x[0].atan()).sin());
        let lhs = sol.rho().integrate(&op.apply(&phi)?)?;
        let rhs = sol.lambda() * sol.rho().integrate(&phi)?;
        rec.at_most("duality", &format!("phi=sin({k} atan x1)"), (lhs - rhs).abs(), tol);
    }
    let normalized = TransferOperator::new(Arc::clone(&s.grid), &sol.normalized_potential()?)?;
    let one = normalized.apply(&GridFunction::constant(Arc::clone(&s.grid), sol.arity(), 1.0))?;
    rec.at_most("normalized_operator", "L_Abar 1 = 1", sup(one.values().iter().map(|v| (v - 1.0).abs())), tol);
    let gap = sol.variational_gap(sol.window(), sol.gibbs_entropy())?;
    rec.at_most("variational_gap", "mu = mu_A", gap.abs(), tol);
    let bound = eigenvalue_bound_check(&s.grid, &s.potential, 1.0, s.opts)?;
    rec.at_most("eigenvalue_bound", "beta=1", bound.value, bound.bound + 1e-10);

    let mut states = Table::new("eigen.csv", &["state", "first_node", "psi", "rho", "mu"]);
    let block = s.grid.size().pow(sol.arity() as u32 - 1);
    for (i, ((psi, rho), mu)) in sol
        .psi()
        .values()
        .iter()
        .zip(sol.rho().weights())
        .zip(sol.gibbs().weights())
        .enumerate()
    {
        states.push(vec![
            i.cell(),
            s.grid.nodes()[i / block].cell(),
            psi.cell(),
            rho.cell(),
            mu.cell(),
        ]);
    }
    rec.tables.push(states);
    let mut nodes = Table::new("grid.csv", &["index", "node", "weight", "compact"]);
    for i in 0..s.grid.size() {
        nodes.push(vec![
            i.cell(),
            s.grid.nodes()[i].cell(),
            s.grid.weights()[i].cell(),
            s.grid.compact_coords()[i].cell(),
        ]);
    }
    rec.tables.push(nodes);
    Ok(rec)
}

pub fn markov(cfg: &RunConfig) -> Result<Record> {
    let s = setup(cfg)?;
    require_range_two(&s.potential, "the Markov bridge")?;
    let tol = cfg.tolerances.residual;
    let sol = solve_rpf(&s.grid, &s.potential, s.opts)?;
    let model = gibbs_to_markov(&sol, s.opts)?;
    let mut rec = base_record(cfg, "markov", &s);
    rec.scalar("lambda", sol.lambda());
    rec.scalar("pi_norm", model.pi_norm());
    rec.scalar("markov_entropy", model.entropy());
    rec.scalar("gibbs_entropy", sol.gibbs_entropy());
    let r = model.residuals();
    rec.at_most("row_normalization", "", r.row, tol);
    rec.at_most("stationarity", "", r.stationarity, tol);
    rec.at_most("stationary_mass", "", r.mass, tol);
    let (_, back) = markov_to_potential(&model, s.opts)?;
    let again = gibbs_to_markov(&back, s.opts)?;
    rec.at_most("round_trip", "pair measure", model.pair_measure().max_abs_diff(&again.pair_measure())?, tol);
    rec.at_most("round_trip", "lambda(log P) = 1", (back.lambda() - 1.0).abs(), tol);
    rec.at_most("pair_vs_gibbs", "", model.pair_measure().max_abs_diff(&sol.gibbs_cylinder(2)?)?, tol);
    rec.at_most("entropy_agreement", "S(theta P) vs h(mu_A)", (model.entropy() - sol.gibbs_entropy()).abs(), 10.0 * tol);
    let mut t = Table::new("markov.csv", &["index", "node", "theta"]);
    for (i, th) in model.theta().iter().enumerate() {
        t.push(vec![i.cell(), s.grid.nodes()[i].cell(), th.cell()]);
    }
    rec.tables.push(t);
    Ok(rec)
}

pub fn zerotemp(cfg: &RunConfig, grid_doubling: bool) -> Result<Record> {
    let s = setup(cfg)?;
    let tol = cfg.tolerances.residual;
    let betas = &cfg.zerotemp.betas;
    let sweep = beta_sweep(&s.grid, &s.potential, betas, s.opts, false)?;
    let sub = solve_max_plus(&s.grid, &s.potential, cfg.tolerances.solver, cfg.tolerances.max_iter * 10)?;
    let mut rec = base_record(cfg, "zerotemp", &s);
    rec.scalar("m", sub.m);
    rec.scalar("max_plus_iterations", sub.iterations);
    rec.scalar("max_plus_converged", sub.converged);
    rec.at_most("sub_action_defect", "", sub.max_defect(&s.grid, &s.potential)?, tol);
    if s.potential.range() <= 2 {
        let karp = max_mean_cycle(&s.grid, &s.potential)?;
        rec.scalar("max_mean_cycle", karp);
        rec.at_most("max_plus_vs_karp", "", (sub.m - karp).abs(), tol);
    }
    let mut t = Table::new("zerotemp.csv", &["beta", "value", "energy", "gap_to_m", "monotone"]);
    let mut monotone_all = true;
    for (i, beta) in betas.iter().enumerate() {
        let value = sweep.values[i];
        let monotone = i == 0 || value >= sweep.values[i - 1] - 1e-12;
        monotone_all &= monotone;
        t.push(vec![
            beta.cell(),
            value.cell(),
            sweep.energies[i].cell(),
            (sub.m - value).cell(),
            monotone.cell(),
        ]);
    }
    rec.tables.push(t);
    let last = *sweep.values.last().expect("non-empty betas");
    rec.at_most(
        "zero_temperature_gap",
        &format!("beta={}", betas.last().unwrap()),
        (sub.m - last).abs(),
        cfg.tolerances.zero_temperature,
    );
    rec.at_least("sweep_monotone", "P(beta A)/beta non-decreasing", if monotone_all { 1.0 } else { 0.0 }, 1.0, None);
    let over = sup(sweep.values.iter().map(|v| v - sub.m));
    rec.at_most("sweep_below_m", "max(P(beta A)/beta - m)", over, 1e-12);

    if grid_doubling {
        let fine = build_grid(cfg, 2 * cfg.grid.size)?;
        let coarse_lambda = solve_rpf(&s.grid, &s.potential, s.opts)?.lambda();
        let fine_lambda = solve_rpf(&fine, &s.potential, s.opts)?.lambda();
        let fine_m = solve_max_plus(&fine, &s.potential, cfg.tolerances.solver, cfg.tolerances.max_iter * 10)?.m;
        let params = format!("M={}->{}", cfg.grid.size, 2 * cfg.grid.size);
        rec.scalar("m_doubled", fine_m);
        rec.scalar("lambda_doubled", fine_lambda);
        rec.at_most("lambda_drift", &params, (coarse_lambda - fine_lambda).abs(), cfg.tolerances.drift);
        rec.at_most("m_drift", &params, (sub.m - fine_m).abs(), cfg.tolerances.drift);
    }
    Ok(rec)
}

pub fn involution(cfg: &RunConfig) -> Result<Record> {
    let s = setup(cfg)?;
    if s.potential.range() > 2 {
        return Err(Error::Capability("involution kernels are tabulated for range at most 2".into()));
    }
    let tol = cfg.tolerances.residual;
    let ik = InvolutionKernel::new(&s.potential, thermoform::involution::DEFAULT_TRUNCATION_DEPTH)?;
    let nodes = s.grid.nodes();
    let picks: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9]
        .iter()
        .map(|q| nodes[((s.grid.size() - 1) as f64 * q) as usize])
        .collect();
    let probes: Vec<Vec<f64>> = picks.iter().map(|&a| vec![a, -a, 0.5 * a]).collect();
    let mut spread: f64 = 0.0;
    let mut points = Vec::new();
    for &a in &picks {
        for &b in &picks {
            let (_, sp) = ik.adjoint_potential(&[a, b], &probes)?;
            spread = spread.max(sp);
            points.push(BiSequence::new(vec![a, b], vec![b, a]));
        }
    }
    let sol = solve_rpf(&s.grid, &s.potential, s.opts)?;
    let sol_star = solve_rpf(&s.grid, &ik.adjoint(), s.opts)?;
    let bk = bilateral_normalize(&ik, &sol, &sol_star)?;
    let mut rec = base_record(cfg, "involution", &s);
    rec.scalar("truncation_depth", ik.depth());
    rec.scalar("truncation_bound", ik.error_bound());
    rec.scalar("c", bk.c());
    rec.scalar("lambda", sol.lambda());
    rec.scalar("lambda_adjoint", sol_star.lambda());
    rec.at_most("adjoint_spread", "A* independent of x", spread, tol);
    rec.at_most("cohomology_residual", "", ik.cohomology_residual(&points), tol);
    rec.at_most("kernel_mass", "|int K - 1|", (bk.mass() - 1.0).abs(), tol);
    let (psi_k, psi_star) = bk.eigenfunctions();
    let mid = s.grid.size() / 2;
    let scale = sol.psi().values()[mid] / psi_k.values()[mid];
    let shape = sup(psi_k
        .values()
        .iter()
        .zip(sol.psi().values())
        .map(|(a, b)| (a * scale / b - 1.0).abs()));
    rec.at_most("eigenfunction_shape", "psi from kernel vs solver", shape, cfg.tolerances.spec);
    if s.potential.has_partials() {
        let mut worst: f64 = 0.0;
        for &x in nodes.iter().filter(|a| a.abs() < 10.0) {
            let fd = (bk.psi_at(x + FD_STEP) - bk.psi_at(x - FD_STEP)) / (2.0 * FD_STEP);
            worst = worst.max((bk.gradient_at(1, x)? - fd).abs());
        }
        rec.at_most("eigenfunction_gradient", "j=1 vs finite differences", worst, FD_TOLERANCE);
    }
    let mut t = Table::new("involution.csv", &["index", "node", "psi_kernel", "psi_adjoint_kernel"]);
    for (i, ((a, u), v)) in nodes.iter().zip(psi_k.values()).zip(psi_star.values()).enumerate() {
        t.push(vec![i.cell(), a.cell(), u.cell(), v.cell()]);
    }
    rec.tables.push(t);
    Ok(rec)
}

pub fn spec_check(cfg: &RunConfig) -> Result<Record> {
    let s = setup(cfg)?;
    let b = budget(cfg);
    let m = s.grid.size();
    for [n, r] in &cfg.spec.compatibility {
        if *n == 0 || *r == 0 {
            return Err(Error::Config("compatibility volumes must be at least 1".into()));
        }
        b.check(m, n + r)?;
    }
    b.check(m, 2)?;
    let tol = cfg.tolerances.spec;
    let y = cfg.spec.boundary.clone();
    let label = boundary_label(&y);
    let mut rec = base_record(cfg, "spec-check", &s);
    let pair = Observable::g_product(1, 2);
    let first = Observable::g_at(1);
    for [n, r] in &cfg.spec.compatibility {
        let res = compatibility_check(&s.potential, Arc::clone(&s.grid), *n, *r, &pair, y.clone(), b)?;
        rec.at_most("compatibility", &format!("n={n} r={r} phi={} z={label}", pair.name()), res, tol);
    }
    let eta = eta_decomposition_check(&s.potential, Arc::clone(&s.grid), 1, &first, y.clone(), b)?;
    rec.at_most("eta_decomposition", &format!("n=1 phi={} y={label}", first.name()), eta.residual, tol);
    rec.at_most("eta_mass", "|eta - 1|", (eta.eta_mass - 1.0).abs(), cfg.tolerances.residual);

    let ts = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let mono = monotone_map_check(&s.potential, Arc::clone(&s.grid), 2.min(cfg.spec.volumes[0].max(1)), y.clone(), &first, &ts, b)?;
    let spread = mono.values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let verdict = match (mono.class_e.passed, mono.passed) {
        (false, _) => Verdict::NotApplicable,
        (true, true) => Verdict::Pass,
        (true, false) => Verdict::Fail,
    };
    rec.push_check("monotone_map", &format!("phi={} t=-2..2", first.name()), spread, -1e-8, None, verdict);
    if let Some(w) = &mono.warning {
        rec.scalar("warning", w);
    }

    let sol = if s.potential.range() <= 2 {
        Some(solve_rpf(&s.grid, &s.potential, s.opts)?)
    } else {
        None
    };
    let chain = ChainOptions {
        sweeps: cfg.mc.sweeps,
        burn_in: cfg.mc.burn_in,
        seed: cfg.mc.seed,
    };
    let volumes: Vec<usize> = (1..=cfg.spec.volumes.iter().copied().max().unwrap_or(3).max(3)).collect();
    let probe = thermo_limit_probe(&s.potential, Arc::clone(&s.grid), y, &first, &volumes, b, chain, sol.as_ref())?;
    let mut t = Table::new("thermo_limit.csv", &["volume", "value", "se", "mode"]);
    for pt in &probe.points {
        t.push(vec![
            pt.volume.cell(),
            pt.value.cell(),
            pt.standard_error.cell(),
            if pt.exact { "exact" } else { "monte-carlo" }.to_string(),
        ]);
    }
    rec.tables.push(t);
    rec.scalar("thermo_limit_cauchy_defect", probe.cauchy_defect);
    if let Some(gap) = probe.gap_to_conformal {
        rec.scalar("thermo_limit_gap_rho", gap);
    }
    if let Some(gap) = probe.gap_to_gibbs {
        rec.scalar("thermo_limit_gap_mu", gap);
    }
    Ok(rec)
}

pub fn dlr(cfg: &RunConfig) -> Result<Record> {
    let s = setup(cfg)?;
    require_range_two(&s.potential, "the DLR check")?;
    let b = budget(cfg);
    for n in &cfg.spec.volumes {
        b.check(s.grid.size(), n + 1)?;
    }
    let sol = solve_rpf(&s.grid, &s.potential, s.opts)?;
    let mut rec = base_record(cfg, "dlr", &s);
    rec.scalar("lambda", sol.lambda());
    for &n in &cfg.spec.volumes {
        for phi in [Observable::g_at(1), Observable::g_product(1, 2)] {
            let d = dlr_check(&sol, &s.potential, n, &phi, b)?;
            let params = format!("n={n} phi={}", phi.name());
            rec.at_most("dlr_rho", &params, d.conformal, cfg.tolerances.spec);
            rec.at_most("dlr_mu", &params, d.gibbs, cfg.tolerances.spec);
        }
    }
    Ok(rec)
}

pub fn fkg(cfg: &RunConfig) -> Result<Record> {
    let s = setup(cfg)?;
    let b = budget(cfg);
    let mut rec = base_record(cfg, "fkg", &s);
    let mut t = Table::new("fkg.csv", &["volume", "mode", "covariance", "se", "samples", "class_e"]);
    for &n in &cfg.mc.volumes {
        let k = SpecKernel::new(&s.potential, Arc::clone(&s.grid), n, cfg.spec.boundary.clone())?.with_budget(b);
        let (f, h) = (Observable::g_at(1), Observable::g_at(n));
        let report = match k.mode() {
            SpecMode::Exact => fkg_exact(&k, &f, &h)?,
            SpecMode::MonteCarlo => fkg_test(
                &k,
                &f,
                &h,
                ChainOptions {
                    sweeps: cfg.mc.sweeps,
                    burn_in: cfg.mc.burn_in,
                    seed: cfg.mc.seed.wrapping_add(n as u64),
                },
            )?,
        };
        let threshold = if report.exact { 0.0 } else { -cfg.tolerances.sigmas * report.standard_error };
        let verdict = if !report.class_e.passed {
            Verdict::NotApplicable
        } else if report.covariance >= threshold {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        let params = format!("n={n} f={} g={} y={}", f.name(), h.name(), boundary_label(&cfg.spec.boundary));
        let se = (!report.exact).then_some(report.standard_error);
        rec.push_check("fkg_covariance", &params, report.covariance, threshold, se, verdict);
        if let Some(w) = &report.warning {
            rec.scalar(&format!("warning_n{n}"), w);
        }
        t.push(vec![
            n.cell(),
            if report.exact { "exact" } else { "monte-carlo" }.to_string(),
            report.covariance.cell(),
            report.standard_error.cell(),
            report.samples.cell(),
            report.class_e.passed.cell(),
        ]);
    }
    rec.tables.push(t);
    Ok(rec)
}
