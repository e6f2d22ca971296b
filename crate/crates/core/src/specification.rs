//! Finite-volume Gibbsian specifications
//! `μ_n^y(dx) ∝ e^{S_n A([x|y]_n)} f(x_1)…f(x_n) dx` with
//! `[x|y]_n = (x_1, …, x_n, y_{n+1}, y_{n+2}, …)`, computed by exact
//! enumeration of grid tuples.
//!
//! Boundary prefixes are extended periodically: `y_i = prefix[(i − 1) mod len]`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{flat_index, tensor_len, unflatten, GridFunction, GridSpec};
use crate::observable::Observable;
use crate::potential::{check_class_e, ConditionReport, Potential};
use crate::sampler::{run_chain, ChainOptions};
use crate::transfer::RpfSolution;

/// Relative tolerance of the exact-quadrature identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-6;

/// Bound on the number of grid tuples an exact sum may visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactBudget {
    pub max_points: u64,
}

impl Default for ExactBudget {
    fn default() -> Self {
        Self { max_points: 10_000_000 }
    }
}

impl ExactBudget {
    pub fn check(&self, m: usize, n: usize) -> Result<()> {
        let points = (m as u128).pow(n as u32);
        if points > self.max_points as u128 {
            return Err(Error::Budget {
                points,
                budget: self.max_points,
            });
        }
        Ok(())
    }

    pub fn allows(&self, m: usize, n: usize) -> bool {
        self.check(m, n).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecMode {
    Exact,
    MonteCarlo,
}

/// The kernel `K_n(·, y)` of a range-`r` potential.
#[derive(Debug, Clone)]
pub struct SpecKernel {
    potential: Potential,
    grid: Arc<GridSpec>,
    volume: usize,
    boundary: Vec<f64>,
    budget: ExactBudget,
    /// `A` on `grid^r`.
    interior: Arc<Vec<f64>>,
    /// Windows that reach into the boundary: `(start k, A(x_{k+1..n}, y_{n+1..k+r}) on grid^{n-k})`.
    edges: Vec<(usize, Vec<f64>)>,
}

impl SpecKernel {
    pub fn new(potential: &Potential, grid: Arc<GridSpec>, volume: usize, boundary: Vec<f64>) -> Result<Self> {
        let interior = Arc::new(potential.tabulate(&grid));
        Self::assemble(potential.clone(), grid, volume, boundary, ExactBudget::default(), interior)
    }

    fn assemble(
        potential: Potential,
        grid: Arc<GridSpec>,
        volume: usize,
        boundary: Vec<f64>,
        budget: ExactBudget,
        interior: Arc<Vec<f64>>,
    ) -> Result<Self> {
        if volume == 0 {
            return Err(Error::Argument("volume must be at least 1".into()));
        }
        if boundary.is_empty() || boundary.iter().any(|v| v.is_nan()) {
            return Err(Error::Argument("boundary prefix must be non-empty and free of NaN".into()));
        }
        let mut kernel = Self {
            potential,
            grid,
            volume,
            boundary,
            budget,
            interior,
            edges: Vec::new(),
        };
        kernel.edges = kernel.edge_tables();
        Ok(kernel)
    }

    fn edge_tables(&self) -> Vec<(usize, Vec<f64>)> {
        let n = self.volume;
        let r = self.potential.range();
        let m = self.grid.size();
        let nodes = self.grid.nodes();
        (n.saturating_sub(r - 1)..n)
            .filter(|&k| k + r > n)
            .map(|k| {
                let free = n - k;
                let mut idx = vec![0usize; free];
                let mut word = vec![0.0; r];
                for (i, slot) in word.iter_mut().enumerate().skip(free) {
                    *slot = self.boundary_coord(k + i + 1);
                }
                let table = (0..tensor_len(m, free))
                    .map(|flat| {
                        unflatten(m, flat, &mut idx);
                        for (slot, &i) in word.iter_mut().zip(&idx) {
                            *slot = nodes[i];
                        }
                        self.potential.eval(&word)
                    })
                    .collect();
                (k, table)
            })
            .collect()
    }

    pub fn with_budget(mut self, budget: ExactBudget) -> Self {
        self.budget = budget;
        self
    }

    /// Same potential and grid with another volume or boundary; reuses the interior table.
    pub fn with_boundary(&self, volume: usize, boundary: Vec<f64>) -> Result<Self> {
        Self::assemble(
            self.potential.clone(),
            Arc::clone(&self.grid),
            volume,
            boundary,
            self.budget,
            Arc::clone(&self.interior),
        )
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn volume(&self) -> usize {
        self.volume
    }

    pub fn boundary(&self) -> &[f64] {
        &self.boundary
    }

    pub fn budget(&self) -> ExactBudget {
        self.budget
    }

    pub fn mode(&self) -> SpecMode {
        if self.budget.allows(self.grid.size(), self.volume) {
            SpecMode::Exact
        } else {
            SpecMode::MonteCarlo
        }
    }

    /// `y_i` for 1-based `i`.
    pub fn boundary_coord(&self, i: usize) -> f64 {
        self.boundary[(i - 1) % self.boundary.len()]
    }

    /// The boundary sequence written out to `len` coordinates.
    pub fn boundary_prefix(&self, len: usize) -> Vec<f64> {
        (1..=len).map(|i| self.boundary_coord(i)).collect()
    }

    pub(crate) fn interior(&self) -> &[f64] {
        &self.interior
    }

    pub(crate) fn edges(&self) -> &[(usize, Vec<f64>)] {
        &self.edges
    }

    /// Length of the words on which observables with the given support are evaluated.
    pub(crate) fn word_len(&self, support: usize) -> usize {
        support.max(self.volume + self.potential.range() - 1)
    }

    /// `(y_{n+1}, …)` up to the word length.
    pub(crate) fn tail(&self, support: usize) -> Vec<f64> {
        (self.volume + 1..=self.word_len(support)).map(|i| self.boundary_coord(i)).collect()
    }

    /// `S_n A([x|y]_n)` for node indices `x`.
    pub(crate) fn energy(&self, idx: &[usize]) -> f64 {
        let m = self.grid.size();
        let r = self.potential.range();
        let n = self.volume;
        let mut e = 0.0;
        for k in 0..n.saturating_sub(r - 1) {
            e += self.interior[flat_index(m, &idx[k..k + r])];
        }
        for (k, table) in &self.edges {
            e += table[flat_index(m, &idx[*k..n])];
        }
        e
    }

    fn energy_upper_bound(&self) -> f64 {
        let max = |t: &[f64]| t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let interior_windows = self.volume.saturating_sub(self.potential.range() - 1);
        let mut bound = if interior_windows > 0 {
            interior_windows as f64 * max(&self.interior)
        } else {
            0.0
        };
        for (_, t) in &self.edges {
            bound += max(t);
        }
        bound
    }

    /// Exact weighted sums over `grid^n`: returns `log Z` and
    /// `(1/Z) Σ e^{S_n A} Π w · out` for each output slot filled by `f`.
    pub(crate) fn enumerate(
        &self,
        support: usize,
        outputs: usize,
        f: impl Fn(&[usize], &[f64], &mut [f64]) + Sync,
    ) -> Result<(f64, Vec<f64>)> {
        let m = self.grid.size();
        let n = self.volume;
        self.budget.check(m, n)?;
        let shift = self.energy_upper_bound();
        let tail = self.tail(support);
        let w = self.grid.weights();
        let nodes = self.grid.nodes();
        let inner = tensor_len(m, n - 1);
        let partial: Vec<(f64, Vec<f64>)> = (0..m)
            .into_par_iter()
            .map(|first| {
                let mut idx = vec![0usize; n];
                idx[0] = first;
                let mut word = vec![0.0; n + tail.len()];
                word[n..].copy_from_slice(&tail);
                word[0] = nodes[first];
                let mut out = vec![0.0; outputs];
                let mut sums = vec![0.0; outputs];
                let mut z = 0.0;
                for rest in 0..inner {
                    unflatten(m, rest, &mut idx[1..]);
                    let mut weight = w[first];
                    for i in 1..n {
                        weight *= w[idx[i]];
                        word[i] = nodes[idx[i]];
                    }
                    let e = weight * (self.energy(&idx) - shift).exp();
                    if e == 0.0 {
                        continue;
                    }
                    z += e;
                    f(&idx, &word, &mut out);
                    for (s, o) in sums.iter_mut().zip(&out) {
                        *s += e * o;
                    }
                }
                (z, sums)
            })
            .collect();
        let mut z = 0.0;
        let mut sums = vec![0.0; outputs];
        for (pz, ps) in partial {
            z += pz;
            for (s, p) in sums.iter_mut().zip(ps) {
                *s += p;
            }
        }
        if !(z > 0.0) {
            return Err(Error::Argument("partition sum underflowed".into()));
        }
        Ok((z.ln() + shift, sums.into_iter().map(|s| s / z).collect()))
    }

    /// `log Z_n^y`.
    pub fn log_partition(&self) -> Result<f64> {
        Ok(self.enumerate(0, 0, |_, _, _| {})?.0)
    }

    /// `K_n(φ, y) = ∫φ([x|y]_n) dμ_n^y(x)`.
    pub fn expectation_exact(&self, phi: &Observable) -> Result<f64> {
        Ok(self.expectations_exact(std::slice::from_ref(phi))?[0])
    }

    pub fn expectations_exact(&self, phis: &[Observable]) -> Result<Vec<f64>> {
        let support = phis.iter().map(|p| p.support()).max().unwrap_or(0);
        Ok(self
            .enumerate(support, phis.len(), |_, word, out| {
                for (o, p) in out.iter_mut().zip(phis) {
                    *o = p.eval(word);
                }
            })?
            .1)
    }
}

/// `|a − b| / max(|a|, 1)`.
pub fn relative_residual(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(1.0)
}

/// Boundary sequence `(x_1, …, x_n, u_1, …, u_r, z_{n+r+1}, …)` written out to `len`.
fn splice(kernel: &SpecKernel, n: usize, inserted: &[f64], len: usize) -> Vec<f64> {
    (1..=len)
        .map(|i| {
            if i > n && i <= n + inserted.len() {
                inserted[i - n - 1]
            } else {
                kernel.boundary_coord(i)
            }
        })
        .collect()
}

/// `|K_{n+r}(φ, z) − K_{n+r}(K_n(φ, ·), z)|` (relative, unit floor).
pub fn compatibility_check(
    p: &Potential,
    grid: Arc<GridSpec>,
    n: usize,
    r: usize,
    phi: &Observable,
    z: Vec<f64>,
    budget: ExactBudget,
) -> Result<f64> {
    if n == 0 || r == 0 {
        return Err(Error::Argument("volumes must be at least 1".into()));
    }
    let m = grid.size();
    budget.check(m, n + r)?;
    let outer = SpecKernel::new(p, Arc::clone(&grid), n + r, z)?.with_budget(budget);
    let lhs = outer.expectation_exact(phi)?;
    let len = outer.word_len(phi.support()) + p.range() + r;
    let nodes = grid.nodes();
    let inner: Vec<f64> = (0..tensor_len(m, r))
        .into_par_iter()
        .map(|flat| {
            let mut idx = vec![0usize; r];
            unflatten(m, flat, &mut idx);
            let inserted: Vec<f64> = idx.iter().map(|&i| nodes[i]).collect();
            outer
                .with_boundary(n, splice(&outer, n, &inserted, len))
                .and_then(|k| k.expectation_exact(phi))
        })
        .collect::<Result<_>>()?;
    let rhs = outer
        .enumerate(0, 1, |idx, _, out| {
            out[0] = inner[flat_index(m, &idx[n..n + r])];
        })?
        .1[0];
    Ok(relative_residual(lhs, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DlrResiduals {
    /// `|∫K_n(φ, ·) dρ_A − ∫φ dρ_A|` (relative).
    pub conformal: f64,
    /// Same for `μ_A` under the specification of the normalized potential.
    pub gibbs: f64,
}

/// DLR identities for `ρ_A` and `μ_A` of a range-2 potential.
pub fn dlr_check(sol: &RpfSolution, p: &Potential, n: usize, phi: &Observable, budget: ExactBudget) -> Result<DlrResiduals> {
    if sol.range() != 2 || p.range() != 2 {
        return Err(Error::Capability("DLR checks are implemented for range-2 potentials".into()));
    }
    if n == 0 {
        return Err(Error::Argument("volume must be at least 1".into()));
    }
    let grid = Arc::clone(sol.grid());
    let m = grid.size();
    let len = phi.support().max(n + 1);
    budget.check(m, len)?;
    let normalized = sol.normalized_potential()?;
    let rho = sol.conformal_cylinder(len)?;
    let mu = sol.gibbs_cylinder(len)?;
    let conformal = dlr_residual(p, &grid, n, len, phi, rho.weights(), budget)?;
    let gibbs = dlr_residual(&normalized, &grid, n, len, phi, mu.weights(), budget)?;
    Ok(DlrResiduals { conformal, gibbs })
}

fn dlr_residual(
    p: &Potential,
    grid: &Arc<GridSpec>,
    n: usize,
    len: usize,
    phi: &Observable,
    cylinder: &[f64],
    budget: ExactBudget,
) -> Result<f64> {
    let m = grid.size();
    let nodes = grid.nodes();
    let tails = tensor_len(m, len - n);
    let mut word = vec![0.0; len];
    let mut idx = vec![0usize; len];
    let mut rhs = 0.0;
    let mut marginal = vec![0.0; tails];
    for (flat, w) in cylinder.iter().enumerate() {
        unflatten(m, flat, &mut idx);
        for (slot, &i) in word.iter_mut().zip(&idx) {
            *slot = nodes[i];
        }
        rhs += w * phi.eval(&word);
        marginal[flat % tails] += w;
    }
    let template = SpecKernel::new(p, Arc::clone(grid), n, vec![0.0])?.with_budget(budget);
    let per_tail: Vec<f64> = (0..tails)
        .into_par_iter()
        .map(|t| {
            let mut tidx = vec![0usize; len - n];
            unflatten(m, t, &mut tidx);
            let mut boundary = vec![0.0; n];
            boundary.extend(tidx.iter().map(|&i| nodes[i]));
            boundary.extend(std::iter::repeat(0.0).take(p.range()));
            template.with_boundary(n, boundary).and_then(|k| k.expectation_exact(phi))
        })
        .collect::<Result<_>>()?;
    let lhs: f64 = marginal.iter().zip(&per_tail).map(|(q, k)| q * k).sum();
    Ok(relative_residual(lhs, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaReport {
    /// Relative residual of the decomposition.
    pub residual: f64,
    /// `Σ_t η(t)`.
    pub eta_mass: f64,
}

/// `Σ_t η(t) K_n(φ, [y|t|y]) = K_{n+1}(φ, y)` with
/// `η(t) = Z_n^{[y|t|y]_n} e^{A(t, y_{n+2}, …)} w_t / Z_{n+1}^y`.
pub fn eta_decomposition_check(
    p: &Potential,
    grid: Arc<GridSpec>,
    n: usize,
    phi: &Observable,
    y: Vec<f64>,
    budget: ExactBudget,
) -> Result<EtaReport> {
    if n == 0 {
        return Err(Error::Argument("volume must be at least 1".into()));
    }
    let m = grid.size();
    budget.check(m, n + 1)?;
    let big = SpecKernel::new(p, Arc::clone(&grid), n + 1, y)?.with_budget(budget);
    let rhs = big.expectation_exact(phi)?;
    let log_z_big = big.log_partition()?;
    let len = big.word_len(phi.support()) + p.range() + 1;
    let nodes = grid.nodes();
    let w = grid.weights();
    let r = p.range();
    let terms: Vec<(f64, f64)> = (0..m)
        .into_par_iter()
        .map(|t| {
            let boundary = splice(&big, n, &[nodes[t]], len);
            let k = big.with_boundary(n, boundary)?;
            let (log_z, e) = k.enumerate(phi.support(), 1, |_, word, out| out[0] = phi.eval(word))?;
            let window: Vec<f64> = (0..r).map(|i| if i == 0 { nodes[t] } else { big.boundary_coord(n + 1 + i) }).collect();
            let eta = w[t] * (log_z + p.eval(&window) - log_z_big).exp();
            Ok((eta, e[0]))
        })
        .collect::<Result<_>>()?;
    let eta_mass: f64 = terms.iter().map(|(eta, _)| eta).sum();
    let lhs: f64 = terms.iter().map(|(eta, e)| eta * e).sum();
    Ok(EtaReport {
        residual: relative_residual(lhs, rhs),
        eta_mass,
    })
}

#[derive(Debug, Clone)]
pub struct MonotoneReport {
    pub values: Vec<f64>,
    pub passed: bool,
    pub class_e: ConditionReport,
    /// Set when the potential failed the class check.
    pub warning: Option<String>,
}

/// `t ↦ ∫φ dμ_n^{[y|t|y]_n}` at increasing `t`, passing iff non-decreasing
/// up to `1e-8`.
pub fn monotone_map_check(
    p: &Potential,
    grid: Arc<GridSpec>,
    n: usize,
    y: Vec<f64>,
    phi: &Observable,
    t_values: &[f64],
    budget: ExactBudget,
) -> Result<MonotoneReport> {
    if t_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("t values must be strictly increasing".into()));
    }
    let class_e = check_class_e(p, n, 500)?;
    let base = SpecKernel::new(p, grid, n, y)?.with_budget(budget);
    let len = base.word_len(phi.support()) + p.range() + 1;
    let values = t_values
        .iter()
        .map(|&t| base.with_boundary(n, splice(&base, n, &[t], len))?.expectation_exact(phi))
        .collect::<Result<Vec<_>>>()?;
    let passed = values.windows(2).all(|w| w[1] >= w[0] - 1e-8);
    let warning = (!class_e.passed).then(|| {
        format!(
            "potential '{}' failed the class check (worst margin {:e}); monotonicity is not expected",
            p.name(),
            class_e.worst_margin
        )
    });
    Ok(MonotoneReport {
        values,
        passed,
        class_e,
        warning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitPoint {
    pub volume: usize,
    pub value: f64,
    /// Zero for exact points.
    pub standard_error: f64,
    pub exact: bool,
}

#[derive(Debug, Clone)]
pub struct ThermoLimitReport {
    pub points: Vec<LimitPoint>,
    /// `|K_{n_last} − K_{n_prev}|`.
    pub cauchy_defect: f64,
    /// `K_{n_last} − ∫φ dρ_A` (the limit of the kernels), when a solution is given.
    pub gap_to_conformal: Option<f64>,
    /// `K_{n_last} − ∫φ dμ_A`, when a solution is given.
    pub gap_to_gibbs: Option<f64>,
}

/// `K_n(φ, z)` across volumes; exact within budget, otherwise sampled with `chain`.
pub fn thermo_limit_probe(
    p: &Potential,
    grid: Arc<GridSpec>,
    z: Vec<f64>,
    phi: &Observable,
    volumes: &[usize],
    budget: ExactBudget,
    chain: ChainOptions,
    sol: Option<&RpfSolution>,
) -> Result<ThermoLimitReport> {
    if volumes.is_empty() {
        return Err(Error::Argument("at least one volume is needed".into()));
    }
    let base = SpecKernel::new(p, Arc::clone(&grid), volumes[0], z.clone())?.with_budget(budget);
    let mut points = Vec::with_capacity(volumes.len());
    for &n in volumes {
        let k = base.with_boundary(n, z.clone())?;
        let point = match k.mode() {
            SpecMode::Exact => LimitPoint {
                volume: n,
                value: k.expectation_exact(phi)?,
                standard_error: 0.0,
                exact: true,
            },
            SpecMode::MonteCarlo => {
                let out = run_chain(&k, std::slice::from_ref(phi), chain)?;
                let (mean, se) = out.estimate(0);
                LimitPoint {
                    volume: n,
                    value: mean,
                    standard_error: se,
                    exact: false,
                }
            }
        };
        points.push(point);
    }
    let last = points[points.len() - 1].value;
    let cauchy_defect = if points.len() >= 2 {
        (last - points[points.len() - 2].value).abs()
    } else {
        0.0
    };
    let (gap_to_conformal, gap_to_gibbs) = match sol {
        Some(sol) => {
            let support = phi.support().max(1);
            let table = |len: usize| GridFunction::from_fn(Arc::clone(&grid), len, |x| phi.eval(x));
            let rho = sol.conformal_cylinder(support.max(sol.arity()))?;
            let mu = sol.gibbs_cylinder(support.max(sol.arity()))?;
            let f = table(rho.arity());
            (Some(last - rho.integrate(&f)?), Some(last - mu.integrate(&f)?))
        }
        None => (None, None),
    };
    Ok(ThermoLimitReport {
        points,
        cauchy_defect,
        gap_to_conformal,
        gap_to_gibbs,
    })
}
