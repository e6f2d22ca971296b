//! Discretized Ruelle operator and its principal eigentriple.
//!
//! For a range-`r` potential the operator acts on functions of the leading
//! `k = max(r - 1, 1)` coordinates ("states"). Prepending a spin `a` to the
//! state `s = (x_1, …, x_k)` gives the state `(a, x_1, …, x_{k-1})`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{expand_leading, tensor_len, GridFunction, GridMeasure, GridSpec};
use crate::potential::Potential;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 20_000,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config(format!(
                "solver tolerance must be positive and max_iter non-zero (got {}, {})",
                self.tol, self.max_iter
            )));
        }
        Ok(())
    }
}

/// `φ ↦ (x ↦ Σ_a w_a e^{A(a x)} φ(a x))` on grid states.
#[derive(Debug, Clone)]
pub struct TransferOperator {
    grid: Arc<GridSpec>,
    potential: Potential,
    arity: usize,
    /// `A(a, s)` at `[s * M + a]`.
    energy: Vec<f64>,
    /// `w_a exp(A(a, s) - shift)` at `[s * M + a]`.
    kernel: Vec<f64>,
    shift: f64,
}

impl TransferOperator {
    pub fn new(grid: Arc<GridSpec>, potential: &Potential) -> Result<Self> {
        let m = grid.size();
        let r = potential.range();
        let arity = r.saturating_sub(1).max(1);
        let table = potential.tabulate(&grid);
        if let Some(bad) = table.iter().find(|v| !v.is_finite()) {
            return Err(Error::Argument(format!(
                "potential '{}' is not finite on the grid (value {bad})",
                potential.name()
            )));
        }
        let states = tensor_len(m, arity);
        let mut energy = vec![0.0; states * m];
        for s in 0..states {
            for a in 0..m {
                energy[s * m + a] = if r == 1 { table[a] } else { table[a * states + s] };
            }
        }
        let shift = energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w = grid.weights();
        let kernel = energy
            .iter()
            .enumerate()
            .map(|(idx, e)| w[idx % m] * (e - shift).exp())
            .collect();
        Ok(Self {
            grid,
            potential: potential.clone(),
            arity,
            energy,
            kernel,
            shift,
        })
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// Number of coordinates eigenfunctions depend on.
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn states(&self) -> usize {
        tensor_len(self.grid.size(), self.arity)
    }

    /// The constant subtracted from `A` before exponentiation.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `A(a, s)` at `[s * M + a]`.
    pub fn energy(&self) -> &[f64] {
        &self.energy
    }

    #[inline]
    pub(crate) fn prepend(&self, a: usize, s: usize) -> usize {
        let m = self.grid.size();
        a * tensor_len(m, self.arity - 1) + s / m
    }

    /// Applies `e^{-shift} 𝓛_A` to a state vector.
    pub(crate) fn apply_shifted(&self, phi: &[f64]) -> Vec<f64> {
        let m = self.grid.size();
        let stride = tensor_len(m, self.arity - 1);
        self.kernel
            .par_chunks(m)
            .enumerate()
            .map(|(s, row)| {
                let base = s / m;
                row.iter()
                    .enumerate()
                    .map(|(a, k)| k * phi[a * stride + base])
                    .sum()
            })
            .collect()
    }

    /// Transpose of [`Self::apply_shifted`] acting on measure vectors.
    pub(crate) fn apply_dual_shifted(&self, rho: &[f64]) -> Vec<f64> {
        let m = self.grid.size();
        let stride = tensor_len(m, self.arity - 1);
        (0..self.states())
            .into_par_iter()
            .map(|t| {
                let a = t / stride;
                let base = (t % stride) * m;
                (0..m).map(|j| rho[base + j] * self.kernel[(base + j) * m + a]).sum()
            })
            .collect()
    }

    fn state_values(&self, phi: &GridFunction) -> Result<Vec<f64>> {
        if phi.grid().size() != self.grid.size() || phi.arity() > self.arity {
            return Err(Error::Argument(format!(
                "operator acts on functions of at most {} coordinates on a {}-node grid, got arity {} on {} nodes",
                self.arity,
                self.grid.size(),
                phi.arity(),
                phi.grid().size()
            )));
        }
        Ok(expand_leading(self.grid.size(), phi.values(), phi.arity(), self.arity))
    }

    /// `𝓛_A φ` as a function of `k` coordinates.
    pub fn apply(&self, phi: &GridFunction) -> Result<GridFunction> {
        let values = self.state_values(phi)?;
        let scale = self.shift.exp();
        let out = self.apply_shifted(&values).into_iter().map(|v| v * scale).collect();
        GridFunction::new(Arc::clone(&self.grid), self.arity, out)
    }

    /// `𝓛*_A ρ` for a measure on states.
    pub fn apply_dual(&self, rho: &GridMeasure) -> Result<GridMeasure> {
        if rho.arity() != self.arity || rho.grid().size() != self.grid.size() {
            return Err(Error::Argument("measure does not live on operator states".into()));
        }
        let scale = self.shift.exp();
        let out = self.apply_dual_shifted(rho.weights()).into_iter().map(|v| v * scale).collect();
        GridMeasure::new(Arc::clone(&self.grid), self.arity, out)
    }

    /// Power iteration for `(λ, ψ)` and its transpose for `ρ`.
    pub fn solve(&self, opts: SolverOptions) -> Result<RpfSolution> {
        opts.validate()?;
        let n = self.states();
        let m = self.grid.size();

        let mut phi = vec![1.0; n];
        let mut lam = 0.0;
        let mut primal_iters = 0;
        let mut residual = f64::INFINITY;
        for it in 1..=opts.max_iter {
            let mut next = self.apply_shifted(&phi);
            let new_lam = next.iter().copied().fold(0.0, f64::max);
            if !(new_lam > 0.0 && new_lam.is_finite()) {
                return Err(Error::Convergence {
                    iterations: it,
                    residual: f64::NAN,
                });
            }
            next.iter_mut().for_each(|v| *v /= new_lam);
            residual = phi.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let lam_change = (new_lam - lam).abs() / new_lam;
            phi = next;
            lam = new_lam;
            primal_iters = it;
            if residual <= opts.tol && lam_change <= opts.tol {
                break;
            }
        }
        if residual > opts.tol {
            return Err(Error::Convergence {
                iterations: primal_iters,
                residual,
            });
        }

        let mut rho: Vec<f64> = vec![1.0 / n as f64; n];
        let mut dual_iters = 0;
        let mut dual_residual = f64::INFINITY;
        for it in 1..=opts.max_iter {
            let mut next = self.apply_dual_shifted(&rho);
            let mass: f64 = next.iter().sum();
            next.iter_mut().for_each(|v| *v /= mass);
            dual_residual = rho.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            rho = next;
            dual_iters = it;
            if dual_residual <= opts.tol {
                break;
            }
        }
        if dual_residual > opts.tol {
            return Err(Error::Convergence {
                iterations: dual_iters,
                residual: dual_residual,
            });
        }

        let lphi = self.apply_shifted(&phi);
        let operator_residual = lphi
            .iter()
            .zip(&phi)
            .map(|(l, p)| (l - lam * p).abs())
            .fold(0.0, f64::max)
            / lam;
        let lrho = self.apply_dual_shifted(&rho);
        let dual_residual = lrho.iter().zip(&rho).map(|(l, p)| (l - lam * p).abs()).sum::<f64>() / lam;

        let pairing: f64 = phi.iter().zip(&rho).map(|(a, b)| a * b).sum();
        let psi: Vec<f64> = phi.iter().map(|v| v / pairing).collect();
        let log_lambda = lam.ln() + self.shift;
        let gibbs: Vec<f64> = psi.iter().zip(&rho).map(|(a, b)| a * b).collect();

        let log_psi: Vec<f64> = psi.iter().map(|v| v.ln()).collect();
        let window_len = n * m;
        let w = self.grid.weights();
        let mut normalized = vec![0.0; window_len];
        let mut window = vec![0.0; window_len];
        let mut normalization = 0.0_f64;
        for s in 0..n {
            let mut row_sum = 0.0;
            for a in 0..m {
                let t = self.prepend(a, s);
                let abar = self.energy[s * m + a] + log_psi[t] - log_psi[s] - log_lambda;
                let idx = a * n + s;
                normalized[idx] = abar;
                let p = w[a] * abar.exp();
                row_sum += p;
                window[idx] = gibbs[s] * p;
            }
            normalization = normalization.max((row_sum - 1.0).abs());
        }

        let grid = Arc::clone(&self.grid);
        let k = self.arity;
        let window = GridMeasure::new(Arc::clone(&grid), k + 1, window)?;
        let gibbs = GridMeasure::new(Arc::clone(&grid), k, gibbs)?;
        let shift_consistency = window.drop_last().max_abs_diff(&gibbs)?;
        Ok(RpfSolution {
            lambda: log_lambda.exp(),
            log_lambda,
            psi: GridFunction::new(Arc::clone(&grid), k, psi)?,
            rho: GridMeasure::new(Arc::clone(&grid), k, rho)?,
            gibbs,
            normalized: GridFunction::new(Arc::clone(&grid), k + 1, normalized)?,
            window,
            energy: self.energy.clone(),
            range: self.potential.range(),
            residuals: Residuals {
                operator: operator_residual,
                dual: dual_residual,
                normalization,
                shift_consistency,
                primal_iterations: primal_iters,
                dual_iterations: dual_iters,
            },
            grid,
        })
    }

    /// `(‖𝓛_Ā^n w − ∫w dμ_A‖_∞, ‖λ^{-n} 𝓛_A^n w − ψ_A ∫w dρ_A‖_∞)`.
    pub fn uniform_limit_check(&self, sol: &RpfSolution, w: &GridFunction, n: usize) -> Result<(f64, f64)> {
        let values = self.state_values(w)?;
        let lam_shifted = (sol.log_lambda - self.shift).exp();
        let psi = sol.psi.values();
        let mu_w: f64 = sol.gibbs.weights().iter().zip(&values).map(|(a, b)| a * b).sum();
        let rho_w: f64 = sol.rho.weights().iter().zip(&values).map(|(a, b)| a * b).sum();

        let mut normalized = values.clone();
        let mut plain = values;
        for _ in 0..n {
            let weighted: Vec<f64> = normalized.iter().zip(psi).map(|(a, b)| a * b).collect();
            normalized = self
                .apply_shifted(&weighted)
                .iter()
                .zip(psi)
                .map(|(v, p)| v / (p * lam_shifted))
                .collect();
            plain = self.apply_shifted(&plain).into_iter().map(|v| v / lam_shifted).collect();
        }
        let first = normalized.iter().map(|v| (v - mu_w).abs()).fold(0.0, f64::max);
        let second = plain
            .iter()
            .zip(psi)
            .map(|(v, p)| (v - p * rho_w).abs())
            .fold(0.0, f64::max);
        Ok((first, second))
    }
}

/// Convenience wrapper: build the operator and solve.
pub fn solve_rpf(grid: &Arc<GridSpec>, potential: &Potential, opts: SolverOptions) -> Result<RpfSolution> {
    TransferOperator::new(Arc::clone(grid), potential)?.solve(opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// `‖𝓛ψ − λψ‖_∞ / (λ ‖ψ‖_∞)` at the returned iterate (before normalization of ψ).
    pub operator: f64,
    /// `‖𝓛*ρ − λρ‖_1 / λ`.
    pub dual: f64,
    /// `‖𝓛_Ā 1 − 1‖_∞`.
    pub normalization: f64,
    /// Largest discrepancy between `μ_A` and the shifted marginal of its window.
    pub shift_consistency: f64,
    pub primal_iterations: usize,
    pub dual_iterations: usize,
}

/// Principal eigentriple and the derived Gibbs quantities on the grid.
#[derive(Debug, Clone)]
pub struct RpfSolution {
    grid: Arc<GridSpec>,
    range: usize,
    lambda: f64,
    log_lambda: f64,
    psi: GridFunction,
    rho: GridMeasure,
    gibbs: GridMeasure,
    normalized: GridFunction,
    window: GridMeasure,
    energy: Vec<f64>,
    residuals: Residuals,
}

impl RpfSolution {
    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn range(&self) -> usize {
        self.range
    }

    /// Number of coordinates of `ψ`, `ρ` and `μ_A` tensors.
    pub fn arity(&self) -> usize {
        self.psi.arity()
    }

    /// May overflow to `inf` for strongly scaled potentials; use [`Self::log_lambda`].
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn log_lambda(&self) -> f64 {
        self.log_lambda
    }

    /// Pressure `log λ_A`.
    pub fn pressure(&self) -> f64 {
        self.log_lambda
    }

    /// Eigenfunction normalized by `∫ψ dρ = 1`.
    pub fn psi(&self) -> &GridFunction {
        &self.psi
    }

    /// Conformal measure on states.
    pub fn rho(&self) -> &GridMeasure {
        &self.rho
    }

    /// `μ_A = ψρ` on states.
    pub fn gibbs(&self) -> &GridMeasure {
        &self.gibbs
    }

    /// `Ā` on `(a, s)` windows of `k + 1` coordinates.
    pub fn normalized(&self) -> &GridFunction {
        &self.normalized
    }

    /// `Ā` as a tabulated potential of range `k + 1`.
    pub fn normalized_potential(&self) -> Result<Potential> {
        Potential::tabulated("normalized", self.normalized.clone())
    }

    /// `μ_A` on `(a, s)` windows of `k + 1` coordinates.
    pub fn window(&self) -> &GridMeasure {
        &self.window
    }

    pub fn residuals(&self) -> &Residuals {
        &self.residuals
    }

    /// `A(a, s)` at `[s * M + a]`.
    pub fn energy(&self) -> &[f64] {
        &self.energy
    }

    /// `h(μ_A) = −∫Ā dμ_A`.
    pub fn gibbs_entropy(&self) -> f64 {
        -self
            .window
            .weights()
            .iter()
            .zip(self.normalized.values())
            .map(|(p, a)| p * a)
            .sum::<f64>()
    }

    /// `∫A dμ` for a measure on `(a, s)` windows.
    pub fn energy_against(&self, mu: &GridMeasure) -> Result<f64> {
        self.check_window_shape(mu)?;
        let m = self.grid.size();
        let states = tensor_len(m, self.arity());
        Ok(mu
            .weights()
            .iter()
            .enumerate()
            .map(|(idx, p)| p * self.energy[(idx % states) * m + idx / states])
            .sum())
    }

    /// `∫A dμ_A`.
    pub fn mean_energy(&self) -> f64 {
        self.energy_against(&self.window).expect("own window")
    }

    fn check_window_shape(&self, mu: &GridMeasure) -> Result<()> {
        if mu.arity() != self.arity() + 1 || mu.grid().size() != self.grid.size() {
            return Err(Error::Argument(format!(
                "expected a measure on {}-coordinate windows of a {}-node grid",
                self.arity() + 1,
                self.grid.size()
            )));
        }
        Ok(())
    }

    /// `∫ log(𝓛₀u / u) dμ_A` for a strictly positive `u` of at most `k + 1` coordinates.
    pub fn entropy_functional(&self, u: &GridFunction) -> Result<f64> {
        let k = self.arity();
        let m = self.grid.size();
        if u.arity() > k + 1 || u.grid().size() != m {
            return Err(Error::Argument(format!(
                "entropy candidates may depend on at most {} coordinates",
                k + 1
            )));
        }
        if u.values().iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Argument("entropy candidates must be strictly positive".into()));
        }
        let full = expand_leading(m, u.values(), u.arity(), k + 1);
        let states = tensor_len(m, k);
        let w = self.grid.weights();
        let l0u: Vec<f64> = (0..states)
            .map(|t| (0..m).map(|b| w[b] * full[b * states + t]).sum())
            .collect();
        let stride = tensor_len(m, k - 1);
        Ok(self
            .window
            .weights()
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(idx, p)| {
                let a = idx / states;
                let s = idx % states;
                let t = a * stride + s / m;
                p * (l0u[t].ln() - full[idx].ln())
            })
            .sum())
    }

    /// Minimum of [`Self::entropy_functional`] over the candidates and `e^{Ā}`.
    pub fn entropy_inf_probe(&self, candidates: &[GridFunction]) -> Result<f64> {
        let own = GridFunction::new(
            Arc::clone(&self.grid),
            self.arity() + 1,
            self.normalized.values().iter().map(|v| v.exp()).collect(),
        )?;
        let mut best = self.entropy_functional(&own)?;
        for u in candidates {
            best = best.min(self.entropy_functional(u)?);
        }
        Ok(best)
    }

    /// `log λ_A − (h_μ + ∫A dμ)` for a window probability measure `μ`.
    pub fn variational_gap(&self, mu: &GridMeasure, h_mu: f64) -> Result<f64> {
        self.check_window_shape(mu)?;
        if !mu.is_probability(1e-9) {
            return Err(Error::Argument("variational gap needs a probability measure".into()));
        }
        Ok(self.log_lambda - (h_mu + self.energy_against(mu)?))
    }

    /// `∫g dμ_A` for `g` of at most `k + 1` leading coordinates.
    pub fn gibbs_expectation(&self, g: &GridFunction) -> Result<f64> {
        self.window.integrate(g)
    }

    /// `∫g dρ_A` for `g` of at most `k` leading coordinates.
    pub fn conformal_expectation(&self, g: &GridFunction) -> Result<f64> {
        self.rho.integrate(g)
    }

    /// `μ_A` on cylinders of `len ≥ k` leading coordinates.
    pub fn gibbs_cylinder(&self, len: usize) -> Result<GridMeasure> {
        let states = tensor_len(self.grid.size(), self.arity());
        let weights = self.extend_cylinder(self.gibbs.weights().to_vec(), len, |s, a| {
            self.normalized.values()[a * states + s].exp()
        })?;
        GridMeasure::new(Arc::clone(&self.grid), len, weights)
    }

    /// `ρ_A` on cylinders of `len ≥ k` leading coordinates.
    pub fn conformal_cylinder(&self, len: usize) -> Result<GridMeasure> {
        let m = self.grid.size();
        let log_lambda = self.log_lambda;
        let weights = self.extend_cylinder(self.rho.weights().to_vec(), len, |s, a| {
            (self.energy[s * m + a] - log_lambda).exp()
        })?;
        GridMeasure::new(Arc::clone(&self.grid), len, weights)
    }

    /// Prepends coordinates to a state measure: `weight(a, x) = w_a factor(state(x), a) weight(x)`.
    fn extend_cylinder(&self, base: Vec<f64>, len: usize, factor: impl Fn(usize, usize) -> f64) -> Result<Vec<f64>> {
        let k = self.arity();
        if len < k {
            return Err(Error::Argument(format!("cylinder length must be at least {k}")));
        }
        let m = self.grid.size();
        let w = self.grid.weights();
        let mut weights = base;
        let mut cur_len = k;
        while cur_len < len {
            let tail = tensor_len(m, cur_len);
            let block = tensor_len(m, cur_len - k);
            let mut next = vec![0.0; m * tail];
            for a in 0..m {
                for x in 0..tail {
                    let s = x / block;
                    next[a * tail + x] = w[a] * factor(s, a) * weights[x];
                }
            }
            weights = next;
            cur_len += 1;
        }
        Ok(weights)
    }
}

/// Outcome of the eigenvalue bound `|log λ_{βA}| / β ≤ ‖A‖_∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub beta: f64,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

pub fn eigenvalue_bound_check(
    grid: &Arc<GridSpec>,
    p: &Potential,
    beta: f64,
    opts: SolverOptions,
) -> Result<BoundReport> {
    if !(beta > 0.0) {
        return Err(Error::Argument(format!("beta must be positive, got {beta}")));
    }
    let sol = solve_rpf(grid, &p.scaled(beta), opts)?;
    let value = sol.log_lambda().abs() / beta;
    let bound = p.sup_norm_bound();
    Ok(BoundReport {
        beta,
        value,
        bound,
        passed: value <= bound + 1e-10,
    })
}
