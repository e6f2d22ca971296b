//! Truncated involution kernels, the adjoint potential, and the bilateral
//! kernel `K(y|x) = e^{W(y|x) − c}`.
//!
//! A bilateral point `(…, y_2, y_1 | x_1, x_2, …)` is stored as two prefixes:
//! the past `(y_1, y_2, …)` and the future `(x_1, x_2, …)`. Coordinates beyond
//! a supplied prefix are taken from the reference point.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridMeasure, GridSpec};
use crate::potential::Potential;
use crate::transfer::RpfSolution;

pub const DEFAULT_TRUNCATION_DEPTH: usize = 40;

/// `W(y|x) = Σ_{n=1}^{N} A(τ_{y,n} x) − A(τ_{y,n} x')` with
/// `τ_{y,n} x = (y_n, …, y_1, x_1, x_2, …)`.
#[derive(Debug, Clone)]
pub struct InvolutionKernel {
    potential: Potential,
    reference: Vec<f64>,
    depth: usize,
}

/// A bilateral sequence prefix `(past | future)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiSequence {
    /// `(y_1, y_2, …)`, nearest coordinate first.
    pub past: Vec<f64>,
    /// `(x_1, x_2, …)`.
    pub future: Vec<f64>,
}

impl BiSequence {
    pub fn new(past: Vec<f64>, future: Vec<f64>) -> Self {
        Self { past, future }
    }

    /// `σ̂^{-1}(y|x) = ((y_2, …) | (y_1, x_1, …))`.
    pub fn shift_back(&self) -> Self {
        let mut future = Vec::with_capacity(self.future.len() + 1);
        future.push(self.past.first().copied().unwrap_or(0.0));
        future.extend_from_slice(&self.future);
        Self {
            past: self.past.iter().skip(1).copied().collect(),
            future,
        }
    }
}

impl InvolutionKernel {
    /// Kernel with reference point `0^∞`.
    pub fn new(potential: &Potential, depth: usize) -> Result<Self> {
        Self::with_reference(potential, depth, Vec::new())
    }

    /// Kernel with reference point `x'` given as a prefix, padded with zeros.
    pub fn with_reference(potential: &Potential, depth: usize, reference: Vec<f64>) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Argument("truncation depth must be at least 1".into()));
        }
        if reference.iter().any(|v| v.is_nan()) {
            return Err(Error::Argument("reference point must not contain NaN".into()));
        }
        Ok(Self {
            potential: potential.clone(),
            reference,
            depth,
        })
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    /// `Hol · Σ_{n>N} 2^{-nα}`.
    pub fn error_bound(&self) -> f64 {
        let a = self.potential.holder_exponent();
        self.potential.holder_constant() * 2f64.powf(-(self.depth as f64 + 1.0) * a) / (1.0 - 2f64.powf(-a))
    }

    fn reference_at(&self, i: usize) -> f64 {
        self.reference.get(i).copied().unwrap_or(0.0)
    }

    /// `τ_{y,n} z` truncated to the potential's range.
    fn tau(&self, y: &[f64], n: usize, z: &dyn Fn(usize) -> f64, out: &mut Vec<f64>) {
        let r = self.potential.range();
        out.clear();
        for i in 0..r {
            let v = if i < n {
                y.get(n - 1 - i).copied().unwrap_or(0.0)
            } else {
                z(i - n)
            };
            out.push(v);
        }
    }

    /// Truncated `W(y|x)`.
    pub fn w(&self, y: &[f64], x: &[f64]) -> f64 {
        let fx = |i: usize| x.get(i).copied().unwrap_or_else(|| self.reference_at(i));
        let fr = |i: usize| self.reference_at(i);
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut total = 0.0;
        for n in 1..=self.depth {
            self.tau(y, n, &fx, &mut a);
            self.tau(y, n, &fr, &mut b);
            total += self.potential.eval(&a) - self.potential.eval(&b);
        }
        total
    }

    pub fn w_at(&self, point: &BiSequence) -> f64 {
        self.w(&point.past, &point.future)
    }

    /// `A(σ̂^{-1}(y|x)) + W(σ̂^{-1}(y|x)) − W(y|x)`.
    pub fn adjoint_combination(&self, point: &BiSequence) -> f64 {
        // Pad explicitly so the shifted point sees the same tail as the original.
        let r = self.potential.range();
        let mut future = point.future.clone();
        while future.len() < self.depth + r {
            future.push(self.reference_at(future.len()));
        }
        let mut past = point.past.clone();
        past.resize(past.len().max(self.depth + 1), 0.0);
        let padded = BiSequence::new(past, future);
        let back = padded.shift_back();
        self.potential.eval(&back.future[..r]) + self.w_at(&back) - self.w_at(&padded)
    }

    /// Mean of the adjoint combination over the probe futures and its spread.
    pub fn adjoint_potential(&self, y: &[f64], probe_xs: &[Vec<f64>]) -> Result<(f64, f64)> {
        if probe_xs.is_empty() {
            return Err(Error::Argument("at least one probe point is needed".into()));
        }
        let values: Vec<f64> = probe_xs
            .iter()
            .map(|x| self.adjoint_combination(&BiSequence::new(y.to_vec(), x.clone())))
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        Ok((mean, hi - lo))
    }

    /// `A*` as a potential of the past coordinates `(y_1, …, y_r)`, evaluated
    /// with the reference point as future.
    pub fn adjoint(&self) -> Potential {
        let ik = self.clone();
        let r = self.potential.range();
        let sup = self.potential.sup_norm_bound() + 2.0 * self.w_sup_bound();
        let hol = self.potential.holder_constant() * 2f64.powf(self.potential.holder_exponent() * (r as f64 - 1.0));
        Potential::custom(format!("adjoint({})", self.potential.name()), r, sup, hol, move |y| {
            ik.adjoint_combination(&BiSequence::new(y.to_vec(), Vec::new()))
        })
        .expect("valid bounds")
    }

    /// `|W| ≤ Σ_n min(2‖A‖, Hol 2^{-nα})`.
    fn w_sup_bound(&self) -> f64 {
        let a = self.potential.holder_exponent();
        (1..=self.depth)
            .map(|n| {
                (2.0 * self.potential.sup_norm_bound()).min(self.potential.holder_constant() * 2f64.powf(-(n as f64) * a))
            })
            .sum()
    }

    /// `D_j W(y|x) = Σ_{n=1}^{N} D_{n+j} A(τ_{y,n} x)` for 1-based `j`.
    pub fn kernel_gradient(&self, j: usize, y: &[f64], x: &[f64]) -> Result<f64> {
        if !self.potential.has_partials() {
            return Err(Error::Capability(format!(
                "potential '{}' has no coordinate derivatives",
                self.potential.name()
            )));
        }
        if j == 0 || j > x.len().max(1) {
            return Err(Error::Argument(format!(
                "coordinate {j} is outside the supplied future prefix of length {}",
                x.len()
            )));
        }
        let fx = |i: usize| x.get(i).copied().unwrap_or_else(|| self.reference_at(i));
        let mut word = Vec::new();
        let mut total = 0.0;
        for n in 1..=self.depth {
            // Coordinate n + j (1-based) of τ_{y,n} x.
            self.tau(y, n, &fx, &mut word);
            total += self.potential.partial(n + j - 1, &word)?;
        }
        Ok(total)
    }

    /// `max_x W_{x'}(y|x) − W_{x''}(y|x) − min_x (…)` over probe futures.
    pub fn gauge_spread(&self, other: &InvolutionKernel, y: &[f64], probe_xs: &[Vec<f64>]) -> f64 {
        let diffs: Vec<f64> = probe_xs.iter().map(|x| self.w(y, x) - other.w(y, x)).collect();
        let hi = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = diffs.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo
    }

    /// Largest `|A*(y) − combination(y|x)|` over sampled points.
    pub fn cohomology_residual(&self, points: &[BiSequence]) -> f64 {
        let adjoint = self.adjoint();
        let r = self.potential.range();
        points
            .iter()
            .map(|p| {
                let mut y: Vec<f64> = p.past.iter().take(r).copied().collect();
                y.resize(r, 0.0);
                (adjoint.eval(&y) - self.adjoint_combination(p)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `K(y|x) = e^{W(y|x) − c}` on the grid, with `∬K d(ρ_{A*} × ρ_A) = 1`.
#[derive(Debug, Clone)]
pub struct BilateralKernel {
    grid: Arc<GridSpec>,
    ik: InvolutionKernel,
    c: f64,
    /// `W(a_i | a_j)` at `[i * M + j]`.
    w_table: Vec<f64>,
    rho_star: GridMeasure,
    rho: GridMeasure,
}

pub fn bilateral_normalize(ik: &InvolutionKernel, sol: &RpfSolution, sol_star: &RpfSolution) -> Result<BilateralKernel> {
    if ik.potential().range() > 2 || sol.arity() != 1 || sol_star.arity() != 1 {
        return Err(Error::Capability("bilateral kernels are tabulated for range at most 2".into()));
    }
    let grid = Arc::clone(sol.grid());
    let m = grid.size();
    if sol_star.grid().size() != m {
        return Err(Error::Argument("solutions live on different grids".into()));
    }
    let nodes = grid.nodes();
    let w_table: Vec<f64> = (0..m * m).map(|idx| ik.w(&[nodes[idx / m]], &[nodes[idx % m]])).collect();
    let rho = sol.rho().clone();
    let rho_star = sol_star.rho().clone();
    let shift = w_table.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mass: f64 = (0..m * m)
        .map(|idx| rho_star.weights()[idx / m] * rho.weights()[idx % m] * (w_table[idx] - shift).exp())
        .sum();
    Ok(BilateralKernel {
        grid,
        ik: ik.clone(),
        c: mass.ln() + shift,
        w_table,
        rho_star,
        rho,
    })
}

impl BilateralKernel {
    pub fn c(&self) -> f64 {
        self.c
    }

    /// `K(a_i | a_j)`.
    pub fn k(&self, i: usize, j: usize) -> f64 {
        (self.w_table[i * self.grid.size() + j] - self.c).exp()
    }

    pub fn rho(&self) -> &GridMeasure {
        &self.rho
    }

    pub fn rho_star(&self) -> &GridMeasure {
        &self.rho_star
    }

    /// `∬K d(ρ_{A*} × ρ_A)`.
    pub fn mass(&self) -> f64 {
        let m = self.grid.size();
        (0..m * m)
            .map(|idx| self.rho_star.weights()[idx / m] * self.rho.weights()[idx % m] * self.k(idx / m, idx % m))
            .sum()
    }

    /// `(ψ_A, ψ_{A*})` with `ψ_A(x) = Σ_y ρ*_y K(y|x)` and `ψ_{A*}(y) = Σ_x ρ_x K(y|x)`.
    pub fn eigenfunctions(&self) -> (GridFunction, GridFunction) {
        let m = self.grid.size();
        let mut psi = vec![0.0; m];
        let mut psi_star = vec![0.0; m];
        for y in 0..m {
            for x in 0..m {
                let k = self.k(y, x);
                psi[x] += self.rho_star.weights()[y] * k;
                psi_star[y] += self.rho.weights()[x] * k;
            }
        }
        (
            GridFunction::new(Arc::clone(&self.grid), 1, psi).expect("grid-sized"),
            GridFunction::new(Arc::clone(&self.grid), 1, psi_star).expect("grid-sized"),
        )
    }

    /// `ψ_A(x)` at an arbitrary spin `x_1 = x`.
    pub fn psi_at(&self, x: f64) -> f64 {
        let nodes = self.grid.nodes();
        nodes
            .iter()
            .zip(self.rho_star.weights())
            .map(|(&y, r)| r * (self.ik.w(&[y], &[x]) - self.c).exp())
            .sum()
    }

    /// `D_j ψ_A(x) = Σ_y ρ*_y K(y|x) D_j W(y|x)` at an arbitrary spin `x_1 = x`.
    pub fn gradient_at(&self, j: usize, x: f64) -> Result<f64> {
        let nodes = self.grid.nodes();
        let mut total = 0.0;
        for (&y, r) in nodes.iter().zip(self.rho_star.weights()) {
            let k = (self.ik.w(&[y], &[x]) - self.c).exp();
            total += r * k * self.ik.kernel_gradient(j, &[y], &[x])?;
        }
        Ok(total)
    }

    /// `D_j ψ_A` on the grid.
    pub fn eigenfunction_gradient(&self, j: usize) -> Result<GridFunction> {
        let values = self
            .grid
            .nodes()
            .iter()
            .map(|&x| self.gradient_at(j, x))
            .collect::<Result<Vec<_>>>()?;
        GridFunction::new(Arc::clone(&self.grid), 1, values)
    }

    /// `∫φ(x) dμ̂_A` for `φ` of the future coordinate `x_1`.
    pub fn future_marginal(&self, phi: &GridFunction) -> Result<f64> {
        self.marginal(phi, false)
    }

    /// `∫φ(y) dμ̂_A` for `φ` of the past coordinate `y_1`.
    pub fn past_marginal(&self, phi: &GridFunction) -> Result<f64> {
        self.marginal(phi, true)
    }

    fn marginal(&self, phi: &GridFunction, past: bool) -> Result<f64> {
        let m = self.grid.size();
        if phi.arity() != 1 || phi.grid().size() != m {
            return Err(Error::Argument("marginal test functions depend on one coordinate".into()));
        }
        Ok((0..m * m)
            .map(|idx| {
                let (y, x) = (idx / m, idx % m);
                let v = if past { phi.values()[y] } else { phi.values()[x] };
                self.rho_star.weights()[y] * self.rho.weights()[x] * self.k(y, x) * v
            })
            .sum())
    }
}
