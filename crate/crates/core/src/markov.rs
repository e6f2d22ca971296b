//! Two-coordinate potentials as stationary Markov chains on the grid.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridMeasure, GridSpec};
use crate::potential::Potential;
use crate::transfer::{solve_rpf, RpfSolution, SolverOptions};

/// Transition kernel `P` (density with respect to the a priori weights) and
/// stationary density `θ`.
#[derive(Debug, Clone)]
pub struct MarkovModel {
    grid: Arc<GridSpec>,
    /// `P(a_i, a_j)` at `[i * M + j]`.
    kernel: Vec<f64>,
    theta: Vec<f64>,
    pi_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovResiduals {
    /// `max_i |Σ_j w_j P_ij − 1|`.
    pub row: f64,
    /// `max_j |Σ_i w_i θ_i P_ij − θ_j|`.
    pub stationarity: f64,
    /// `|Σ_i w_i θ_i − 1|`.
    pub mass: f64,
}

impl MarkovModel {
    pub fn new(grid: Arc<GridSpec>, kernel: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        let m = grid.size();
        if kernel.len() != m * m || theta.len() != m {
            return Err(Error::Argument(format!(
                "a Markov model on {m} nodes needs {} kernel values and {m} densities",
                m * m
            )));
        }
        if kernel.iter().chain(&theta).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Argument("kernel and stationary density must be strictly positive".into()));
        }
        Ok(Self {
            grid,
            kernel,
            theta,
            pi_norm: 1.0,
        })
    }

    /// Model with a stationary density found by iterating `θ ↦ θP`.
    pub fn with_stationary(grid: Arc<GridSpec>, kernel: Vec<f64>, opts: SolverOptions) -> Result<Self> {
        let m = grid.size();
        if kernel.len() != m * m {
            return Err(Error::Argument(format!("kernel must have {} entries", m * m)));
        }
        let w = grid.weights().to_vec();
        let mut theta = vec![1.0; m];
        let mut change = f64::INFINITY;
        let mut iterations = 0;
        while change > opts.tol && iterations < opts.max_iter {
            let mut next = vec![0.0; m];
            for i in 0..m {
                let c = w[i] * theta[i];
                for j in 0..m {
                    next[j] += c * kernel[i * m + j];
                }
            }
            let mass: f64 = next.iter().zip(&w).map(|(t, w)| t * w).sum();
            next.iter_mut().for_each(|t| *t /= mass);
            change = next.iter().zip(&theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            theta = next;
            iterations += 1;
        }
        if change > opts.tol {
            return Err(Error::Convergence {
                iterations,
                residual: change,
            });
        }
        Self::new(grid, kernel, theta)
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    /// `P(a_i, a_j)` at `[i * M + j]`.
    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// `π_A = Σ w ψ ψ̄` when built from a Gibbs state, 1 otherwise.
    pub fn pi_norm(&self) -> f64 {
        self.pi_norm
    }

    pub fn residuals(&self) -> MarkovResiduals {
        let m = self.grid.size();
        let w = self.grid.weights();
        let row = (0..m)
            .map(|i| {
                let s: f64 = (0..m).map(|j| w[j] * self.kernel[i * m + j]).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max);
        let stationarity = (0..m)
            .map(|j| {
                let s: f64 = (0..m).map(|i| w[i] * self.theta[i] * self.kernel[i * m + j]).sum();
                (s - self.theta[j]).abs()
            })
            .fold(0.0, f64::max);
        let mass = (self.theta.iter().zip(w).map(|(t, w)| t * w).sum::<f64>() - 1.0).abs();
        MarkovResiduals {
            row,
            stationarity,
            mass,
        }
    }

    /// Weights `w_i θ_i P_ij w_j` of two-step cylinders.
    pub fn pair_measure(&self) -> GridMeasure {
        let m = self.grid.size();
        let w = self.grid.weights();
        let weights = (0..m * m)
            .map(|idx| {
                let (i, j) = (idx / m, idx % m);
                w[i] * self.theta[i] * self.kernel[idx] * w[j]
            })
            .collect();
        GridMeasure::new(Arc::clone(&self.grid), 2, weights).expect("square shape")
    }

    /// Weight of the grid cylinder `[a_{i_1}, …, a_{i_n}]`.
    pub fn cylinder(&self, indices: &[usize]) -> Result<f64> {
        let m = self.grid.size();
        if indices.is_empty() || indices.iter().any(|&i| i >= m) {
            return Err(Error::Argument("cylinder indices must be non-empty and on the grid".into()));
        }
        let w = self.grid.weights();
        let mut weight = self.theta[indices[0]] * w[indices[0]];
        for pair in indices.windows(2) {
            weight *= self.kernel[pair[0] * m + pair[1]] * w[pair[1]];
        }
        Ok(weight)
    }

    /// `S(θP) = −Σ w_i w_j θ_i P_ij log P_ij`.
    pub fn entropy(&self) -> f64 {
        let m = self.grid.size();
        let w = self.grid.weights();
        -(0..m * m)
            .map(|idx| {
                let (i, j) = (idx / m, idx % m);
                let p = self.kernel[idx];
                w[i] * w[j] * self.theta[i] * p * p.ln()
            })
            .sum::<f64>()
    }
}

/// The Markov model of the Gibbs state of a range-2 potential:
/// `P(x_1, x_2) = e^{A(x_1, x_2)} ψ̄(x_2) / (λ ψ̄(x_1))` and `θ = ψψ̄ / π`,
/// where `ψ̄` is the eigenfunction for the reflected potential.
pub fn gibbs_to_markov(sol: &RpfSolution, opts: SolverOptions) -> Result<MarkovModel> {
    if sol.range() != 2 {
        return Err(Error::Capability(format!(
            "Markov models need a range-2 potential, got range {}",
            sol.range()
        )));
    }
    let grid = Arc::clone(sol.grid());
    let m = grid.size();
    // energy[s * M + a] = A(a, s) is A*(s, a) in row-major order.
    let reflected_table = GridFunction::new(Arc::clone(&grid), 2, sol.energy().to_vec())?;
    let reflected = Potential::tabulated("reflected", reflected_table)?;
    let adjoint = solve_rpf(&grid, &reflected, opts)?;
    let psi = sol.psi().values();
    let psi_bar = adjoint.psi().values();
    let log_psi_bar: Vec<f64> = psi_bar.iter().map(|v| v.ln()).collect();
    let log_lambda = sol.log_lambda();
    let energy = sol.energy();
    let kernel = (0..m * m)
        .map(|idx| {
            let (i, j) = (idx / m, idx % m);
            (energy[j * m + i] - log_lambda + log_psi_bar[j] - log_psi_bar[i]).exp()
        })
        .collect();
    let w = grid.weights();
    let pi_norm: f64 = (0..m).map(|i| w[i] * psi[i] * psi_bar[i]).sum();
    let theta = (0..m).map(|i| psi[i] * psi_bar[i] / pi_norm).collect();
    let mut model = MarkovModel::new(grid, kernel, theta)?;
    model.pi_norm = pi_norm;
    Ok(model)
}

/// `A = log P` and its eigentriple (`λ = 1`).
pub fn markov_to_potential(model: &MarkovModel, opts: SolverOptions) -> Result<(Potential, RpfSolution)> {
    let res = model.residuals();
    if res.row > 1e-6 {
        return Err(Error::Argument(format!(
            "transition kernel rows are not normalized (defect {:e})",
            res.row
        )));
    }
    let grid = Arc::clone(model.grid());
    let table = GridFunction::new(
        Arc::clone(&grid),
        2,
        model.kernel().iter().map(|p| p.ln()).collect(),
    )?;
    let potential = Potential::tabulated("log P", table)?;
    let sol = solve_rpf(&grid, &potential, opts)?;
    Ok((potential, sol))
}
