//! Zero-temperature limits: `β`-sweeps of the pressure, the max-plus
//! eigenproblem for `m(A)` and calibrated sub-actions, and a maximum
//! cycle mean oracle.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridMeasure, GridSpec};
use crate::potential::Potential;
use crate::transfer::{SolverOptions, TransferOperator};

/// Iterations without a new smallest span before switching to the damped update.
const STALL_WINDOW: usize = 64;

/// Max-plus eigenvalue and a calibrated sub-action.
#[derive(Debug, Clone)]
pub struct SubActionSolution {
    pub m: f64,
    /// Normalized so that `max V = 0`.
    pub v: GridFunction,
    /// Half-width of the bracket `min (TV − V) ≤ m ≤ max (TV − V)`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SubActionSolution {
    /// `max_{a, s} (A(a, s) + V(a s) − V(s) − m)`, which is at most `residual`.
    pub fn max_defect(&self, grid: &Arc<GridSpec>, p: &Potential) -> Result<f64> {
        let op = TransferOperator::new(Arc::clone(grid), p)?;
        let m = grid.size();
        let v = self.v.values();
        let mut worst = f64::NEG_INFINITY;
        for s in 0..op.states() {
            for a in 0..m {
                let d = op.energy()[s * m + a] + v[op.prepend(a, s)] - v[s] - self.m;
                worst = worst.max(d);
            }
        }
        Ok(worst)
    }
}

/// Max-plus value iteration `V ← TV − max TV` with
/// `(TV)(s) = max_a {A(a, s) + V(a s)}`; ties resolve to the smallest node.
/// Falls back to the damped update `(V + TV) / 2` when the span stalls.
pub fn solve_max_plus(grid: &Arc<GridSpec>, p: &Potential, tol: f64, max_iter: usize) -> Result<SubActionSolution> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::Config("max-plus tolerance must be positive and max_iter non-zero".into()));
    }
    let op = TransferOperator::new(Arc::clone(grid), p)?;
    let m = grid.size();
    let n = op.states();
    let energy = op.energy();
    let prepend: Vec<usize> = (0..n * m).map(|idx| op.prepend(idx % m, idx / m)).collect();

    let apply = |v: &[f64]| -> Vec<f64> {
        (0..n)
            .into_par_iter()
            .map(|s| {
                let row = s * m;
                let mut best = f64::NEG_INFINITY;
                for a in 0..m {
                    let cand = energy[row + a] + v[prepend[row + a]];
                    if cand > best {
                        best = cand;
                    }
                }
                best
            })
            .collect()
    };

    let mut v = vec![0.0; n];
    let mut best_span = f64::INFINITY;
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    let mut since_improvement = 0;
    let mut damped = false;
    for it in 1..=max_iter {
        let tv = apply(&v);
        let (lo, hi) = tv
            .iter()
            .zip(&v)
            .map(|(t, x)| t - x)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        let span = hi - lo;
        if span < best_span {
            best_span = span;
            best = Some((v.clone(), lo, hi));
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        if span <= 2.0 * tol {
            return Ok(finish(grid, op.arity(), v, lo, hi, it, true));
        }
        if since_improvement >= STALL_WINDOW {
            damped = true;
        }
        let mut next: Vec<f64> = if damped {
            v.iter().zip(&tv).map(|(a, b)| 0.5 * (a + b)).collect()
        } else {
            tv
        };
        let top = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        next.iter_mut().for_each(|x| *x -= top);
        v = next;
    }
    let (v, lo, hi) = best.expect("at least one iteration");
    Ok(finish(grid, op.arity(), v, lo, hi, max_iter, false))
}

fn finish(grid: &Arc<GridSpec>, arity: usize, v: Vec<f64>, lo: f64, hi: f64, iterations: usize, converged: bool) -> SubActionSolution {
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let v = v.into_iter().map(|x| x - top).collect();
    SubActionSolution {
        m: 0.5 * (lo + hi),
        v: GridFunction::new(Arc::clone(grid), arity, v).expect("state-sized sub-action"),
        residual: 0.5 * (hi - lo),
        iterations,
        converged,
    }
}

/// Karp's maximum cycle mean on the complete graph over grid nodes with edge
/// weights `A(a_i, a_j)` (or `A(a_i)` for range 1).
pub fn max_mean_cycle(grid: &Arc<GridSpec>, p: &Potential) -> Result<f64> {
    if p.range() > 2 {
        return Err(Error::Capability(format!(
            "cycle means need range at most 2 (got {}); use the max-plus solver",
            p.range()
        )));
    }
    let table = p.tabulate(grid);
    let n = grid.size();
    let weight = |u: usize, v: usize| if p.range() == 1 { table[u] } else { table[u * n + v] };
    let mut d = vec![vec![f64::NEG_INFINITY; n]; n + 1];
    d[0].iter_mut().for_each(|x| *x = 0.0);
    for k in 1..=n {
        let (prev, cur) = d.split_at_mut(k);
        let prev = &prev[k - 1];
        cur[0]
            .par_iter_mut()
            .enumerate()
            .for_each(|(v, slot)| {
                *slot = (0..n).map(|u| prev[u] + weight(u, v)).fold(f64::NEG_INFINITY, f64::max);
            });
    }
    let best = (0..n)
        .map(|v| {
            (0..n)
                .map(|k| (d[n][v] - d[k][v]) / (n - k) as f64)
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best)
}

/// `(1/β) log λ_{βA}` along increasing `β`, with the Gibbs windows kept for
/// ground-state diagnostics.
#[derive(Debug, Clone)]
pub struct BetaSweep {
    pub betas: Vec<f64>,
    pub values: Vec<f64>,
    /// `∫A dμ_{βA}`.
    pub energies: Vec<f64>,
    /// Max-plus value on the same grid.
    pub max_plus_m: f64,
    pub gibbs_family: Option<Vec<GridMeasure>>,
}

impl BetaSweep {
    /// `value − m` per `β`; non-positive on the grid since entropy is.
    pub fn gaps(&self) -> Vec<f64> {
        self.values.iter().map(|v| v - self.max_plus_m).collect()
    }
}

pub fn beta_sweep(
    grid: &Arc<GridSpec>,
    p: &Potential,
    betas: &[f64],
    opts: SolverOptions,
    keep_family: bool,
) -> Result<BetaSweep> {
    if betas.is_empty() || betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) || betas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("betas must be positive, finite and strictly increasing".into()));
    }
    let solutions: Vec<_> = betas
        .par_iter()
        .map(|&b| TransferOperator::new(Arc::clone(grid), &p.scaled(b)).and_then(|op| op.solve(opts)))
        .collect::<Result<_>>()?;
    let values = solutions.iter().zip(betas).map(|(s, b)| s.log_lambda() / b).collect();
    let energies = solutions.iter().zip(betas).map(|(s, b)| s.mean_energy() / b).collect();
    let max_plus = solve_max_plus(grid, p, opts.tol.max(1e-12), 1_000_000)?;
    let gibbs_family = keep_family.then(|| solutions.iter().map(|s| s.window().clone()).collect());
    Ok(BetaSweep {
        betas: betas.to_vec(),
        values,
        energies,
        max_plus_m: max_plus.m,
        gibbs_family,
    })
}

#[derive(Debug, Clone)]
pub struct GroundStateReport {
    /// `∫g dμ_{βA}` per test function and `β`.
    pub trajectories: Vec<Vec<f64>>,
    /// Largest pairwise difference over the last three `β` per test function.
    pub cauchy_defects: Vec<f64>,
    /// `∫A dμ_{βA} − m` per `β`.
    pub energy_gaps: Vec<f64>,
}

pub fn ground_state_diagnostic(sweep: &BetaSweep, test_functions: &[GridFunction]) -> Result<GroundStateReport> {
    let family = sweep
        .gibbs_family
        .as_ref()
        .ok_or_else(|| Error::Argument("sweep was computed without Gibbs states".into()))?;
    let trajectories = test_functions
        .iter()
        .map(|g| family.iter().map(|mu| mu.integrate(g)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let cauchy_defects = trajectories
        .iter()
        .map(|t| {
            let tail = &t[t.len().saturating_sub(3)..];
            let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .collect();
    let energy_gaps = sweep.energies.iter().map(|e| e - sweep.max_plus_m).collect();
    Ok(GroundStateReport {
        trajectories,
        cauchy_defects,
        energy_gaps,
    })
}
