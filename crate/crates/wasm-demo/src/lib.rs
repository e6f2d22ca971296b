use std::sync::Arc;

use thermoform::*;
use wasm_bindgen::prelude::*;

// Larger grids freeze the page.
const MAX_GRID: usize = 400;
const MAX_SWEEPS: usize = 200_000;

fn grid(size: usize) -> Result<Arc<GridSpec>> {
    if size > MAX_GRID {
        return Err(Error::Argument(format!("grid size {size} exceeds the demo limit {MAX_GRID}")));
    }
    Ok(Arc::new(GridSpec::gaussian(size)?))
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Eigendata of `P2(J)` on a Gaussian grid.
#[wasm_bindgen]
pub struct Solution {
    lambda: f64,
    entropy: f64,
    coords: Vec<f64>,
    psi: Vec<f64>,
    gibbs: Vec<f64>,
}

impl Solution {
    pub fn compute(coupling: f64, size: usize) -> Result<Self> {
        let gr = grid(size)?;
        let sol = solve_rpf(&gr, &Potential::p2(coupling), SolverOptions::default())?;
        // Gibbs mass per node over the a priori mass: a density against the grid measure.
        let gibbs = sol.gibbs().weights().iter().zip(gr.weights()).map(|(m, w)| m / w).collect();
        Ok(Self {
            lambda: sol.lambda(),
            entropy: sol.gibbs_entropy(),
            coords: gr.nodes().iter().map(|a| a.atan()).collect(),
            psi: sol.psi().values().to_vec(),
            gibbs,
        })
    }
}

#[wasm_bindgen]
impl Solution {
    #[wasm_bindgen(getter)]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[wasm_bindgen(getter)]
    pub fn entropy(&self) -> f64 {
        self.entropy
    }

    /// Nodes mapped through `atan`, so the whole line fits on screen.
    #[wasm_bindgen(getter)]
    pub fn coords(&self) -> Vec<f64> {
        self.coords.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn psi(&self) -> Vec<f64> {
        self.psi.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn gibbs(&self) -> Vec<f64> {
        self.gibbs.clone()
    }
}

#[wasm_bindgen]
pub fn solve(coupling: f64, size: usize) -> std::result::Result<Solution, JsError> {
    Solution::compute(coupling, size).map_err(js)
}

/// `P(βA)/β` for `β = 1, 2, 4, …` up to `max_beta`, with the max-plus limit.
#[wasm_bindgen]
pub struct Sweep {
    betas: Vec<f64>,
    values: Vec<f64>,
    m: f64,
}

impl Sweep {
    pub fn compute(coupling: f64, size: usize, max_beta: f64) -> Result<Self> {
        if !(1.0..=1024.0).contains(&max_beta) {
            return Err(Error::Argument(format!("max beta must lie in [1, 1024], got {max_beta}")));
        }
        let gr = grid(size)?;
        let betas: Vec<f64> = std::iter::successors(Some(1.0), |b| Some(b * 2.0)).take_while(|b| *b <= max_beta).collect();
        let s = beta_sweep(&gr, &Potential::p2(coupling), &betas, SolverOptions::default(), false)?;
        Ok(Self {
            betas,
            values: s.values,
            m: s.max_plus_m,
        })
    }
}

#[wasm_bindgen]
impl Sweep {
    #[wasm_bindgen(getter)]
    pub fn betas(&self) -> Vec<f64> {
        self.betas.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn m(&self) -> f64 {
        self.m
    }
}

#[wasm_bindgen]
pub fn sweep(coupling: f64, size: usize, max_beta: f64) -> std::result::Result<Sweep, JsError> {
    Sweep::compute(coupling, size, max_beta).map_err(js)
}

/// `Cov(g(x_1), g(x_n))` under the finite-volume kernel with boundary 0.
#[wasm_bindgen]
pub struct Correlation {
    covariance: f64,
    standard_error: f64,
    exact: bool,
    class_e: bool,
}

impl Correlation {
    pub fn compute(coupling: f64, size: usize, volume: usize, sweeps: usize, seed: u64) -> Result<Self> {
        if volume == 0 || sweeps == 0 || sweeps > MAX_SWEEPS {
            return Err(Error::Argument(format!("need volume ≥ 1 and 1 ≤ sweeps ≤ {MAX_SWEEPS}")));
        }
        let k = SpecKernel::new(&Potential::p2(coupling), grid(size)?, volume, vec![0.0])?
            .with_budget(ExactBudget { max_points: 1_000_000 });
        let (f, g) = (Observable::g_at(1), Observable::g_at(volume));
        let r = match k.mode() {
            SpecMode::Exact => fkg_exact(&k, &f, &g)?,
            SpecMode::MonteCarlo => fkg_test(&k, &f, &g, ChainOptions { sweeps, burn_in: None, seed })?,
        };
        Ok(Self {
            covariance: r.covariance,
            standard_error: r.standard_error,
            exact: r.exact,
            class_e: r.class_e.passed,
        })
    }
}

#[wasm_bindgen]
impl Correlation {
    #[wasm_bindgen(getter)]
    pub fn covariance(&self) -> f64 {
        self.covariance
    }

    #[wasm_bindgen(getter)]
    pub fn standard_error(&self) -> f64 {
        self.standard_error
    }

    #[wasm_bindgen(getter)]
    pub fn exact(&self) -> bool {
        self.exact
    }

    /// False when the potential fails the monotonicity class; the sign is then not predicted.
    #[wasm_bindgen(getter)]
    pub fn class_e(&self) -> bool {
        self.class_e
    }
}

#[wasm_bindgen]
pub fn correlation(coupling: f64, size: usize, volume: usize, sweeps: usize, seed: u64) -> std::result::Result<Correlation, JsError> {
    Correlation::compute(coupling, size, volume, sweeps, seed).map_err(js)
}
