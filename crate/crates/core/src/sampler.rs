//! Single-site Gibbs sampling of finite-volume specifications on grid nodes,
//! and the FKG covariance test built on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::flat_index;
use crate::observable::Observable;
use crate::potential::{check_class_e, ConditionReport};
use crate::specification::SpecKernel;
use crate::stats::{batch_means, DEFAULT_BATCHES};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainOptions {
    pub sweeps: usize,
    /// Defaults to a tenth of the sweeps when `None`.
    pub burn_in: Option<usize>,
    pub seed: u64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            sweeps: 100_000,
            burn_in: None,
            seed: 0,
        }
    }
}

impl ChainOptions {
    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.sweeps / 10)
    }
}

/// Configuration (node indices of sites `1..=n`) and generator state.
#[derive(Debug, Clone)]
pub struct SamplerState {
    pub config: Vec<usize>,
    pub seed: u64,
    pub sweeps: usize,
    rng: ChaCha8Rng,
}

impl SamplerState {
    /// All sites at the node nearest 0.
    pub fn new(kernel: &SpecKernel, seed: u64) -> Self {
        let start = kernel.grid().nearest_index(0.0);
        Self {
            config: vec![start; kernel.volume()],
            seed,
            sweeps: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn values(&self, kernel: &SpecKernel) -> Vec<f64> {
        let nodes = kernel.grid().nodes();
        self.config.iter().map(|&i| nodes[i]).collect()
    }
}

/// Exponentiated energy tables for the conditional updates.
struct Conditional<'a> {
    kernel: &'a SpecKernel,
    interior: Vec<f64>,
    edges: Vec<(usize, Vec<f64>)>,
}

impl<'a> Conditional<'a> {
    fn new(kernel: &'a SpecKernel) -> Self {
        let exp_shifted = |t: &[f64]| {
            let max = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            t.iter().map(|v| (v - max).exp()).collect::<Vec<_>>()
        };
        Self {
            kernel,
            interior: exp_shifted(kernel.interior()),
            edges: kernel.edges().iter().map(|(k, t)| (*k, exp_shifted(t))).collect(),
        }
    }

    /// Redraws site `i` (0-based) from its conditional law.
    fn update(&self, config: &mut [usize], i: usize, probs: &mut [f64], rng: &mut ChaCha8Rng) {
        let m = self.kernel.grid().size();
        let r = self.kernel.potential().range();
        let n = config.len();
        let w = self.kernel.grid().weights();
        let mut total = 0.0;
        for (j, slot) in probs.iter_mut().enumerate() {
            config[i] = j;
            let mut q = w[j];
            for k in i.saturating_sub(r - 1)..=i.min(n.saturating_sub(r)) {
                if k + r <= n {
                    q *= self.interior[flat_index(m, &config[k..k + r])];
                }
            }
            for (k, table) in &self.edges {
                if *k <= i {
                    q *= table[flat_index(m, &config[*k..n])];
                }
            }
            *slot = q;
            total += q;
        }
        let mut u = rng.gen::<f64>() * total;
        let mut pick = m - 1;
        for (j, q) in probs.iter().enumerate() {
            if u < *q {
                pick = j;
                break;
            }
            u -= q;
        }
        config[i] = pick;
    }

    fn sweep(&self, state: &mut SamplerState, probs: &mut [f64]) {
        for i in 0..state.config.len() {
            self.update(&mut state.config, i, probs, &mut state.rng);
        }
        state.sweeps += 1;
    }
}

/// Runs `sweeps` further sweeps (sites in increasing order).
pub fn gibbs_sample(kernel: &SpecKernel, state: &mut SamplerState, sweeps: usize) {
    let cond = Conditional::new(kernel);
    let mut probs = vec![0.0; kernel.grid().size()];
    for _ in 0..sweeps {
        cond.sweep(state, &mut probs);
    }
}

/// Observable values recorded once per sweep after burn-in.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub series: Vec<Vec<f64>>,
    pub final_state: SamplerState,
}

impl ChainOutput {
    /// Mean and batch-means standard error of observable `i`.
    pub fn estimate(&self, i: usize) -> (f64, f64) {
        batch_means(&self.series[i], DEFAULT_BATCHES)
    }
}

pub fn run_chain(kernel: &SpecKernel, observables: &[Observable], opts: ChainOptions) -> Result<ChainOutput> {
    if opts.sweeps == 0 {
        return Err(Error::Argument("at least one sweep is needed".into()));
    }
    let support = observables.iter().map(|o| o.support()).max().unwrap_or(0);
    let n = kernel.volume();
    let tail = kernel.tail(support);
    let nodes = kernel.grid().nodes();
    let cond = Conditional::new(kernel);
    let mut probs = vec![0.0; kernel.grid().size()];
    let mut state = SamplerState::new(kernel, opts.seed);
    for _ in 0..opts.burn_in() {
        cond.sweep(&mut state, &mut probs);
    }
    let mut word = vec![0.0; n + tail.len()];
    word[n..].copy_from_slice(&tail);
    let mut series = vec![Vec::with_capacity(opts.sweeps); observables.len()];
    for _ in 0..opts.sweeps {
        cond.sweep(&mut state, &mut probs);
        for (slot, &i) in word.iter_mut().zip(&state.config) {
            *slot = nodes[i];
        }
        for (s, o) in series.iter_mut().zip(observables) {
            s.push(o.eval(&word));
        }
    }
    Ok(ChainOutput {
        series,
        final_state: state,
    })
}

#[derive(Debug, Clone)]
pub struct FkgReport {
    pub covariance: f64,
    /// Zero for exact reports.
    pub standard_error: f64,
    pub samples: usize,
    pub exact: bool,
    /// `cov ≥ −3 SE`.
    pub passed: bool,
    pub class_e: ConditionReport,
    pub warning: Option<String>,
}

const MONOTONE_PAIRS: usize = 1000;

/// Spot-checks that `f` is coordinatewise non-decreasing on random ordered pairs.
fn check_increasing(f: &Observable, len: usize, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let len = len.max(1);
    for _ in 0..MONOTONE_PAIRS {
        let x: Vec<f64> = (0..len).map(|_| (rng.gen::<f64>() - 0.5) * 8.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.gen::<f64>() * 2.0).collect();
        if f.eval(&y) < f.eval(&x) - 1e-12 {
            return Err(Error::Argument(format!("observable '{}' is not coordinatewise increasing", f.name())));
        }
    }
    Ok(())
}

fn prepare(kernel: &SpecKernel, f: &Observable, g: &Observable, seed: u64) -> Result<(ConditionReport, Option<String>)> {
    let len = kernel.word_len(f.support().max(g.support()));
    check_increasing(f, len, seed)?;
    check_increasing(g, len, seed.wrapping_add(1))?;
    let class_e = check_class_e(kernel.potential(), kernel.volume(), 500)?;
    let warning = (!class_e.passed).then(|| {
        format!(
            "potential '{}' failed the class check (worst margin {:e}); positive correlations are not expected",
            kernel.potential().name(),
            class_e.worst_margin
        )
    });
    Ok((class_e, warning))
}

/// `Cov(f, g)` under `μ_n^y` by sampling.
pub fn fkg_test(kernel: &SpecKernel, f: &Observable, g: &Observable, opts: ChainOptions) -> Result<FkgReport> {
    let (class_e, warning) = prepare(kernel, f, g, opts.seed)?;
    let out = run_chain(kernel, &[f.clone(), g.clone()], opts)?;
    let (mf, _) = out.estimate(0);
    let (mg, _) = out.estimate(1);
    let products: Vec<f64> = out.series[0]
        .iter()
        .zip(&out.series[1])
        .map(|(a, b)| (a - mf) * (b - mg))
        .collect();
    let (covariance, standard_error) = batch_means(&products, DEFAULT_BATCHES);
    Ok(FkgReport {
        covariance,
        standard_error,
        samples: products.len(),
        exact: false,
        passed: covariance >= -3.0 * standard_error,
        class_e,
        warning,
    })
}

/// `Cov(f, g)` under `μ_n^y` by exact enumeration.
pub fn fkg_exact(kernel: &SpecKernel, f: &Observable, g: &Observable) -> Result<FkgReport> {
    let (class_e, warning) = prepare(kernel, f, g, 0)?;
    let support = f.support().max(g.support());
    let sums = kernel
        .enumerate(support, 3, |_, word, out| {
            let (a, b) = (f.eval(word), g.eval(word));
            out[0] = a;
            out[1] = b;
            out[2] = a * b;
        })?
        .1;
    let covariance = sums[2] - sums[0] * sums[1];
    Ok(FkgReport {
        covariance,
        standard_error: 0.0,
        samples: 0,
        exact: true,
        passed: covariance >= 0.0,
        class_e,
        warning,
    })
}
