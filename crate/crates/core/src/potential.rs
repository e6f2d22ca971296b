//! Finite-range potentials on spin sequences and the structural checks used
//! by the zero-temperature and correlation-inequality code.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{gauss_legendre, metric_distance, tensor_len, unflatten, GridFunction, GridSpec, DEFAULT_GRID_SIZE};

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type PartialFn = dyn Fn(usize, &[f64]) -> f64 + Send + Sync;

const SAMPLE_SEED: u64 = 0x5eed_1e55;

/// A potential `A(x) = A(x_1, …, x_r)` of finite range `r`.
#[derive(Clone)]
pub struct Potential {
    name: String,
    range: usize,
    eval: Arc<EvalFn>,
    partials: Option<Arc<PartialFn>>,
    sup_norm_bound: f64,
    holder_exponent: f64,
    holder_constant: f64,
    closed_form_limits: bool,
    table: Option<GridFunction>,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("name", &self.name)
            .field("range", &self.range)
            .field("sup_norm_bound", &self.sup_norm_bound)
            .field("holder_exponent", &self.holder_exponent)
            .field("holder_constant", &self.holder_constant)
            .field("has_partials", &self.partials.is_some())
            .field("tabulated", &self.table.is_some())
            .finish()
    }
}

/// `g(a) = (2/π) arctan(a)`, the bounded spin used by the coupling potentials.
pub fn g(a: f64) -> f64 {
    a.atan() * 2.0 / PI
}

/// Derivative of [`g`].
pub fn g_prime(a: f64) -> f64 {
    if a.is_infinite() {
        0.0
    } else {
        2.0 / (PI * (1.0 + a * a))
    }
}

impl Potential {
    /// A custom potential. `sup_norm_bound` and `holder_constant` are the
    /// caller's bounds; the exponent defaults to 1.
    pub fn custom(
        name: impl Into<String>,
        range: usize,
        sup_norm_bound: f64,
        holder_constant: f64,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if range == 0 {
            return Err(Error::Argument("potential range must be at least 1".into()));
        }
        if !(sup_norm_bound >= 0.0) || !(holder_constant >= 0.0) {
            return Err(Error::Argument("potential bounds must be non-negative".into()));
        }
        Ok(Self {
            name: name.into(),
            range,
            eval: Arc::new(eval),
            partials: None,
            sup_norm_bound,
            holder_exponent: 1.0,
            holder_constant,
            closed_form_limits: false,
            table: None,
        })
    }

    /// Attaches coordinate derivatives; `partial(j, x)` is `D_{j+1} A(x)`.
    pub fn with_partials(mut self, partial: impl Fn(usize, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.partials = Some(Arc::new(partial));
        self
    }

    pub fn with_holder_exponent(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Argument(format!("Hölder exponent must lie in (0, 1], got {alpha}")));
        }
        self.holder_exponent = alpha;
        Ok(self)
    }

    /// Declares that `eval` accepts `±∞` coordinates (through `arctan(±∞) = ±π/2`).
    pub fn with_closed_form_limits(mut self) -> Self {
        self.closed_form_limits = true;
        self
    }

    /// `A ≡ c`.
    pub fn constant(c: f64) -> Self {
        let name = if c == 0.0 { "P0".to_string() } else { format!("const({c})") };
        Self {
            name,
            range: 1,
            eval: Arc::new(move |_| c),
            partials: Some(Arc::new(|_, _| 0.0)),
            sup_norm_bound: c.abs(),
            holder_exponent: 1.0,
            holder_constant: 0.0,
            closed_form_limits: true,
            table: None,
        }
    }

    /// `A(x) = -arctan²(x_1)`.
    pub fn p1() -> Self {
        Self {
            name: "P1".into(),
            range: 1,
            eval: Arc::new(|x| -x[0].atan().powi(2)),
            partials: Some(Arc::new(|j, x| {
                if j == 0 && x[0].is_finite() {
                    -2.0 * x[0].atan() / (1.0 + x[0] * x[0])
                } else {
                    0.0
                }
            })),
            sup_norm_bound: PI * PI / 4.0,
            holder_exponent: 1.0,
            holder_constant: 2.0 * PI * PI,
            closed_form_limits: true,
            table: None,
        }
    }

    /// `A(x) = J g(x_1) g(x_2)`.
    pub fn p2(coupling: f64) -> Self {
        Self {
            name: format!("P2(J={coupling})"),
            range: 2,
            eval: Arc::new(move |x| coupling * g(x[0]) * g(x[1])),
            partials: Some(Arc::new(move |j, x| match j {
                0 => coupling * g_prime(x[0]) * g(x[1]),
                1 => coupling * g(x[0]) * g_prime(x[1]),
                _ => 0.0,
            })),
            sup_norm_bound: coupling.abs(),
            holder_exponent: 1.0,
            holder_constant: 8.0 * coupling.abs(),
            closed_form_limits: true,
            table: None,
        }
    }

    /// `A(x) = -(arctan x_1 - arctan(x_2)/2)²`.
    pub fn p3() -> Self {
        Self {
            name: "P3".into(),
            range: 2,
            eval: Arc::new(|x| -(x[0].atan() - 0.5 * x[1].atan()).powi(2)),
            partials: Some(Arc::new(|j, x| {
                let s = x[0].atan() - 0.5 * x[1].atan();
                match j {
                    0 if x[0].is_finite() => -2.0 * s / (1.0 + x[0] * x[0]),
                    1 if x[1].is_finite() => s / (1.0 + x[1] * x[1]),
                    _ => 0.0,
                }
            })),
            sup_norm_bound: 9.0 * PI * PI / 16.0,
            holder_exponent: 1.0,
            holder_constant: 3.0 * PI * PI,
            closed_form_limits: true,
            table: None,
        }
    }

    /// Built-in potentials by identifier: `P0`, `Pc` (`[c]`, default 0.5),
    /// `P1`, `P2` (`[J]`, default 0.8), `P3`.
    pub fn library(id: &str, params: &[f64]) -> Result<Self> {
        let param = |default: f64| -> Result<f64> {
            match params {
                [] => Ok(default),
                [v] if v.is_finite() => Ok(*v),
                _ => Err(Error::Config(format!("potential '{id}' takes at most one finite parameter"))),
            }
        };
        let no_params = || -> Result<()> {
            if params.is_empty() {
                Ok(())
            } else {
                Err(Error::Config(format!("potential '{id}' takes no parameters")))
            }
        };
        match id.to_ascii_lowercase().as_str() {
            "p0" => no_params().map(|_| Self::constant(0.0)),
            "pc" => Ok(Self::constant(param(0.5)?).renamed("Pc")),
            "p1" => no_params().map(|_| Self::p1()),
            "p2" => Ok(Self::p2(param(0.8)?)),
            "p3" => no_params().map(|_| Self::p3()),
            other => Err(Error::Config(format!("unknown potential '{other}'"))),
        }
    }

    /// Interprets a grid function of arity `r` as a range-`r` potential.
    /// Off-grid evaluation interpolates; on-grid tabulation is exact.
    pub fn tabulated(name: impl Into<String>, table: GridFunction) -> Result<Self> {
        let range = table.arity();
        if range == 0 {
            return Err(Error::Argument("a tabulated potential needs arity at least 1".into()));
        }
        let sup = table.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let holder = neighbour_holder_estimate(&table);
        let lookup = table.clone();
        Ok(Self {
            name: name.into(),
            range,
            eval: Arc::new(move |x| lookup.interpolate(&x[..lookup.arity()]).unwrap_or(f64::NAN)),
            partials: None,
            sup_norm_bound: sup,
            holder_exponent: 1.0,
            holder_constant: holder,
            closed_form_limits: false,
            table: Some(table),
        })
    }

    fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    /// `β·A`.
    pub fn scaled(&self, beta: f64) -> Self {
        let eval = Arc::clone(&self.eval);
        let partials = self.partials.clone().map(|p| -> Arc<PartialFn> { Arc::new(move |j, x| beta * p(j, x)) });
        Self {
            name: format!("{beta}*{}", self.name),
            range: self.range,
            eval: Arc::new(move |x| beta * eval(x)),
            partials,
            sup_norm_bound: beta.abs() * self.sup_norm_bound,
            holder_exponent: self.holder_exponent,
            holder_constant: beta.abs() * self.holder_constant,
            closed_form_limits: self.closed_form_limits,
            table: self.table.as_ref().map(|t| scale_table(t, beta, 0.0)),
        }
    }

    /// `A + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let eval = Arc::clone(&self.eval);
        Self {
            name: format!("{}+{c}", self.name),
            range: self.range,
            eval: Arc::new(move |x| eval(x) + c),
            partials: self.partials.clone(),
            sup_norm_bound: self.sup_norm_bound + c.abs(),
            holder_exponent: self.holder_exponent,
            holder_constant: self.holder_constant,
            closed_form_limits: self.closed_form_limits,
            table: self.table.as_ref().map(|t| scale_table(t, 1.0, c)),
        }
    }

    /// Coordinate reversal `A*(y_1, …, y_r) = A(y_r, …, y_1)`.
    pub fn reflected(&self) -> Self {
        let r = self.range;
        let eval = Arc::clone(&self.eval);
        let partials = self.partials.clone().map(|p| -> Arc<PartialFn> {
            Arc::new(move |j, y| {
                if j >= r {
                    return 0.0;
                }
                let rev: Vec<f64> = y[..r].iter().rev().copied().collect();
                p(r - 1 - j, &rev)
            })
        });
        let table = self.table.as_ref().map(|t| {
            let m = t.grid().size();
            let mut idx = vec![0usize; r];
            let values = (0..t.values().len())
                .map(|flat| {
                    unflatten(m, flat, &mut idx);
                    idx.reverse();
                    t.at_indices(&idx)
                })
                .collect();
            GridFunction::new(Arc::clone(t.grid()), r, values).expect("same shape")
        });
        Self {
            name: format!("reflected({})", self.name),
            range: r,
            eval: Arc::new(move |y| {
                let rev: Vec<f64> = y[..r].iter().rev().copied().collect();
                eval(&rev)
            }),
            partials,
            sup_norm_bound: self.sup_norm_bound,
            holder_exponent: self.holder_exponent,
            // Reversal can move a coordinate from weight 2^{-r} to 1/2.
            holder_constant: self.holder_constant * 2f64.powf(self.holder_exponent * (r as f64 - 1.0)),
            closed_form_limits: self.closed_form_limits,
            table,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn sup_norm_bound(&self) -> f64 {
        self.sup_norm_bound
    }

    pub fn holder_exponent(&self) -> f64 {
        self.holder_exponent
    }

    pub fn holder_constant(&self) -> f64 {
        self.holder_constant
    }

    pub fn has_partials(&self) -> bool {
        self.partials.is_some()
    }

    pub fn has_closed_form_limits(&self) -> bool {
        self.closed_form_limits
    }

    /// Bound on the variation of a range-`r` truncation of a general Hölder
    /// potential: `Hol · 2^{-rα}`.
    pub fn truncation_error(&self) -> f64 {
        self.holder_constant * 2f64.powf(-(self.range as f64) * self.holder_exponent)
    }

    /// `A(x_1, …, x_r)`; extra coordinates are ignored.
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(&x[..self.range])
    }

    /// `D_{j+1} A(x)` (zero beyond the range).
    pub fn partial(&self, j: usize, x: &[f64]) -> Result<f64> {
        let p = self
            .partials
            .as_ref()
            .ok_or_else(|| Error::Capability(format!("potential '{}' has no coordinate derivatives", self.name)))?;
        if j >= self.range {
            return Ok(0.0);
        }
        Ok(p(j, &x[..self.range]))
    }

    /// Values on all node tuples of `grid^r`, first coordinate most significant.
    pub fn tabulate(&self, grid: &Arc<GridSpec>) -> Vec<f64> {
        if let Some(t) = &self.table {
            if Arc::ptr_eq(t.grid(), grid) || t.grid().nodes() == grid.nodes() {
                return t.values().to_vec();
            }
        }
        let m = grid.size();
        let r = self.range;
        (0..tensor_len(m, r))
            .into_par_iter()
            .map_init(
                || (vec![0usize; r], vec![0.0; r]),
                |(idx, point), flat| {
                    unflatten(m, flat, idx);
                    for (p, &i) in point.iter_mut().zip(idx.iter()) {
                        *p = grid.nodes()[i];
                    }
                    self.eval(point)
                },
            )
            .collect()
    }

    /// Value at the compactified endpoint: exact for closed-form potentials,
    /// otherwise the outermost node of the default grid stands in for `±∞`.
    fn endpoint(&self, positive: bool) -> f64 {
        let e = if self.closed_form_limits {
            f64::INFINITY
        } else {
            outermost_default_node()
        };
        if positive {
            e
        } else {
            -e
        }
    }
}

fn scale_table(t: &GridFunction, beta: f64, c: f64) -> GridFunction {
    let values = t.values().iter().map(|v| beta * v + c).collect();
    GridFunction::new(Arc::clone(t.grid()), t.arity(), values).expect("same shape")
}

fn neighbour_holder_estimate(table: &GridFunction) -> f64 {
    let grid = table.grid();
    let m = grid.size();
    let r = table.arity();
    let mut idx = vec![0usize; r];
    let mut best = 0.0_f64;
    for flat in 0..table.values().len() {
        unflatten(m, flat, &mut idx);
        for j in 0..r {
            if idx[j] + 1 < m {
                let du = grid.compact_coords()[idx[j] + 1] - grid.compact_coords()[idx[j]];
                let d = du / 2f64.powi(j as i32 + 1);
                let step = tensor_len(m, r - 1 - j);
                let diff = (table.values()[flat + step] - table.values()[flat]).abs();
                best = best.max(diff / d);
            }
        }
    }
    best
}

fn outermost_default_node() -> f64 {
    let (x, _) = gauss_legendre(DEFAULT_GRID_SIZE);
    (FRAC_PI_2 * x[x.len() - 1]).tan()
}

fn sample_spin(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen_range(-0.5..0.5);
    (PI * u).tan()
}

/// `S_n A(word) = Σ_{k<n} A(word_{k+1}, …, word_{k+r})`.
pub fn ergodic_sum(p: &Potential, n: usize, word: &[f64]) -> Result<f64> {
    let needed = n + p.range() - 1;
    if n == 0 || word.len() < needed {
        return Err(Error::Argument(format!(
            "ergodic sum of order {n} for a range-{} potential needs {needed} coordinates, got {}",
            p.range(),
            word.len()
        )));
    }
    Ok((0..n).map(|k| p.eval(&word[k..k + p.range()])).sum())
}

/// Outcome of a sample-based structural check.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub passed: bool,
    /// Smallest margin found; the check passes iff it is at least `threshold`.
    pub worst_margin: f64,
    pub threshold: f64,
    pub samples: usize,
}

/// Samples contexts and compares `A` with one coordinate at `±∞` against the
/// same context with that coordinate at `z0`. Passes iff the endpoint value is
/// strictly smaller everywhere.
pub fn check_decay_condition(p: &Potential, z0: f64, sample_budget: usize) -> ConditionReport {
    let threshold = 1e-12;
    let r = p.range();
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
    let specials = [z0, p.endpoint(true), p.endpoint(false)];
    let mut worst = f64::INFINITY;
    let mut samples = 0;
    let mut context = vec![0.0; r];
    let budget = sample_budget.max(1);
    for s in 0..budget {
        for (k, c) in context.iter_mut().enumerate() {
            // The first contexts exhaust combinations of z0 and the endpoints.
            let code = s / 3usize.pow(k as u32);
            *c = if s < 3usize.pow(r as u32) {
                specials[code % 3]
            } else {
                sample_spin(&mut rng)
            };
        }
        for j in 0..r {
            let mut at_z0 = context.clone();
            at_z0[j] = z0;
            let reference = p.eval(&at_z0);
            for positive in [true, false] {
                let mut at_end = context.clone();
                at_end[j] = p.endpoint(positive);
                let margin = reference - p.eval(&at_end);
                worst = worst.min(margin);
                samples += 1;
            }
        }
    }
    ConditionReport {
        passed: worst >= threshold,
        worst_margin: worst,
        threshold,
        samples,
    }
}

/// `d/dt S_n A([x|t|y]_n)` with `t` at coordinate `n + 1`.
fn boundary_derivative(p: &Potential, x: &[f64], t: f64, tail: &[f64]) -> Result<f64> {
    let n = x.len();
    let r = p.range();
    let mut word = Vec::with_capacity(n + r);
    word.extend_from_slice(x);
    word.push(t);
    word.extend_from_slice(tail);
    let mut total = 0.0;
    for k in (n + 1).saturating_sub(r)..n {
        total += p.partial(n - k, &word[k..k + r])?;
    }
    Ok(total)
}

/// Samples ordered pairs `x ⪯ x'` and checks that
/// `x ↦ d/dt S_n A([x|t|y]_n)` does not decrease from `x` to `x'`.
pub fn check_class_e(p: &Potential, n: usize, sample_budget: usize) -> Result<ConditionReport> {
    if !p.has_partials() {
        return Err(Error::Capability(format!(
            "class check needs coordinate derivatives of '{}'",
            p.name()
        )));
    }
    if n == 0 {
        return Err(Error::Argument("volume must be at least 1".into()));
    }
    let threshold = -1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED ^ n as u64);
    let tail_len = p.range().saturating_sub(1);
    let mut worst = f64::INFINITY;
    for _ in 0..sample_budget.max(1) {
        let x: Vec<f64> = (0..n).map(|_| sample_spin(&mut rng)).collect();
        let x_up: Vec<f64> = x
            .iter()
            .map(|&a| {
                let u = a.atan() / PI;
                let lift: f64 = rng.gen_range(0.0..(0.5 - u));
                (PI * (u + lift)).tan()
            })
            .collect();
        let t = sample_spin(&mut rng);
        let tail: Vec<f64> = (0..tail_len).map(|_| sample_spin(&mut rng)).collect();
        let lo = boundary_derivative(p, &x, t, &tail)?;
        let hi = boundary_derivative(p, &x_up, t, &tail)?;
        worst = worst.min(hi - lo);
    }
    Ok(ConditionReport {
        passed: worst >= threshold,
        worst_margin: worst,
        threshold,
        samples: sample_budget.max(1),
    })
}

/// Largest sampled ratio `|A(x) - A(y)| / d(x, y)^α`, a lower bound for the
/// Hölder constant. Half of the pairs differ in a single coordinate.
pub fn estimate_holder(p: &Potential, pairs: usize) -> f64 {
    let r = p.range();
    let alpha = p.holder_exponent();
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED.rotate_left(7));
    let mut best = 0.0_f64;
    for i in 0..pairs.max(1) {
        let x: Vec<f64> = (0..r).map(|_| sample_spin(&mut rng)).collect();
        let mut y = x.clone();
        if i % 2 == 0 {
            for v in &mut y {
                *v = sample_spin(&mut rng);
            }
        } else {
            let j = rng.gen_range(0..r);
            y[j] = sample_spin(&mut rng);
        }
        let d = metric_distance(&x, &y).expect("equal lengths");
        if d > 0.0 {
            best = best.max((p.eval(&x) - p.eval(&y)).abs() / d.powf(alpha));
        }
    }
    best
}
