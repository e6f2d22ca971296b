//! Compactified quadrature over the single-spin alphabet ℝ.
//!
//! Spins are integrated in the compact coordinate `u = arctan(a) / π`, which
//! maps ℝ onto `(-1/2, 1/2)`. A Gauss–Legendre rule in `u` is pulled back to
//! nodes `a_i = tan(π u_i)`; the a priori density and the Jacobian
//! `π sec²(π u)` are folded into the weights, so `Σ w_i g(a_i)` approximates
//! `∫ g dν` with `ν = f da`.

use std::f64::consts::PI;
use std::fmt;
use std::io;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Default number of quadrature nodes.
pub const DEFAULT_GRID_SIZE: usize = 200;

/// Bound on the raw quadrature mass defect `|Σ w_i - 1|` at the default size.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;

/// Spins farther out than this may have a density that underflows; their
/// weight is floored at the smallest positive normal number.
const UNDERFLOW_RADIUS: f64 = 10.0;

/// A strictly positive probability density on ℝ.
#[derive(Clone)]
pub struct AprioriDensity {
    name: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl AprioriDensity {
    pub fn new(name: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    /// `f(a) = (2π)^{-1/2} exp(-a²/2)`.
    pub fn standard_gaussian() -> Self {
        Self::new("gaussian", |a| (-0.5 * a * a).exp() / (2.0 * PI).sqrt())
    }

    /// Standard Cauchy density. It is uniform in the compact coordinate.
    pub fn cauchy() -> Self {
        Self::new("cauchy", |a| 1.0 / (PI * (1.0 + a * a)))
    }

    /// Looks up a built-in density by identifier.
    pub fn by_name(id: &str) -> Result<Self> {
        match id.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Self::standard_gaussian()),
            "cauchy" => Ok(Self::cauchy()),
            other => Err(Error::Config(format!("unknown a priori density '{other}'"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, a: f64) -> f64 {
        (self.eval)(a)
    }
}

impl fmt::Debug for AprioriDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AprioriDensity").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureScheme {
    /// Gauss–Legendre in `u = arctan(a)/π` on `(-1/2, 1/2)`.
    CompactifiedGaussLegendre,
}

impl QuadratureScheme {
    pub fn id(&self) -> &'static str {
        match self {
            QuadratureScheme::CompactifiedGaussLegendre => "compactified-gl",
        }
    }
}

/// Quadrature nodes and weights for the a priori measure.
///
/// Weights are rescaled to sum to exactly one so that the discrete a priori
/// measure is a probability vector; the pre-rescaling mass is kept in
/// [`GridSpec::raw_mass`] as the quadrature error diagnostic.
#[derive(Debug, Clone)]
pub struct GridSpec {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    compact_coords: Vec<f64>,
    raw_mass: f64,
    density: String,
    scheme: QuadratureScheme,
}

impl GridSpec {
    pub fn build(density: &AprioriDensity, size: usize, scheme: QuadratureScheme) -> Result<Self> {
        if size < 2 {
            return Err(Error::Config(format!("grid size must be at least 2, got {size}")));
        }
        let (gl_nodes, gl_weights) = gauss_legendre(size);
        let mut nodes = Vec::with_capacity(size);
        let mut weights = Vec::with_capacity(size);
        let mut compact_coords = Vec::with_capacity(size);
        for (&x, &glw) in gl_nodes.iter().zip(&gl_weights) {
            let u = 0.5 * x;
            let a = (PI * u).tan();
            let fa = density.eval(a);
            // Far tails may underflow to zero; anywhere else a zero is an error.
            let underflow = fa == 0.0 && a.abs() > UNDERFLOW_RADIUS;
            if !(fa > 0.0 && fa.is_finite()) && !underflow {
                return Err(Error::Config(format!(
                    "density '{}' is not strictly positive at {a} (value {fa})",
                    density.name()
                )));
            }
            let sec = 1.0 / (PI * u).cos();
            nodes.push(a);
            weights.push((fa * PI * sec * sec * 0.5 * glw).max(f64::MIN_POSITIVE));
            compact_coords.push(a.atan() / PI);
        }
        let raw_mass: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= raw_mass;
        }
        Ok(Self {
            nodes,
            weights,
            compact_coords,
            raw_mass,
            density: density.name().to_string(),
            scheme,
        })
    }

    /// Compactified Gauss–Legendre grid for the standard Gaussian a priori density.
    pub fn gaussian(size: usize) -> Result<Self> {
        Self::build(&AprioriDensity::standard_gaussian(), size, QuadratureScheme::CompactifiedGaussLegendre)
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn compact_coords(&self) -> &[f64] {
        &self.compact_coords
    }

    /// Quadrature mass `Σ w_i` before normalization.
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    pub fn density_name(&self) -> &str {
        &self.density
    }

    pub fn scheme(&self) -> QuadratureScheme {
        self.scheme
    }

    /// `Σ w_i g(a_i)`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&a, &w)| w * g(a)).sum()
    }

    /// Index of the node closest to `a` in the compact coordinate.
    pub fn nearest_index(&self, a: f64) -> usize {
        let u = a.atan() / PI;
        let pos = self.compact_coords.partition_point(|&c| c < u);
        if pos == 0 {
            0
        } else if pos == self.size() || (u - self.compact_coords[pos - 1]) <= (self.compact_coords[pos] - u) {
            pos - 1
        } else {
            pos
        }
    }

    /// Index of a value that is exactly a node, if it is one.
    pub fn node_index(&self, a: f64) -> Option<usize> {
        self.nodes
            .binary_search_by(|n| n.partial_cmp(&a).unwrap_or(std::cmp::Ordering::Less))
            .ok()
    }

    /// Writes `index,node,weight,compact_coord` rows.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["index", "node", "weight", "compact_coord"])?;
        for i in 0..self.size() {
            out.write_record(&[
                i.to_string(),
                self.nodes[i].to_string(),
                self.weights[i].to_string(),
                self.compact_coords[i].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`.
///
/// Newton iteration on `P_n` from the Tricomi initial guess. Only the upper
/// half is solved; the lower half is mirrored so the rule is exactly symmetric.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // i-th largest root
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Distance between two sequences that agree beyond the supplied prefixes:
/// `Σ_n |arctan x_n - arctan y_n| / (π 2^n)`. Infinite entries are allowed.
pub fn metric_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!(
            "prefix lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let mut scale = 0.5 / PI;
    let mut d = 0.0;
    for (a, b) in x.iter().zip(y) {
        d += scale * (a.atan() - b.atan()).abs();
        scale *= 0.5;
    }
    Ok(d)
}

/// A real function of `arity` leading spin coordinates, tabulated on the grid.
///
/// Values are stored row-major with the first coordinate most significant.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<GridSpec>,
    arity: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<GridSpec>, arity: usize, values: Vec<f64>) -> Result<Self> {
        let expected = tensor_len(grid.size(), arity);
        if values.len() != expected {
            return Err(Error::Argument(format!(
                "arity {arity} on a {}-node grid needs {expected} values, got {}",
                grid.size(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("grid function values must be finite".into()));
        }
        Ok(Self { grid, arity, values })
    }

    pub fn constant(grid: Arc<GridSpec>, arity: usize, c: f64) -> Self {
        let len = tensor_len(grid.size(), arity);
        Self {
            grid,
            arity,
            values: vec![c; len],
        }
    }

    /// Samples `f` at every node tuple.
    pub fn from_fn(grid: Arc<GridSpec>, arity: usize, f: impl Fn(&[f64]) -> f64) -> Self {
        let m = grid.size();
        let len = tensor_len(m, arity);
        let mut point = vec![0.0; arity];
        let mut values = Vec::with_capacity(len);
        for idx in 0..len {
            let mut rem = idx;
            for j in (0..arity).rev() {
                point[j] = grid.nodes()[rem % m];
                rem /= m;
            }
            values.push(f(&point));
        }
        Self { grid, arity, values }
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at_indices(&self, indices: &[usize]) -> f64 {
        self.values[flat_index(self.grid.size(), indices)]
    }

    /// `α·self + β·other`.
    pub fn linear_combination(&self, alpha: f64, other: &GridFunction, beta: f64) -> Result<GridFunction> {
        if other.arity != self.arity || other.grid.size() != self.grid.size() {
            return Err(Error::Argument("grid functions have different shapes".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(GridFunction {
            grid: Arc::clone(&self.grid),
            arity: self.arity,
            values,
        })
    }

    /// Multilinear interpolation in the compact coordinates, clamped to the
    /// outermost node values beyond the grid.
    pub fn interpolate(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.arity {
            return Err(Error::Argument(format!(
                "point has {} coordinates, function arity is {}",
                point.len(),
                self.arity
            )));
        }
        if self.arity == 0 {
            return Ok(self.values[0]);
        }
        let m = self.grid.size();
        let coords = self.grid.compact_coords();
        let mut brackets = Vec::with_capacity(self.arity);
        for &p in point {
            if p.is_nan() {
                return Err(Error::Argument("cannot interpolate at NaN".into()));
            }
            let u = p.atan() / PI;
            let pos = coords.partition_point(|&c| c <= u);
            let bracket = if pos == 0 {
                (0, 0, 0.0)
            } else if pos == m {
                (m - 1, m - 1, 0.0)
            } else {
                let lo = pos - 1;
                let t = (u - coords[lo]) / (coords[pos] - coords[lo]);
                (lo, pos, t)
            };
            brackets.push(bracket);
        }
        let mut acc = 0.0;
        let mut idx = vec![0usize; self.arity];
        for corner in 0..(1usize << self.arity) {
            let mut weight = 1.0;
            for (j, &(lo, hi, t)) in brackets.iter().enumerate() {
                if corner >> j & 1 == 1 {
                    idx[j] = hi;
                    weight *= t;
                } else {
                    idx[j] = lo;
                    weight *= 1.0 - t;
                }
            }
            if weight != 0.0 {
                acc += weight * self.at_indices(&idx);
            }
        }
        Ok(acc)
    }
}

/// A non-negative weight tensor over node tuples (a discrete measure on
/// cylinders of length `arity`).
#[derive(Debug, Clone)]
pub struct GridMeasure {
    grid: Arc<GridSpec>,
    arity: usize,
    weights: Vec<f64>,
}

impl GridMeasure {
    pub fn new(grid: Arc<GridSpec>, arity: usize, weights: Vec<f64>) -> Result<Self> {
        let expected = tensor_len(grid.size(), arity);
        if weights.len() != expected {
            return Err(Error::Argument(format!(
                "measure of arity {arity} needs {expected} weights, got {}",
                weights.len()
            )));
        }
        Ok(Self { grid, arity, weights })
    }

    /// Product of the a priori weights over `arity` coordinates.
    pub fn product(grid: Arc<GridSpec>, arity: usize) -> Self {
        let w = grid.weights().to_vec();
        let m = grid.size();
        let weights = (0..tensor_len(m, arity))
            .map(|idx| {
                let mut rem = idx;
                let mut p = 1.0;
                for _ in 0..arity {
                    p *= w[rem % m];
                    rem /= m;
                }
                p
            })
            .collect();
        Self { grid, arity, weights }
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Whether weights are non-negative and sum to one within `tol`.
    pub fn is_probability(&self, tol: f64) -> bool {
        self.weights.iter().all(|&w| w >= 0.0) && (self.total_mass() - 1.0).abs() <= tol
    }

    /// Marginal on the leading `arity - 1` coordinates.
    pub fn drop_last(&self) -> GridMeasure {
        let m = self.grid.size();
        let weights = self.weights.chunks(m).map(|c| c.iter().sum()).collect();
        GridMeasure {
            grid: Arc::clone(&self.grid),
            arity: self.arity.saturating_sub(1),
            weights,
        }
    }

    /// Marginal on the trailing `arity - 1` coordinates.
    pub fn drop_first(&self) -> GridMeasure {
        let m = self.grid.size();
        let inner = tensor_len(m, self.arity.saturating_sub(1));
        let mut weights = vec![0.0; inner];
        for (idx, &w) in self.weights.iter().enumerate() {
            weights[idx % inner] += w;
        }
        GridMeasure {
            grid: Arc::clone(&self.grid),
            arity: self.arity.saturating_sub(1),
            weights,
        }
    }

    /// `Σ μ(x) g(x_1, …, x_j)` for a grid function depending on the first
    /// `j ≤ arity` coordinates.
    pub fn integrate(&self, g: &GridFunction) -> Result<f64> {
        if g.arity() > self.arity {
            return Err(Error::Argument(format!(
                "cannot integrate an arity-{} function against an arity-{} measure",
                g.arity(),
                self.arity
            )));
        }
        let block = tensor_len(self.grid.size(), self.arity - g.arity());
        Ok(self
            .weights
            .iter()
            .enumerate()
            .map(|(idx, w)| w * g.values()[idx / block])
            .sum())
    }

    /// Largest absolute weight difference to another measure of the same shape.
    pub fn max_abs_diff(&self, other: &GridMeasure) -> Result<f64> {
        if self.arity != other.arity || self.weights.len() != other.weights.len() {
            return Err(Error::Argument("measures have different shapes".into()));
        }
        Ok(self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

pub(crate) fn tensor_len(m: usize, arity: usize) -> usize {
    m.pow(arity as u32)
}

pub(crate) fn flat_index(m: usize, indices: &[usize]) -> usize {
    indices.iter().fold(0, |acc, &i| acc * m + i)
}

/// Values of a function of the leading `from` coordinates, listed on `grid^to`.
pub(crate) fn expand_leading(m: usize, values: &[f64], from: usize, to: usize) -> Vec<f64> {
    debug_assert!(from <= to);
    let block = tensor_len(m, to - from);
    (0..tensor_len(m, to)).map(|idx| values[idx / block]).collect()
}

/// Splits a flat index into per-coordinate node indices.
pub(crate) fn unflatten(m: usize, mut idx: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = idx % m;
        idx /= m;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_legendre_is_exact_for_low_degree_polynomials() {
        let (x, w) = gauss_legendre(7);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert_abs_diff_eq!(integral, 2.0 / 13.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
        for (a, b) in x.iter().zip(x.iter().rev()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn gaussian_grid_mass_is_one() {
        let grid = GridSpec::gaussian(200).unwrap();
        assert_abs_diff_eq!(grid.raw_mass(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(grid.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn smallest_grid_is_valid() {
        let grid = GridSpec::gaussian(2).unwrap();
        assert_eq!(grid.size(), 2);
        assert!(grid.weights().iter().all(|&w| w > 0.0));
        assert!(grid.nodes()[0] < grid.nodes()[1]);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(matches!(GridSpec::gaussian(1), Err(Error::Config(_))));
        let bad = AprioriDensity::new("bad", |a| if a > 0.0 { 1.0 } else { 0.0 });
        assert!(matches!(
            GridSpec::build(&bad, 10, QuadratureScheme::CompactifiedGaussLegendre),
            Err(Error::Config(_))
        ));
        assert!(AprioriDensity::by_name("uniform").is_err());
    }

    #[test]
    fn cauchy_weights_are_gauss_legendre_weights() {
        let grid = GridSpec::build(&AprioriDensity::cauchy(), 16, QuadratureScheme::CompactifiedGaussLegendre).unwrap();
        let (_, w) = gauss_legendre(16);
        for (a, b) in grid.weights().iter().zip(&w) {
            assert_abs_diff_eq!(*a, b / 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn metric_examples() {
        assert_eq!(metric_distance(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(metric_distance(&[0.0], &[f64::INFINITY]).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(metric_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 3.0 / 16.0, epsilon = 1e-15);
        assert!(matches!(metric_distance(&[1.0], &[1.0, 2.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_clamps() {
        let grid = Arc::new(GridSpec::gaussian(12).unwrap());
        let g = GridFunction::from_fn(Arc::clone(&grid), 2, |p| p[0] * 3.0 - p[1].atan());
        let a = grid.nodes()[4];
        let b = grid.nodes()[9];
        assert_eq!(g.interpolate(&[a, b]).unwrap(), g.at_indices(&[4, 9]));
        let last = grid.nodes()[11];
        assert_eq!(
            g.interpolate(&[1e300, b]).unwrap(),
            g.interpolate(&[last, b]).unwrap()
        );
        assert_eq!(
            g.interpolate(&[f64::NEG_INFINITY, b]).unwrap(),
            g.at_indices(&[0, 9])
        );
        assert!(g.interpolate(&[a]).is_err());
        let c = GridFunction::constant(grid, 3, 2.5);
        assert_abs_diff_eq!(c.interpolate(&[0.1, -7.0, 40.0]).unwrap(), 2.5, epsilon = 1e-15);
    }

    #[test]
    fn measure_marginals() {
        let grid = Arc::new(GridSpec::gaussian(5).unwrap());
        let prod = GridMeasure::product(Arc::clone(&grid), 2);
        assert_abs_diff_eq!(prod.total_mass(), 1.0, epsilon = 1e-14);
        let first = prod.drop_last();
        let second = prod.drop_first();
        for i in 0..5 {
            assert_abs_diff_eq!(first.weights()[i], grid.weights()[i], epsilon = 1e-15);
            assert_abs_diff_eq!(second.weights()[i], grid.weights()[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn grid_csv_has_header_and_rows() {
        let grid = GridSpec::gaussian(3).unwrap();
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "index,node,weight,compact_coord");
        assert_eq!(lines.len(), 4);
    }
}
