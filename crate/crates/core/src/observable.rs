use std::fmt;
use std::sync::Arc;

use crate::potential::g;

type ObsFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A real function of the leading `support` coordinates of a spin sequence.
#[derive(Clone)]
pub struct Observable {
    name: String,
    support: usize,
    f: Arc<ObsFn>,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .field("support", &self.support)
            .finish()
    }
}

impl Observable {
    pub fn new(name: impl Into<String>, support: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            support,
            f: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), 0, move |_| c)
    }

    /// `g(x_i)` with `g = (2/π) arctan`, for 1-based site `i`.
    pub fn g_at(i: usize) -> Self {
        assert!(i >= 1, "sites are 1-based");
        Self::new(format!("g(x{i})"), i, move |x| g(x[i - 1]))
    }

    /// `arctan(x_i)` for 1-based site `i`.
    pub fn atan_at(i: usize) -> Self {
        assert!(i >= 1, "sites are 1-based");
        Self::new(format!("atan(x{i})"), i, move |x| x[i - 1].atan())
    }

    /// `g(x_i) g(x_j)`.
    pub fn g_product(i: usize, j: usize) -> Self {
        assert!(i >= 1 && j >= 1, "sites are 1-based");
        Self::new(format!("g(x{i})g(x{j})"), i.max(j), move |x| g(x[i - 1]) * g(x[j - 1]))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> usize {
        self.support
    }

    /// Evaluates on a word that covers at least `support` coordinates.
    pub fn eval(&self, word: &[f64]) -> f64 {
        (self.f)(word)
    }
}
