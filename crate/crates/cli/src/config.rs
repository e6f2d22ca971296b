use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thermoform::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    pub id: String,
    pub params: Vec<f64>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            id: "P2".into(),
            params: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub density: String,
    pub size: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            density: "gaussian".into(),
            size: thermoform::grid::DEFAULT_GRID_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Power-iteration stopping tolerance.
    pub solver: f64,
    pub max_iter: usize,
    /// Identity residuals of the solver, Markov and involution checks.
    pub residual: f64,
    /// Specification residuals (compatibility, η, DLR).
    pub spec: f64,
    /// Statistical verdicts pass within this many standard errors.
    pub sigmas: f64,
    /// Allowed `|P(βA)/β − m|` at the largest β.
    pub zero_temperature: f64,
    /// Allowed scalar drift under grid doubling.
    pub drift: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solver: 1e-12,
            max_iter: 20_000,
            residual: 1e-8,
            spec: 1e-6,
            sigmas: 3.0,
            zero_temperature: 0.05,
            drift: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroTempConfig {
    pub betas: Vec<f64>,
}

impl Default for ZeroTempConfig {
    fn default() -> Self {
        Self {
            betas: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpecConfig {
    /// Volumes for DLR checks and thermodynamic-limit probes.
    pub volumes: Vec<usize>,
    /// `(n, r)` pairs for the compatibility check.
    pub compatibility: Vec<[usize; 2]>,
    /// Boundary prefix, extended periodically.
    pub boundary: Vec<f64>,
    pub budget: u64,
}

impl Default for SpecConfig {
    fn default() -> Self {
        Self {
            volumes: vec![1, 2],
            compatibility: vec![[1, 1], [1, 2], [2, 1]],
            boundary: vec![0.5],
            budget: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub volumes: Vec<usize>,
    pub sweeps: usize,
    pub burn_in: Option<usize>,
    pub seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            volumes: vec![2, 5, 10],
            sweeps: 100_000,
            burn_in: None,
            seed: 0,
        }
    }
}

/// Effective run configuration: defaults, then the config file, then
/// environment and flags.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    pub grid: GridConfig,
    pub tolerances: Tolerances,
    pub zerotemp: ZeroTempConfig,
    pub spec: SpecConfig,
    pub mc: MonteCarloConfig,
    pub deterministic: bool,
    /// Where artifacts go; not part of the digest.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        let positive = [
            ("solver", t.solver),
            ("residual", t.residual),
            ("spec", t.spec),
            ("sigmas", t.sigmas),
            ("zero_temperature", t.zero_temperature),
            ("drift", t.drift),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("tolerance '{name}' must be positive, got {v}")));
            }
        }
        if t.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        if self.grid.size < 2 {
            return Err(Error::Config(format!("grid size must be at least 2, got {}", self.grid.size)));
        }
        if self.zerotemp.betas.is_empty() || self.zerotemp.betas.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::Config("betas must be a non-empty list of positive numbers".into()));
        }
        if self.spec.volumes.iter().chain(&self.mc.volumes).any(|n| *n == 0) {
            return Err(Error::Config("volumes must be at least 1".into()));
        }
        if self.spec.boundary.is_empty() || self.spec.boundary.iter().any(|v| v.is_nan()) {
            return Err(Error::Config("boundary must be a non-empty list of numbers".into()));
        }
        if self.mc.sweeps == 0 {
            return Err(Error::Config("sweeps must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form (keys sorted, output directory excluded).
    pub fn digest(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        format!("{:x}", Sha256::digest(canonical.as_bytes()))
    }
}
