//! Thermodynamic formalism for shifts on real-valued spin sequences, at desk
//! scale: Ruelle operators on a compactified quadrature grid, Gibbs and
//! conformal measures, entropy and pressure, zero-temperature limits,
//! involution kernels, Markov models, and finite-volume specifications with
//! DLR and FKG checks.

pub mod error;
pub mod grid;
pub mod involution;
pub mod markov;
pub mod observable;
pub mod potential;
pub mod sampler;
pub mod specification;
pub mod stats;
pub mod transfer;
pub mod zero_temp;

pub use error::{Error, Result};
pub use grid::{metric_distance, AprioriDensity, GridFunction, GridMeasure, GridSpec, QuadratureScheme};
pub use observable::Observable;
pub use potential::{check_class_e, check_decay_condition, ergodic_sum, estimate_holder, ConditionReport, Potential};
pub use transfer::{eigenvalue_bound_check, solve_rpf, RpfSolution, SolverOptions, TransferOperator};

pub use involution::{bilateral_normalize, BiSequence, BilateralKernel, InvolutionKernel};
pub use markov::{gibbs_to_markov, markov_to_potential, MarkovModel, MarkovResiduals};
pub use sampler::{fkg_exact, fkg_test, gibbs_sample, run_chain, ChainOptions, ChainOutput, FkgReport, SamplerState};
pub use specification::{
    compatibility_check, dlr_check, eta_decomposition_check, monotone_map_check, relative_residual, thermo_limit_probe,
    DlrResiduals, EtaReport, ExactBudget, LimitPoint, MonotoneReport, SpecKernel, SpecMode, ThermoLimitReport,
};
pub use stats::batch_means;
pub use zero_temp::{
    beta_sweep, ground_state_diagnostic, max_mean_cycle, solve_max_plus, BetaSweep, GroundStateReport, SubActionSolution,
};
