mod commands;
mod config;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use thermoform::Error;

use config::RunConfig;
use record::Verdict;

const DEFAULT_OUT: &str = "thermoform-out";

#[derive(Debug, Parser)]
#[command(name = "thermoform", version, about = "Thermodynamic formalism on the real line: transfer operators, Gibbs measures, specifications")]
struct Cli {
    /// TOML run configuration; flags and environment override it.
    #[arg(long, global = true, env = "THERMOFORM_CONFIG")]
    config: Option<PathBuf>,

    /// Directory for CSV artifacts.
    #[arg(long, global = true, env = "THERMOFORM_OUT")]
    out: Option<PathBuf>,

    /// Sampler seed.
    #[arg(long, global = true, env = "THERMOFORM_SEED")]
    seed: Option<u64>,

    /// Single-threaded run with no wall time in the artifacts.
    #[arg(long, global = true, env = "THERMOFORM_DETERMINISTIC")]
    deterministic: bool,

    #[arg(long, global = true, env = "THERMOFORM_GRID_SIZE")]
    grid_size: Option<usize>,

    /// Power-iteration stopping tolerance.
    #[arg(long, global = true, env = "THERMOFORM_TOL")]
    tol: Option<f64>,

    /// Potential id (P0, P1, P2, P3, Pc).
    #[arg(long, global = true, env = "THERMOFORM_POTENTIAL")]
    potential: Option<String>,

    /// Potential parameter; repeat for several.
    #[arg(
        long = "param",
        global = true,
        env = "THERMOFORM_PARAMS",
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    params: Vec<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalue, eigenfunction, eigenmeasure and Gibbs measure.
    Solve,
    /// Gibbs measure as a stationary Markov chain and back.
    Markov,
    /// Beta sweep toward the max-plus value.
    Zerotemp {
        /// Repeat at twice the grid size and check the drift.
        #[arg(long)]
        grid_doubling: bool,
    },
    /// Involution kernel and bilateral normalization.
    Involution,
    /// Compatibility, eta decomposition, monotone map and thermodynamic limit.
    SpecCheck,
    /// Positive correlations of increasing functions.
    Fkg,
    /// DLR equations for the eigenmeasure and the Gibbs measure.
    Dlr,
}

fn effective_config(cli: &Cli) -> thermoform::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(id) = &cli.potential {
        cfg.potential.id = id.clone();
    }
    if !cli.params.is_empty() {
        cfg.potential.params = cli.params.clone();
    }
    if let Some(m) = cli.grid_size {
        cfg.grid.size = m;
    }
    if let Some(t) = cli.tol {
        cfg.tolerances.solver = t;
    }
    if let Some(s) = cli.seed {
        cfg.mc.seed = s;
    }
    cfg.deterministic |= cli.deterministic;
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match effective_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("thermoform: {e}");
            return ExitCode::from(2);
        }
    };
    if cfg.deterministic {
        // Fixed reduction order: parallel sums are only reproducible on one thread.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
    }
    let start = Instant::now();
    let result = match &cli.command {
        Command::Solve => commands::solve(&cfg),
        Command::Markov => commands::markov(&cfg),
        Command::Zerotemp { grid_doubling } => commands::zerotemp(&cfg, *grid_doubling),
        Command::Involution => commands::involution(&cfg),
        Command::SpecCheck => commands::spec_check(&cfg),
        Command::Fkg => commands::fkg(&cfg),
        Command::Dlr => commands::dlr(&cfg),
    };
    let mut rec = match result {
        Ok(r) => r,
        Err(e @ (Error::Config(_) | Error::Argument(_) | Error::Capability(_) | Error::Budget { .. })) => {
            eprintln!("thermoform: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            // Computation started and did not finish: a failure, not a usage error.
            eprintln!("thermoform: {e}");
            return ExitCode::from(1);
        }
    };
    if !cfg.deterministic {
        rec.wall_time = Some(start.elapsed().as_secs_f64());
    }
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    if let Err(e) = rec.write(&dir) {
        eprintln!("thermoform: cannot write artifacts to {}: {e}", dir.display());
        return ExitCode::from(1);
    }
    for c in rec.checks.iter().filter(|c| c.verdict == Verdict::Fail) {
        eprintln!("  fail {} [{}]: {:e} vs {:e}", c.name, c.parameters, c.value, c.threshold);
    }
    println!("{} -> {}", rec.summary(), dir.display());
    if rec.failures() > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
