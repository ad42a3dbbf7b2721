use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pcuq::cli::{Runner, StudyConfig};

/// Polynomial chaos surrogate toolkit: build spectral surrogates from model
/// runs at quadrature nodes, then analyze distributions, sensitivities,
/// exceedance risk, and chance-constrained designs.
#[derive(Parser)]
#[command(name = "pcuq", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Study configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts and run summaries.
    #[arg(long)]
    out: PathBuf,
    /// Override the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured Monte Carlo sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Override the configured basis order p.
    #[arg(long)]
    order: Option<usize>,
    /// Override the configured quadrature points per dimension.
    #[arg(long)]
    nq: Option<usize>,
    /// Override the configured log-transform flag.
    #[arg(long)]
    log_transform: Option<bool>,
}

impl Common {
    fn runner(&self) -> Result<Runner, pcuq::Error> {
        let mut config = StudyConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(samples) = self.samples {
            config.samples = samples;
        }
        if let Some(order) = self.order {
            config.order = order;
        }
        if let Some(nq) = self.nq {
            config.nq = nq;
        }
        if let Some(log) = self.log_transform {
            config.log_transform = log;
        }
        Runner::new(config, self.out.clone())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the quadrature node table (nodes.csv) for the external-solver
    /// protocol, plus the resolved parameter spec.
    GenNodes {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the configured built-in model at the grid nodes, writing
    /// results.csv (and QoIs with --qois).
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Also extract per-realization QoIs (arrival time, peak, peak time).
        #[arg(long)]
        qois: bool,
    },
    /// Project a results file onto the PC basis, writing expansion.json.
    Project {
        #[command(flatten)]
        common: Common,
        /// Results file produced by `evaluate` or an external solver.
        #[arg(long)]
        results: PathBuf,
    },
    /// Cross-validate an expansion against results on a second grid.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Expansion archive to validate.
        #[arg(long)]
        expansion: PathBuf,
        /// Results evaluated on the validation grid.
        #[arg(long)]
        validation_results: PathBuf,
        /// Points per dimension of the validation grid.
        #[arg(long)]
        validation_nq: usize,
    },
    /// Mean and variance per output from the expansion coefficients.
    Moments {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        expansion: PathBuf,
    },
    /// Kernel density estimates of selected outputs.
    Pdf {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        expansion: PathBuf,
        /// Output labels to estimate (default: all).
        #[arg(long, value_delimiter = ',')]
        labels: Option<Vec<String>>,
    },
    /// Percentile bands over all outputs.
    Percentiles {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        expansion: PathBuf,
        /// Quantiles in (0,1).
        #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.25, 0.5, 0.75, 0.95])]
        quantiles: Vec<f64>,
    },
    /// Variance-based sensitivity indices per output.
    Sobol {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        expansion: PathBuf,
    },
    /// Exceedance probability curves, one per threshold.
    Risk {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        expansion: PathBuf,
        /// Threshold(s) defining the exceedance event.
        #[arg(long = "threshold", required = true)]
        thresholds: Vec<f64>,
    },
    /// Failure probability at one pinned design value.
    FailureProb {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        expansion: PathBuf,
        /// 1-based germ dimension of the design variable.
        #[arg(long)]
        design_dim: usize,
        /// Failure threshold on the surrogate output.
        #[arg(long)]
        threshold: f64,
        /// Design value (canonical-map units of that parameter).
        #[arg(long)]
        design_value: f64,
    },
    /// Chance-constrained design search: the largest design value keeping
    /// failure probability below the target.
    DesignOpt {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        expansion: PathBuf,
        /// 1-based germ dimension of the design variable.
        #[arg(long)]
        design_dim: usize,
        /// Failure threshold on the surrogate output.
        #[arg(long)]
        threshold: f64,
        /// Target failure probability.
        #[arg(long, default_value_t = 0.05)]
        target_prob: f64,
        /// Lower end of the search interval (must be feasible).
        #[arg(long)]
        lo: f64,
        /// Upper end of the search interval (must be infeasible).
        #[arg(long)]
        hi: f64,
        /// Bisection tolerance on the design value.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
}

fn run(cli: Cli) -> Result<(), pcuq::Error> {
    match cli.command {
        Command::GenNodes { common } => common.runner()?.gen_nodes(),
        Command::Evaluate { common, qois } => common.runner()?.evaluate(qois),
        Command::Project { common, results } => common.runner()?.project(&results),
        Command::Validate {
            common,
            expansion,
            validation_results,
            validation_nq,
        } => common
            .runner()?
            .validate(&expansion, &validation_results, validation_nq),
        Command::Moments { common, expansion } => common.runner()?.moments(&expansion),
        Command::Pdf {
            common,
            expansion,
            labels,
        } => common.runner()?.pdf(&expansion, labels),
        Command::Percentiles {
            common,
            expansion,
            quantiles,
        } => common.runner()?.percentiles(&expansion, &quantiles),
        Command::Sobol { common, expansion } => common.runner()?.sobol(&expansion),
        Command::Risk {
            common,
            expansion,
            thresholds,
        } => common.runner()?.risk(&expansion, &thresholds),
        Command::FailureProb {
            common,
            expansion,
            design_dim,
            threshold,
            design_value,
        } => common
            .runner()?
            .failure_prob(&expansion, design_dim, threshold, design_value),
        Command::DesignOpt {
            common,
            expansion,
            design_dim,
            threshold,
            target_prob,
            lo,
            hi,
            tol,
        } => common.runner()?.design_opt(
            &expansion,
            design_dim,
            threshold,
            target_prob,
            lo,
            hi,
            tol,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
