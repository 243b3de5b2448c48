//! Command-line driver for `riesz-dre`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

pub mod config;

mod ate;
mod dre;
mod equivalence;
mod learners;
mod output;
mod riesz;
mod simulate;
mod synth;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use output::OracleFile;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<riesz_dre::error::Error> for CliError {
    fn from(e: riesz_dre::error::Error) -> Self {
        if e.is_usage_error() {
            CliError::Usage(e.to_string())
        } else if e.is_data_error() {
            CliError::Data(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rdre", version, about = "Density-ratio and Riesz representer estimation, debiased ATE")]
pub struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Flat `key = value` file; keys are long flag names.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output path (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// Only print errors.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic data.
    Synth {
        #[command(subcommand)]
        cmd: SynthCmd,
    },
    /// Density-ratio fitting and evaluation.
    Dre {
        #[command(subcommand)]
        cmd: DreCmd,
    },
    /// Riesz representer fitting.
    Riesz {
        #[command(subcommand)]
        cmd: RieszCmd,
    },
    /// Treatment-effect estimation.
    Ate {
        #[command(subcommand)]
        cmd: AteCmd,
    },
    /// Compare the Riesz regression and paired LSIF objectives on random models.
    EquivalenceCheck(EquivalenceArgs),
    /// Monte Carlo study, long-format CSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Subcommand)]
pub enum SynthCmd {
    /// Draw a dataset from a shipped design.
    Gen(SynthGenArgs),
}

#[derive(Debug, Subcommand)]
pub enum DreCmd {
    /// Fit a density-ratio model to a two-sample CSV.
    Fit(DreFitArgs),
    /// Evaluate a fitted ratio model.
    Eval(DreEvalArgs),
}

#[derive(Debug, Subcommand)]
pub enum RieszCmd {
    /// Fit a Riesz representer to an observational CSV.
    Fit(RieszFitArgs),
}

#[derive(Debug, Subcommand)]
pub enum AteCmd {
    /// Cross-fitted ATE estimate.
    Estimate(AteArgs),
}

#[derive(Debug, Args)]
pub struct SynthGenArgs {
    /// default-confounded | randomized | heterogeneous | gaussian-small-shift | gaussian-large-gap
    #[arg(long)]
    pub design: Option<String>,
    /// Rows (observational) or rows per sample (two-sample).
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub n_de: Option<String>,
    #[arg(long)]
    pub n_nu: Option<String>,
    /// Propensity coefficients, comma-separated.
    #[arg(long)]
    pub beta: Option<String>,
    /// Propensity intercept.
    #[arg(long)]
    pub b: Option<String>,
    /// Propensity clip level.
    #[arg(long)]
    pub eps: Option<String>,
    #[arg(long)]
    pub tau: Option<String>,
    #[arg(long)]
    pub noise_sd: Option<String>,
    /// Also write the ground truth as JSON.
    #[arg(long)]
    pub emit_oracle: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimArgs {
    #[arg(long)]
    pub max_iters: Option<String>,
    #[arg(long)]
    pub step_size: Option<String>,
    #[arg(long)]
    pub grad_tol: Option<String>,
}

#[derive(Debug, Args)]
pub struct DreFitArgs {
    /// Two-sample CSV with columns x1..xd, sample (de | nu).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// lsif | ukl | bkl | pu:<C>
    #[arg(long)]
    pub loss: Option<String>,
    /// linear:poly:<deg> | linear:rbf:<m>:<sigma|median> | kulsif:<sigma|median>:<lambda|loocv-grid>
    #[arg(long)]
    pub model: Option<String>,
    /// Output link (defaults to the loss's natural link).
    #[arg(long)]
    pub link: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    /// l2 | rkhs
    #[arg(long)]
    pub regularizer: Option<String>,
    /// Non-negative correction constant C.
    #[arg(long)]
    pub nonneg_c: Option<String>,
    #[arg(long)]
    pub telescope_m: Option<String>,
    /// Apply max(r, 0) when the saved model is evaluated.
    #[arg(long)]
    pub truncate: bool,
    #[command(flatten)]
    pub optim: OptimArgs,
}

#[derive(Debug, Args)]
pub struct DreEvalArgs {
    /// JSON written by `dre fit`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Oracle JSON written by `synth gen --emit-oracle`.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RieszFitArgs {
    /// Observational CSV with columns x1..xd, d, y.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// riesz-lsq | paired-lsif | riesz-ukl
    #[arg(long)]
    pub objective: Option<String>,
    /// One basis for both heads (default true).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub shared_basis: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub link: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub regularizer: Option<String>,
    /// Starting value of both heads.
    #[arg(long)]
    pub start: Option<String>,
    #[command(flatten)]
    pub optim: OptimArgs,
}

#[derive(Debug, Args)]
pub struct RieszLearnerArgs {
    /// riesz-lsq | paired-lsif | riesz-ukl
    #[arg(long)]
    pub riesz_objective: Option<String>,
    /// Basis of both representer heads (linear:poly or linear:rbf).
    #[arg(long)]
    pub riesz_model: Option<String>,
    /// Link of both heads (identity by default; softplus1 for riesz-ukl).
    #[arg(long)]
    pub riesz_link: Option<String>,
    #[arg(long)]
    pub riesz_lambda: Option<String>,
    #[arg(long)]
    pub max_iters: Option<String>,
    #[arg(long)]
    pub grad_tol: Option<String>,
}

#[derive(Debug, Args)]
pub struct OutcomeLearnerArgs {
    /// Outcome regression basis, fitted by ridge on [φ(x), d·φ(x)].
    #[arg(long)]
    pub outcome_model: Option<String>,
    #[arg(long)]
    pub outcome_lambda: Option<String>,
    /// Covariates the outcome model may use, 1-based and comma-separated.
    #[arg(long)]
    pub outcome_columns: Option<String>,
}

#[derive(Debug, Args)]
pub struct AteArgs {
    /// Observational CSV with columns x1..xd, d, y
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Cross-fitting folds.
    #[arg(long)]
    pub folds: Option<String>,
    /// debiased | plugin | ipw
    #[arg(long)]
    pub estimator: Option<String>,
    /// Warn when a fitted ratio exceeds 1 / eps-min.
    #[arg(long)]
    pub eps_min: Option<String>,
    #[command(flatten)]
    pub riesz: RieszLearnerArgs,
    #[command(flatten)]
    pub outcome: OutcomeLearnerArgs,
}

#[derive(Debug, Args)]
pub struct EquivalenceArgs {
    /// Observational CSV; a synthetic draw is used when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long)]
    pub design: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub link: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
    /// Standard deviation of the random coefficients.
    #[arg(long)]
    pub scale: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// ate | dre-l2
    #[arg(long)]
    pub study: Option<String>,
    #[arg(long)]
    pub design: Option<String>,
    /// Sample sizes, comma-separated.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub reps: Option<String>,
    /// debiased, plugin, ipw, oracle, naive (ate study).
    #[arg(long)]
    pub estimators: Option<String>,
    #[arg(long)]
    pub folds: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<String>,
    /// Ratio model (dre-l2 study).
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub link: Option<String>,
    /// Penalty at the smallest n; scaled by sqrt(n_min / n).
    #[arg(long)]
    pub lambda: Option<String>,
    /// Denominator test rows for the L2 error (dre-l2 study).
    #[arg(long)]
    pub test_n: Option<String>,
    #[command(flatten)]
    pub riesz: RieszLearnerArgs,
    #[command(flatten)]
    pub outcome: OutcomeLearnerArgs,
}

/// Per-run state shared by the subcommands.
pub(crate) struct Ctx {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub resolver: config::Resolver,
}

fn init_logging(quiet: bool) {
    let level = if quiet { log::LevelFilter::Error } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().format_timestamp(None).try_init();
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => config::load_config(p)?,
        None => Default::default(),
    };
    let mut resolver = config::Resolver::new(file);
    let quiet = resolver.flag("quiet", cli.quiet)?;
    init_logging(quiet);
    let seed = resolver.get::<u64>("seed", cli.seed.clone(), 0)?;
    let out = resolver.opt::<String>("out", cli.out.clone())?.map(PathBuf::from);
    let mut ctx = Ctx { seed, out, resolver };
    let res = match cli.command {
        Command::Synth { cmd: SynthCmd::Gen(a) } => synth::run(&a, &mut ctx),
        Command::Dre { cmd: DreCmd::Fit(a) } => dre::fit(&a, &mut ctx),
        Command::Dre { cmd: DreCmd::Eval(a) } => dre::eval(&a, &mut ctx),
        Command::Riesz { cmd: RieszCmd::Fit(a) } => riesz::fit(&a, &mut ctx),
        Command::Ate { cmd: AteCmd::Estimate(a) } => ate::estimate(&a, &mut ctx),
        Command::EquivalenceCheck(a) => equivalence::run(&a, &mut ctx),
        Command::Simulate(a) => simulate::run(&a, &mut ctx),
    };
    let unused = ctx.resolver.unused_keys();
    if !unused.is_empty() {
        log::warn!("config keys not used by this command: {}", unused.join(", "));
    }
    res
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
