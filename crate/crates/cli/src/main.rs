mod commands;
mod config;
mod error;
mod ingest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use declust::report::DEFAULT_TOP_K;
use declust::NuConvention;

use commands::{Global, Source};
use error::CliResult;

/// Cluster detection for spatio-temporal event catalogs: simulation,
/// likelihood, fitting, posterior membership and decoding.
///
/// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
#[derive(Debug, Parser)]
#[command(name = "declust", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Key-value file with the model parameters and the region.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed for simulation and for fit restarts.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// End of the observation window in days. Required by `simulate`;
    /// elsewhere it adds the survival of the final silent stretch.
    #[arg(long, global = true, value_name = "DAYS")]
    horizon: Option<f64>,

    /// Reference measure for the densities (overrides the config file).
    #[arg(long, global = true, value_enum)]
    nu: Option<NuArg>,

    /// Directory for the files a subcommand writes.
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NuArg {
    Probability,
    Lebesgue,
}

impl From<NuArg> for NuConvention {
    fn from(v: NuArg) -> Self {
        match v {
            NuArg::Probability => Self::Probability,
            NuArg::Lebesgue => Self::Lebesgue,
        }
    }
}

#[derive(Debug, Args)]
struct CatalogArgs {
    /// Catalog CSV with header time,lon,lat[,magnitude][,depth_km].
    catalog: PathBuf,

    /// Keep only events with magnitude strictly greater than this.
    #[arg(long, value_name = "M")]
    magnitude_above: Option<f64>,

    /// Keep only events with depth strictly less than this (km).
    #[arg(long, value_name = "KM")]
    depth_below: Option<f64>,

    /// Time zero for timestamp columns [default: midnight of the earliest date].
    #[arg(long, value_name = "TIMESTAMP")]
    origin: Option<String>,

    /// Break exact time ties by shifting repeats by this many seconds, in
    /// input order.
    #[arg(long, value_name = "SECONDS")]
    jitter: Option<f64>,
}

impl From<&CatalogArgs> for Source {
    fn from(a: &CatalogArgs) -> Self {
        Self {
            path: a.catalog.clone(),
            magnitude_above: a.magnitude_above,
            depth_below: a.depth_below,
            origin: a.origin.clone(),
            jitter_seconds: a.jitter,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a catalog; writes catalog.csv and labels.csv.
    Simulate,

    /// Print the log-likelihood of a catalog.
    Loglik(CatalogArgs),

    /// Maximum-likelihood fit starting from the configured parameters;
    /// writes fit.ini and fit_trace.csv.
    Fit {
        #[command(flatten)]
        catalog: CatalogArgs,

        /// Number of optimizer starts.
        #[arg(long, default_value_t = 5)]
        restarts: usize,

        /// Half-width of the uniform jitter of restart points, in log/logit
        /// coordinates.
        #[arg(long, default_value_t = 0.5)]
        perturbation: f64,
    },

    /// Posterior cluster membership; writes posterior.csv and active.csv.
    Posterior(CatalogArgs),

    /// Most likely labelling; writes decoded_labels.csv.
    Decode(CatalogArgs),

    /// Compare the fast recursions with exhaustive enumeration, on the
    /// bundled 8-event example unless a catalog is given.
    OracleCheck {
        /// Catalog of at most 14 events.
        catalog: Option<PathBuf>,
    },

    /// Posterior files plus histograms, the top-K time–space export and an
    /// optional comparison against an external probability file.
    Report {
        #[command(flatten)]
        catalog: CatalogArgs,

        /// Number of most likely clustered events to export.
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top_k: usize,

        /// CSV of per-event probabilities from another method, one row per
        /// event in catalog order.
        #[arg(long, value_name = "FILE")]
        external: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let a = cli.global;
    let g = Global {
        config: a.config,
        seed: a.seed,
        horizon: a.horizon,
        nu: a.nu.map(Into::into),
        output_dir: a.output_dir,
    };
    match &cli.command {
        Command::Simulate => commands::simulate_cmd(&g),
        Command::Loglik(c) => commands::loglik_cmd(&g, &c.into()),
        Command::Fit {
            catalog,
            restarts,
            perturbation,
        } => commands::fit_cmd(&g, &catalog.into(), *restarts, *perturbation),
        Command::Posterior(c) => commands::posterior_cmd(&g, &c.into()),
        Command::Decode(c) => commands::decode_cmd(&g, &c.into()),
        Command::OracleCheck { catalog } => commands::oracle_check_cmd(&g, catalog.as_deref()),
        Command::Report {
            catalog,
            top_k,
            external,
        } => commands::report_cmd(&g, &catalog.into(), *top_k, external.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
