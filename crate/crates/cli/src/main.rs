mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{RunContext, Failure};
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "magneto-spectra", version, about = "Magnetic Neumann Laplacian spectra on planar domains")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Eigenvalue residual tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Number of eigenvalues per field strength.
    #[arg(long, global = true)]
    nev: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for one per logical core.
    #[arg(long, global = true, env = "MAGNETO_SPECTRA_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Constants of the half-line model.
    Degennes {
        #[arg(long, default_value_t = 3000)]
        points: usize,
        #[arg(long, default_value_t = 15.0)]
        length: f64,
        /// Use linear finite elements instead of finite differences.
        #[arg(long)]
        p1: bool,
    },
    /// Closed-form predictions for the configured domain and field.
    Predict,
    /// Solve over the configured field strengths.
    Sweep,
    /// Fit the lowest eigenvalue against the asymptotic law.
    Fit {
        /// Sweep table to fit instead of solving.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Rayleigh quotients of the explicit trial states.
    Quasimode {
        #[arg(long, default_value_t = 3)]
        order: usize,
        /// Gaussian width exponent for degenerate minima.
        #[arg(long, default_value_t = 0.25)]
        rho: f64,
    },
    /// Localization moments and tangential decay.
    Agmon,
    /// Third critical field.
    Hc3 {
        #[arg(long, value_delimiter = ',')]
        kappa: Option<Vec<f64>>,
    },
    /// SVG and gnuplot data from a sweep table.
    Plot {
        #[arg(long)]
        input: PathBuf,
    },
    /// Identity checks on the computed constants.
    Selftest,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Degennes { .. } => "degennes",
            Command::Predict => "predict",
            Command::Sweep => "sweep",
            Command::Fit { .. } => "fit",
            Command::Quasimode { .. } => "quasimode",
            Command::Agmon => "agmon",
            Command::Hc3 { .. } => "hc3",
            Command::Plot { .. } => "plot",
            Command::Selftest => "selftest",
        }
    }
}

fn context(cli: &Cli) -> Result<RunContext, Failure> {
    let mut config = match &cli.config {
        Some(path) => Some(RunConfig::load(path).map_err(Failure::Config)?),
        None => None,
    };
    if let Some(cfg) = config.as_mut() {
        if let Some(tol) = cli.tol {
            cfg.solver.tol = tol;
        }
        if let Some(nev) = cli.nev {
            cfg.solver.nev = nev;
        }
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        if let Some(jobs) = cli.jobs {
            cfg.solver.jobs = jobs;
        }
        if let Some(out) = &cli.out {
            cfg.output.dir = out.clone();
        }
        cfg.validate().map_err(Failure::Config)?;
    }
    let out = cli.out.clone().or_else(|| config.as_ref().map(|c| c.output.dir.clone())).unwrap_or_else(|| "out".into());
    let jobs = config.as_ref().map(|c| c.solver.jobs).or(cli.jobs).unwrap_or(0);
    if jobs > 0 {
        // only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    Ok(RunContext { config, out, command: cli.command.name().into() })
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let ctx = context(cli)?;
    match &cli.command {
        Command::Degennes { points, length, p1 } => commands::degennes(&ctx, *points, *length, *p1),
        Command::Predict => commands::predict(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Fit { input } => commands::fit(&ctx, input.as_deref()),
        Command::Quasimode { order, rho } => commands::quasimode(&ctx, *order, *rho),
        Command::Agmon => commands::agmon(&ctx),
        Command::Hc3 { kappa } => commands::hc3(&ctx, kappa.clone()),
        Command::Plot { input } => commands::plot(&ctx, input),
        Command::Selftest => commands::selftest(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
