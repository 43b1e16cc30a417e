mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{ConfigInvalid, Format, ModelKind, RunConfig};
use experiments::Table;
use output::Status;

#[derive(Parser, Debug)]
#[command(name = "inertial", version, about = "Inertial-frame propagation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config file; missing keys take built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Relative ODE tolerance; absolute tolerance is 1e-2 times this.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    model: Option<ModelArg>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Fidelity sweep over a log grid of protocol durations.
    Sweep,
    /// Time series of the adiabatic and inertial parameters.
    Diagnose,
    /// Driven two-level system coupled to a thermal bath.
    Open,
    /// Geometric phases around a closed parameter circuit.
    Geo,
    /// Time series of exact, inertial and adiabatic propagation.
    Single,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Sweep => "sweep",
            Command::Diagnose => "diagnose",
            Command::Open => "open",
            Command::Geo => "geo",
            Command::Single => "single",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ModelArg {
    Ho,
    Tls,
    TwoSpin,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;
const EXIT_FAILED: u8 = 4;

fn load(cli: &Cli) -> Result<RunConfig, ConfigInvalid> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| ConfigInvalid { key: "<file>".into(), message: format!("{}: {e}", p.display()) })?,
        None => String::new(),
    };
    let model = cli.model.map(|m| match m {
        ModelArg::Ho => ModelKind::Ho,
        ModelArg::Tls => ModelKind::Tls,
        ModelArg::TwoSpin => ModelKind::TwoSpin,
    });
    let mut cfg = config::parse(&text, model)?;
    if let Some(out) = &cli.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    if let Some(f) = cli.format {
        cfg.output.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    if let Some(tol) = cli.tol {
        cfg.numerics.rtol = tol;
        cfg.numerics.atol = tol * 1e-2;
    }
    config::validate(&cfg)?;
    Ok(cfg)
}

fn run(command: Command, cfg: &RunConfig) -> Result<Table, ConfigInvalid> {
    match command {
        Command::Sweep => experiments::sweep(cfg),
        Command::Diagnose => experiments::diagnose(cfg),
        Command::Open => experiments::open(cfg),
        Command::Geo => experiments::geo(cfg),
        Command::Single => experiments::single(cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let table = match run(cli.command, &cfg) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    for w in &table.warnings {
        log::warn!("{w}");
    }
    for f in &table.failures {
        log::error!("point {}: {}: {}", f.index, f.kind, f.message);
    }
    let path = match output::write_run(cli.command.name(), &cfg, &table) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot write output: {e}");
            return ExitCode::from(EXIT_FAILED);
        }
    };
    let status = Status::of(&table);
    println!("{} {}: {} rows, status {}", cli.command.name(), path.display(), table.rows.len(), status.name());
    match status {
        Status::Ok => ExitCode::SUCCESS,
        Status::Partial => ExitCode::from(EXIT_PARTIAL),
        Status::Failed => ExitCode::from(EXIT_FAILED),
    }
}
