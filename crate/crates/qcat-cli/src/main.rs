mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use commands::Command;
use config::RunConfig;

/// Simulator and pulse-parameter optimizer for nuclear-spin cat states under
/// the biaxial quadrupole interaction. Every run writes CSV datasets, a
/// deterministic summary.json, and a manifest.json with checksums.
#[derive(Parser)]
#[command(name = "qcat", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Plain-text key=value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = "qcat-out")]
    out: PathBuf,

    /// Extra key=value override, repeatable; wins over the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Twice the spin quantum number (2I), 2..=9.
    #[arg(long, global = true)]
    twice_i: Option<u32>,

    /// Field-gradient biaxiality in [0, 1].
    #[arg(long, global = true)]
    eta: Option<f64>,

    /// Cat bound: polar | equator.
    #[arg(long, global = true)]
    bound: Option<String>,

    /// Dephasing rate in units of f_Q.
    #[arg(long, global = true)]
    gamma: Option<f64>,

    /// Pulse instant override in 1/f_Q.
    #[arg(long = "t-r", global = true)]
    t_r: Option<f64>,

    /// Pulse angle override in radians.
    #[arg(long = "theta-r", global = true)]
    theta_r: Option<f64>,

    /// Target-phase override in radians.
    #[arg(long, global = true)]
    varphi: Option<f64>,

    /// Upper end of the pulse-instant search grid.
    #[arg(long = "trmax", global = true)]
    t_r_max: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Numerical(_) => ExitCode::from(3),
            CliError::Io(_) => ExitCode::from(1),
        }
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::default();
    if let Some(path) = &cli.config {
        config.load_file(path)?;
    }
    for pair in &cli.sets {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(CliError::Usage(format!(
                "--set expects KEY=VALUE, got '{pair}'"
            )));
        };
        config.apply(key.trim(), value.trim())?;
    }
    // dedicated flags win over file values and --set pairs
    if let Some(v) = cli.twice_i {
        config.apply("twice_i", &v.to_string())?;
    }
    if let Some(v) = cli.eta {
        config.apply("eta", &v.to_string())?;
    }
    if let Some(v) = &cli.bound {
        config.apply("bound", v)?;
    }
    if let Some(v) = cli.gamma {
        config.apply("gamma", &v.to_string())?;
    }
    if let Some(v) = cli.t_r {
        config.apply("t_r", &v.to_string())?;
    }
    if let Some(v) = cli.theta_r {
        config.apply("theta_r", &v.to_string())?;
    }
    if let Some(v) = cli.varphi {
        config.apply("varphi", &v.to_string())?;
    }
    if let Some(v) = cli.t_r_max {
        config.apply("t_r_max", &v.to_string())?;
    }
    config.out = cli.out.clone();
    Ok(config)
}

fn init_thread_pool() {
    if let Ok(raw) = std::env::var("QCAT_THREADS") {
        if let Ok(n) = raw.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_thread_pool();
    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    match commands::execute(cli.command, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
