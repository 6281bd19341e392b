use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use usc_scan::config::{parse_angle, parse_fixed};
use usc_scan::{run, Mode, Overrides, RunConfig};

/// Spectrum and frequency-resolved correlation scans of the extended Rabi model.
#[derive(Parser, Debug)]
#[command(name = "usc-scan", version)]
struct Cli {
    /// TOML run configuration; flags override its fields
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// energy_sweep | spectrum | spectrum_theta_map | g2_scan | g3_scan | oracle_check
    #[arg(long, value_name = "M")]
    mode: Option<Mode>,

    /// Mixing angle in radians, or a multiple of pi such as `pi/6`
    #[arg(long, value_name = "X", value_parser = parse_angle, allow_hyphen_values = true)]
    theta: Option<f64>,

    /// Coupling strength in units of the cavity frequency
    #[arg(long, value_name = "X")]
    g: Option<f64>,

    #[arg(long, value_name = "N")]
    n_fock: Option<usize>,

    /// Dressed levels kept in the dynamics
    #[arg(long, value_name = "N")]
    n_levels: Option<usize>,

    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Scan axis start (coupling in energy_sweep, sensor frequency otherwise)
    #[arg(long, value_name = "X", allow_hyphen_values = true)]
    grid_start: Option<f64>,

    #[arg(long, value_name = "X", allow_hyphen_values = true)]
    grid_stop: Option<f64>,

    #[arg(long, value_name = "X")]
    grid_step: Option<f64>,

    /// Held sensor, e.g. `w2=w31` or `w3=0.7028`
    #[arg(long, value_name = "NAME=SYMBOL", value_parser = parse_fixed)]
    fixed: Vec<(String, String)>,

    /// Sensor coupling of the explicit-sensor check
    #[arg(long, value_name = "X")]
    oracle_epsilon: Option<f64>,

    /// Disable data parallelism
    #[arg(long)]
    sequential: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        mode: cli.mode,
        theta: cli.theta,
        g: cli.g,
        n_fock: cli.n_fock,
        n_levels: cli.n_levels,
        out: cli.out,
        grid_start: cli.grid_start,
        grid_stop: cli.grid_stop,
        grid_step: cli.grid_step,
        fixed: cli.fixed,
        oracle_epsilon: cli.oracle_epsilon,
        sequential: cli.sequential,
    };
    let result = cli
        .config
        .as_deref()
        .map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
        .and_then(|cfg| overrides.apply(cfg))
        .and_then(|cfg| run(&cfg));
    match result {
        Ok(outcome) if outcome.pass => {
            eprintln!(
                "wrote {} files to {}",
                outcome.files.len(),
                outcome.dir.display()
            );
            ExitCode::SUCCESS
        }
        Ok(outcome) => {
            eprintln!("check failed; report in {}", outcome.dir.display());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
