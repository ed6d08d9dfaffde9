use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sorkin::commands::{self, SweepAxis};
use sorkin::config::RunConfig;
use sorkin::noise::CommonDelayMode;
use sorkin::output::fmt_f64;
use sorkin::{Error, Result};

#[derive(Parser)]
#[command(name = "sorkin", version, about = "Three-path Sorkin test simulation for attosecond photoionization")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration; built-in defaults otherwise.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config file and SORKIN_OUTPUT_DIR).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Pulses per configuration and run.
    #[arg(long, global = true)]
    pulses: Option<u64>,
    #[arg(long, global = true)]
    runs: Option<u32>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Fixed data acquisition efficiency instead of calibration.
    #[arg(long, global = true)]
    efficiency: Option<f64>,
    /// Window center ε_c in eV.
    #[arg(long, global = true)]
    center_ev: Option<f64>,
    #[arg(long, global = true)]
    two_channel: bool,
    #[arg(long, global = true, value_enum)]
    common_delay: Option<DelayMode>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DelayMode {
    PerPulse,
    PerRun,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Time,
    Efficiency,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo experiment and write histograms, per-bin estimates and a summary.
    Simulate {
        /// Also write every run record as JSON lines.
        #[arg(long)]
        records: bool,
    },
    /// Standard error of κ̄ along the measurement-time or efficiency axis, with a power-law fit.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Axis values: pulses per run (time) or multiples of the calibrated η (efficiency).
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// Scale the background with η on the efficiency axis.
        #[arg(long)]
        scale_background: bool,
    },
    /// Run the oracle checks and report PASS/FAIL per check.
    Validate,
    /// Write the noise-free probability table.
    Ideal,
    /// Print the effective configuration as TOML.
    Config,
}

fn load_config(a: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &a.output {
        cfg.output_dir = Some(o.clone());
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.pulses {
        cfg.n_pulses = n;
    }
    if let Some(n) = a.runs {
        cfg.n_runs = n;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if let Some(e) = a.efficiency {
        cfg.detection.efficiency = Some(e);
    }
    if let Some(c) = a.center_ev {
        cfg.grid.center_ev = Some(c);
    }
    if a.two_channel {
        cfg.channels.two_channel = true;
    }
    if let Some(m) = a.common_delay {
        cfg.noise.common_delay_mode = match m {
            DelayMode::PerPulse => CommonDelayMode::PerPulse,
            DelayMode::PerRun => CommonDelayMode::PerRun,
        };
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<i32> {
    let mut cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Simulate { records } => {
            let out = commands::cmd_simulate(&cfg, records)?;
            let s = &out.summary;
            println!("kappa_mean = {} +- {}", fmt_f64(s.kappa_mean), fmt_f64(s.kappa_std_error));
            println!("median per-bin sigma_kappa = {}", fmt_f64(s.median_sigma_kappa));
            match (s.peres_mean, s.peres_std_error) {
                (Some(f), Some(e)) => println!("peres_mean = {} +- {}", fmt_f64(f), fmt_f64(e)),
                _ => println!("peres_mean undefined (no bin with positive single-path signal)"),
            }
            println!("output: {}", out.output_dir.display());
        }
        Command::Sweep { axis, values, scale_background } => {
            if scale_background {
                cfg.detection.scale_background_with_efficiency = true;
            }
            let axis = match axis {
                Axis::Time => SweepAxis::Time,
                Axis::Efficiency => SweepAxis::Efficiency,
            };
            let out = commands::cmd_sweep(&cfg, axis, values.as_deref())?;
            for r in &out.rows {
                println!("{} {}: s = {}", axis.name(), fmt_f64(r.point.abscissa), fmt_f64(r.point.std_error));
            }
            println!("exponent = {} +- {}", fmt_f64(out.fit.exponent), fmt_f64(out.fit.exponent_error));
        }
        Command::Validate => {
            let checks = commands::cmd_validate(&cfg)?;
            for c in &checks {
                println!("{}", c.line());
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(1);
            }
        }
        Command::Ideal => {
            let (_, path) = commands::cmd_ideal(&cfg)?;
            println!("wrote {}", path.display());
        }
        Command::Config => print!("{}", cfg.to_toml_string()?),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
