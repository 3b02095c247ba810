//! Command-line entry point: runs one experiment and writes its CSV.

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use chanlearn::harness::{
    mean_and_stderr, parse_seeds, resolve_config, run_experiment, write_csv, write_csv_to,
    Algorithm, ChannelKind, ConfigOverrides, InnovationKind, MuMode, Task,
};
use chanlearn::Result;

#[derive(Parser)]
#[command(name = "chanlearn", version, about = "Online decoder and codebook learning over time-correlated channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn the receiver's decoding kernel.
    Decoder(Flags),
    /// Learn which codebook the transmitter uses.
    Codebook(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON configuration file; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "algo")]
    algorithm: Option<Algorithm>,
    #[arg(long = "T")]
    horizon: Option<u64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long = "mu-mode")]
    mu_mode: Option<MuMode>,
    #[arg(long)]
    dist: Option<InnovationKind>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    snr_db: Option<f64>,
    #[arg(long)]
    channel: Option<ChannelKind>,
    #[arg(long = "gamma-x")]
    gamma_x: Option<f64>,
    /// Radius of the kernel's Frobenius ball.
    #[arg(long = "D")]
    radius: Option<f64>,
    /// Comma-separated list, e.g. 0,1,2.
    #[arg(long)]
    seeds: Option<String>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    ridge: Option<f64>,
    /// Log-barrier learning rate (at most 1/162).
    #[arg(long)]
    eta: Option<f64>,
    /// Halve the log-barrier rate whenever the hint error doubles.
    #[arg(long)]
    doubling: bool,
    /// Explicit hinge margin r ≥ 1 instead of the indicator-free gradient.
    #[arg(long)]
    margin: Option<f64>,
}

impl Flags {
    fn overrides(&self) -> Result<ConfigOverrides> {
        Ok(ConfigOverrides {
            task: None,
            algorithm: self.algorithm,
            horizon: self.horizon,
            d: self.d,
            m: self.m,
            n: self.n,
            mu: self.mu,
            mu_mode: self.mu_mode,
            dist: self.dist,
            k: self.k,
            rho: self.rho,
            snr_db: self.snr_db,
            channel: self.channel,
            gamma_x: self.gamma_x,
            radius: self.radius,
            seeds: self.seeds.as_deref().map(parse_seeds).transpose()?,
            out: self.out.clone(),
            ridge: self.ridge,
            eta: self.eta,
            doubling: self.doubling.then_some(true),
            margin: self.margin,
        })
    }
}

fn run(task: Task, flags: &Flags) -> Result<()> {
    let file = flags.config.as_ref().map(ConfigOverrides::load).transpose()?;
    let cfg = resolve_config(task, file.as_ref(), &flags.overrides()?)?;
    let runs = run_experiment(&cfg)?;
    match &cfg.out {
        Some(path) => write_csv(&runs, path)?,
        None => write_csv_to(&runs, io::stdout().lock())?,
    }
    let finals: Vec<f64> = runs.iter().filter_map(|r| r.final_running_avg()).collect();
    let (mean, se) = mean_and_stderr(&finals)?;
    eprintln!(
        "{} {}: final running-average SER {mean:.6} ± {se:.6} over {} seed(s)",
        cfg.task,
        cfg.algorithm,
        finals.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (task, flags) = match &cli.command {
        Command::Decoder(flags) => (Task::Decoder, flags),
        Command::Codebook(flags) => (Task::Codebook, flags),
    };
    match run(task, flags) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
