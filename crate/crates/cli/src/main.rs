use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hybrid_leo::error::Error;
use hybrid_leo::harness::{emit_results, run_experiment, ExperimentKind, ExperimentSpec, OutputFormat};
use hybrid_leo::model::{load_scenario, Architecture, PowerModel, SystemConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "hybrid-leo", version, about = "Energy-efficient precoding sweeps for LEO massive MIMO downlinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment sweep and write the result table.
    Run {
        /// TOML scenario; missing keys keep the built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// ee-vs-rf-chains, ee-vs-power-budget, bound-tightness or method-compare.
        #[arg(long)]
        experiment: ExperimentKind,
        /// Seed group (channel draws depend only on this and the trial index).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Channel realizations averaged per grid point.
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// Monte Carlo samples per trial (0 disables the column).
        #[arg(long)]
        mc_samples: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        /// 16-antenna scenario and a coarse grid; runs in seconds.
        #[arg(long)]
        small: bool,
        /// Record wall-clock runtime (output is then not reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Check a scenario file against every configuration invariant.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::UnknownResolution(_) | Error::Io { .. } => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

fn base_config(small: bool) -> SystemConfig {
    if small {
        SystemConfig::small()
    } else {
        SystemConfig::default()
    }
}

fn load(config: Option<&PathBuf>, small: bool) -> Result<(SystemConfig, PowerModel), Error> {
    let base = base_config(small);
    match config {
        Some(path) => load_scenario(path, &base),
        None => Ok((base, PowerModel::default())),
    }
}

fn validate(config: &PathBuf) -> Result<(), Error> {
    let (cfg, pm) = load(Some(config), false)?;
    cfg.validate()?;
    pm.validate()?;
    if !cfg.n_tx().is_multiple_of(cfg.m_rf) {
        log::warn!(
            "m_rf = {} does not divide n_tx = {}; the partially connected network is unavailable",
            cfg.m_rf,
            cfg.n_tx()
        );
    } else {
        cfg.validate_for(Architecture::PartiallyConnected)?;
    }
    println!(
        "ok: {} antennas, {} users, {} RF chains, P = {} W",
        cfg.n_tx(),
        cfg.k_users,
        cfg.m_rf,
        cfg.power_budget_w
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config } => validate(&config).map(|_| 0),
        Command::Run { config, experiment, seed, trials, mc_samples, out, format, small, timing } => {
            let run = || -> Result<u8, Error> {
                let (cfg, pm) = load(config.as_ref(), small)?;
                let mut spec = if small {
                    ExperimentSpec::small_for(experiment)
                } else {
                    ExperimentSpec::default_for(experiment)
                };
                // budget sweeps run at the scenario's RF-chain count
                spec.m_rf = cfg.m_rf;
                spec.seeds = vec![seed];
                spec.trials_per_point = trials;
                spec.timing = timing;
                if let Some(n) = mc_samples {
                    spec.mc_samples = n;
                }
                let table = run_experiment(&spec, &cfg, &pm)?;
                emit_results(&table, format, &out)?;
                for row in table.rows.iter().filter(|r| r.error.is_some()) {
                    log::error!(
                        "{} {} M={} P={} dBW: {}",
                        row.architecture,
                        row.resolution,
                        row.m_rf,
                        row.power_budget_dbw,
                        row.error.as_deref().unwrap_or_default()
                    );
                }
                log::info!("wrote {} rows to {}", table.rows.len(), out.display());
                Ok(if table.has_errors() { EXIT_SOLVER } else { 0 })
            };
            run()
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
