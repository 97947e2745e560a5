use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dstt_kit::config::ScenarioConfig;
use dstt_kit::error::Result;
use dstt_kit::harness::{resolve_out_dir, run_scenario, thread_pool, Study};
use dstt_kit::stt::integrate_stts;

#[derive(Parser)]
#[command(name = "dstt-kit", version, about = "State transition tensors and rank-1 directional approximations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyArg {
    Frobenius,
    Covariance,
    Bound,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write study CSVs plus manifest.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        study: StudyArg,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the Monte Carlo seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
        order: Option<u8>,
    },
    /// Write the STM and STTs of one epoch as CSV.
    DumpStt {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        epoch: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            study,
            out,
            seed,
            order,
        } => {
            let mut cfg = ScenarioConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.rng_seed = s;
            }
            if let Some(o) = order {
                cfg.stt_order = o as usize;
            }
            let studies = match study {
                StudyArg::Frobenius => vec![Study::Frobenius],
                StudyArg::Covariance => vec![Study::Covariance],
                StudyArg::Bound => vec![Study::Bound],
                StudyArg::All if cfg.covariance.is_some() => Study::ALL.to_vec(),
                StudyArg::All => vec![Study::Frobenius, Study::Bound],
            };
            let out = resolve_out_dir(&cfg, out.as_deref());
            let manifest = thread_pool()?.install(|| run_scenario(&cfg, &studies, &out))?;
            for o in &manifest.outputs {
                println!("{} ({} rows)", out.join(&o.file).display(), o.rows);
            }
            println!("{}", out.join("manifest.json").display());
        }
        Command::DumpStt { config, epoch, out } => {
            let cfg = ScenarioConfig::from_path(&config)?;
            let model = cfg.build_model()?;
            let grid = cfg.grid()?;
            if epoch >= grid.len() {
                return Err(dstt_kit::Error::Config(format!(
                    "epoch {epoch} out of range (grid has {} epochs)",
                    grid.len()
                )));
            }
            let (h, _) = integrate_stts(&model, &cfg.initial_state()?, &grid[..=epoch], cfg.stt_order, &cfg.integrator)?;
            let out = resolve_out_dir(&cfg, out.as_deref());
            h.write_epoch_csv(&out, epoch)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let c = e.category();
            eprintln!("dstt-kit: {} error: {e}", c.name());
            ExitCode::from(c.exit_code() as u8)
        }
    }
}
