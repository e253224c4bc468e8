//! Thin CLI over the sweep engine. See the library's `examples/` directory
//! for programmatic use.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ssm::harness::{
    emit_csv, emit_plot_data, eval_dnn_from_config, gen_dataset_from_config, run_ber_sweep,
    run_sr_sweep, train_dnn_from_config, ExperimentConfig, SrMethod, SweepResult,
};
use ssm::tas::TasMethod;
use ssm::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "ssm", version, about = "Secure spatial modulation link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (strict JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config worker count.
    #[arg(long)]
    workers: Option<usize>,
    /// Output path (CSV for sweeps, checkpoint/dataset otherwise).
    #[arg(long)]
    out: PathBuf,
    /// Also emit x/y columns per curve for external plotting.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// BER versus SNR for the configured detectors, paired trials.
    SimulateBer(RunArgs),
    /// Secrecy rate versus SNR for one selection method.
    SimulateSr(RunArgs),
    /// Compare power-allocation strategies.
    SweepPa(RunArgs),
    /// Compare transmit-antenna-selection methods.
    SweepTas(RunArgs),
    /// Generate a labeled dataset file.
    GenDataset(RunArgs),
    /// Train a DNN detector and write its checkpoint.
    TrainDnn(RunArgs),
    /// BER of a checkpointed DNN against ML.
    EvalDnn(RunArgs),
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::SimulateBer(a)
            | Command::SimulateSr(a)
            | Command::SweepPa(a)
            | Command::SweepTas(a)
            | Command::GenDataset(a)
            | Command::TrainDnn(a)
            | Command::EvalDnn(a) => a,
        }
    }
}

fn write_sweep_outputs(result: &SweepResult, args: &RunArgs) -> ssm::Result<()> {
    emit_csv(result, &args.out)?;
    if let Some(plot) = &args.plot_data {
        std::fs::write(plot, emit_plot_data(result))?;
    }
    println!("wrote {} rows to {}", result.rows.len(), args.out.display());
    Ok(())
}

fn run(command: &Command, cfg: &ExperimentConfig) -> ssm::Result<()> {
    let args = command.args();
    match command {
        Command::SimulateBer(_) => write_sweep_outputs(&run_ber_sweep(cfg)?, args),
        Command::SimulateSr(_) => {
            let method = SrMethod::Tas(cfg.tas_method.unwrap_or(TasMethod::Random));
            write_sweep_outputs(&run_sr_sweep(cfg, &[method])?, args)
        }
        Command::SweepTas(_) => {
            let methods: Vec<SrMethod> = cfg
                .tas_methods
                .as_ref()
                .ok_or_else(|| Error::Config("sweep-tas needs a tas_methods list".into()))?
                .iter()
                .map(|t| SrMethod::Tas(*t))
                .collect();
            write_sweep_outputs(&run_sr_sweep(cfg, &methods)?, args)
        }
        Command::SweepPa(_) => {
            let methods: Vec<SrMethod> = cfg
                .pa_methods
                .as_ref()
                .ok_or_else(|| Error::Config("sweep-pa needs a pa_methods list".into()))?
                .iter()
                .map(|p| SrMethod::Pa(p.clone()))
                .collect();
            write_sweep_outputs(&run_sr_sweep(cfg, &methods)?, args)
        }
        Command::GenDataset(_) => {
            gen_dataset_from_config(cfg, &args.out)?;
            println!("wrote dataset to {}", args.out.display());
            Ok(())
        }
        Command::TrainDnn(_) => {
            let best = train_dnn_from_config(cfg, &args.out)?;
            println!(
                "wrote checkpoint to {} (best validation joint error {best:.4})",
                args.out.display()
            );
            Ok(())
        }
        Command::EvalDnn(_) => write_sweep_outputs(&eval_dnn_from_config(cfg)?, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = cli.command.args();
    let mut cfg = match ExperimentConfig::from_path(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = args.workers {
        cfg.workers = workers;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("config error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match run(&cli.command, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
