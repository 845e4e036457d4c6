use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vibecycle_cli::commands;
use vibecycle_cli::config::RunConfig;
use vibecycle_cli::{check_device, CliError};
use vibecycle_core::losses::GpAt;
use vibecycle_core::metrics::FidMode;
use vibecycle_core::training::Direction;

/// Unpaired undamaged/damaged vibration translation with a cycle WGAN-GP.
#[derive(Parser)]
#[command(name = "vibecycle", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an undamaged and a damaged record.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Record length in seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Train the four networks.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Stop this invocation after this many total epochs.
        #[arg(long)]
        max_epochs: Option<usize>,
        /// Resume from a checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Where the gradient penalty is evaluated: interpolate or fake.
        #[arg(long)]
        gp_at: Option<GpAt>,
        #[arg(long)]
        undamaged: Option<PathBuf>,
        #[arg(long)]
        damaged: Option<PathBuf>,
    },
    /// Translate a record with a trained generator.
    Translate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        /// u2d or d2u.
        #[arg(long)]
        direction: Option<Direction>,
    },
    /// Compare a real and a generated record.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        real: Option<PathBuf>,
        #[arg(long)]
        fake: Option<PathBuf>,
        /// univariate or multivariate.
        #[arg(long)]
        fid_mode: Option<FidMode>,
    },
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    check_device(std::env::var("VIBECYCLE_DEVICE").ok().as_deref())?;
    match cli.command {
        Command::Synth { common, seed, duration } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            set(&mut cfg.synth.seed, seed);
            set(&mut cfg.synth.duration_s, duration);
            let m = commands::synth(&cfg.synth, &common.out)?;
            commands::echo_config(&cfg, &common.out)?;
            println!("wrote {} samples per record to {}", m.n_samples, common.out.display());
        }
        Command::Train {
            common,
            seed,
            epochs,
            max_epochs,
            checkpoint,
            gp_at,
            undamaged,
            damaged,
        } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            let t = &mut cfg.train;
            set(&mut t.hyperparams.seed, seed);
            set(&mut t.hyperparams.epochs, epochs);
            set(&mut t.hyperparams.gp_at, gp_at);
            set(&mut t.undamaged, undamaged);
            set(&mut t.damaged, damaged);
            if max_epochs.is_some() {
                t.max_epochs = max_epochs;
            }
            let outcome = commands::train(&cfg.train, &common.out, checkpoint.as_deref())?;
            commands::echo_config(&cfg, &common.out)?;
            println!(
                "trained to epoch {}; checkpoint {}",
                outcome.epochs_completed,
                outcome.checkpoint.display()
            );
        }
        Command::Translate {
            common,
            checkpoint,
            input,
            direction,
        } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            let t = &mut cfg.translate;
            if checkpoint.is_some() {
                t.checkpoint = checkpoint;
            }
            if input.is_some() {
                t.input = input;
            }
            if direction.is_some() {
                t.direction = direction;
            }
            let report = commands::translate(&cfg.translate, &common.out)?;
            println!(
                "wrote {} (cycle L1 {:.6})",
                report.output.display(),
                report.cycle_l1
            );
        }
        Command::Evaluate {
            common,
            real,
            fake,
            fid_mode,
        } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            let e = &mut cfg.evaluate;
            if real.is_some() {
                e.real = real;
            }
            if fake.is_some() {
                e.fake = fake;
            }
            set(&mut e.fid_mode, fid_mode);
            let report = commands::evaluate(&cfg.evaluate, &common.out)?;
            let (real, fake) = (cfg.evaluate.real.unwrap_or_default(), cfg.evaluate.fake.unwrap_or_default());
            print!("{}", commands::metric_table(&report, &commands::pair_label(&real, &fake)));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
