use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mossformer2::commands;
use mossformer2::Result;

#[derive(Parser)]
#[command(name = "mossformer2", version, about = "Monaural speech separation on a CPU")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on the synthetic corpus described by a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Split a mono WAV file into one file per source.
    Separate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Build the model from this config instead of the checkpoint's own.
        #[arg(long)]
        config: Option<PathBuf>,
        input: PathBuf,
    },
    /// Score a checkpoint on a corpus manifest (JSON lines on stdout).
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        manifest: PathBuf,
    },
    /// Real-time factor of one separation, with per-component timings.
    BenchRtf {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 4.0)]
        duration: f64,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Per-module parameter counts.
    ParamCount {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, out, seed } => {
            let s = commands::cmd_train(&config, &out, seed)?;
            let last = s.epochs.last();
            println!(
                "{}",
                serde_json::json!({
                    "epochs": s.epochs.len(),
                    "best_epoch": s.best_epoch,
                    "final_loss": last.map(|e| e.loss),
                    "final_si_sdri": last.map(|e| e.si_sdri),
                    "log": s.log,
                    "best_checkpoint": s.best_checkpoint,
                })
            );
        }
        Command::Separate { checkpoint, out, config, input } => {
            for p in commands::cmd_separate(&checkpoint, &input, &out, config.as_deref())? {
                println!("{}", p.display());
            }
        }
        Command::Evaluate { checkpoint, config, manifest } => {
            commands::cmd_evaluate(&checkpoint, &manifest, config.as_deref(), &mut std::io::stdout().lock())?;
        }
        Command::BenchRtf { checkpoint, config, duration, repeats, seed } => {
            let r = commands::cmd_bench_rtf(checkpoint.as_deref(), config.as_deref(), duration, repeats, seed)?;
            println!("{}", serde_json::to_string_pretty(&r).expect("report serialises"));
        }
        Command::ParamCount { config } => print!("{}", commands::cmd_param_count(&config)?.table()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.tag());
            ExitCode::FAILURE
        }
    }
}
