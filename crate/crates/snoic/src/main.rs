use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use snoic::runner::{self, EvalOptions};
use snoic::core::trainer::Ablation;

#[derive(Parser)]
#[command(name = "snoic", version, about = "Open intent classification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
#[allow(clippy::enum_variant_names)]
enum AblationFlag {
    DisableSoftLabeling,
    DisableAdditiveNoise,
    DisableMultiplicativeNoise,
}

fn ratio(s: &str) -> Result<f64, String> {
    let r: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if r > 0.0 && r < 1.0 {
        Ok(r)
    } else {
        Err(format!("{r} is outside (0, 1)"))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Assign intents to known and open classes.
    Split {
        /// Dataset files (JSON Lines); their intents are pooled.
        #[arg(long, required = true, num_args = 1..)]
        data: Vec<PathBuf>,
        #[arg(long, value_parser = ratio)]
        r: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stage 1: pre-train on the known intents.
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        split: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Stage 2: soft labels and noisy mixup from a pre-trained checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        init: PathBuf,
        #[arg(long, value_enum)]
        ablation: Vec<AblationFlag>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a trained model and the threshold baseline on the test role.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, default_value_t = runner::DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Record evaluation wall-clock time in the report.
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate evaluation reports into CSV and JSON tables.
    Report {
        /// Glob pattern of report files.
        #[arg(long)]
        inputs: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a templated synthetic corpus as train/val/test files.
    Synth {
        #[arg(long, default_value_t = 8)]
        classes: usize,
        #[arg(long, default_value_t = 200)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> snoic::Result<()> {
    match cli.command {
        Command::Split { data, r, seed, out } => {
            let spec = runner::cmd_split(&data, r, seed, &out)?;
            println!("{} known, {} open -> {}", spec.known.len(), spec.open.len(), out.display());
        }
        Command::Pretrain { config, split, out } => {
            runner::cmd_pretrain(&config, &split, &out)?;
            println!("wrote {}", out.join(runner::PRETRAINED_FILE).display());
        }
        Command::Train { config, split, init, ablation, out } => {
            let mut a = Ablation::default();
            for flag in ablation {
                match flag {
                    AblationFlag::DisableSoftLabeling => a.disable_soft_labeling = true,
                    AblationFlag::DisableAdditiveNoise => a.disable_additive_noise = true,
                    AblationFlag::DisableMultiplicativeNoise => a.disable_multiplicative_noise = true,
                }
            }
            let ckpt = runner::cmd_train(&config, &split, &init, a, &out)?;
            let variant = ckpt.run.map(|r| r.variant).unwrap_or_default();
            println!("wrote {} ({variant})", out.join(runner::MODEL_FILE).display());
        }
        Command::Eval { model, split, test, threshold, timing, out } => {
            let opts = EvalOptions { test, threshold, timing, ..EvalOptions::default() };
            let rep = runner::cmd_eval(&model, &split, &opts, &out)?;
            println!(
                "accuracy {:.4}  f1_all {:.4}  f1_known {:.4}  f1_open {:.4}",
                rep.model.accuracy, rep.model.f1_all, rep.model.f1_known, rep.model.f1_open
            );
        }
        Command::Report { inputs, out } => {
            let rows = runner::cmd_report(&inputs, &out)?;
            println!("{} rows -> {}", rows.len(), out.display());
        }
        Command::Synth { classes, per_class, seed, out } => {
            let [train, val, test] = runner::cmd_synth(classes, per_class, seed, &out)?;
            println!("{} / {} / {} examples -> {}", train.len(), val.len(), test.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
