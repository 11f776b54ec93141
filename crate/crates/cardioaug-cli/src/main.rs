//! `cardioaug` — cardiac MRI slice preprocessing, stacked augmentation,
//! postprocessing, and segmentation evaluation.

use clap::{Parser, Subcommand};

use cardioaug_cli::commands::augment::{run_augment, AugmentArgs};
use cardioaug_cli::commands::bench::{run_bench, BenchArgs};
use cardioaug_cli::commands::evaluate::{run_evaluate, EvaluateArgs};
use cardioaug_cli::commands::losscheck::{run_losscheck, LosscheckArgs};
use cardioaug_cli::commands::postprocess::{run_postprocess, PostprocessArgs};
use cardioaug_cli::commands::preprocess::{run_preprocess, PreprocessArgs};

#[derive(Parser)]
#[command(name = "cardioaug", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Denoise, normalize, and crop/pad slices to the canvas size.
    Preprocess(PreprocessArgs),
    /// Sample and apply transform stacks, writing pairs plus replay recipes.
    Augment(AugmentArgs),
    /// Score predictions against ground truth; emit CSV/JSON reports.
    Evaluate(EvaluateArgs),
    /// Remove small connected components from mask volumes.
    Postprocess(PostprocessArgs),
    /// Verify loss values and gradients against independent oracles.
    Losscheck(LosscheckArgs),
    /// Measure augmentation throughput.
    Bench(BenchArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Preprocess(args) => run_preprocess(args),
        Command::Augment(args) => run_augment(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Postprocess(args) => run_postprocess(args),
        Command::Losscheck(args) => run_losscheck(args),
        Command::Bench(args) => run_bench(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(i32::from(err.exit_code()));
    }
}
