//! `woqt`: batch driver for the weight-only quantization toolkit.

mod analyze;
mod bench;
mod costmodel;
mod quantize;
mod synth;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "woqt",
    version,
    about = "Weight-only quantization: pack, analyze and benchmark weight bundles"
)]
struct Cli {
    /// Worker threads for internal parallelism (default: available cores).
    /// Outputs never depend on this value.
    #[arg(long, global = true, env = "WOQT_THREADS")]
    threads: Option<usize>,

    /// Report format for file outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Quantize selected tensors of a WOQT1 bundle.
    Quantize(quantize::QuantizeArgs),
    /// Expand packed tensors of a bundle back to floats.
    Dequantize(quantize::DequantizeArgs),
    /// Generate a synthetic weight bundle.
    Synth(synth::SynthArgs),
    /// Time the fused kernel against the float reference over m sweeps.
    Bench(bench::BenchArgs),
    /// MSE sweeps, distribution stats, footprints and range diagnostics.
    Analyze(analyze::AnalyzeArgs),
    /// End-to-end latency and node throughput from a latency table.
    Costmodel(costmodel::CostmodelArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::FAILURE;
        }
        // Capping the global pool bounds parallelism for the whole run.
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: failed to configure thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Quantize(args) => quantize::run_quantize(args),
        Command::Dequantize(args) => quantize::run_dequantize(args),
        Command::Synth(args) => synth::run(args),
        Command::Bench(args) => bench::run(args),
        Command::Analyze(args) => analyze::run(args),
        Command::Costmodel(args) => costmodel::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
