//! `woqt costmodel`: end-to-end times and node throughput from a latency
//! table.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use woqt_core::cost::{
    builtin_latency_set, end_to_end_time, node_throughput, parse_latency_csv, speedup_report,
    RequestShape,
};

#[derive(Args)]
pub struct CostmodelArgs {
    /// Latency CSV (defaults to the built-in 175B reference table).
    #[arg(long)]
    pub table: Option<PathBuf>,

    /// Precision label to evaluate (e.g. fp16, int8, int4-64).
    #[arg(long)]
    pub precision: String,

    #[arg(long, default_value_t = 1)]
    pub batch: u32,

    #[arg(long)]
    pub input_len: u32,

    #[arg(long)]
    pub output_len: u32,

    /// Model instances served concurrently on the node.
    #[arg(long, default_value_t = 1)]
    pub replicas: u32,

    /// Optional baseline precision for a speedup ratio.
    #[arg(long)]
    pub baseline: Option<String>,

    /// Replicas of the baseline deployment.
    #[arg(long, default_value_t = 1)]
    pub baseline_replicas: u32,
}

pub fn run(args: CostmodelArgs) -> Result<()> {
    let set = match &args.table {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            parse_latency_csv(&text)?
        }
        None => builtin_latency_set(),
    };
    let tbl = set.get(&args.precision)?;
    let ms = end_to_end_time(tbl, args.batch, args.input_len, args.output_len)?;
    let tp = node_throughput(
        tbl,
        args.batch,
        args.input_len,
        args.output_len,
        args.replicas,
    )?;

    println!("table: {} ({} GPUs)", tbl.precision(), tbl.gpus());
    println!(
        "batch={} input_len={} output_len={} replicas={}",
        args.batch, args.input_len, args.output_len, args.replicas
    );
    println!("end_to_end_ms: {ms}");
    println!(
        "tokens_per_sec_per_instance: {:.4}",
        tp.tokens_per_sec_per_instance
    );
    println!(
        "tokens_per_sec_per_node: {:.4} (~{})",
        tp.tokens_per_sec_per_node, tp.rounded_per_node
    );

    if let Some(baseline) = &args.baseline {
        let base = set.get(baseline)?;
        let rows = speedup_report(
            base,
            args.baseline_replicas,
            tbl,
            args.replicas,
            &[RequestShape {
                batch: args.batch,
                input_len: args.input_len,
                output_len: args.output_len,
            }],
        )?;
        println!(
            "speedup_vs_{}: {:.2}x ({:.4} vs {:.4} tokens/sec)",
            baseline, rows[0].ratio, rows[0].other_tokens_per_sec, rows[0].base_tokens_per_sec
        );
    }
    Ok(())
}
