//! `woqt quantize` and `woqt dequantize`.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};

use woqt_core::analysis::{tensor_report, QuantReport};
use woqt_core::container::{load_bundle, save_bundle};
use woqt_core::granularity::policy::{select_tensors, SelectPolicy};
use woqt_core::granularity::{adapt_group_size, make_layout, AdaptiveReport, DEFAULT_MIN_GROUP};
use woqt_core::{
    dequantize, quantize_linear, quantize_log, Item, LayoutKind, LogScaleMode, TensorBundle,
};

#[derive(Clone, Copy, ValueEnum)]
pub enum MappingArg {
    Linear,
    Log,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum GranularityArg {
    Tensor,
    Column,
    Group,
    Adaptive,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum LogScaleArg {
    Absmax,
    Mse,
}

#[derive(Args)]
pub struct QuantizeArgs {
    /// Input WOQT1 bundle.
    pub input: PathBuf,
    /// Output WOQT1 bundle.
    pub output: PathBuf,

    /// Bit width of the quantized codes.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u8).range(2..=8))]
    pub bits: u8,

    /// Quantization mapping.
    #[arg(long, value_enum, default_value_t = MappingArg::Linear)]
    pub mapping: MappingArg,

    /// Scale granularity.
    #[arg(long, value_enum, default_value_t = GranularityArg::Column)]
    pub granularity: GranularityArg,

    /// Group size for --granularity group (power of two dividing the rows).
    #[arg(long)]
    pub group: Option<usize>,

    /// Range-ratio threshold for --granularity adaptive, in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,

    /// Smallest group size the adaptive search may choose.
    #[arg(long, default_value_t = DEFAULT_MIN_GROUP)]
    pub min_group: usize,

    /// Scale selection for the log mapping.
    #[arg(long, value_enum, default_value_t = LogScaleArg::Mse)]
    pub log_scale: LogScaleArg,

    /// Tag predicate choosing which tensors to quantize (default: all).
    #[arg(long, default_value = "all")]
    pub select: String,
}

fn print_adaptive_report(report: &AdaptiveReport) {
    for lvl in &report.levels {
        println!(
            "adaptive {}: level {} group {} -> {} min_ratio={:.4} max_ratio={:.4} {}",
            report.tensor,
            lvl.level,
            lvl.parent_group,
            lvl.child_group,
            lvl.min_ratio,
            lvl.max_ratio,
            if lvl.halved { "halve" } else { "stop" }
        );
    }
    println!(
        "adaptive {}: resolved group size {} (alpha {}, min group {})",
        report.tensor, report.resolved, report.alpha, report.min_group
    );
}

pub fn run_quantize(args: QuantizeArgs) -> Result<()> {
    let bundle =
        load_bundle(&args.input).with_context(|| format!("loading {}", args.input.display()))?;
    let policy = SelectPolicy::parse(&args.select)?;
    let selection = select_tensors(&bundle, &policy);
    for w in &selection.warnings {
        eprintln!("warning: {w}");
    }

    let mut out = TensorBundle::new();
    let mut rows = Vec::new();
    let mut exempt_bytes = 0u64;
    for item in bundle.items() {
        match item {
            Item::Float(t) if selection.names.iter().any(|n| n == t.name()) => {
                let layout = match args.granularity {
                    GranularityArg::Tensor => {
                        make_layout(LayoutKind::PerTensor, t.rows(), t.cols(), None, 1)?
                    }
                    GranularityArg::Column => {
                        make_layout(LayoutKind::PerColumn, t.rows(), t.cols(), None, 1)?
                    }
                    GranularityArg::Group => {
                        let g = args
                            .group
                            .ok_or_else(|| anyhow::anyhow!("--granularity group needs --group"))?;
                        make_layout(
                            LayoutKind::FixedGroup,
                            t.rows(),
                            t.cols(),
                            Some(g),
                            args.min_group,
                        )?
                    }
                    GranularityArg::Adaptive => {
                        let (layout, report) = adapt_group_size(t, args.alpha, args.min_group)?;
                        print_adaptive_report(&report);
                        layout
                    }
                };
                let q = match args.mapping {
                    MappingArg::Linear => quantize_linear(t, args.bits, layout)?,
                    MappingArg::Log => {
                        let mode = match args.log_scale {
                            LogScaleArg::Absmax => LogScaleMode::AbsMax,
                            LogScaleArg::Mse => LogScaleMode::MseOptimal,
                        };
                        quantize_log(t, args.bits, layout, mode)?
                    }
                };
                rows.push(tensor_report(t, &q)?);
                out.push(Item::Packed(q))?;
            }
            other => {
                exempt_bytes += 2 * (other.rows() * other.cols()) as u64;
                out.push(other.clone())?;
            }
        }
    }

    let report = QuantReport::from_rows(rows, exempt_bytes);
    println!("name bits mapping group mse max_abs_err scale_min scale_max stored_bytes");
    for r in &report.tensors {
        println!(
            "{} {} {} {} {:.6e} {:.6e} {:.6e} {:.6e} {}",
            r.name,
            r.bits,
            r.mapping,
            r.group_size,
            r.mse,
            r.max_abs_err,
            r.scale_min,
            r.scale_max,
            r.stored_bytes
        );
    }
    println!(
        "total: {} fp16-equivalent bytes -> {} stored bytes (ratio {:.6})",
        report.total_fp16_bytes, report.total_stored_bytes, report.ratio
    );

    save_bundle(&out, &args.output)
        .with_context(|| format!("writing {}", args.output.display()))?;
    Ok(())
}

#[derive(Args)]
pub struct DequantizeArgs {
    /// Input WOQT1 bundle (packed or mixed).
    pub input: PathBuf,
    /// Output WOQT1 bundle with every tensor in f32.
    pub output: PathBuf,
}

pub fn run_dequantize(args: DequantizeArgs) -> Result<()> {
    let bundle =
        load_bundle(&args.input).with_context(|| format!("loading {}", args.input.display()))?;
    let mut out = TensorBundle::new();
    let mut expanded = 0usize;
    for item in bundle.items() {
        match item {
            Item::Packed(q) => {
                out.push(Item::Float(dequantize(q)?))?;
                expanded += 1;
            }
            float => out.push(float.clone())?,
        }
    }
    println!("dequantized {expanded} tensors");
    save_bundle(&out, &args.output)
        .with_context(|| format!("writing {}", args.output.display()))?;
    Ok(())
}
