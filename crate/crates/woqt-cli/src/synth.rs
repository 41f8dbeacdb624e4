//! `woqt synth`: generate a toy model bundle of synthetic weight matrices.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;

use woqt_core::container::save_bundle;
use woqt_core::{synth_weights, Distribution, TensorBundle};

#[derive(Args)]
pub struct SynthArgs {
    /// Output WOQT1 bundle.
    pub output: PathBuf,

    /// Number of transformer-style layers to emit.
    #[arg(long, default_value_t = 2)]
    pub layers: usize,

    /// Parts generated per layer; each becomes one tensor tagged
    /// `layer:<i>` and `part:<name>`.
    #[arg(long, value_delimiter = ',', default_value = "ffn1,ffn2,attention")]
    pub parts: Vec<String>,

    /// Rows (reduction dimension K) of every tensor.
    #[arg(long, default_value_t = 128)]
    pub rows: usize,

    /// Columns (output channels N) of every tensor.
    #[arg(long, default_value_t = 128)]
    pub cols: usize,

    /// Distribution: gaussian:MEAN:STD, outliers:MEAN:STD:COUNT:MAGNITUDE,
    /// or skewed:TARGET.
    #[arg(long, default_value = "gaussian:0:0.02")]
    pub dist: String,

    /// Base RNG seed; each tensor derives its own stream from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn parse_distribution(spec: &str) -> Result<Distribution> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| -> Result<f64> {
        s.parse()
            .with_context(|| format!("bad number '{s}' in --dist '{spec}'"))
    };
    match parts.as_slice() {
        ["gaussian", mean, std] => Ok(Distribution::Gaussian {
            mean: num(mean)?,
            std: num(std)?,
        }),
        ["outliers", mean, std, count, mag] => Ok(Distribution::GaussianWithOutliers {
            mean: num(mean)?,
            std: num(std)?,
            outlier_count: count
                .parse()
                .with_context(|| format!("bad count '{count}' in --dist '{spec}'"))?,
            outlier_magnitude: num(mag)?,
        }),
        ["skewed", target] => Ok(Distribution::Skewed {
            skew_target: num(target)?,
        }),
        _ => bail!("unrecognized --dist '{spec}'"),
    }
}

pub fn run(args: SynthArgs) -> Result<()> {
    if args.layers == 0 || args.parts.is_empty() {
        bail!("need at least one layer and one part");
    }
    let dist = parse_distribution(&args.dist)?;
    let mut bundle = TensorBundle::new();
    let mut stream = 0u64;
    for layer in 0..args.layers {
        for part in &args.parts {
            let name = format!("layer{layer}.{part}");
            let t = synth_weights(
                &name,
                args.rows,
                args.cols,
                dist,
                args.seed
                    .wrapping_add(stream.wrapping_mul(0x9E3779B97F4A7C15)),
            )?
            .with_tags([format!("layer:{layer}"), format!("part:{part}")]);
            bundle.push_tensor(t)?;
            stream += 1;
        }
    }
    save_bundle(&bundle, &args.output)
        .with_context(|| format!("writing {}", args.output.display()))?;
    println!(
        "wrote {} tensors ({}x{}) to {}",
        bundle.len(),
        args.rows,
        args.cols,
        args.output.display()
    );
    Ok(())
}
