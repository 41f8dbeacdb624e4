//! `woqt bench`: fused-kernel sweeps over activation row counts.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;

use woqt_core::gemm::sweep::{bench_sweep, geomean, sweep_csv, SweepConfig, SweepPoint};

#[derive(Args)]
pub struct BenchArgs {
    /// Single-shape K (reduction dimension); pair with --n.
    #[arg(long)]
    pub k: Option<usize>,

    /// Single-shape N (output channels); pair with --k.
    #[arg(long)]
    pub n: Option<usize>,

    /// Multiple shapes as KxN, comma separated (e.g. 4096x4096,2048x8192).
    #[arg(long, value_delimiter = ',')]
    pub shapes: Vec<String>,

    /// Bit width of the packed weights.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u8).range(2..=8))]
    pub bits: u8,

    /// Group size; omit for per-column scales.
    #[arg(long)]
    pub group: Option<usize>,

    /// Activation row counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
    pub m: Vec<usize>,

    /// Timed runs per cell (median is reported).
    #[arg(long, default_value_t = 5)]
    pub runs: usize,

    /// RNG seed for the synthetic weights and activations.
    #[arg(long, default_value_t = 0xC0FFEE)]
    pub seed: u64,

    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_shape(s: &str) -> Result<(usize, usize)> {
    let (k, n) = s
        .split_once(['x', 'X'])
        .with_context(|| format!("shape '{s}' is not KxN"))?;
    Ok((
        k.trim()
            .parse()
            .with_context(|| format!("bad K in '{s}'"))?,
        n.trim()
            .parse()
            .with_context(|| format!("bad N in '{s}'"))?,
    ))
}

pub fn run(args: BenchArgs) -> Result<()> {
    let shapes: Vec<(usize, usize)> = if !args.shapes.is_empty() {
        if args.k.is_some() || args.n.is_some() {
            bail!("use either --shapes or --k/--n, not both");
        }
        args.shapes
            .iter()
            .map(|s| parse_shape(s))
            .collect::<Result<_>>()?
    } else {
        match (args.k, args.n) {
            (Some(k), Some(n)) => vec![(k, n)],
            _ => bail!("missing shape: pass --k and --n, or --shapes KxN[,KxN...]"),
        }
    };
    if args.m.is_empty() {
        bail!("need at least one --m value");
    }

    let mut all_points: Vec<SweepPoint> = Vec::new();
    for &(k, n) in &shapes {
        let cfg = SweepConfig {
            seed: args.seed,
            runs: args.runs.max(1),
            ..SweepConfig::new(k, n, args.bits, args.group, args.m.clone())
        };
        all_points.extend(bench_sweep(&cfg)?);
    }

    let mut csv = sweep_csv(&all_points);
    // Aggregate rows: per m, the geometric mean of per-shape speedups,
    // written with k = n = 0.
    if shapes.len() > 1 {
        for &m in &args.m {
            let speedups: Vec<f64> = all_points
                .iter()
                .filter(|p| p.m == m)
                .map(|p| p.speedup)
                .collect();
            csv.push_str(&format!(
                "{m},0,0,{},0,0.0000,0.0000,{:.4},0,0\n",
                args.bits,
                geomean(&speedups)
            ));
        }
    }

    match &args.out {
        Some(path) => {
            std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            let per_m: Vec<String> = args
                .m
                .iter()
                .map(|&m| {
                    let sp: Vec<f64> = all_points
                        .iter()
                        .filter(|p| p.m == m)
                        .map(|p| p.speedup)
                        .collect();
                    format!("m={m}: {:.2}x", geomean(&sp))
                })
                .collect();
            println!(
                "wrote {} rows to {}",
                csv.lines().count() - 1,
                path.display()
            );
            println!("geomean speedup {}", per_m.join(", "));
        }
        None => print!("{csv}"),
    }
    Ok(())
}
