//! `woqt analyze`: MSE sweeps, distribution stats, footprint and range
//! diagnostics, written as CSV files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;

use woqt_core::analysis::{
    footprint, histogram_csv, mse_csv, mse_sweep, range_csv, range_diagnostics, skewness,
    Assignment,
};
use woqt_core::container::load_bundle;
use woqt_core::granularity::policy::{select_tensors, SelectPolicy};
use woqt_core::{Item, LayoutKind};

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Input WOQT1 bundle.
    pub input: PathBuf,

    /// Directory for the CSV reports.
    #[arg(long)]
    pub out_dir: PathBuf,

    /// Bit width used for the MSE sweep and footprint accounting.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u8).range(2..=8))]
    pub bits: u8,

    /// Group sizes for the MSE sweep; "column" means per-column.
    #[arg(long, value_delimiter = ',', default_value = "16,64,column")]
    pub groups: Vec<String>,

    /// Halving levels to tabulate in the range diagnostics.
    #[arg(long, default_value_t = 3)]
    pub levels: usize,

    /// Tag predicate choosing which tensors count as quantized in the
    /// footprint report (others stay fp16).
    #[arg(long, default_value = "all")]
    pub select: String,

    /// Footprint group size (power of two; omit for per-column).
    #[arg(long)]
    pub group: Option<usize>,

    /// Also dump a 256-bin histogram per tensor.
    #[arg(long)]
    pub histograms: bool,
}

pub fn run(args: AnalyzeArgs) -> Result<()> {
    let bundle =
        load_bundle(&args.input).with_context(|| format!("loading {}", args.input.display()))?;
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    let policy = SelectPolicy::parse(&args.select)?;
    let selection = select_tensors(&bundle, &policy);
    for w in &selection.warnings {
        eprintln!("warning: {w}");
    }

    // MSE sweep, skewness and ranges run on the float tensors.
    let mut mse_out = String::from("tensor,group,mse,max_abs_err\n");
    let mut skew_out = String::from("tensor,mean,std,skewness,excess_kurtosis,absmax\n");
    let mut range_out = String::from("tensor,level,group_size,column,group,ratio\n");
    for item in bundle.items() {
        let Item::Float(t) = item else { continue };
        let groups = resolve_groups(&args.groups, t.rows())?;
        match mse_sweep(t, args.bits, &groups) {
            Ok(points) => {
                for line in mse_csv(&points).lines().skip(1) {
                    let _ = writeln!(mse_out, "{},{line}", t.name());
                }
            }
            Err(e) => eprintln!("warning: mse sweep skipped for {}: {e}", t.name()),
        }
        if let Ok(stats) = skewness(t) {
            let _ = writeln!(
                skew_out,
                "{},{},{},{},{},{}",
                t.name(),
                stats.mean,
                stats.std,
                stats.skewness,
                stats.excess_kurtosis,
                stats.absmax
            );
            if args.histograms {
                fs::write(
                    args.out_dir.join(format!("hist-{}.csv", t.name())),
                    histogram_csv(&stats),
                )?;
            }
        }
        for line in range_csv(&range_diagnostics(t, args.levels))
            .lines()
            .skip(1)
        {
            let _ = writeln!(range_out, "{},{line}", t.name());
        }
    }

    // Footprint: selected tensors quantized at --bits, the rest exempt.
    let mut assignments = BTreeMap::new();
    for item in bundle.items() {
        let assigned = if selection.names.iter().any(|n| n == item.name()) {
            match args.group {
                Some(g) => Assignment::Quantized {
                    bits: args.bits,
                    kind: LayoutKind::FixedGroup,
                    group: Some(g),
                },
                None => Assignment::Quantized {
                    bits: args.bits,
                    kind: LayoutKind::PerColumn,
                    group: None,
                },
            }
        } else {
            Assignment::Exempt
        };
        assignments.insert(item.name().to_string(), assigned);
    }
    let report = footprint(&bundle, &assignments)?;
    let mut fp_out = String::from("tensor,fp16_bytes,stored_bytes,exempt\n");
    for t in &report.tensors {
        let _ = writeln!(
            fp_out,
            "{},{},{},{}",
            t.name, t.fp16_bytes, t.stored_bytes, t.exempt
        );
    }
    let _ = writeln!(
        fp_out,
        "TOTAL,{},{},ratio={}",
        report.total_fp16_bytes, report.total_stored_bytes, report.ratio
    );

    fs::write(args.out_dir.join("mse.csv"), mse_out)?;
    fs::write(args.out_dir.join("skew.csv"), skew_out)?;
    fs::write(args.out_dir.join("ranges.csv"), range_out)?;
    fs::write(args.out_dir.join("footprint.csv"), fp_out)?;
    println!(
        "wrote mse.csv, skew.csv, ranges.csv, footprint.csv to {}",
        args.out_dir.display()
    );
    Ok(())
}

fn resolve_groups(specs: &[String], rows: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(specs.len());
    for s in specs {
        if s == "column" {
            out.push(rows);
        } else {
            let g: usize = s.parse().with_context(|| format!("bad group size '{s}'"))?;
            if g > rows {
                bail!("group size {g} exceeds row count {rows}");
            }
            out.push(g);
        }
    }
    Ok(out)
}
