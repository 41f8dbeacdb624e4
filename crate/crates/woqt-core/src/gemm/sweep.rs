//! Timed sweeps of the fused kernel against the float reference.
//!
//! Each (m, shape) cell reports the median of several timed runs after a
//! couple of warm-ups. Byte counts come from the layout arithmetic, not
//! measurement; wall-clock speedups are machine-dependent and are reported,
//! never asserted.

use std::hint::black_box;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::gemm::{gemm_fused, gemm_ref, Activation, GemmStats};
use crate::granularity::{make_layout, GroupLayout, LayoutKind};
use crate::quant::{dequantize, quantize_linear};
use crate::synth::{synth_weights, Distribution};

/// One row of a sweep: a single (m, K, N, bits, group) cell.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub bits: u8,
    /// Effective group size; equals `k` for per-column quantization.
    pub group: usize,
    pub fused_ms: f64,
    pub ref_ms: f64,
    pub speedup: f64,
    pub stats: GemmStats,
}

/// Sweep configuration. `group = None` selects per-column scales.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub k: usize,
    pub n: usize,
    pub bits: u8,
    pub group: Option<usize>,
    pub m_values: Vec<usize>,
    pub seed: u64,
    pub warmups: usize,
    pub runs: usize,
}

impl SweepConfig {
    pub fn new(k: usize, n: usize, bits: u8, group: Option<usize>, m_values: Vec<usize>) -> Self {
        Self {
            k,
            n,
            bits,
            group,
            m_values,
            seed: 0xC0FFEE,
            warmups: 2,
            runs: 5,
        }
    }
}

fn median(mut times: Vec<f64>) -> f64 {
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = times.len();
    if n % 2 == 1 {
        times[n / 2]
    } else {
        0.5 * (times[n / 2 - 1] + times[n / 2])
    }
}

fn time_ms<T>(warmups: usize, runs: usize, mut f: impl FnMut() -> T) -> f64 {
    for _ in 0..warmups {
        black_box(f());
    }
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        black_box(f());
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    median(times)
}

/// Run the sweep: quantize one synthetic weight matrix, then time the fused
/// and reference kernels for every requested activation row count.
pub fn bench_sweep(cfg: &SweepConfig) -> Result<Vec<SweepPoint>> {
    if cfg.m_values.is_empty() {
        return Err(Error::Validation("sweep needs at least one m value".into()));
    }
    if cfg.runs < 1 {
        return Err(Error::Validation(
            "sweep needs at least one timed run".into(),
        ));
    }
    let w = synth_weights(
        "bench",
        cfg.k,
        cfg.n,
        Distribution::Gaussian {
            mean: 0.0,
            std: 0.5,
        },
        cfg.seed,
    )?;
    let layout = match cfg.group {
        Some(g) if g != cfg.k => make_layout(LayoutKind::FixedGroup, cfg.k, cfg.n, Some(g), 16)?,
        _ => GroupLayout::per_column(cfg.k, cfg.n),
    };
    let q = quantize_linear(&w, cfg.bits, layout)?;
    // The reference multiplies the dequantized weights, mirroring an fp16
    // baseline that keeps full-precision weights resident.
    let wf = dequantize(&q)?;

    let mut points = Vec::with_capacity(cfg.m_values.len());
    for &m in &cfg.m_values {
        let act = synth_weights(
            "act",
            m,
            cfg.k,
            Distribution::Gaussian {
                mean: 0.0,
                std: 1.0,
            },
            cfg.seed ^ (m as u64).wrapping_mul(0x9E3779B97F4A7C15),
        )?;
        let act = Activation::new(m, cfg.k, act.data().to_vec())?;

        let fused_ms = time_ms(cfg.warmups, cfg.runs, || gemm_fused(&act, &q).unwrap());
        let ref_ms = time_ms(cfg.warmups, cfg.runs, || gemm_ref(&act, &wf).unwrap());

        let mut stats = GemmStats::fused(&q, m);
        stats.wall_time = std::time::Duration::from_secs_f64(fused_ms / 1e3);
        points.push(SweepPoint {
            m,
            k: cfg.k,
            n: cfg.n,
            bits: cfg.bits,
            group: layout.rows_per_group(),
            fused_ms,
            ref_ms,
            speedup: ref_ms / fused_ms,
            stats,
        });
    }
    Ok(points)
}

pub const SWEEP_CSV_HEADER: &str =
    "m,k,n,bits,group,fused_ms,ref_ms,speedup,weight_bytes,scale_bytes";

/// Render sweep rows as CSV (header included).
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{:.4},{:.4},{:.4},{},{}\n",
            p.m,
            p.k,
            p.n,
            p.bits,
            p.group,
            p.fused_ms,
            p.ref_ms,
            p.speedup,
            p.stats.bytes_weights_read,
            p.stats.bytes_scales_read
        ));
    }
    out
}

/// Geometric mean of positive values.
pub fn geomean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp()
}
