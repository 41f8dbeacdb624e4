//! Matrix multiplication of float activations against quantized weights.
//!
//! [`gemm_ref`] is the float oracle: `C[i,j] = sum_k act[i,k] * w[k,j]` with
//! f32 accumulation in ascending-k order per output element. [`gemm_fused`]
//! computes the same product directly from a [`PackedQuantTensor`]: codes are
//! unpacked group by group along K, rescaled into a single
//! `(group_size x TILE_N)` scratch tile (one scale load per group and
//! column), and accumulated without ever materializing the full float weight
//! matrix. Both kernels accumulate each output element in ascending-k order,
//! so `gemm_fused(a, q)` equals `gemm_ref(a, dequantize(q))` bit for bit.
//!
//! Work is partitioned over disjoint column tiles; each tile owns its slice
//! of the output, so results are independent of the worker count.

#[cfg(target_arch = "x86_64")]
mod simd;
pub mod sweep;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quant::{decode, decode_linear, packing, Mapping, PackedQuantTensor};
use crate::tensor::Tensor;

/// Column-tile width of both kernels.
pub const TILE_N: usize = 16;

/// Activations: `m` rows (batch x sequence) by `k` columns, row-major f32.
#[derive(Debug, Clone, PartialEq)]
pub struct Activation {
    m: usize,
    k: usize,
    data: Vec<f32>,
}

impl Activation {
    pub fn new(m: usize, k: usize, data: Vec<f32>) -> Result<Self> {
        if m == 0 || k == 0 {
            return Err(Error::ShapeMismatch(format!(
                "activation dimensions must be positive, got {m}x{k}"
            )));
        }
        if data.len() != m * k {
            return Err(Error::ShapeMismatch(format!(
                "activation data length {} does not match {m}x{k}",
                data.len()
            )));
        }
        Ok(Self { m, k, data })
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Byte and flop accounting for one GEMM pass. Byte counts are analytic
/// (derived from the layout), never measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GemmStats {
    pub bytes_weights_read: u64,
    pub bytes_scales_read: u64,
    pub bytes_activations_read: u64,
    pub bytes_output_written: u64,
    pub flops: u64,
    pub wall_time: Duration,
}

impl GemmStats {
    /// Analytic traffic of a fused pass over packed weights: packed code
    /// bytes (with per-column padding), f16 scale bytes, one logical pass
    /// over activations and output.
    pub fn fused(q: &PackedQuantTensor, m: usize) -> Self {
        let k = q.rows() as u64;
        let n = q.cols() as u64;
        GemmStats {
            bytes_weights_read: packing::column_bytes(q.rows(), q.scheme().bits()) as u64 * n,
            bytes_scales_read: 2 * q.layout().num_scales() as u64,
            bytes_activations_read: 4 * m as u64 * k,
            bytes_output_written: 4 * m as u64 * n,
            flops: 2 * m as u64 * k * n,
            wall_time: Duration::ZERO,
        }
    }

    /// Analytic traffic of the float reference pass.
    pub fn reference(rows: usize, cols: usize, m: usize) -> Self {
        GemmStats {
            bytes_weights_read: 4 * rows as u64 * cols as u64,
            bytes_scales_read: 0,
            bytes_activations_read: 4 * m as u64 * rows as u64,
            bytes_output_written: 4 * m as u64 * cols as u64,
            flops: 2 * m as u64 * rows as u64 * cols as u64,
            wall_time: Duration::ZERO,
        }
    }

    /// Weight-plus-scale bytes a half-precision copy of the weights would
    /// occupy; the denominator of compression and traffic ratios.
    pub fn fp16_equivalent_bytes(rows: usize, cols: usize) -> u64 {
        2 * rows as u64 * cols as u64
    }
}

/// Peak scratch-tile size (in f32 elements) any fused-GEMM worker allocated
/// for dequantized weights. Instrumentation for the no-materialization
/// contract: the kernel may stage at most one (group_size x TILE_N) tile.
static PEAK_TILE_ELEMS: AtomicUsize = AtomicUsize::new(0);

pub fn peak_dequant_tile_elems() -> usize {
    PEAK_TILE_ELEMS.load(Ordering::Relaxed)
}

pub fn reset_peak_dequant_tile_elems() {
    PEAK_TILE_ELEMS.store(0, Ordering::Relaxed);
}

fn note_tile_alloc(elems: usize) {
    PEAK_TILE_ELEMS.fetch_max(elems, Ordering::Relaxed);
}

/// Float reference GEMM: `C[i,j] = sum_k act[i,k] * w[k,j]`, f32
/// accumulation, k ascending per output element.
///
/// Column partitions are sized so each worker streams wide contiguous spans
/// of the row-major weights; the partition width never changes the
/// per-element accumulation order, so results are identical for any worker
/// count.
pub fn gemm_ref(act: &Activation, w: &Tensor) -> Result<Tensor> {
    if act.k() != w.rows() {
        return Err(Error::ShapeMismatch(format!(
            "activation k={} vs weight rows={}",
            act.k(),
            w.rows()
        )));
    }
    let (m, kk, n) = (act.rows(), act.k(), w.cols());
    let width = ref_partition_width(n);
    let tiles: Vec<(usize, Vec<f32>)> = (0..n)
        .step_by(width)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|j0| {
            let wt = (n - j0).min(width);
            let mut acc = vec![0.0f32; m * wt];
            for k in 0..kk {
                let wrow = &w.data()[k * n + j0..k * n + j0 + wt];
                for i in 0..m {
                    let a = act.data[i * kk + k];
                    let row = &mut acc[i * wt..(i + 1) * wt];
                    for (jj, &wv) in wrow.iter().enumerate() {
                        row[jj] += a * wv;
                    }
                }
            }
            (j0, acc)
        })
        .collect();
    Ok(assemble("gemm", m, n, width, tiles))
}

/// Column span per reference-GEMM worker: a few partitions per thread, at
/// least [`TILE_N`] wide.
fn ref_partition_width(n: usize) -> usize {
    let threads = rayon::current_num_threads().max(1);
    let target = n.div_ceil(4 * threads);
    target.next_multiple_of(TILE_N).max(TILE_N)
}

/// Fused dequantize-GEMM over packed weights, in the kernel's native
/// accumulation order.
///
/// Dispatches to a SIMD kernel for small-m linear int4/int8 shapes where one
/// is available; that path reduces each output in eight lanes down K, so it
/// agrees with `gemm_ref(act, dequantize(q))` to rounding (relative error
/// far below 1e-6) rather than bit for bit. Every other shape runs the
/// matched-order kernel, which is bit-identical to the reference. Use
/// [`gemm_fused_matched`] when bit equality is required.
pub fn gemm_fused(act: &Activation, q: &PackedQuantTensor) -> Result<Tensor> {
    check_fused_shapes(act, q)?;
    #[cfg(target_arch = "x86_64")]
    if let Some(out) = simd::try_gemm_fused(act, q) {
        return Ok(out);
    }
    gemm_fused_tile(act, q)
}

/// Fused dequantize-GEMM with matched accumulation order: each output
/// element accumulates in ascending k, making the result bit-identical to
/// `gemm_ref(act, dequantize(q))`.
pub fn gemm_fused_matched(act: &Activation, q: &PackedQuantTensor) -> Result<Tensor> {
    check_fused_shapes(act, q)?;
    gemm_fused_tile(act, q)
}

fn check_fused_shapes(act: &Activation, q: &PackedQuantTensor) -> Result<()> {
    if act.k() != q.rows() {
        return Err(Error::ShapeMismatch(format!(
            "activation k={} vs weight rows={}",
            act.k(),
            q.rows()
        )));
    }
    Ok(())
}

fn gemm_fused_tile(act: &Activation, q: &PackedQuantTensor) -> Result<Tensor> {
    let (m, kk, n) = (act.rows(), act.k(), q.cols());
    let layout = *q.layout();
    let groups = layout.groups_per_column();
    let max_group = layout.rows_per_group();
    let bits = q.scheme().bits();

    let tiles: Vec<(usize, Vec<f32>)> = (0..n)
        .step_by(TILE_N)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map_init(
            || {
                note_tile_alloc(max_group * TILE_N);
                (vec![0.0f32; max_group * TILE_N], vec![0i8; max_group])
            },
            |(tile, col_codes), j0| {
                let wt = (n - j0).min(TILE_N);
                let mut acc = vec![0.0f32; m * wt];
                for g in 0..groups {
                    let span = layout.group_rows(g);
                    let (r0, r1) = (span.start, span.end);
                    // Decode this group's codes for every tile column: one
                    // scale load per (group, column), elementwise rescale
                    // into the scratch tile.
                    for jj in 0..wt {
                        let j = j0 + jj;
                        let scale = q.scales()[layout.scale_index(g, j)];
                        decode_group_column(q, bits, j, r0, r1, scale, tile, wt, jj, col_codes);
                    }
                    for k in r0..r1 {
                        let trow = &tile[(k - r0) * wt..(k - r0) * wt + wt];
                        for i in 0..m {
                            let a = act.data[i * kk + k];
                            let row = &mut acc[i * wt..(i + 1) * wt];
                            for (jj, &wv) in trow.iter().enumerate() {
                                row[jj] += a * wv;
                            }
                        }
                    }
                }
                (j0, acc)
            },
        )
        .collect();
    Ok(assemble("gemm", m, n, TILE_N, tiles))
}

/// Decode rows `[r0, r1)` of one packed column into the k-major scratch tile
/// at column offset `jj`. Each decoded value is the identical
/// `code as f32 * scale` product [`crate::quant::dequantize`] produces; the
/// 4- and 8-bit paths only avoid re-deriving it per element.
#[allow(clippy::too_many_arguments)]
fn decode_group_column(
    q: &PackedQuantTensor,
    bits: u8,
    j: usize,
    r0: usize,
    r1: usize,
    scale: f32,
    tile: &mut [f32],
    wt: usize,
    jj: usize,
    col_codes: &mut [i8],
) {
    let linear = matches!(q.scheme().mapping(), Mapping::Linear);
    let rows = q.rows();
    let codes = q.codes();
    if linear && bits == 4 && r0.is_multiple_of(2) {
        // Two codes per byte; a 16-entry table caches code*scale.
        let mut lut = [0.0f32; 16];
        for (raw, slot) in lut.iter_mut().enumerate() {
            *slot = decode_linear(packing::sign_extend(raw as u8, 4), scale);
        }
        let base = j * packing::column_bytes(rows, 4) + r0 / 2;
        let full_pairs = (r1 - r0) / 2;
        for p in 0..full_pairs {
            let byte = codes[base + p];
            tile[(2 * p) * wt + jj] = lut[(byte & 0xF) as usize];
            tile[(2 * p + 1) * wt + jj] = lut[(byte >> 4) as usize];
        }
        if (r1 - r0) % 2 == 1 {
            let byte = codes[base + full_pairs];
            tile[(r1 - r0 - 1) * wt + jj] = lut[(byte & 0xF) as usize];
        }
        return;
    }
    if linear && bits == 8 {
        let base = j * rows;
        for (i, k) in (r0..r1).enumerate() {
            tile[i * wt + jj] = decode_linear(codes[base + k] as i8, scale);
        }
        return;
    }
    packing::unpack_column_range(codes, rows, bits, j, r0, r1, col_codes);
    if linear {
        for (i, &c) in col_codes[..r1 - r0].iter().enumerate() {
            tile[i * wt + jj] = decode_linear(c, scale);
        }
    } else {
        for (i, &c) in col_codes[..r1 - r0].iter().enumerate() {
            tile[i * wt + jj] = decode(c, scale, q.scheme());
        }
    }
}

fn assemble(name: &str, m: usize, n: usize, width: usize, tiles: Vec<(usize, Vec<f32>)>) -> Tensor {
    let mut out = vec![0.0f32; m * n];
    for (j0, acc) in tiles {
        let wt = (n - j0).min(width);
        for i in 0..m {
            out[i * n + j0..i * n + j0 + wt].copy_from_slice(&acc[i * wt..(i + 1) * wt]);
        }
    }
    Tensor::new(name, m, n, out).expect("kernel produced non-finite output")
}
