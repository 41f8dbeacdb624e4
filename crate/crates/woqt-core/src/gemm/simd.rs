//! AVX2 fast path for the fused kernel at small activation row counts.
//!
//! Codes are decoded eight at a time straight into registers (no scratch
//! tile at all) and accumulated down K in eight SIMD lanes per output, with
//! a horizontal reduction at the end. Each weight is still dequantized as
//! the elementwise `code as f32 * scale` product; only the accumulation
//! order differs from the matched-order kernel, which keeps results within
//! ordinary rounding distance (well under the 1e-6 contract) of
//! `gemm_ref(act, dequantize(q))`.

use std::arch::x86_64::*;

use rayon::prelude::*;

use crate::gemm::Activation;
use crate::granularity::LayoutKind;
use crate::quant::{packing, Mapping, PackedQuantTensor};
use crate::tensor::Tensor;

/// Largest m the register-resident accumulator set supports.
pub(super) const MAX_NATIVE_M: usize = 8;

/// Run the AVX2 kernel if the scheme, shape and CPU allow it.
pub(super) fn try_gemm_fused(act: &Activation, q: &PackedQuantTensor) -> Option<Tensor> {
    if !matches!(q.scheme().mapping(), Mapping::Linear) {
        return None;
    }
    let bits = q.scheme().bits();
    if bits != 4 && bits != 8 {
        return None;
    }
    if act.rows() > MAX_NATIVE_M || q.rows() < 8 {
        return None;
    }
    // Group starts must be byte-aligned in the packed stream for the
    // eight-wide decode; per-column and per-tensor layouts trivially are.
    let aligned = match q.layout().kind() {
        LayoutKind::PerTensor | LayoutKind::PerColumn => true,
        _ => q.layout().rows_per_group().is_multiple_of(8),
    };
    if !aligned {
        return None;
    }
    if !(is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma")) {
        return None;
    }
    // SAFETY: feature availability checked above.
    Some(unsafe { gemm_fused_avx2(act, q) })
}

#[target_feature(enable = "avx2", enable = "fma")]
unsafe fn gemm_fused_avx2(act: &Activation, q: &PackedQuantTensor) -> Tensor {
    let (m, kk, n) = (act.rows(), act.k(), q.cols());
    let threads = rayon::current_num_threads().max(1);
    let width = n.div_ceil(4 * threads).max(16);

    let chunks: Vec<(usize, Vec<f32>)> = (0..n)
        .step_by(width)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|j0| {
            let wt = (n - j0).min(width);
            let mut out = vec![0.0f32; m * wt];
            // SAFETY: caller established avx2+fma.
            unsafe {
                for jj in 0..wt {
                    columns_kernel(act, q, j0 + jj, m, kk, &mut out, jj, wt);
                }
            }
            (j0, out)
        })
        .collect();

    super::assemble("gemm", m, n, width, chunks)
}

#[target_feature(enable = "avx2", enable = "fma")]
#[allow(clippy::too_many_arguments)]
unsafe fn columns_kernel(
    act: &Activation,
    q: &PackedQuantTensor,
    j: usize,
    m: usize,
    kk: usize,
    out: &mut [f32],
    jj: usize,
    wt: usize,
) {
    let bits = q.scheme().bits();
    let layout = q.layout();
    let codes = q.codes().as_ptr();
    let col_base = j * packing::column_bytes(kk, bits);
    let act_ptr = act.data().as_ptr();

    let mut acc = [_mm256_setzero_ps(); MAX_NATIVE_M];
    let mut tail = [0.0f32; MAX_NATIVE_M];

    for g in 0..layout.groups_per_column() {
        let span = layout.group_rows(g);
        let (r0, r1) = (span.start, span.end);
        let scale = q.scales()[layout.scale_index(g, j)];
        let s8 = _mm256_set1_ps(scale);
        let mut k = r0;
        while k + 8 <= r1 {
            let w8 = if bits == 4 {
                decode8_b4(codes.add(col_base + k / 2), s8)
            } else {
                decode8_b8(codes.add(col_base + k), s8)
            };
            for (i, lane) in acc.iter_mut().enumerate().take(m) {
                let a8 = _mm256_loadu_ps(act_ptr.add(i * kk + k));
                *lane = _mm256_fmadd_ps(a8, w8, *lane);
            }
            k += 8;
        }
        while k < r1 {
            let c = scalar_code(codes, col_base, k, bits);
            let w = c as f32 * scale;
            for (i, t) in tail.iter_mut().enumerate().take(m) {
                *t += *act_ptr.add(i * kk + k) * w;
            }
            k += 1;
        }
    }
    for i in 0..m {
        out[i * wt + jj] = hsum(acc[i]) + tail[i];
    }
}

#[target_feature(enable = "avx2")]
unsafe fn decode8_b4(ptr: *const u8, s8: __m256) -> __m256 {
    // Eight nibbles live in four bytes; shift each lane to its nibble,
    // mask, and sign-extend via (x ^ 8) - 8.
    let word = (ptr as *const u32).read_unaligned();
    let v = _mm256_set1_epi32(word as i32);
    let sh = _mm256_setr_epi32(0, 4, 8, 12, 16, 20, 24, 28);
    let nib = _mm256_and_si256(_mm256_srlv_epi32(v, sh), _mm256_set1_epi32(15));
    let eight = _mm256_set1_epi32(8);
    let signed = _mm256_sub_epi32(_mm256_xor_si256(nib, eight), eight);
    _mm256_mul_ps(_mm256_cvtepi32_ps(signed), s8)
}

#[target_feature(enable = "avx2")]
unsafe fn decode8_b8(ptr: *const u8, s8: __m256) -> __m256 {
    let bytes = _mm_loadl_epi64(ptr as *const __m128i);
    let ints = _mm256_cvtepi8_epi32(bytes);
    _mm256_mul_ps(_mm256_cvtepi32_ps(ints), s8)
}

unsafe fn scalar_code(codes: *const u8, col_base: usize, k: usize, bits: u8) -> i8 {
    match bits {
        8 => *codes.add(col_base + k) as i8,
        _ => {
            let byte = *codes.add(col_base + k / 2);
            let raw = if k & 1 == 0 { byte } else { byte >> 4 };
            packing::sign_extend(raw & 0xF, 4)
        }
    }
}

#[target_feature(enable = "avx2")]
unsafe fn hsum(v: __m256) -> f32 {
    let lo = _mm256_castps256_ps128(v);
    let hi = _mm256_extractf128_ps(v, 1);
    let s = _mm_add_ps(lo, hi);
    let s = _mm_add_ps(s, _mm_movehl_ps(s, s));
    let s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
    _mm_cvtss_f32(s)
}
