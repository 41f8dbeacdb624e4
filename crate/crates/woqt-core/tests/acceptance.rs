//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them). The tests share a
//! lock so timing-sensitive criteria are never measured while other
//! criteria hammer the cores.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use woqt_core::analysis::{footprint, mse_sweep, Assignment};
use woqt_core::container::{decode_bundle, encode_bundle};
use woqt_core::cost::{builtin_latency_set, node_throughput, speedup_report, RequestShape};
use woqt_core::gemm::sweep::{bench_sweep, SweepConfig};
use woqt_core::gemm::{gemm_fused, gemm_fused_matched, gemm_ref, Activation, GemmStats};
use woqt_core::quant::packing::{pack_codes, unpack_codes};
use woqt_core::{
    adapt_group_size, dequantize, make_layout, quantize_linear, quantize_log, synth_weights,
    Distribution, GroupLayout, Item, LayoutKind, LogScaleMode, Tensor,
};

static GATE: Mutex<()> = Mutex::new(());

fn criterion(n: usize, label: &str, budget: Duration, body: impl FnOnce() -> String) {
    let _guard = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let detail = body();
    let elapsed = start.elapsed();
    println!(
        "criterion {n} ({label}): PASS in {:.2}s{}{}",
        elapsed.as_secs_f64(),
        if detail.is_empty() { "" } else { ": " },
        detail
    );
    assert!(
        elapsed < budget,
        "criterion {n} exceeded its runtime budget: {elapsed:?} > {budget:?}"
    );
}

fn gaussian(name: &str, rows: usize, cols: usize, seed: u64) -> Tensor {
    synth_weights(
        name,
        rows,
        cols,
        Distribution::Gaussian {
            mean: 0.0,
            std: 0.5,
        },
        seed,
    )
    .unwrap()
}

fn outlier(name: &str, rows: usize, cols: usize, seed: u64) -> Tensor {
    synth_weights(
        name,
        rows,
        cols,
        Distribution::GaussianWithOutliers {
            mean: 0.0,
            std: 0.01,
            outlier_count: 1,
            outlier_magnitude: 1.0,
        },
        seed,
    )
    .unwrap()
}

/// Criterion 1: per-element error bound and code ranges over 1,000 random
/// tensors at every granularity, plus the hand-computed mapping fixtures.
#[test]
fn criterion_1_quantization_oracle_suite() {
    criterion(
        1,
        "quantization oracle suite",
        Duration::from_secs(60),
        || {
            // Hand-computed fixtures, at 1e-5.
            let col = Tensor::new("c", 4, 1, vec![1.0, -2.0, 3.0, -4.0]).unwrap();
            let q = quantize_linear(&col, 4, GroupLayout::per_column(4, 1)).unwrap();
            assert_eq!(q.unpacked_codes().unwrap(), vec![2, -4, 6, -8]);
            assert!((q.scales()[0] as f64 - 8.0 / 15.0).abs() < 1e-5);
            let back = q.dequantize().unwrap();
            for (got, want) in
                back.data()
                    .iter()
                    .zip([16.0 / 15.0, -32.0 / 15.0, 3.2, -64.0 / 15.0])
            {
                assert!((*got as f64 - want).abs() < 1e-5);
            }
            let logt = Tensor::new("l", 3, 1, vec![1.0, 0.5, 0.3]).unwrap();
            let ql = quantize_log(
                &logt,
                3,
                GroupLayout::per_column(3, 1),
                LogScaleMode::AbsMax,
            )
            .unwrap();
            for (got, want) in ql.dequantize().unwrap().data().iter().zip([1.0, 0.5, 0.25]) {
                assert!((*got as f64 - want).abs() < 1e-5);
            }

            let mut rng = StdRng::seed_from_u64(1);
            let pow2_rows = [16usize, 32, 64, 128, 256];
            let bit_cycle = [2u8, 3, 4, 8];
            let mut checked_elems = 0u64;
            for case in 0..1000usize {
                let bits = bit_cycle[case % 4];
                let rows = pow2_rows[rng.random_range(0..pow2_rows.len())];
                let cols = rng.random_range(1..=64usize).min(256);
                let tensor = match case % 5 {
                    0 => outlier("t", rows, cols, case as u64),
                    4 => Tensor::new("t", rows, cols, vec![0.0; rows * cols]).unwrap(),
                    _ => gaussian("t", rows, cols, case as u64),
                };
                let layout = match case % 4 {
                    0 => GroupLayout::per_tensor(rows, cols),
                    1 => GroupLayout::per_column(rows, cols),
                    2 => {
                        let choices: Vec<usize> = [16usize, 32, 64, 128, 256]
                            .iter()
                            .copied()
                            .filter(|g| *g <= rows)
                            .collect();
                        let g = choices[rng.random_range(0..choices.len())];
                        make_layout(LayoutKind::FixedGroup, rows, cols, Some(g), 16).unwrap()
                    }
                    _ => {
                        let alpha = [0.2, 0.5, 0.8][case % 3];
                        adapt_group_size(&tensor, alpha, 16).unwrap().0
                    }
                };
                let q = quantize_linear(&tensor, bits, layout).unwrap();
                let back = dequantize(&q).unwrap();
                let codes = q.unpacked_codes().unwrap();
                let (lo, hi) = (q.scheme().clamp_lo(), q.scheme().clamp_hi());
                // f32 slack: storing the scale and the code*scale product each
                // round once, shifting the grid by O(eps * 2^(b-1) * s).
                let f32_slack = (1i64 << (bits - 1)) as f64 * 3e-7;
                for j in 0..cols {
                    for k in 0..rows {
                        let c = codes[j * rows + k] as i32;
                        assert!(c >= lo && c <= hi, "code {c} out of range at b={bits}");
                        let s = q.scale_at(k, j) as f64;
                        let err = (tensor.get(k, j) as f64 - back.get(k, j) as f64).abs();
                        assert!(
                            err <= s / 2.0 + s * f32_slack + 1e-12,
                            "case {case}: err {err} vs s/2 {} (b={bits})",
                            s / 2.0
                        );
                        if s == 0.0 {
                            assert_eq!(c, 0);
                        }
                    }
                }
                checked_elems += (rows * cols) as u64;
            }
            format!("1000 tensors, {checked_elems} elements within s/2")
        },
    );
}

/// Criterion 2: the fused kernel against dequantize-then-reference, bit
/// exact in matched order and <= 1e-6 relative Frobenius in native order.
#[test]
fn criterion_2_fused_gemm_equivalence() {
    criterion(
        2,
        "fused GEMM equivalence",
        Duration::from_secs(120),
        || {
            let mut rng = StdRng::seed_from_u64(2);
            let mut cases = 0usize;
            let mut max_rel = 0.0f64;
            while cases < 200 {
                let bits = if cases.is_multiple_of(2) { 4u8 } else { 8u8 };
                let group = [Some(16usize), Some(64), None][cases % 3];
                let k = match group {
                    Some(g) => g * rng.random_range(1..=1024 / g),
                    None => rng.random_range(8..=1024usize),
                };
                let n = rng.random_range(1..=1024usize);
                let m = rng.random_range(1..=32usize);
                if m * k * n > 40_000_000 {
                    continue;
                }
                let w = gaussian("w", k, n, 1000 + cases as u64);
                let layout = match group {
                    Some(g) => make_layout(LayoutKind::FixedGroup, k, n, Some(g), 16).unwrap(),
                    None => GroupLayout::per_column(k, n),
                };
                let q = quantize_linear(&w, bits, layout).unwrap();
                let a = gaussian("a", m, k, 2000 + cases as u64);
                let act = Activation::new(m, k, a.data().to_vec()).unwrap();

                let reference = gemm_ref(&act, &dequantize(&q).unwrap()).unwrap();
                let matched = gemm_fused_matched(&act, &q).unwrap();
                assert_eq!(
                    matched.data(),
                    reference.data(),
                    "matched order diverged at case {cases} (m={m} k={k} n={n} b={bits})"
                );

                let native = gemm_fused(&act, &q).unwrap();
                let mut num = 0.0f64;
                let mut den = 0.0f64;
                for (x, y) in native.data().iter().zip(reference.data()) {
                    num += (*x as f64 - *y as f64).powi(2);
                    den += (*y as f64).powi(2);
                }
                let rel = (num / den.max(1e-300)).sqrt();
                assert!(rel <= 1e-6, "native order error {rel} at case {cases}");
                max_rel = max_rel.max(rel);
                cases += 1;
            }
            format!("200 cases bit-exact (matched); native max rel err {max_rel:.2e}")
        },
    );
}

/// Criterion 3: the analytic traffic law, in exact integer arithmetic.
#[test]
fn criterion_3_traffic_law() {
    criterion(3, "traffic law", Duration::from_secs(30), || {
        for (k, n) in [(4096usize, 4096usize), (64, 1), (1024, 640), (7168, 16)] {
            let w = gaussian("w", k, n, 3);
            let q4 = quantize_linear(
                &w,
                4,
                make_layout(LayoutKind::FixedGroup, k, n, Some(64), 16).unwrap(),
            )
            .unwrap();
            let s4 = GemmStats::fused(&q4, 1);
            let fp16 = GemmStats::fp16_equivalent_bytes(k, n);
            // (weight + scale bytes) * 64 == 17 * fp16 bytes <=> ratio 17/64.
            assert_eq!(
                64 * (s4.bytes_weights_read + s4.bytes_scales_read),
                17 * fp16,
                "int4/64 traffic law failed at {k}x{n}"
            );

            let q8 = quantize_linear(&w, 8, GroupLayout::per_column(k, n)).unwrap();
            let s8 = GemmStats::fused(&q8, 1);
            assert_eq!(s8.bytes_weights_read, fp16 / 2);
            assert_eq!(s8.bytes_scales_read, 2 * n as u64);
        }
        "0.265625x for int4/64 and 0.5 + one scale row for int8/column".to_string()
    });
}

/// Criterion 4 (soft, reported not gated): measured fused-vs-reference
/// speedup in the memory-bound regime.
#[test]
fn criterion_4_memory_bound_speedup_reported() {
    let _guard = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let cfg = SweepConfig {
        runs: 9,
        ..SweepConfig::new(4096, 4096, 4, Some(64), vec![1, 2, 4])
    };
    let points = bench_sweep(&cfg).unwrap();
    let detail: Vec<String> = points
        .iter()
        .map(|p| format!("m={}: {:.2}x", p.m, p.speedup))
        .collect();
    let all_above = points.iter().all(|p| p.speedup > 1.3);
    println!(
        "criterion 4 (memory-bound speedup, soft): {} in {:.2}s: {} (soft target >1.3x; hard gate is criterion 3)",
        if all_above { "PASS" } else { "REPORTED BELOW TARGET" },
        start.elapsed().as_secs_f64(),
        detail.join(", ")
    );
}

/// Independent re-implementation of the halving rule for criterion 5.
fn oracle_resolved(t: &Tensor, alpha: f64, min_group: usize) -> usize {
    let rows = t.rows();
    let range = |col: usize, lo: usize, hi: usize| -> f64 {
        (lo..hi).fold(0.0f64, |m, k| m.max(t.get(k, col).abs() as f64))
    };
    let mut size = rows;
    loop {
        let child = if size == rows && !rows.is_power_of_two() {
            rows.next_power_of_two() >> 1
        } else {
            size >> 1
        };
        if child < min_group || child == 0 {
            return size;
        }
        let mut min_ratio = f64::INFINITY;
        for j in 0..t.cols() {
            for c in 0..rows.div_ceil(child) {
                let lo = c * child;
                let hi = ((c + 1) * child).min(rows);
                let plo = (lo / size) * size;
                let phi = (plo + size).min(rows);
                let rp = range(j, plo, phi);
                let ratio = if rp == 0.0 {
                    1.0
                } else {
                    range(j, lo, hi) / rp
                };
                min_ratio = min_ratio.min(ratio);
            }
        }
        if min_ratio < alpha {
            size = child;
        } else {
            return size;
        }
    }
}

/// Criterion 5: adaptive heuristic behavior on the planted-outlier and pure
/// Gaussian fixtures, with alpha monotonicity, against the exhaustive oracle.
#[test]
fn criterion_5_adaptive_heuristic() {
    criterion(5, "adaptive heuristic", Duration::from_secs(30), || {
        let alphas = [0.2, 0.5, 0.8, 0.95];
        let dirty = outlier("dirty", 128, 8, 11);
        let mut prev = usize::MAX;
        for &alpha in &alphas {
            let (layout, report) = adapt_group_size(&dirty, alpha, 16).unwrap();
            assert!(
                report.resolved < 128,
                "alpha {alpha}: planted outlier must refine below per-column"
            );
            assert_eq!(report.resolved, oracle_resolved(&dirty, alpha, 16));
            assert_eq!(layout.rows_per_group(), report.resolved);
            assert!(report.resolved <= prev, "alpha monotonicity violated");
            prev = report.resolved;

            // Scale-shrink witness: each accepted halving has a child whose
            // linear-quantization scale is below alpha times its parent's.
            let mut parent_size = 128usize;
            for lvl in report.levels.iter().filter(|l| l.halved) {
                let parent_layout =
                    make_layout(LayoutKind::FixedGroup, 128, 8, Some(parent_size), 16)
                        .or_else(|_| make_layout(LayoutKind::PerColumn, 128, 8, None, 16))
                        .unwrap();
                let child_layout =
                    make_layout(LayoutKind::FixedGroup, 128, 8, Some(lvl.child_group), 16).unwrap();
                let qp = quantize_linear(&dirty, 4, parent_layout).unwrap();
                let qc = quantize_linear(&dirty, 4, child_layout).unwrap();
                let witness = qc.scales().iter().enumerate().any(|(idx, &sc)| {
                    let g = idx / 8;
                    let j = idx % 8;
                    let pg = g * lvl.child_group / parent_size;
                    let sp = qp.scales()[pg * 8 + j];
                    sp > 0.0 && (sc as f64) < alpha * sp as f64
                });
                assert!(witness, "no scale-shrink witness at level {}", lvl.level);
                parent_size = lvl.child_group;
            }
        }

        let clean = gaussian("clean", 128, 8, 7);
        let (_, report) = adapt_group_size(&clean, 0.5, 16).unwrap();
        assert_eq!(report.resolved, 128, "pure gaussian must stay per-column");
        assert_eq!(oracle_resolved(&clean, 0.5, 16), 128);

        // Monotonicity on a mixed fixture where resolution actually varies.
        let mild = synth_weights(
            "m",
            128,
            8,
            Distribution::GaussianWithOutliers {
                mean: 0.0,
                std: 0.01,
                outlier_count: 1,
                outlier_magnitude: 0.1,
            },
            13,
        )
        .unwrap();
        let mut prev = usize::MAX;
        for &alpha in &alphas {
            let (_, r) = adapt_group_size(&mild, alpha, 16).unwrap();
            assert_eq!(r.resolved, oracle_resolved(&mild, alpha, 16));
            assert!(r.resolved <= prev);
            prev = r.resolved;
        }
        "outlier refines, gaussian stays, alpha monotone, oracle agrees".to_string()
    });
}

/// Criterion 6: MSE monotone in group size on 100 outlier-bearing tensors,
/// with child scales never above parent scales.
#[test]
fn criterion_6_mse_monotonicity() {
    criterion(6, "MSE monotonicity", Duration::from_secs(60), || {
        let rows = 512usize;
        let cols = 8usize;
        for seed in 0..100u64 {
            let t = synth_weights(
                "t",
                rows,
                cols,
                Distribution::GaussianWithOutliers {
                    mean: 0.0,
                    std: 0.02,
                    outlier_count: 2,
                    outlier_magnitude: 2.0,
                },
                seed,
            )
            .unwrap();
            let pts = mse_sweep(&t, 4, &[16, 64, 256, rows]).unwrap();
            for w in pts.windows(2) {
                assert!(
                    w[0].mse <= w[1].mse,
                    "seed {seed}: mse({}) {} > mse({}) {}",
                    w[0].group_size,
                    w[0].mse,
                    w[1].group_size,
                    w[1].mse
                );
                assert!(
                    w[0].max_abs_err <= w[1].max_abs_err * (1.0 + 1e-9) + 1e-12,
                    "seed {seed}: max_abs_err not monotone"
                );
            }
            // Child scales <= parent scales, exactly, for nested layouts.
            let layouts = [16usize, 64, 256, rows];
            let quants: Vec<_> = layouts
                .iter()
                .map(|&g| {
                    let layout = if g == rows {
                        GroupLayout::per_column(rows, cols)
                    } else {
                        make_layout(LayoutKind::FixedGroup, rows, cols, Some(g), 16).unwrap()
                    };
                    quantize_linear(&t, 4, layout).unwrap()
                })
                .collect();
            for lvl in 0..layouts.len() - 1 {
                let (child_g, parent_g) = (layouts[lvl], layouts[lvl + 1]);
                let ratio = parent_g / child_g;
                let child = &quants[lvl];
                let parent = &quants[lvl + 1];
                for (idx, &sc) in child.scales().iter().enumerate() {
                    let g = idx / cols;
                    let j = idx % cols;
                    let sp = parent.scales()[(g / ratio) * cols + j];
                    assert!(sc <= sp, "seed {seed}: child scale {sc} > parent {sp}");
                }
            }
        }
        "mse(16) <= mse(64) <= mse(256) <= mse(column) on 100 tensors".to_string()
    });
}

/// Criterion 7: reconstruct all 18 node-throughput cells from the shipped
/// latency table, each within +/-1 token/sec of the published integers.
#[test]
fn criterion_7_cost_model_regression() {
    criterion(7, "cost model regression", Duration::from_secs(1), || {
        let set = builtin_latency_set();
        let shapes = [
            (128u32, 32u32),
            (128, 128),
            (512, 32),
            (512, 128),
            (1024, 32),
            (1024, 128),
        ];
        let published: &[(&str, u32, [f64; 6])] = &[
            ("fp16", 1, [24.0, 25.0, 21.0, 23.0, 20.0, 23.0]),
            ("int8", 2, [49.0, 52.0, 41.0, 47.0, 37.0, 47.0]),
            ("int4-64", 4, [85.0, 91.0, 69.0, 84.0, 57.0, 79.0]),
        ];
        for (precision, replicas, expected) in published {
            let tbl = set.get(precision).unwrap();
            for (i, &(input, output)) in shapes.iter().enumerate() {
                let tp = node_throughput(tbl, 1, input, output, *replicas).unwrap();
                let diff = (tp.tokens_per_sec_per_node - expected[i]).abs();
                assert!(
                    diff <= 1.0,
                    "{precision} ({input},{output}): {} vs published {} (diff {diff})",
                    tp.tokens_per_sec_per_node,
                    expected[i]
                );
            }
        }
        let shape = [RequestShape {
            batch: 1,
            input_len: 512,
            output_len: 128,
        }];
        let fp16 = set.get("fp16").unwrap();
        let r8 = speedup_report(fp16, 1, set.get("int8").unwrap(), 2, &shape).unwrap()[0].ratio;
        let r4 = speedup_report(fp16, 1, set.get("int4-64").unwrap(), 4, &shape).unwrap()[0].ratio;
        assert!((r8 - 2.04).abs() <= 0.05, "int8 speedup {r8}");
        assert!((r4 - 3.65).abs() <= 0.05, "int4 speedup {r4}");
        format!("18/18 cells within 1 tok/s; (512,128) ratios {r8:.3} and {r4:.3}")
    });
}

/// Criterion 8: footprint ratios: exact per-scheme values and published
/// whole-model ratios under a single fitted exempt fraction per model.
#[test]
fn criterion_8_footprint_consistency() {
    criterion(8, "footprint consistency", Duration::from_secs(30), || {
        let quantized_ratio = |rows: usize, cols: usize, bits: u8, group: Option<usize>| -> f64 {
            let mut b = woqt_core::TensorBundle::new();
            b.push_tensor(Tensor::new("q", rows, cols, vec![0.01; rows * cols]).unwrap())
                .unwrap();
            let mut assign = BTreeMap::new();
            assign.insert(
                "q".to_string(),
                match group {
                    Some(g) => Assignment::Quantized {
                        bits,
                        kind: LayoutKind::FixedGroup,
                        group: Some(g),
                    },
                    None => Assignment::Quantized {
                        bits,
                        kind: LayoutKind::PerColumn,
                        group: None,
                    },
                },
            );
            footprint(&b, &assign).unwrap().ratio
        };

        // Exact per-scheme ratios.
        assert_eq!(quantized_ratio(7168, 8, 4, Some(64)), 0.265625);
        let r8 = quantized_ratio(7168, 8, 8, None);
        assert!((r8 - 0.5001).abs() < 2e-4, "int8 per-column ratio {r8}");

        // Whole-model ratio with an exempt fraction fitted on one row and
        // checked across the others of the same model.
        let total_ratio = |rows: usize,
                           cols: usize,
                           bits: u8,
                           group: Option<usize>,
                           exempt_elems: usize|
         -> f64 {
            let mut b = woqt_core::TensorBundle::new();
            b.push_tensor(Tensor::new("q", rows, cols, vec![0.01; rows * cols]).unwrap())
                .unwrap();
            b.push_tensor(Tensor::new("e", 1, exempt_elems, vec![0.01; exempt_elems]).unwrap())
                .unwrap();
            let mut assign = BTreeMap::new();
            assign.insert(
                "q".to_string(),
                match group {
                    Some(g) => Assignment::Quantized {
                        bits,
                        kind: LayoutKind::FixedGroup,
                        group: Some(g),
                    },
                    None => Assignment::Quantized {
                        bits,
                        kind: LayoutKind::PerColumn,
                        group: None,
                    },
                },
            );
            assign.insert("e".to_string(), Assignment::Exempt);
            footprint(&b, &assign).unwrap().ratio
        };

        // 30B-class reference: 14.73/55.21 for int4(64), 27.66/55.21 for
        // int8 per-column; one exempt fraction must explain both.
        let (rows, cols) = (7168usize, 64usize);
        let t_int4 = 14.73 / 55.21;
        let t_int8 = 27.66 / 55.21;
        let r4 = 0.265625f64;
        let e = (t_int4 - r4) / (1.0 - r4);
        let exempt_elems = ((e / (1.0 - e)) * (rows * cols) as f64).round() as usize;
        let got4 = total_ratio(rows, cols, 4, Some(64), exempt_elems);
        let got8 = total_ratio(rows, cols, 8, None, exempt_elems);
        assert!(
            (got4 / t_int4 - 1.0).abs() <= 0.03,
            "int4 total {got4} vs {t_int4}"
        );
        assert!(
            (got8 / t_int8 - 1.0).abs() <= 0.03,
            "int8 total {got8} vs {t_int8}"
        );

        // Size ladder of a 5B-class model: 0.55X / 0.32X / 0.26X for
        // int8/int4/int3 per-column, again with one fitted fraction.
        let (rows, cols) = (2048usize, 64usize);
        let r_int4 = 4.0 / 16.0 + 1.0 / rows as f64;
        let e = (0.32 - r_int4) / (1.0 - r_int4);
        let exempt_elems = ((e / (1.0 - e)) * (rows * cols) as f64).round() as usize;
        let ladder = [(8u8, 0.55f64), (4, 0.32), (3, 0.26)];
        let mut got = Vec::new();
        for (bits, target) in ladder {
            let r = total_ratio(rows, cols, bits, None, exempt_elems);
            assert!(
                (r / target - 1.0).abs() <= 0.03,
                "int{bits} ladder ratio {r} vs {target}"
            );
            got.push(format!("int{bits}: {r:.4}"));
        }
        format!(
            "int4/64 = 0.265625 exact; model ratios {:.4}/{:.4}; ladder {}",
            got4,
            got8,
            got.join(" ")
        )
    });
}

/// Criterion 9: format golden tests: the hand-packed nibble fixture and a
/// checked-in container file that must round-trip byte-exactly.
#[test]
fn criterion_9_format_golden() {
    criterion(9, "format golden tests", Duration::from_secs(10), || {
        let packed = pack_codes(&[2, -4, 6, -8], 4, 1, 4).unwrap();
        assert_eq!(packed, vec![0xC2, 0x86]);
        assert_eq!(unpack_codes(&packed, 4, 1, 4).unwrap(), vec![2, -4, 6, -8]);

        let golden = include_bytes!("golden/fixture.woqt");
        assert_eq!(&golden[..6], b"WOQT1\0");
        let bundle = decode_bundle(golden).unwrap();
        assert_eq!(bundle.len(), 2);
        let reencoded = encode_bundle(&bundle).unwrap();
        assert_eq!(reencoded.as_slice(), &golden[..], "golden file drifted");

        match bundle.get("packed_col").unwrap() {
            Item::Packed(q) => {
                assert_eq!(q.codes(), &[0xC2, 0x86]);
                assert_eq!(q.scheme().bits(), 4);
            }
            _ => panic!("expected packed fixture"),
        }
        match bundle.get("dense").unwrap() {
            Item::Float(t) => assert_eq!(t.data(), &[1.0, 2.0, 3.0, 4.0]),
            _ => panic!("expected float fixture"),
        }
        "nibble fixture 0xC2 0x86 and container file round-trip byte-exact".to_string()
    });
}
