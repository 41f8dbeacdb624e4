//! Quantization-quality and footprint analytics.
//!
//! Everything here is pure arithmetic over tensors: MSE as a function of
//! group size, weight-distribution moments and histograms, range-ratio
//! diagnostics (the signal the adaptive granularity search consumes), and
//! exact byte accounting of quantized models against their half-precision
//! equivalent.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::granularity::{make_layout, GroupLayout, LayoutKind};
use crate::quant::{dequantize, packing, quantize_linear, PackedQuantTensor};
use crate::tensor::{Item, Tensor, TensorBundle};

/// Number of histogram bins in [`DistributionStats`].
pub const HISTOGRAM_BINS: usize = 256;

/// Moments and a fixed-width histogram of a weight distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionStats {
    pub mean: f64,
    pub std: f64,
    /// Fisher g1 with population moments.
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub absmax: f32,
    /// 256 bins spanning `[-absmax, absmax]`; counts sum to the element count.
    pub histogram: Vec<u64>,
}

/// Compute distribution statistics; needs at least 3 elements.
pub fn skewness(t: &Tensor) -> Result<DistributionStats> {
    let data = t.data();
    if data.len() < 3 {
        return Err(Error::Validation(format!(
            "skewness needs at least 3 elements, got {}",
            data.len()
        )));
    }
    let n = data.len() as f64;
    let mean = data.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0f64, 0.0f64, 0.0f64);
    for &v in data {
        let d = v as f64 - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let (skew, kurt) = if m2 == 0.0 {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };

    let absmax = t.absmax();
    let mut histogram = vec![0u64; HISTOGRAM_BINS];
    if absmax == 0.0 {
        histogram[HISTOGRAM_BINS / 2] = data.len() as u64;
    } else {
        let width = 2.0 * absmax as f64 / HISTOGRAM_BINS as f64;
        for &v in data {
            let idx = ((v as f64 + absmax as f64) / width) as usize;
            histogram[idx.min(HISTOGRAM_BINS - 1)] += 1;
        }
    }
    Ok(DistributionStats {
        mean,
        std: m2.sqrt(),
        skewness: skew,
        excess_kurtosis: kurt,
        absmax,
        histogram,
    })
}

/// Histogram dump: one `bin_left,bin_right,count` row per bin.
pub fn histogram_csv(stats: &DistributionStats) -> String {
    let mut out = String::from("bin_left,bin_right,count\n");
    let a = stats.absmax as f64;
    let width = if a == 0.0 {
        0.0
    } else {
        2.0 * a / HISTOGRAM_BINS as f64
    };
    for (i, &count) in stats.histogram.iter().enumerate() {
        let left = -a + i as f64 * width;
        let right = -a + (i + 1) as f64 * width;
        let _ = writeln!(out, "{left},{right},{count}");
    }
    out
}

/// One cell of an MSE-vs-granularity sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsePoint {
    /// Group size; equals the row count for per-column quantization.
    pub group_size: usize,
    pub mse: f64,
    pub max_abs_err: f64,
    pub max_scale: f32,
}

fn layout_for_group(rows: usize, cols: usize, group: usize) -> Result<GroupLayout> {
    if group == rows {
        Ok(GroupLayout::per_column(rows, cols))
    } else {
        make_layout(LayoutKind::FixedGroup, rows, cols, Some(group), 1)
    }
}

/// Linear-quantization MSE at each requested group size. Group sizes must be
/// power-of-two divisors of the row count (or the row count itself).
pub fn mse_sweep(t: &Tensor, bits: u8, group_sizes: &[usize]) -> Result<Vec<MsePoint>> {
    let mut points = Vec::with_capacity(group_sizes.len());
    for &g in group_sizes {
        let layout = layout_for_group(t.rows(), t.cols(), g)?;
        let q = quantize_linear(t, bits, layout)?;
        let back = dequantize(&q)?;
        let mut sum = 0.0f64;
        let mut max_err = 0.0f64;
        for (a, b) in t.data().iter().zip(back.data()) {
            let d = *a as f64 - *b as f64;
            sum += d * d;
            max_err = max_err.max(d.abs());
        }
        points.push(MsePoint {
            group_size: g,
            mse: sum / t.data().len() as f64,
            max_abs_err: max_err,
            max_scale: q.scales().iter().fold(0.0f32, |m, &s| m.max(s)),
        });
    }
    Ok(points)
}

/// `group,mse,max_abs_err` rows for one tensor.
pub fn mse_csv(points: &[MsePoint]) -> String {
    let mut out = String::from("group,mse,max_abs_err\n");
    for p in points {
        let _ = writeln!(out, "{},{:e},{:e}", p.group_size, p.mse, p.max_abs_err);
    }
    out
}

/// Range ratios of one halving level, for offline inspection of the signal
/// the adaptive search uses.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeLevel {
    pub level: usize,
    pub parent_group: usize,
    pub child_group: usize,
    /// `(column, child_group_index, ratio)` per child group.
    pub ratios: Vec<(usize, usize, f64)>,
}

impl RangeLevel {
    pub fn min_ratio(&self) -> f64 {
        self.ratios
            .iter()
            .map(|&(_, _, r)| r)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Tabulate child/parent range ratios for up to `levels` halvings below
/// per-column granularity.
pub fn range_diagnostics(t: &Tensor, levels: usize) -> Vec<RangeLevel> {
    let rows = t.rows();
    let range = |col: usize, lo: usize, hi: usize| -> f64 {
        let mut m = 0.0f64;
        for k in lo..hi {
            m = m.max(t.get(k, col).abs() as f64);
        }
        m
    };
    let mut out = Vec::new();
    let mut parent = rows;
    for level in 0..levels {
        let child = if parent == rows && !rows.is_power_of_two() {
            rows.next_power_of_two() >> 1
        } else {
            parent >> 1
        };
        if child == 0 {
            break;
        }
        let mut ratios = Vec::new();
        for j in 0..t.cols() {
            for c in 0..rows.div_ceil(child) {
                let lo = c * child;
                let hi = ((c + 1) * child).min(rows);
                let plo = (lo / parent) * parent;
                let phi = (plo + parent).min(rows);
                let rp = range(j, plo, phi);
                let rc = range(j, lo, hi);
                let ratio = if rp == 0.0 { 1.0 } else { rc / rp };
                ratios.push((j, c, ratio));
            }
        }
        out.push(RangeLevel {
            level,
            parent_group: parent,
            child_group: child,
            ratios,
        });
        parent = child;
        if child == 1 {
            break;
        }
    }
    out
}

/// `level,group_size,column,group,ratio` rows.
pub fn range_csv(levels: &[RangeLevel]) -> String {
    let mut out = String::from("level,group_size,column,group,ratio\n");
    for lvl in levels {
        for &(col, grp, ratio) in &lvl.ratios {
            let _ = writeln!(out, "{},{},{col},{grp},{ratio}", lvl.level, lvl.child_group);
        }
    }
    out
}

/// How a tensor is counted in a footprint report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    /// Left at half precision.
    Exempt,
    /// Quantized at `bits` under the given granularity.
    Quantized {
        bits: u8,
        kind: LayoutKind,
        group: Option<usize>,
    },
}

/// Byte accounting for one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFootprint {
    pub name: String,
    pub fp16_bytes: u64,
    pub stored_bytes: u64,
    pub exempt: bool,
}

/// Aggregate byte accounting for a bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct FootprintReport {
    pub tensors: Vec<TensorFootprint>,
    pub total_fp16_bytes: u64,
    pub total_stored_bytes: u64,
    /// stored / fp16-equivalent.
    pub ratio: f64,
}

/// Exact stored bytes of a quantized tensor: packed codes with per-column
/// padding plus two bytes per scale.
pub fn quantized_bytes(rows: usize, cols: usize, bits: u8, layout: &GroupLayout) -> u64 {
    packing::column_bytes(rows, bits) as u64 * cols as u64 + 2 * layout.num_scales() as u64
}

/// Compute the footprint of a bundle under per-tensor assignments. Packed
/// tensors default to their own scheme; float tensors must be assigned or
/// listed exempt.
pub fn footprint(
    bundle: &TensorBundle,
    assignments: &BTreeMap<String, Assignment>,
) -> Result<FootprintReport> {
    let mut tensors = Vec::with_capacity(bundle.len());
    let mut total_fp16 = 0u64;
    let mut total_stored = 0u64;
    for item in bundle.items() {
        let (rows, cols) = (item.rows(), item.cols());
        let fp16 = 2 * rows as u64 * cols as u64;
        let (stored, exempt) = match assignments.get(item.name()) {
            Some(Assignment::Exempt) => (fp16, true),
            Some(Assignment::Quantized { bits, kind, group }) => {
                let layout = match kind {
                    LayoutKind::Adaptive => {
                        return Err(Error::Validation(format!(
                            "footprint assignment for '{}' must use a resolved group size",
                            item.name()
                        )))
                    }
                    LayoutKind::FixedGroup => make_layout(*kind, rows, cols, *group, 1)?,
                    _ => make_layout(*kind, rows, cols, None, 1)?,
                };
                (quantized_bytes(rows, cols, *bits, &layout), false)
            }
            None => match item {
                Item::Packed(q) => (
                    quantized_bytes(rows, cols, q.scheme().bits(), q.layout()),
                    false,
                ),
                Item::Float(_) => return Err(Error::UnassignedTensor(item.name().to_string())),
            },
        };
        total_fp16 += fp16;
        total_stored += stored;
        tensors.push(TensorFootprint {
            name: item.name().to_string(),
            fp16_bytes: fp16,
            stored_bytes: stored,
            exempt,
        });
    }
    let ratio = if total_fp16 == 0 {
        0.0
    } else {
        total_stored as f64 / total_fp16 as f64
    };
    Ok(FootprintReport {
        tensors,
        total_fp16_bytes: total_fp16,
        total_stored_bytes: total_stored,
        ratio,
    })
}

/// Per-tensor quantization quality summary (one row of a [`QuantReport`]).
#[derive(Debug, Clone, PartialEq)]
pub struct TensorReport {
    pub name: String,
    pub bits: u8,
    pub mapping: &'static str,
    pub group_size: usize,
    pub mse: f64,
    pub max_abs_err: f64,
    pub scale_min: f32,
    pub scale_max: f32,
    pub fp16_bytes: u64,
    pub stored_bytes: u64,
}

/// Quality and size report over a quantized bundle.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuantReport {
    pub tensors: Vec<TensorReport>,
    pub total_fp16_bytes: u64,
    pub total_stored_bytes: u64,
    pub ratio: f64,
}

/// Compare a packed tensor against its float original.
pub fn tensor_report(orig: &Tensor, q: &PackedQuantTensor) -> Result<TensorReport> {
    if orig.rows() != q.rows() || orig.cols() != q.cols() {
        return Err(Error::ShapeMismatch(format!(
            "report: original {}x{} vs packed {}x{}",
            orig.rows(),
            orig.cols(),
            q.rows(),
            q.cols()
        )));
    }
    let back = dequantize(q)?;
    let mut sum = 0.0f64;
    let mut max_err = 0.0f64;
    for (a, b) in orig.data().iter().zip(back.data()) {
        let d = *a as f64 - *b as f64;
        sum += d * d;
        max_err = max_err.max(d.abs());
    }
    let (mut smin, mut smax) = (f32::INFINITY, 0.0f32);
    for &s in q.scales() {
        smin = smin.min(s);
        smax = smax.max(s);
    }
    Ok(TensorReport {
        name: q.name().to_string(),
        bits: q.scheme().bits(),
        mapping: match q.scheme().mapping() {
            crate::quant::Mapping::Linear => "linear",
            crate::quant::Mapping::Log => "log",
        },
        group_size: q.layout().rows_per_group(),
        mse: sum / orig.data().len() as f64,
        max_abs_err: max_err,
        scale_min: smin,
        scale_max: smax,
        fp16_bytes: 2 * (orig.rows() * orig.cols()) as u64,
        stored_bytes: quantized_bytes(q.rows(), q.cols(), q.scheme().bits(), q.layout()),
    })
}

impl QuantReport {
    /// Assemble from per-tensor rows plus bytes of tensors left at fp16.
    pub fn from_rows(tensors: Vec<TensorReport>, exempt_fp16_bytes: u64) -> Self {
        let total_fp16: u64 = tensors.iter().map(|t| t.fp16_bytes).sum::<u64>() + exempt_fp16_bytes;
        let total_stored: u64 =
            tensors.iter().map(|t| t.stored_bytes).sum::<u64>() + exempt_fp16_bytes;
        let ratio = if total_fp16 == 0 {
            0.0
        } else {
            total_stored as f64 / total_fp16 as f64
        };
        QuantReport {
            tensors,
            total_fp16_bytes: total_fp16,
            total_stored_bytes: total_stored,
            ratio,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_weights, Distribution};

    fn outlier_tensor(rows: usize, cols: usize, seed: u64) -> Tensor {
        synth_weights(
            "w",
            rows,
            cols,
            Distribution::GaussianWithOutliers {
                mean: 0.0,
                std: 0.02,
                outlier_count: 4,
                outlier_magnitude: 2.0,
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn zero_tensor_has_zero_mse_everywhere() {
        let t = Tensor::new("z", 64, 4, vec![0.0; 256]).unwrap();
        for p in mse_sweep(&t, 4, &[16, 32, 64]).unwrap() {
            assert_eq!(p.mse, 0.0);
            assert_eq!(p.max_abs_err, 0.0);
        }
    }

    #[test]
    fn mse_grows_with_group_size_on_outlier_tensors() {
        let t = outlier_tensor(256, 8, 5);
        let pts = mse_sweep(&t, 4, &[16, 64, 256]).unwrap();
        assert!(pts[0].mse <= pts[1].mse);
        assert!(pts[1].mse <= pts[2].mse);
        assert!(pts[0].max_abs_err <= pts[1].max_abs_err + 1e-12);
        assert!(pts[1].max_abs_err <= pts[2].max_abs_err + 1e-12);
    }

    #[test]
    fn more_bits_mean_less_mse() {
        let t = synth_weights(
            "w",
            128,
            8,
            Distribution::Gaussian {
                mean: 0.0,
                std: 1.0,
            },
            9,
        )
        .unwrap();
        let m8 = mse_sweep(&t, 8, &[64]).unwrap()[0].mse;
        let m4 = mse_sweep(&t, 4, &[64]).unwrap()[0].mse;
        assert!(m8 < m4);
    }

    #[test]
    fn skewness_of_symmetric_data_is_zero() {
        let t = Tensor::new("s", 3, 1, vec![-1.0, 0.0, 1.0]).unwrap();
        let stats = skewness(&t).unwrap();
        assert_eq!(stats.skewness, 0.0);
        assert_eq!(stats.mean, 0.0);
    }

    #[test]
    fn skewness_matches_direct_moment_oracle() {
        // [0, 0, 0, 10]: mean 2.5, m2 = 18.75, m3 = 93.75 -> g1 = 2/sqrt(3).
        let t = Tensor::new("s", 4, 1, vec![0.0, 0.0, 0.0, 10.0]).unwrap();
        let stats = skewness(&t).unwrap();
        let oracle = 93.75 / 18.75f64.powf(1.5);
        assert!((stats.skewness - oracle).abs() < 1e-12);
        assert!((oracle - 2.0 / 3.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn skewed_generator_measures_near_target() {
        let t =
            synth_weights("w", 400, 256, Distribution::Skewed { skew_target: -1.8 }, 7).unwrap();
        let stats = skewness(&t).unwrap();
        assert!(
            stats.skewness >= -2.1 && stats.skewness <= -1.5,
            "skew {}",
            stats.skewness
        );
    }

    #[test]
    fn skewness_needs_three_elements() {
        let t = Tensor::new("s", 2, 1, vec![1.0, 2.0]).unwrap();
        assert!(skewness(&t).is_err());
    }

    #[test]
    fn histogram_counts_sum_to_element_count() {
        let t = synth_weights(
            "w",
            100,
            7,
            Distribution::Gaussian {
                mean: 0.1,
                std: 2.0,
            },
            1,
        )
        .unwrap();
        let stats = skewness(&t).unwrap();
        assert_eq!(stats.histogram.iter().sum::<u64>(), 700);
        let csv = histogram_csv(&stats);
        assert_eq!(csv.lines().count(), HISTOGRAM_BINS + 1);
    }

    #[test]
    fn footprint_single_tensor_ratios() {
        let mut b = TensorBundle::new();
        b.push_tensor(Tensor::new("w", 128, 64, vec![0.5; 128 * 64]).unwrap())
            .unwrap();
        let mut assign = BTreeMap::new();
        assign.insert(
            "w".to_string(),
            Assignment::Quantized {
                bits: 4,
                kind: LayoutKind::FixedGroup,
                group: Some(64),
            },
        );
        let report = footprint(&b, &assign).unwrap();
        assert_eq!(report.ratio, 0.265625);

        assign.insert(
            "w".to_string(),
            Assignment::Quantized {
                bits: 8,
                kind: LayoutKind::PerColumn,
                group: None,
            },
        );
        let report = footprint(&b, &assign).unwrap();
        // 0.5 plus one f16 scale row: 2*cols bytes over 2*rows*cols, 1/rows.
        let expect = 0.5 + 1.0 / 128.0;
        assert!((report.ratio - expect).abs() < 1e-12);
    }

    #[test]
    fn footprint_convex_combination_with_exempt_half() {
        // Two equal tensors; one exempt, one int4/64: 0.5 + 0.5*0.265625.
        let mut b = TensorBundle::new();
        b.push_tensor(Tensor::new("q", 128, 64, vec![0.5; 128 * 64]).unwrap())
            .unwrap();
        b.push_tensor(Tensor::new("e", 128, 64, vec![0.5; 128 * 64]).unwrap())
            .unwrap();
        let mut assign = BTreeMap::new();
        assign.insert(
            "q".to_string(),
            Assignment::Quantized {
                bits: 4,
                kind: LayoutKind::FixedGroup,
                group: Some(64),
            },
        );
        assign.insert("e".to_string(), Assignment::Exempt);
        let report = footprint(&b, &assign).unwrap();
        let expect = 0.5 + 0.5 * 0.265625;
        assert!((report.ratio - expect).abs() < 1e-12);
    }

    #[test]
    fn footprint_rejects_unassigned_float_tensors() {
        let mut b = TensorBundle::new();
        b.push_tensor(Tensor::new("w", 4, 4, vec![1.0; 16]).unwrap())
            .unwrap();
        assert!(matches!(
            footprint(&b, &BTreeMap::new()),
            Err(Error::UnassignedTensor(_))
        ));
    }

    #[test]
    fn range_diagnostics_fixture_behaviour() {
        // Constant tensor: every ratio is exactly 1.
        let t = Tensor::new("c", 64, 2, vec![3.0; 128]).unwrap();
        let levels = range_diagnostics(&t, 3);
        for lvl in &levels {
            for &(_, _, r) in &lvl.ratios {
                assert_eq!(r, 1.0);
            }
        }
        // Planted outlier: some level-0 child ratio is far below 0.1.
        let mut data = vec![0.001f32; 128];
        data[5] = 1.0;
        let t = Tensor::new("o", 128, 1, data).unwrap();
        let levels = range_diagnostics(&t, 1);
        assert!(levels[0].min_ratio() < 0.1);
        // Ratios always within [0, 1].
        let t = outlier_tensor(128, 4, 3);
        for lvl in range_diagnostics(&t, 3) {
            for &(_, _, r) in &lvl.ratios {
                assert!((0.0..=1.0).contains(&r));
            }
        }
    }

    #[test]
    fn tensor_report_summarizes_quality() {
        let t = outlier_tensor(128, 4, 8);
        let q = quantize_linear(&t, 4, GroupLayout::per_column(128, 4)).unwrap();
        let r = tensor_report(&t, &q).unwrap();
        assert_eq!(r.bits, 4);
        assert_eq!(r.group_size, 128);
        assert!(r.mse > 0.0);
        assert!(r.scale_max >= r.scale_min);
        let report = QuantReport::from_rows(vec![r], 0);
        assert!(report.ratio > 0.0 && report.ratio < 1.0);
    }
}
