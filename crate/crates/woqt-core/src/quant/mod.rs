//! Symmetric weight-only quantization: linear absmax and log-scale mappings.
//!
//! Linear: each group of a column shares `s = 2*max|A|/(2^b - 1)`; codes are
//! `round(A/s)` (half away from zero) clamped to the signed b-bit range, and
//! dequantization is `A' = Q * s`.
//!
//! Log: one bit holds the sign and the remaining `b-1` bits a power-of-two
//! magnitude exponent. With `T = clip(|A|/s, 2^(1-2^(b-1)), 1)` the exponent
//! is `Q = ceil(log2(2/3 * T))` and dequantization is `A' = P * s * 2^Q`.
//!
//! Ratios are computed against the group absmax in f64, which pins the
//! absmax element itself to exactly +/-(2^b - 1)/2 and makes the tie at the
//! clamp boundary deterministic. A group of all zeros stores scale 0 and
//! zero codes; dequantization maps scale 0 to exact zeros.

pub mod packing;
pub mod payload;

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::granularity::GroupLayout;
use crate::tensor::Tensor;

/// Which of the two mappings a scheme uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mapping {
    Linear,
    Log,
}

/// Scale selection for the log mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogScaleMode {
    /// `s = max|A|` over the group.
    #[default]
    AbsMax,
    /// Golden-section search for the scale minimizing the group's mean
    /// squared error.
    MseOptimal,
}

/// A complete quantization configuration. Rounding is fixed to
/// half-away-from-zero and clamp bounds derive from the bit width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantScheme {
    bits: u8,
    mapping: Mapping,
    log_scale_mode: LogScaleMode,
}

impl QuantScheme {
    pub fn linear(bits: u8) -> Result<Self> {
        Self::new(bits, Mapping::Linear, LogScaleMode::AbsMax)
    }

    pub fn log(bits: u8, mode: LogScaleMode) -> Result<Self> {
        Self::new(bits, Mapping::Log, mode)
    }

    pub fn new(bits: u8, mapping: Mapping, log_scale_mode: LogScaleMode) -> Result<Self> {
        if !(2..=8).contains(&bits) {
            return Err(Error::InvalidBits(bits));
        }
        Ok(Self {
            bits,
            mapping,
            log_scale_mode,
        })
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn mapping(&self) -> Mapping {
        self.mapping
    }

    pub fn log_scale_mode(&self) -> LogScaleMode {
        self.log_scale_mode
    }

    /// Smallest representable code, `-2^(b-1)`.
    pub fn clamp_lo(&self) -> i32 {
        -(1i32 << (self.bits - 1))
    }

    /// Largest representable code, `2^(b-1) - 1`.
    pub fn clamp_hi(&self) -> i32 {
        (1i32 << (self.bits - 1)) - 1
    }

    /// Smallest log-mapping exponent, `1 - 2^(b-1)`.
    pub fn min_exponent(&self) -> i32 {
        1 - (1i32 << (self.bits - 1))
    }
}

/// Bit-packed quantized weights plus everything needed to dequantize them:
/// the scheme, the group layout and the scale matrix (one f32 per
/// (group, column); a single entry for per-tensor layouts).
#[derive(Debug, Clone, PartialEq)]
pub struct PackedQuantTensor {
    name: String,
    rows: usize,
    cols: usize,
    scheme: QuantScheme,
    layout: GroupLayout,
    scales: Vec<f32>,
    codes: Vec<u8>,
    tags: BTreeSet<String>,
}

impl PackedQuantTensor {
    /// Assemble from parts, validating lengths and ranges.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        scheme: QuantScheme,
        layout: GroupLayout,
        scales: Vec<f32>,
        codes: Vec<u8>,
        tags: BTreeSet<String>,
    ) -> Result<Self> {
        layout.check_shape(rows, cols)?;
        if scales.len() != layout.num_scales() {
            return Err(Error::CorruptPayload(format!(
                "{} scales for a layout with {} groups",
                scales.len(),
                layout.num_scales()
            )));
        }
        if scales.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::CorruptPayload("negative or non-finite scale".into()));
        }
        if codes.len() != packing::packed_len(rows, cols, scheme.bits()) {
            return Err(Error::CorruptPayload(format!(
                "code stream is {} bytes, expected {}",
                codes.len(),
                packing::packed_len(rows, cols, scheme.bits())
            )));
        }
        Ok(Self {
            name: name.into(),
            rows,
            cols,
            scheme,
            layout,
            scales,
            codes,
            tags,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn scheme(&self) -> QuantScheme {
        self.scheme
    }

    pub fn layout(&self) -> &GroupLayout {
        &self.layout
    }

    pub fn scales(&self) -> &[f32] {
        &self.scales
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn tags(&self) -> &BTreeSet<String> {
        &self.tags
    }

    /// Scale applied to element (row `k`, column `j`).
    #[inline]
    pub fn scale_at(&self, k: usize, j: usize) -> f32 {
        self.scales[self.layout.scale_index(self.layout.group_of(k), j)]
    }

    /// Unpack the full signed code matrix (column-major).
    pub fn unpacked_codes(&self) -> Result<Vec<i8>> {
        packing::unpack_codes(&self.codes, self.rows, self.cols, self.scheme.bits())
    }

    /// Reconstruct the float tensor.
    pub fn dequantize(&self) -> Result<Tensor> {
        dequantize(self)
    }
}

/// Half of the top linear level, `(2^b - 1)/2`; exact in binary floating point.
#[inline]
fn half_levels(bits: u8) -> f64 {
    ((1u32 << bits) - 1) as f64 / 2.0
}

/// Decode one linear code. The fused GEMM kernel uses this same operation so
/// its on-the-fly dequantization is bit-identical to [`dequantize`].
#[inline]
pub fn decode_linear(code: i8, scale: f32) -> f32 {
    code as f32 * scale
}

/// Decode one log code: the top bit of the field carries the sign, the rest
/// the negated exponent.
#[inline]
pub fn decode_log(code: i8, scale: f32, bits: u8) -> f32 {
    if scale == 0.0 {
        return 0.0;
    }
    let half = 1i32 << (bits - 1);
    let c = code as i32;
    let (neg, e) = if c < 0 { (true, c + half) } else { (false, c) };
    let mag = scale * f32::powi(2.0, -e);
    if neg {
        -mag
    } else {
        mag
    }
}

/// Decode any code under the given scheme.
#[inline]
pub fn decode(code: i8, scale: f32, scheme: QuantScheme) -> f32 {
    match scheme.mapping() {
        Mapping::Linear => decode_linear(code, scale),
        Mapping::Log => decode_log(code, scale, scheme.bits()),
    }
}

fn group_absmax(t: &Tensor, j: usize, rows: std::ops::Range<usize>) -> f32 {
    let mut m = 0.0f32;
    for k in rows {
        m = m.max(t.get(k, j).abs());
    }
    m
}

/// Linear absmax quantization of `t` at `bits` under `layout`.
pub fn quantize_linear(t: &Tensor, bits: u8, layout: GroupLayout) -> Result<PackedQuantTensor> {
    let scheme = QuantScheme::linear(bits)?;
    layout.check_shape(t.rows(), t.cols())?;
    let (rows, cols) = (t.rows(), t.cols());
    let hl = half_levels(bits);
    let (lo, hi) = (scheme.clamp_lo(), scheme.clamp_hi());
    let denom = ((1u32 << bits) - 1) as f64;

    let mut scales = vec![0.0f32; layout.num_scales()];
    let mut codes = vec![0i8; rows * cols];

    // Per-tensor layouts share one absmax across all columns.
    let tensor_absmax = match layout.kind() {
        crate::granularity::LayoutKind::PerTensor => Some(t.absmax()),
        _ => None,
    };

    for j in 0..cols {
        for g in 0..layout.groups_per_column() {
            let span = layout.group_rows(g);
            let absmax = tensor_absmax.unwrap_or_else(|| group_absmax(t, j, span.clone()));
            let sidx = layout.scale_index(g, j);
            if absmax == 0.0 {
                scales[sidx] = 0.0;
                continue;
            }
            scales[sidx] = (2.0 * absmax as f64 / denom) as f32;
            // True division: the absmax element maps to exactly +/-1, so the
            // tie at +/-(2^b - 1)/2 resolves the same way on every input.
            let am = absmax as f64;
            for k in span {
                let u = t.get(k, j) as f64 / am;
                let code = (u * hl).round() as i32;
                codes[j * rows + k] = code.clamp(lo, hi) as i8;
            }
        }
    }

    let packed = packing::pack_codes(&codes, rows, cols, bits)?;
    PackedQuantTensor::from_parts(
        t.name(),
        rows,
        cols,
        scheme,
        layout,
        scales,
        packed,
        t.tags().clone(),
    )
}

/// Log-scale quantization of `t` at `bits` under `layout`.
pub fn quantize_log(
    t: &Tensor,
    bits: u8,
    layout: GroupLayout,
    mode: LogScaleMode,
) -> Result<PackedQuantTensor> {
    let scheme = QuantScheme::log(bits, mode)?;
    layout.check_shape(t.rows(), t.cols())?;
    let (rows, cols) = (t.rows(), t.cols());
    let min_exp = scheme.min_exponent();
    let half = 1i32 << (bits - 1);

    let mut scales = vec![0.0f32; layout.num_scales()];
    let mut codes = vec![0i8; rows * cols];

    if matches!(layout.kind(), crate::granularity::LayoutKind::PerTensor) {
        let absmax = t.absmax();
        if absmax > 0.0 {
            let scale = match mode {
                LogScaleMode::AbsMax => absmax,
                LogScaleMode::MseOptimal => {
                    mse_optimal_log_scale(&GroupValues::Tensor(t), absmax, bits)
                }
            };
            scales[0] = scale;
            for j in 0..cols {
                for k in 0..rows {
                    codes[j * rows + k] = encode_log(t.get(k, j), scale, min_exp, half);
                }
            }
        }
    } else {
        for j in 0..cols {
            for g in 0..layout.groups_per_column() {
                let span = layout.group_rows(g);
                let absmax = group_absmax(t, j, span.clone());
                if absmax == 0.0 {
                    continue;
                }
                let scale = match mode {
                    LogScaleMode::AbsMax => absmax,
                    LogScaleMode::MseOptimal => mse_optimal_log_scale(
                        &GroupValues::Column(t, j, span.clone()),
                        absmax,
                        bits,
                    ),
                };
                scales[layout.scale_index(g, j)] = scale;
                for k in span {
                    codes[j * rows + k] = encode_log(t.get(k, j), scale, min_exp, half);
                }
            }
        }
    }

    let packed = packing::pack_codes(&codes, rows, cols, bits)?;
    PackedQuantTensor::from_parts(
        t.name(),
        rows,
        cols,
        scheme,
        layout,
        scales,
        packed,
        t.tags().clone(),
    )
}

/// Values of one scale-sharing group, either a column span or the whole
/// matrix.
enum GroupValues<'a> {
    Column(&'a Tensor, usize, std::ops::Range<usize>),
    Tensor(&'a Tensor),
}

impl GroupValues<'_> {
    fn for_each(&self, mut f: impl FnMut(f32)) {
        match self {
            GroupValues::Column(t, j, span) => {
                for k in span.clone() {
                    f(t.get(k, *j));
                }
            }
            GroupValues::Tensor(t) => {
                for &v in t.data() {
                    f(v);
                }
            }
        }
    }
}

#[inline]
fn encode_log(x: f32, scale: f32, min_exp: i32, half: i32) -> i8 {
    // Zero inputs take a positive sign and the smallest magnitude.
    if x == 0.0 {
        return (half - 1) as i8;
    }
    let neg = x < 0.0;
    let t = (x.abs() as f64 / scale as f64).clamp(f64::powi(2.0, min_exp), 1.0);
    let q = (2.0 / 3.0 * t).log2().ceil() as i32;
    let q = q.clamp(min_exp, 0);
    let e = -q;
    let code = if neg { e - half } else { e };
    code as i8
}

/// Mean squared error of log-quantizing `vals` with scale `s`.
fn log_mse(vals: &GroupValues<'_>, s: f32, bits: u8) -> f64 {
    let min_exp = 1 - (1i32 << (bits - 1));
    let half = 1i32 << (bits - 1);
    let mut sum = 0.0f64;
    let mut n = 0usize;
    vals.for_each(|x| {
        let code = encode_log(x, s, min_exp, half);
        let back = decode_log(code, s, bits);
        let d = x as f64 - back as f64;
        sum += d * d;
        n += 1;
    });
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Golden-section search over `s in [absmax/4, 2*absmax]` minimizing the
/// group MSE, 50 iterations.
fn mse_optimal_log_scale(vals: &GroupValues<'_>, absmax: f32, bits: u8) -> f32 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut a = absmax as f64 / 4.0;
    let mut b = absmax as f64 * 2.0;
    let mut c = b - (b - a) * INV_PHI;
    let mut d = a + (b - a) * INV_PHI;
    let mut fc = log_mse(vals, c as f32, bits);
    let mut fd = log_mse(vals, d as f32, bits);
    for _ in 0..50 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * INV_PHI;
            fc = log_mse(vals, c as f32, bits);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * INV_PHI;
            fd = log_mse(vals, d as f32, bits);
        }
    }
    (0.5 * (a + b)) as f32
}

/// Reconstruct the float tensor described by a packed quantized tensor.
pub fn dequantize(q: &PackedQuantTensor) -> Result<Tensor> {
    let (rows, cols) = (q.rows(), q.cols());
    let bits = q.scheme().bits();
    let layout = q.layout();
    let mut out = vec![0.0f32; rows * cols];
    let mut col_codes = vec![0i8; rows];
    for j in 0..cols {
        packing::unpack_column_range(&q.codes, rows, bits, j, 0, rows, &mut col_codes);
        for g in 0..layout.groups_per_column() {
            let scale = q.scales[layout.scale_index(g, j)];
            for k in layout.group_rows(g) {
                out[k * cols + j] = decode(col_codes[k], scale, q.scheme());
            }
        }
    }
    Tensor::new(q.name(), rows, cols, out).map(|t| t.with_tags(q.tags().iter().cloned()))
}
