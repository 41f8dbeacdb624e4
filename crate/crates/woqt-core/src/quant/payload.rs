//! Serialized form of a packed quantized tensor inside a WOQT1 container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       1     bits (2..=8)
//! 1       1     mapping (0 linear, 1 log/absmax, 2 log/mse-optimal)
//! 2       1     layout kind (0 tensor, 1 column, 2 group, 3 adaptive)
//! 3       4     group size (u32)
//! 7       4     min group (u32)
//! 11      4     alpha * 1000 (u32, 0 when non-adaptive)
//! 15      1     scale dtype (0 = IEEE half)
//! 16      2n    scales as IEEE half, row-major over (group, column)
//! 16+2n   ...   packed code bit-stream, column-major, byte-aligned columns
//! ```
//!
//! Scales are narrowed to half precision on write and widened back to f32 on
//! read; a decode/encode cycle is byte-exact.

use std::collections::BTreeSet;

use half::f16;

use crate::error::{Error, Result};
use crate::granularity::{GroupLayout, LayoutKind};
use crate::quant::{packing, LogScaleMode, Mapping, PackedQuantTensor, QuantScheme};

pub const HEADER_LEN: usize = 16;
pub const SCALE_DTYPE_F16: u8 = 0;

fn mapping_byte(scheme: QuantScheme) -> u8 {
    match (scheme.mapping(), scheme.log_scale_mode()) {
        (Mapping::Linear, _) => 0,
        (Mapping::Log, LogScaleMode::AbsMax) => 1,
        (Mapping::Log, LogScaleMode::MseOptimal) => 2,
    }
}

fn scheme_from_bytes(bits: u8, mapping: u8) -> Result<QuantScheme> {
    match mapping {
        0 => QuantScheme::linear(bits),
        1 => QuantScheme::log(bits, LogScaleMode::AbsMax),
        2 => QuantScheme::log(bits, LogScaleMode::MseOptimal),
        other => Err(Error::CorruptPayload(format!("unknown mapping {other}"))),
    }
}

/// Serialize a packed tensor to its container payload.
pub fn encode_payload(q: &PackedQuantTensor) -> Vec<u8> {
    let layout = q.layout();
    let mut out = Vec::with_capacity(HEADER_LEN + 2 * q.scales().len() + q.codes().len());
    out.push(q.scheme().bits());
    out.push(mapping_byte(q.scheme()));
    out.push(layout.kind().as_u8());
    out.extend_from_slice(&(layout.group_size() as u32).to_le_bytes());
    out.extend_from_slice(&(layout.min_group() as u32).to_le_bytes());
    out.extend_from_slice(&layout.alpha_milli().to_le_bytes());
    out.push(SCALE_DTYPE_F16);
    for &s in q.scales() {
        out.extend_from_slice(&f16::from_f32(s).to_le_bytes());
    }
    out.extend_from_slice(q.codes());
    out
}

/// Rebuild a packed tensor from its container payload. Shape, name and tags
/// come from the container manifest.
pub fn decode_payload(
    bytes: &[u8],
    name: &str,
    rows: usize,
    cols: usize,
    tags: BTreeSet<String>,
) -> Result<PackedQuantTensor> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::CorruptPayload("payload shorter than header".into()));
    }
    let bits = bytes[0];
    let scheme = scheme_from_bytes(bits, bytes[1])?;
    let kind = LayoutKind::from_u8(bytes[2])?;
    let group_size = u32::from_le_bytes(bytes[3..7].try_into().unwrap()) as usize;
    let min_group = u32::from_le_bytes(bytes[7..11].try_into().unwrap()) as usize;
    let alpha_milli = u32::from_le_bytes(bytes[11..15].try_into().unwrap());
    if bytes[15] != SCALE_DTYPE_F16 {
        return Err(Error::CorruptPayload(format!(
            "unknown scale dtype {}",
            bytes[15]
        )));
    }
    let layout =
        GroupLayout::from_descriptor(kind, rows, cols, group_size, min_group, alpha_milli)?;

    let n_scales = layout.num_scales();
    let scales_end = HEADER_LEN + 2 * n_scales;
    let codes_len = packing::packed_len(rows, cols, bits);
    if bytes.len() != scales_end + codes_len {
        return Err(Error::CorruptPayload(format!(
            "payload is {} bytes, expected {}",
            bytes.len(),
            scales_end + codes_len
        )));
    }
    let scales: Vec<f32> = bytes[HEADER_LEN..scales_end]
        .chunks_exact(2)
        .map(|b| f16::from_le_bytes([b[0], b[1]]).to_f32())
        .collect();
    let codes = bytes[scales_end..].to_vec();
    PackedQuantTensor::from_parts(name, rows, cols, scheme, layout, scales, codes, tags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quant::quantize_linear;
    use crate::synth::{synth_weights, Distribution};

    #[test]
    fn decode_encode_is_byte_exact() {
        let t = synth_weights(
            "w",
            32,
            3,
            Distribution::Gaussian {
                mean: 0.0,
                std: 1.0,
            },
            5,
        )
        .unwrap();
        let q = quantize_linear(&t, 4, GroupLayout::per_column(32, 3)).unwrap();
        let payload = encode_payload(&q);
        let q2 = decode_payload(&payload, "w", 32, 3, BTreeSet::new()).unwrap();
        // One narrow cycle later, bytes are stable.
        assert_eq!(encode_payload(&q2), payload);
        assert_eq!(q2.codes(), q.codes());
    }

    #[test]
    fn golden_payload_for_column_fixture() {
        let t = crate::tensor::Tensor::new("c", 4, 1, vec![1.0, -2.0, 3.0, -4.0]).unwrap();
        let q = quantize_linear(&t, 4, GroupLayout::per_column(4, 1)).unwrap();
        let payload = encode_payload(&q);
        assert_eq!(payload[0], 4); // bits
        assert_eq!(payload[1], 0); // linear
        assert_eq!(payload[2], 1); // per-column
        assert_eq!(&payload[3..7], &4u32.to_le_bytes()); // group = rows
        assert_eq!(payload[15], SCALE_DTYPE_F16);
        // One f16 scale, then the hand-packed nibble bytes.
        assert_eq!(payload.len(), HEADER_LEN + 2 + 2);
        assert_eq!(&payload[HEADER_LEN + 2..], &[0xC2, 0x86]);
    }

    #[test]
    fn adaptive_layout_roundtrips_with_ragged_rows() {
        // 100 rows: adaptive halving lands on a power-of-two group with a
        // ragged tail group per column.
        let mut data = vec![0.002f32; 100 * 3];
        data[3] = 1.0;
        let t = crate::tensor::Tensor::new("a", 100, 3, data).unwrap();
        let (layout, report) = crate::granularity::adapt_group_size(&t, 0.5, 16).unwrap();
        assert_eq!(report.resolved, 16);
        let q = quantize_linear(&t, 4, layout).unwrap();
        let payload = encode_payload(&q);
        let q2 = decode_payload(&payload, "a", 100, 3, BTreeSet::new()).unwrap();
        assert_eq!(q2.layout(), q.layout());
        assert_eq!(q2.codes(), q.codes());
        assert_eq!(q2.layout().alpha_milli(), 500);
        // Re-encoding the loaded tensor is byte-stable.
        assert_eq!(encode_payload(&q2), payload);
    }

    #[test]
    fn corrupt_layout_descriptor_is_rejected() {
        let t = crate::tensor::Tensor::new("c", 32, 2, vec![0.5; 64]).unwrap();
        let layout = crate::granularity::make_layout(
            crate::granularity::LayoutKind::FixedGroup,
            32,
            2,
            Some(16),
            16,
        )
        .unwrap();
        let q = quantize_linear(&t, 4, layout).unwrap();
        let mut payload = encode_payload(&q);
        payload[3..7].copy_from_slice(&7u32.to_le_bytes()); // non-power-of-two group
        assert!(decode_payload(&payload, "c", 32, 2, BTreeSet::new()).is_err());
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let t = crate::tensor::Tensor::new("c", 4, 1, vec![1.0, -2.0, 3.0, -4.0]).unwrap();
        let q = quantize_linear(&t, 4, GroupLayout::per_column(4, 1)).unwrap();
        let payload = encode_payload(&q);
        assert!(decode_payload(&payload[..payload.len() - 1], "c", 4, 1, BTreeSet::new()).is_err());
        assert!(decode_payload(&payload[..8], "c", 4, 1, BTreeSet::new()).is_err());
    }
}
