//! Bit-packing of signed b-bit codes, 2 <= b <= 8.
//!
//! Codes are stored column-major as a little-endian bit-stream: within each
//! column, row k occupies bits `[k*b, (k+1)*b)` counted from the column's
//! first byte, low bits first. Every column is padded up to a byte boundary,
//! so a column takes exactly `ceil(rows*b/8)` bytes.

use crate::error::{Error, Result};

/// Bytes one packed column occupies.
#[inline]
pub fn column_bytes(rows: usize, bits: u8) -> usize {
    (rows * bits as usize).div_ceil(8)
}

/// Total packed size of a `rows x cols` code matrix.
#[inline]
pub fn packed_len(rows: usize, cols: usize, bits: u8) -> usize {
    column_bytes(rows, bits) * cols
}

#[inline]
fn signed_range(bits: u8) -> (i32, i32) {
    let half = 1i32 << (bits - 1);
    (-half, half - 1)
}

/// Sign-extend the low `bits` of `raw` into an i8.
#[inline]
pub fn sign_extend(raw: u8, bits: u8) -> i8 {
    let shift = 8 - bits;
    ((raw << shift) as i8) >> shift
}

/// Pack column-major codes (`codes[j*rows + k]`) into the bit-stream layout.
/// Every code must fit the signed `bits`-bit range.
pub fn pack_codes(codes: &[i8], rows: usize, cols: usize, bits: u8) -> Result<Vec<u8>> {
    if !(2..=8).contains(&bits) {
        return Err(Error::InvalidBits(bits));
    }
    if codes.len() != rows * cols {
        return Err(Error::ShapeMismatch(format!(
            "{} codes for {rows}x{cols}",
            codes.len()
        )));
    }
    let (lo, hi) = signed_range(bits);
    let col_bytes = column_bytes(rows, bits);
    let mask = if bits == 8 { 0xFF } else { (1u8 << bits) - 1 };
    let mut out = vec![0u8; col_bytes * cols];
    for j in 0..cols {
        let base = j * col_bytes;
        for k in 0..rows {
            let code = codes[j * rows + k] as i32;
            if code < lo || code > hi {
                return Err(Error::CodeOutOfRange { code, bits });
            }
            let field = (code as u8) & mask;
            let bit = k * bits as usize;
            let idx = base + (bit >> 3);
            let off = (bit & 7) as u8;
            out[idx] |= field << off;
            if off as usize + bits as usize > 8 {
                out[idx + 1] |= field >> (8 - off);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`pack_codes`]: recover column-major signed codes.
pub fn unpack_codes(stream: &[u8], rows: usize, cols: usize, bits: u8) -> Result<Vec<i8>> {
    if !(2..=8).contains(&bits) {
        return Err(Error::InvalidBits(bits));
    }
    let col_bytes = column_bytes(rows, bits);
    if stream.len() != col_bytes * cols {
        return Err(Error::CorruptPayload(format!(
            "packed stream is {} bytes, expected {} for {rows}x{cols} at {bits} bits",
            stream.len(),
            col_bytes * cols
        )));
    }
    let mask = if bits == 8 { 0xFF } else { (1u8 << bits) - 1 };
    let mut out = vec![0i8; rows * cols];
    for j in 0..cols {
        let base = j * col_bytes;
        for k in 0..rows {
            let bit = k * bits as usize;
            let idx = base + (bit >> 3);
            let off = (bit & 7) as u8;
            let mut raw = stream[idx] >> off;
            if off as usize + bits as usize > 8 {
                raw |= stream[idx + 1] << (8 - off);
            }
            out[j * rows + k] = sign_extend(raw & mask, bits);
        }
    }
    Ok(out)
}

/// Extract the codes of rows `[r0, r1)` of one column directly from the
/// stream, without touching the rest of the matrix.
#[inline]
pub fn unpack_column_range(
    stream: &[u8],
    rows: usize,
    bits: u8,
    col: usize,
    r0: usize,
    r1: usize,
    out: &mut [i8],
) {
    let col_bytes = column_bytes(rows, bits);
    let base = col * col_bytes;
    debug_assert!(r1 <= rows && out.len() >= r1 - r0);
    match bits {
        8 => {
            for (i, k) in (r0..r1).enumerate() {
                out[i] = stream[base + k] as i8;
            }
        }
        4 => {
            for (i, k) in (r0..r1).enumerate() {
                let byte = stream[base + (k >> 1)];
                let raw = if k & 1 == 0 { byte } else { byte >> 4 };
                out[i] = sign_extend(raw & 0xF, 4);
            }
        }
        2 => {
            for (i, k) in (r0..r1).enumerate() {
                let byte = stream[base + (k >> 2)];
                let raw = byte >> ((k & 3) * 2);
                out[i] = sign_extend(raw & 0x3, 2);
            }
        }
        _ => {
            let mask = (1u8 << bits) - 1;
            for (i, k) in (r0..r1).enumerate() {
                let bit = k * bits as usize;
                let idx = base + (bit >> 3);
                let off = (bit & 7) as u8;
                let mut raw = stream[idx] >> off;
                if off as usize + bits as usize > 8 {
                    raw |= stream[idx + 1] << (8 - off);
                }
                out[i] = sign_extend(raw & mask, bits);
            }
        }
    }
}
