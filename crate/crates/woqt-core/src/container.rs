//! The WOQT1 container: a bit-exact file format for float and packed tensors.
//!
//! ```text
//! bytes 0..6   magic "WOQT1\0" (byte 4 is the format version, '1')
//! bytes 6..10  manifest length as little-endian u32
//! ...          UTF-8 JSON manifest: an array of per-tensor entries
//! ...          raw payloads, offsets relative to the end of the manifest
//! ```
//!
//! Float payloads are the row-major f32 data in little-endian byte order.
//! Packed payloads follow [`crate::quant::payload`]. Every payload carries a
//! CRC32 in the manifest which is verified on load. Saving the same bundle
//! twice produces byte-identical files.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quant::payload;
use crate::tensor::{Item, Tensor, TensorBundle};

pub const MAGIC: [u8; 6] = *b"WOQT1\0";
pub const VERSION: u8 = b'1';

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    dtype: String,
    rows: usize,
    cols: usize,
    tags: Vec<String>,
    byte_offset: usize,
    byte_length: usize,
    crc32: u32,
}

/// Encode a bundle into WOQT1 bytes.
pub fn encode_bundle(bundle: &TensorBundle) -> Result<Vec<u8>> {
    let mut entries = Vec::with_capacity(bundle.len());
    let mut payloads: Vec<Vec<u8>> = Vec::with_capacity(bundle.len());
    let mut offset = 0usize;
    for item in bundle.items() {
        let (dtype, bytes) = match item {
            Item::Float(t) => {
                let mut buf = Vec::with_capacity(4 * t.data().len());
                for v in t.data() {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
                ("f32", buf)
            }
            Item::Packed(q) => ("packed", payload::encode_payload(q)),
        };
        entries.push(ManifestEntry {
            name: item.name().to_string(),
            dtype: dtype.to_string(),
            rows: item.rows(),
            cols: item.cols(),
            tags: item.tags().iter().cloned().collect(),
            byte_offset: offset,
            byte_length: bytes.len(),
            crc32: crc32fast::hash(&bytes),
        });
        offset += bytes.len();
        payloads.push(bytes);
    }
    let manifest = serde_json::to_vec(&entries).map_err(|e| Error::Manifest(e.to_string()))?;
    let manifest_len = u32::try_from(manifest.len())
        .map_err(|_| Error::Manifest("manifest exceeds u32 length".into()))?;

    let total = MAGIC.len() + 4 + manifest.len() + offset;
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&manifest_len.to_le_bytes());
    out.extend_from_slice(&manifest);
    for p in &payloads {
        out.extend_from_slice(p);
    }
    Ok(out)
}

/// Decode WOQT1 bytes back into a bundle, verifying checksums and payloads.
pub fn decode_bundle(bytes: &[u8]) -> Result<TensorBundle> {
    if bytes.len() < MAGIC.len() + 4 {
        return Err(Error::BadMagic);
    }
    if bytes[..4] != MAGIC[..4] {
        return Err(Error::BadMagic);
    }
    if bytes[4] != VERSION {
        return Err(Error::UnsupportedVersion(bytes[4]));
    }
    if bytes[5] != 0 {
        return Err(Error::BadMagic);
    }
    let manifest_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let payload_base = 10 + manifest_len;
    if bytes.len() < payload_base {
        return Err(Error::Manifest("manifest length exceeds file".into()));
    }
    let entries: Vec<ManifestEntry> = serde_json::from_slice(&bytes[10..payload_base])
        .map_err(|e| Error::Manifest(e.to_string()))?;
    let payload_area = &bytes[payload_base..];

    let mut bundle = TensorBundle::new();
    for entry in entries {
        let end = entry
            .byte_offset
            .checked_add(entry.byte_length)
            .filter(|&e| e <= payload_area.len())
            .ok_or_else(|| {
                Error::Manifest(format!("payload range out of bounds for '{}'", entry.name))
            })?;
        let data = &payload_area[entry.byte_offset..end];
        if crc32fast::hash(data) != entry.crc32 {
            return Err(Error::ChecksumMismatch { name: entry.name });
        }
        let tags: BTreeSet<String> = entry.tags.iter().cloned().collect();
        let item = match entry.dtype.as_str() {
            "f32" => {
                if data.len() != 4 * entry.rows * entry.cols {
                    return Err(Error::Manifest(format!(
                        "f32 payload of '{}' is {} bytes, expected {}",
                        entry.name,
                        data.len(),
                        4 * entry.rows * entry.cols
                    )));
                }
                let values: Vec<f32> = data
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Item::Float(
                    Tensor::new(&entry.name, entry.rows, entry.cols, values)?
                        .with_tags(tags.iter().cloned()),
                )
            }
            "packed" => Item::Packed(payload::decode_payload(
                data,
                &entry.name,
                entry.rows,
                entry.cols,
                tags,
            )?),
            other => {
                return Err(Error::Manifest(format!(
                    "unknown dtype '{other}' for '{}'",
                    entry.name
                )))
            }
        };
        bundle.push(item)?;
    }
    Ok(bundle)
}

/// Write a bundle to `path` in WOQT1 format.
pub fn save_bundle(bundle: &TensorBundle, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_bundle(bundle)?;
    fs::write(path, bytes)?;
    Ok(())
}

/// Read a WOQT1 file.
pub fn load_bundle(path: impl AsRef<Path>) -> Result<TensorBundle> {
    let bytes = fs::read(path)?;
    decode_bundle(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::granularity::GroupLayout;
    use crate::quant::quantize_linear;

    fn small_bundle() -> TensorBundle {
        let mut b = TensorBundle::new();
        b.push_tensor(
            Tensor::new("a", 2, 2, vec![1.0, 2.0, 3.0, 4.0])
                .unwrap()
                .with_tags(["part:ffn1", "layer:0"]),
        )
        .unwrap();
        b
    }

    #[test]
    fn roundtrip_is_identity() {
        let b = small_bundle();
        let bytes = encode_bundle(&b).unwrap();
        let back = decode_bundle(&bytes).unwrap();
        assert_eq!(back, b);
        // Bytes re-encode identically.
        assert_eq!(encode_bundle(&back).unwrap(), bytes);
    }

    #[test]
    fn saves_are_deterministic() {
        let b = small_bundle();
        assert_eq!(encode_bundle(&b).unwrap(), encode_bundle(&b).unwrap());
    }

    #[test]
    fn empty_bundle_roundtrips() {
        let b = TensorBundle::new();
        let bytes = encode_bundle(&b).unwrap();
        let back = decode_bundle(&bytes).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn version_99_is_a_version_error() {
        let mut bytes = encode_bundle(&small_bundle()).unwrap();
        bytes[4] = 99;
        assert!(matches!(
            decode_bundle(&bytes),
            Err(Error::UnsupportedVersion(99))
        ));
    }

    #[test]
    fn bad_magic_is_a_format_error() {
        let mut bytes = encode_bundle(&small_bundle()).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_bundle(&bytes), Err(Error::BadMagic)));
    }

    #[test]
    fn corrupted_payload_fails_checksum() {
        let bytes = encode_bundle(&small_bundle()).unwrap();
        let mut corrupted = bytes.clone();
        let last = corrupted.len() - 1;
        corrupted[last] ^= 0xFF;
        assert!(matches!(
            decode_bundle(&corrupted),
            Err(Error::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn nan_payload_is_a_validation_error() {
        let bytes = encode_bundle(&small_bundle()).unwrap();
        // Patch the first payload float to NaN and fix up the checksum.
        let manifest_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let base = 10 + manifest_len;
        let mut patched = bytes.clone();
        patched[base..base + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        let crc = crc32fast::hash(&patched[base..]);
        let manifest = String::from_utf8(patched[10..base].to_vec()).unwrap();
        let old_crc = crc32fast::hash(&bytes[base..]);
        let manifest = manifest.replace(&old_crc.to_string(), &crc.to_string());
        patched.splice(10..base, manifest.into_bytes());
        assert!(matches!(decode_bundle(&patched), Err(Error::Validation(_))));
    }

    #[test]
    fn packed_tensors_roundtrip_through_files() {
        let t = Tensor::new("q", 8, 2, (0..16).map(|i| i as f32 - 8.0).collect()).unwrap();
        let q = quantize_linear(&t, 4, GroupLayout::per_column(8, 2)).unwrap();
        let f = Tensor::new("f", 8, 2, t.data().to_vec()).unwrap();
        let mut b = TensorBundle::new();
        b.push(Item::Packed(q)).unwrap();
        b.push_tensor(f).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mixed.woqt");
        save_bundle(&b, &path).unwrap();
        let loaded = load_bundle(&path).unwrap();
        // Scales pass through an f16 narrow/widen cycle; a second save must
        // reproduce the file bytes exactly.
        let bytes = fs::read(&path).unwrap();
        assert_eq!(encode_bundle(&loaded).unwrap(), bytes);
        match (&loaded.items()[0], &b.items()[0]) {
            (Item::Packed(a), Item::Packed(bq)) => {
                assert_eq!(a.codes(), bq.codes());
                assert_eq!(a.layout(), bq.layout());
            }
            _ => panic!("expected packed item"),
        }
    }

    #[test]
    fn save_to_unwritable_path_is_io_error() {
        let b = small_bundle();
        let err = save_bundle(&b, "/nonexistent-dir/x.woqt");
        assert!(matches!(err, Err(Error::Io(_))));
    }
}
