//! Binary stream format.
//!
//! All multi-byte integers are little-endian.
//!
//! | field              | size                                   |
//! |--------------------|----------------------------------------|
//! | magic `"RIFC"`     | 4                                      |
//! | version (= 1)      | 1                                      |
//! | width, height      | 2 + 2                                  |
//! | log2 region cell   | 1                                      |
//! | domain factor      | 1                                      |
//! | delta              | 1                                      |
//! | 100 × d_max        | 1                                      |
//! | stride / cell      | 1                                      |
//! | split flags        | ⌈nodes / 8⌉, pre-order, MSB first      |
//! | vertex plane       | 1 per live vertex, row-major           |
//! | per leaf           | u16 domain id, u8 orientation, (δ+1)² ratio bytes |
//! | CRC-32 (IEEE)      | 4, over everything before it           |
//!
//! Ratio bytes are 256 uniform levels over `[−d_max, d_max]`; corner samples
//! are always written as [`CORNER_CODE`] and read back as exactly 0.

use std::collections::BTreeMap;

use crate::code::{walk_flags, CodecParams, CompressedImage, RegionCode};
use crate::error::{Error, Result};
use crate::field::{dequantize_ratio, quantize_ratio, ContractivityField, CORNER_CODE};
use crate::rifs::Orientation;

pub const MAGIC: &[u8; 4] = b"RIFC";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 14;

pub fn serialize(code: &CompressedImage) -> Result<Vec<u8>> {
    let p = &code.params;
    p.validate()?;
    let d_max_byte = (p.d_max * 100.0).round();
    if (d_max_byte / 100.0 - p.d_max).abs() > 1e-12 {
        return Err(Error::Config(format!("d_max {} is not a multiple of 0.01", p.d_max)));
    }
    let width = u16::try_from(code.width).map_err(|_| Error::Dimension("width exceeds 65535".into()))?;
    let height = u16::try_from(code.height).map_err(|_| Error::Dimension("height exceeds 65535".into()))?;
    let leaves = code.leaves()?;
    if leaves.len() != code.codes.len() {
        return Err(Error::CorruptCode(format!("{} leaves, {} codes", leaves.len(), code.codes.len())));
    }

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&width.to_le_bytes());
    out.extend_from_slice(&height.to_le_bytes());
    out.push(p.region_cell.trailing_zeros() as u8);
    out.push(u8::try_from(p.domain_factor).map_err(|_| Error::Config("domain factor exceeds 255".into()))?);
    out.push(u8::try_from(p.delta).map_err(|_| Error::Config("delta exceeds 255".into()))?);
    out.push(d_max_byte as u8);
    out.push((p.domain_stride / p.region_cell) as u8);

    let mut bits = vec![0u8; code.split_flags.len().div_ceil(8)];
    for (i, &flag) in code.split_flags.iter().enumerate() {
        if flag {
            bits[i / 8] |= 0x80 >> (i % 8);
        }
    }
    out.extend_from_slice(&bits);

    let live = live_vertices(&leaves);
    for key in &live {
        let v = code
            .vertices
            .get(key)
            .ok_or_else(|| Error::CorruptCode(format!("vertex ({}, {}) missing", key.1, key.0)))?;
        out.push(*v);
    }

    let pool_len = code.domain_pool()?.len();
    for (leaf, rc) in leaves.iter().zip(&code.codes) {
        if rc.region != leaf.rect || *rc.field.rect() != leaf.rect {
            return Err(Error::CorruptCode("region code does not match its leaf".into()));
        }
        if rc.field.delta() != (p.delta, p.delta) {
            return Err(Error::CorruptCode("field lattice does not match delta".into()));
        }
        if rc.domain_id >= pool_len {
            return Err(Error::CorruptCode(format!("domain {} not in a pool of {pool_len}", rc.domain_id)));
        }
        out.extend_from_slice(&(rc.domain_id as u16).to_le_bytes());
        out.push(rc.orientation.bits());
        let f = &rc.field;
        for l in 0..f.ny() {
            for k in 0..f.nx() {
                out.push(if f.is_corner(k, l) { CORNER_CODE } else { quantize_ratio(f.get(k, l), p.d_max) });
            }
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Leaf corners as `(y, x)`, row-major and without repeats.
fn live_vertices(leaves: &[crate::grid::Region]) -> Vec<(u32, u32)> {
    let mut v: Vec<(u32, u32)> = leaves.iter().flat_map(|r| r.rect.corners()).map(|(x, y)| (y, x)).collect();
    v.sort_unstable();
    v.dedup();
    v
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::TruncatedStream { offset: self.pos, needed: n - (self.data.len() - self.pos) });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }
}

pub fn deserialize(data: &[u8]) -> Result<CompressedImage> {
    let head = &data[..data.len().min(4)];
    if head != &MAGIC[..head.len()] {
        return Err(Error::MagicMismatch);
    }
    match parse_body(data) {
        Ok((code, end)) => {
            let mut r = Reader { data, pos: end };
            let stored = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
            if r.pos != data.len() {
                return Err(Error::Malformed(format!("{} trailing byte(s)", data.len() - r.pos)));
            }
            let computed = crc32fast::hash(&data[..end]);
            if stored != computed {
                return Err(Error::Checksum { stored, computed });
            }
            Ok(code)
        }
        Err(Error::Malformed(msg)) => {
            // Structural nonsense in a stream whose checksum fails is
            // corruption, not a writer bug.
            if data.len() >= 4 {
                let (body, tail) = data.split_at(data.len() - 4);
                let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
                let computed = crc32fast::hash(body);
                if stored != computed {
                    return Err(Error::Checksum { stored, computed });
                }
            }
            Err(Error::Malformed(msg))
        }
        Err(e) => Err(e),
    }
}

fn parse_body(data: &[u8]) -> Result<(CompressedImage, usize)> {
    let mut r = Reader { data, pos: 0 };
    r.take(4)?;
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::Version(version));
    }
    let width = u32::from(r.u16()?);
    let height = u32::from(r.u16()?);
    let cell_log2 = r.u8()?;
    let domain_factor = u32::from(r.u8()?);
    let delta = u32::from(r.u8()?);
    let d_max_byte = r.u8()?;
    let stride_cells = u32::from(r.u8()?);
    debug_assert_eq!(r.pos, HEADER_LEN);
    if cell_log2 >= 16 || d_max_byte == 0 {
        return Err(Error::Malformed("header parameters out of range".into()));
    }
    let region_cell = 1u32 << cell_log2;
    let params = CodecParams {
        region_cell,
        domain_factor,
        domain_stride: stride_cells * region_cell,
        delta,
        d_max: f64::from(d_max_byte) / 100.0,
    };
    // d_max >= 1 is representable so that verification can flag it.
    let structural = CodecParams { d_max: params.d_max.min(0.5), ..params };
    structural.validate().map_err(|e| Error::Malformed(e.to_string()))?;

    let bit_start = r.pos;
    let mut truncated_at = None;
    let walk = walk_flags(width, height, &params, |i| {
        let byte = bit_start + i / 8;
        match data.get(byte) {
            Some(b) => Some(b & (0x80 >> (i % 8)) != 0),
            None => {
                truncated_at = Some(byte);
                None
            }
        }
    });
    let (leaves, used) = match walk {
        Ok(v) => v,
        Err(_) if truncated_at.is_some() => {
            return Err(Error::TruncatedStream { offset: truncated_at.unwrap_or(data.len()), needed: 1 })
        }
        Err(e) => return Err(Error::Malformed(e.to_string())),
    };
    let flag_bytes = r.take(used.div_ceil(8))?;
    let split_flags: Vec<bool> = (0..used).map(|i| flag_bytes[i / 8] & (0x80 >> (i % 8)) != 0).collect();
    if used % 8 != 0 && flag_bytes[used / 8] & (0xFF >> (used % 8)) != 0 {
        return Err(Error::Malformed("nonzero padding after split flags".into()));
    }

    let live = live_vertices(&leaves);
    let n = delta as usize + 1;
    // The tree fixes the rest of the layout.
    let total = r.pos + live.len() + leaves.len() * (3 + n * n) + 4;
    if data.len() < total {
        return Err(Error::TruncatedStream { offset: data.len(), needed: total - data.len() });
    }
    let plane = r.take(live.len())?;
    let vertices: BTreeMap<(u32, u32), u8> = live.into_iter().zip(plane.iter().copied()).collect();

    let mut codes = Vec::with_capacity(leaves.len());
    for leaf in &leaves {
        let domain_id = usize::from(r.u16()?);
        let bits = r.u8()?;
        let orientation = Orientation::from_bits(bits)
            .ok_or_else(|| Error::Malformed(format!("orientation byte {bits:#04x}")))?;
        let raw = r.take(n * n)?;
        let mut ratios = Vec::with_capacity(n * n);
        for l in 0..n {
            for k in 0..n {
                let q = raw[l * n + k];
                let corner = (k == 0 || k == n - 1) && (l == 0 || l == n - 1);
                if corner {
                    if q != CORNER_CODE {
                        return Err(Error::Malformed(format!("corner ratio byte {q} (expected {CORNER_CODE})")));
                    }
                    ratios.push(0.0);
                } else {
                    ratios.push(dequantize_ratio(q, params.d_max));
                }
            }
        }
        let field = ContractivityField::new(leaf.rect, delta, delta, ratios)?;
        codes.push(RegionCode { region: leaf.rect, domain_id, orientation, field });
    }
    let pool_len = crate::code::domain_pool(width, height, &params).map_err(|e| Error::Malformed(e.to_string()))?.len();
    if let Some(bad) = codes.iter().find(|c| c.domain_id >= pool_len) {
        return Err(Error::Malformed(format!("domain {} not in a pool of {pool_len}", bad.domain_id)));
    }
    Ok((CompressedImage { width, height, params, split_flags, codes, vertices }, r.pos))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{encode, EncoderConfig};
    use crate::image::Image;

    fn sample_code() -> CompressedImage {
        let img = Image::from_fn(65, 65, |x, y| f64::from((x * 31 + y * 17 + x * y) % 256));
        encode(&img, &EncoderConfig::default()).unwrap()
    }

    #[test]
    fn round_trip() {
        let code = sample_code();
        let bytes = serialize(&code).unwrap();
        let back = deserialize(&bytes).unwrap();
        assert_eq!(back, code);
        assert_eq!(serialize(&back).unwrap(), bytes);
    }

    #[test]
    fn header_layout() {
        let bytes = serialize(&sample_code()).unwrap();
        assert_eq!(&bytes[..4], b"RIFC");
        assert_eq!(bytes[4], 1);
        assert_eq!(u16::from_le_bytes([bytes[5], bytes[6]]), 65);
        assert_eq!(u16::from_le_bytes([bytes[7], bytes[8]]), 65);
        assert_eq!(&bytes[9..14], &[5, 2, 4, 95, 2]);
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = serialize(&sample_code()).unwrap();
        bytes[0] = b'X';
        assert!(matches!(deserialize(&bytes), Err(Error::MagicMismatch)));
        let mut bytes = serialize(&sample_code()).unwrap();
        bytes[4] = 2;
        assert!(matches!(deserialize(&bytes), Err(Error::Version(2))));
    }

    #[test]
    fn every_prefix_is_truncated() {
        let bytes = serialize(&sample_code()).unwrap();
        for len in 0..bytes.len() {
            match deserialize(&bytes[..len]) {
                Err(Error::TruncatedStream { .. }) => {}
                other => panic!("prefix {len}: {other:?}"),
            }
        }
    }

    #[test]
    fn flipped_payload_byte_fails_checksum() {
        let mut bytes = serialize(&sample_code()).unwrap();
        let i = bytes.len() - 10;
        bytes[i] ^= 0x01;
        assert!(matches!(deserialize(&bytes), Err(Error::Checksum { .. })));
        let mut bytes = serialize(&sample_code()).unwrap();
        bytes.push(0);
        assert!(deserialize(&bytes).is_err());
    }
}
