//! Binary PGM (P5, maxval 255) reading and writing.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn to_image(&self) -> Image {
        Image::from_gray8(self.width, self.height, &self.pixels).expect("dimensions checked on construction")
    }

    pub fn from_image(image: &Image) -> Self {
        Self { width: image.width(), height: image.height(), pixels: image.to_gray8() }
    }
}

fn skip_space_and_comments(bytes: &[u8], mut i: usize) -> usize {
    loop {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else {
            return i;
        }
    }
}

fn read_number(bytes: &[u8], i: usize) -> Result<(u32, usize)> {
    let start = skip_space_and_comments(bytes, i);
    let mut end = start;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end == start {
        return Err(Error::Format("expected a decimal number in the PGM header".into()));
    }
    let text = std::str::from_utf8(&bytes[start..end]).expect("ascii digits");
    let value = text.parse().map_err(|_| Error::Format(format!("header value {text} is out of range")))?;
    Ok((value, end))
}

/// Parses a P5 file without any dimension policy.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    match bytes.get(..2) {
        Some(b"P5") => {}
        Some([b'P', kind]) => {
            return Err(Error::Format(format!(
                "P{} files are not supported; only 8-bit binary grayscale (P5) is",
                *kind as char
            )))
        }
        _ => return Err(Error::Format("not a PGM file".into())),
    }
    let (width, i) = read_number(bytes, 2)?;
    let (height, i) = read_number(bytes, i)?;
    let (maxval, i) = read_number(bytes, i)?;
    if maxval != 255 {
        return Err(Error::Format(format!("maxval {maxval} is not supported; expected 255")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format("empty image".into()));
    }
    if !bytes.get(i).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("missing whitespace after maxval".into()));
    }
    let data = &bytes[i + 1..];
    let n = width as usize * height as usize;
    if data.len() < n {
        return Err(Error::Format(format!("pixel data holds {} of {n} bytes", data.len())));
    }
    GrayImage::new(width, height, data[..n].to_vec())
}

pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

/// Largest `2^p + 1` not exceeding `side`.
fn conforming_side(side: u32) -> u32 {
    if side < 3 {
        return 0;
    }
    let p = 31 - (side - 1).leading_zeros();
    (1 << p) + 1
}

pub fn is_conforming_side(side: u32) -> bool {
    side >= 3 && (side - 1).is_power_of_two()
}

/// Checks that both sides are `2^p + 1`.
pub fn check_dimensions(width: u32, height: u32) -> Result<()> {
    if is_conforming_side(width) && is_conforming_side(height) {
        return Ok(());
    }
    let (cw, ch) = (conforming_side(width), conforming_side(height));
    let hint = if cw > 0 && ch > 0 {
        format!("; crop to {cw}x{ch}")
    } else {
        String::new()
    };
    Err(Error::Dimension(format!(
        "{width}x{height} image: each side must be 2^p + 1 pixels{hint}"
    )))
}

pub fn read_image(path: &Path) -> Result<GrayImage> {
    let image = parse_pgm(&fs::read(path)?)?;
    check_dimensions(image.width, image.height)?;
    Ok(image)
}

/// Writes `bytes` next to `path` and renames into place, so a failed write
/// never leaves a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_image(path: &Path, image: &GrayImage) -> Result<()> {
    write_atomic(path, &encode_pgm(image))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_in_memory() {
        let img = GrayImage::new(5, 3, (0..15).map(|v| v * 17).collect()).unwrap();
        assert_eq!(parse_pgm(&encode_pgm(&img)).unwrap(), img);
    }

    #[test]
    fn round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        let img = GrayImage::new(9, 17, (0..153).map(|v| (v * 7 % 256) as u8).collect()).unwrap();
        write_image(&path, &img).unwrap();
        assert_eq!(read_image(&path).unwrap(), img);
    }

    #[test]
    fn header_comments() {
        let bytes = b"P5\n# made by hand\n2 1\n# max\n255\n\x01\x02";
        let img = parse_pgm(bytes).unwrap();
        assert_eq!(img.pixels, vec![1, 2]);
    }

    #[test]
    fn rejects_other_formats() {
        assert!(matches!(parse_pgm(b"P6\n1 1\n255\n\0\0\0"), Err(Error::Format(_))));
        assert!(matches!(parse_pgm(b"P2\n1 1\n255\n0"), Err(Error::Format(_))));
        assert!(matches!(parse_pgm(b"P5\n1 1\n65535\n\0\0"), Err(Error::Format(_))));
        assert!(matches!(parse_pgm(b"P5\n2 2\n255\n\0"), Err(Error::Format(_))));
        assert!(matches!(parse_pgm(b"GIF89a"), Err(Error::Format(_))));
    }

    #[test]
    fn dimension_rule() {
        assert!(check_dimensions(513, 129).is_ok());
        match check_dimensions(512, 512) {
            Err(Error::Dimension(msg)) => assert!(msg.contains("crop to 257x257"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.pgm");
        fs::write(&path, encode_pgm(&GrayImage::new(512, 512, vec![0; 512 * 512]).unwrap())).unwrap();
        assert!(matches!(read_image(&path), Err(Error::Dimension(_))));
    }
}
