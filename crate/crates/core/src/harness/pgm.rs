//! Binary 8-bit PGM (`P5`) reading and writing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageGrid;

pub fn decode(bytes: &[u8]) -> Result<ImageGrid> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Pgm("bad magic number, expected P5".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (i, name) in ["width", "height", "maxval"].iter().enumerate() {
        fields[i] = header_number(bytes, &mut pos, name)?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::Pgm(format!("degenerate size {width}x{height}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::Pgm(format!("maxval {maxval} out of range 1..=255")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Pgm("missing whitespace after maxval".into())),
    }
    let n = width * height;
    let raster = bytes
        .get(pos..pos + n)
        .ok_or_else(|| Error::Pgm(format!("truncated payload: need {n} bytes, have {}", bytes.len() - pos)))?;
    let scale = maxval as f64;
    let pixels = raster.iter().map(|&b| (b as f64 / scale).min(1.0)).collect();
    ImageGrid::from_vec(width, height, pixels)
}

fn header_number(bytes: &[u8], pos: &mut usize, name: &str) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::Pgm(format!("header ends before {name}"))),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Pgm(format!("invalid {name} in header")))
}

/// Quantizes to `[0, 255]` with round-half-up and clamping.
pub fn encode(img: &ImageGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(
        img.pixels()
            .iter()
            .map(|&p| (p * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8),
    );
    out
}

pub fn load_image(path: &Path) -> Result<ImageGrid> {
    let bytes = fs::read(path).map_err(|source| Error::ImageRead {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}

pub fn save_image(img: &ImageGrid, path: &Path) -> Result<()> {
    fs::write(path, encode(img)).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::noise_image;

    #[test]
    fn endpoints() {
        let img = decode(b"P5\n1 1\n255\n\xff").unwrap();
        assert_eq!(img.pixels().as_slice(), &[1.0]);
        let img = decode(b"P5 1 1 255 \x00").unwrap();
        assert_eq!(img.pixels().as_slice(), &[0.0]);
    }

    #[test]
    fn header_comments() {
        let img = decode(b"P5\n# made by hand\n2 1\n# max\n255\n\x00\x80").unwrap();
        assert_eq!(img.width(), 2);
        assert!((img.pixels()[1] - 128.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(decode(b"P2\n1 1\n255\n0").unwrap_err().to_string().contains("magic"));
        assert!(decode(b"P5\n2 2\n255\n\x00\x00")
            .unwrap_err()
            .to_string()
            .contains("truncated"));
        assert!(decode(b"P5\n1 1\n65535\n\x00\x00")
            .unwrap_err()
            .to_string()
            .contains("maxval"));
        assert!(decode(b"P5\n1 1\n0\n\x00").is_err());
        assert!(decode(b"P5\n1").is_err());
    }

    #[test]
    fn round_trip_within_half_step() {
        let img = noise_image(32, 32, 4, 0);
        let back = decode(&encode(&img)).unwrap();
        let worst = img
            .pixels()
            .iter()
            .zip(back.pixels().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1.0 / 510.0 + 1e-15, "{worst}");
    }

    #[test]
    fn clamps_out_of_range() {
        let img = ImageGrid::from_vec(3, 1, vec![-0.2, 0.5, 1.7]).unwrap();
        let bytes = encode(&img);
        assert_eq!(&bytes[bytes.len() - 3..], &[0, 128, 255]);
    }
}
