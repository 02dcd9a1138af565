//! Binary Netpbm codecs: P6 (8-bit RGB) and P5 (8- or 16-bit gray).
//!
//! 16-bit samples are big-endian, as the format requires. Headers may carry
//! `#` comments; writers never emit them.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetpbmError {
    #[error("expected magic {expected}, found {found:?}")]
    BadMagic { expected: &'static str, found: String },
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("unsupported maxval {0}")]
    UnsupportedMaxval(u32),
    #[error("pixel data truncated: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("{0} trailing bytes after pixel data")]
    TrailingData(usize),
}

struct Header {
    width: u32,
    height: u32,
    maxval: u32,
    data_offset: usize,
}

fn parse_header(bytes: &[u8], magic: &'static str) -> Result<Header, NetpbmError> {
    if bytes.len() < 2 || &bytes[..2] != magic.as_bytes() {
        return Err(NetpbmError::BadMagic {
            expected: magic,
            found: String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned(),
        });
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(NetpbmError::BadHeader("header ends early".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(NetpbmError::BadHeader(format!(
                "expected a number at byte {start}"
            )));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| NetpbmError::BadHeader("number out of range".into()))?;
    }
    // exactly one whitespace byte separates maxval from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(NetpbmError::BadHeader("missing separator after maxval".into())),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(NetpbmError::BadHeader(format!("empty image {width}x{height}")));
    }
    Ok(Header {
        width,
        height,
        maxval,
        data_offset: pos,
    })
}

fn raster<'a>(bytes: &'a [u8], header: &Header, sample_bytes: usize, channels: usize) -> Result<&'a [u8], NetpbmError> {
    let expected = header.width as usize * header.height as usize * channels * sample_bytes;
    let data = &bytes[header.data_offset..];
    if data.len() < expected {
        return Err(NetpbmError::Truncated {
            expected,
            got: data.len(),
        });
    }
    if data.len() > expected {
        return Err(NetpbmError::TrailingData(data.len() - expected));
    }
    Ok(data)
}

pub fn encode_ppm(img: &ImageBuffer) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.as_bytes());
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<ImageBuffer, NetpbmError> {
    let header = parse_header(bytes, "P6")?;
    if header.maxval != 255 {
        return Err(NetpbmError::UnsupportedMaxval(header.maxval));
    }
    let data = raster(bytes, &header, 1, 3)?;
    Ok(ImageBuffer::from_raw(header.width, header.height, data.to_vec())
        .expect("raster length checked"))
}

/// 8-bit gray, maxval 255.
pub fn encode_pgm8(width: u32, height: u32, samples: &[u8]) -> Vec<u8> {
    debug_assert_eq!(samples.len(), width as usize * height as usize);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(samples);
    out
}

pub fn decode_pgm8(bytes: &[u8]) -> Result<(u32, u32, Vec<u8>), NetpbmError> {
    let header = parse_header(bytes, "P5")?;
    if header.maxval != 255 {
        return Err(NetpbmError::UnsupportedMaxval(header.maxval));
    }
    let data = raster(bytes, &header, 1, 1)?;
    Ok((header.width, header.height, data.to_vec()))
}

/// 16-bit gray, maxval 65535, big-endian samples.
pub fn encode_pgm16(width: u32, height: u32, samples: &[u16]) -> Vec<u8> {
    debug_assert_eq!(samples.len(), width as usize * height as usize);
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(samples.len() * 2);
    for s in samples {
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

pub fn decode_pgm16(bytes: &[u8]) -> Result<(u32, u32, Vec<u16>), NetpbmError> {
    let header = parse_header(bytes, "P5")?;
    if header.maxval != 65535 {
        return Err(NetpbmError::UnsupportedMaxval(header.maxval));
    }
    let data = raster(bytes, &header, 2, 1)?;
    let samples = data
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((header.width, header.height, samples))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn format_err(path: &Path) -> impl FnOnce(NetpbmError) -> Error + '_ {
    move |e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

pub fn read_ppm(path: &Path) -> Result<ImageBuffer> {
    decode_ppm(&read_bytes(path)?).map_err(format_err(path))
}

pub fn write_ppm(path: &Path, img: &ImageBuffer) -> Result<()> {
    fs::write(path, encode_ppm(img)).map_err(|e| Error::io(path, e))
}

pub fn read_pgm8(path: &Path) -> Result<(u32, u32, Vec<u8>)> {
    decode_pgm8(&read_bytes(path)?).map_err(format_err(path))
}

pub fn write_pgm8(path: &Path, width: u32, height: u32, samples: &[u8]) -> Result<()> {
    fs::write(path, encode_pgm8(width, height, samples)).map_err(|e| Error::io(path, e))
}

pub fn read_pgm16(path: &Path) -> Result<(u32, u32, Vec<u16>)> {
    decode_pgm16(&read_bytes(path)?).map_err(format_err(path))
}

pub fn write_pgm16(path: &Path, width: u32, height: u32, samples: &[u16]) -> Result<()> {
    fs::write(path, encode_pgm16(width, height, samples)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ppm_header_is_canonical() {
        let img = ImageBuffer::from_raw(2, 1, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(encode_ppm(&img), b"P6\n2 1\n255\n\x01\x02\x03\x04\x05\x06".to_vec());
    }

    #[test]
    fn pgm16_is_big_endian() {
        let bytes = encode_pgm16(2, 1, &[10000, 1]);
        assert_eq!(&bytes[bytes.len() - 4..], &[0x27, 0x10, 0x00, 0x01]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let bytes = b"P5\n# made by hand\n2 1 # trailing\n255\n\x07\x08";
        assert_eq!(decode_pgm8(bytes).unwrap(), (2, 1, vec![7, 8]));
    }

    #[test]
    fn truncated_raster_is_reported() {
        let mut bytes = encode_pgm8(4, 4, &[0; 16]);
        bytes.truncate(bytes.len() - 3);
        assert_eq!(
            decode_pgm8(&bytes),
            Err(NetpbmError::Truncated {
                expected: 16,
                got: 13
            })
        );
    }

    #[test]
    fn wrong_magic_and_maxval() {
        let img = ImageBuffer::new(1, 1);
        assert!(matches!(decode_pgm8(&encode_ppm(&img)), Err(NetpbmError::BadMagic { .. })));
        let bytes = encode_pgm16(1, 1, &[3]);
        assert_eq!(decode_pgm8(&bytes), Err(NetpbmError::UnsupportedMaxval(65535)));
    }

    proptest! {
        #[test]
        fn ppm_round_trip(w in 1u32..9, h in 1u32..9, seed in any::<u64>()) {
            let data = (0..w * h * 3).map(|i| crate::rng::mix(seed, u64::from(i)) as u8).collect();
            let img = ImageBuffer::from_raw(w, h, data).unwrap();
            prop_assert_eq!(decode_ppm(&encode_ppm(&img)).unwrap(), img);
        }

        #[test]
        fn pgm16_round_trip(samples in proptest::collection::vec(any::<u16>(), 1..64)) {
            let w = samples.len() as u32;
            prop_assert_eq!(decode_pgm16(&encode_pgm16(w, 1, &samples)).unwrap(), (w, 1, samples));
        }
    }
}
