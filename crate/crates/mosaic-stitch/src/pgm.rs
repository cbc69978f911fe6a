//! PGM (portable graymap) reading and writing, P2 text and P5 binary,
//! 8-bit only.
//!
//! Headers follow Netpbm conventions: `#` comments and arbitrary
//! whitespace between tokens. There is no sample rescaling; a P2 file may
//! declare any maxval up to 255 and its samples are read literally, while
//! P5 requires maxval 255 so raw bytes map one-to-one.

use thiserror::Error;

use crate::bitmap::GrayImage;

/// Largest accepted width or height; rejects absurd headers before any
/// allocation.
const MAX_DIMENSION: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmVariant {
    /// ASCII samples.
    P2,
    /// Binary samples, one byte each.
    P5,
}

/// Parsed PGM header. `maxval` stays within 255; P5 additionally requires
/// exactly 255 so raw payload bytes are the sample values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PgmHeader {
    pub magic: PgmVariant,
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PgmError {
    #[error("byte {offset}: not an 8-bit PGM (expected magic P2 or P5, found {found:?})")]
    BadMagic { offset: usize, found: String },
    #[error("byte {offset}: bad header: {reason}")]
    BadHeader { offset: usize, reason: String },
    #[error("byte {offset}: maxval {maxval} exceeds 255; only 8-bit images are supported")]
    MaxvalTooLarge { offset: usize, maxval: u64 },
    #[error("byte {offset}: truncated payload: expected {expected} samples, found {found}")]
    TruncatedPayload {
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("byte {offset}: bad sample: {reason}")]
    BadSample { offset: usize, reason: String },
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    /// Skips whitespace and `#` comments (which run to end of line).
    fn skip_separators(&mut self) {
        while let Some(byte) = self.peek() {
            if byte.is_ascii_whitespace() {
                self.pos += 1;
            } else if byte == b'#' {
                while let Some(b) = self.peek() {
                    self.pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    /// Reads an unsigned decimal token, returning it with its start offset.
    fn read_uint(&mut self, what: &str) -> Result<(u64, usize), PgmError> {
        self.skip_separators();
        let start = self.pos;
        let mut value: u64 = 0;
        let mut digits = 0;
        while let Some(byte) = self.peek() {
            if byte.is_ascii_digit() {
                value = value
                    .saturating_mul(10)
                    .saturating_add(u64::from(byte - b'0'));
                digits += 1;
                self.pos += 1;
            } else {
                break;
            }
        }
        if digits == 0 {
            return Err(PgmError::BadHeader {
                offset: start,
                reason: format!("expected {what}"),
            });
        }
        Ok((value, start))
    }
}

/// Parses and validates only the header; the returned cursor position
/// sits right after the maxval token.
fn parse_header(bytes: &[u8]) -> Result<(PgmHeader, usize), PgmError> {
    let magic = match bytes.get(..2) {
        Some(b"P2") => PgmVariant::P2,
        Some(b"P5") => PgmVariant::P5,
        Some(other) => {
            return Err(PgmError::BadMagic {
                offset: 0,
                found: String::from_utf8_lossy(other).into_owned(),
            })
        }
        None => {
            return Err(PgmError::BadMagic {
                offset: 0,
                found: String::from_utf8_lossy(bytes).into_owned(),
            })
        }
    };

    let mut cursor = Cursor::new(bytes);
    cursor.pos = 2;
    let (width, width_at) = cursor.read_uint("width")?;
    let (height, height_at) = cursor.read_uint("height")?;
    let (maxval, maxval_at) = cursor.read_uint("maxval")?;

    if width == 0 || width > MAX_DIMENSION {
        return Err(PgmError::BadHeader {
            offset: width_at,
            reason: format!("width {width} out of range 1..={MAX_DIMENSION}"),
        });
    }
    if height == 0 || height > MAX_DIMENSION {
        return Err(PgmError::BadHeader {
            offset: height_at,
            reason: format!("height {height} out of range 1..={MAX_DIMENSION}"),
        });
    }
    if maxval > 255 {
        return Err(PgmError::MaxvalTooLarge {
            offset: maxval_at,
            maxval,
        });
    }
    if maxval == 0 {
        return Err(PgmError::BadHeader {
            offset: maxval_at,
            reason: "maxval must be at least 1".into(),
        });
    }
    if width * height > MAX_DIMENSION * MAX_DIMENSION / 16 {
        return Err(PgmError::BadHeader {
            offset: width_at,
            reason: format!("image {width}x{height} is too large"),
        });
    }
    if magic == PgmVariant::P5 && maxval != 255 {
        return Err(PgmError::BadHeader {
            offset: maxval_at,
            reason: format!("P5 requires maxval 255, got {maxval}"),
        });
    }

    Ok((
        PgmHeader {
            magic,
            width: width as usize,
            height: height as usize,
            maxval: maxval as u16,
        },
        cursor.pos,
    ))
}

/// Parses just the PGM header, without touching the payload.
pub fn read_header(bytes: &[u8]) -> Result<PgmHeader, PgmError> {
    parse_header(bytes).map(|(header, _)| header)
}

/// Parses PGM bytes into a grayscale image.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    let (header, header_end) = parse_header(bytes)?;
    let mut cursor = Cursor::new(bytes);
    cursor.pos = header_end;

    let width = header.width;
    let height = header.height;
    let expected = width * height;

    let pixels = match header.magic {
        PgmVariant::P5 => {
            // Exactly one whitespace byte separates the header from the raw
            // payload.
            match cursor.peek() {
                Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
                _ => {
                    return Err(PgmError::BadHeader {
                        offset: cursor.pos,
                        reason: "expected single whitespace byte before P5 payload".into(),
                    })
                }
            }
            let payload = &bytes[cursor.pos.min(bytes.len())..];
            if payload.len() < expected {
                return Err(PgmError::TruncatedPayload {
                    offset: bytes.len(),
                    expected,
                    found: payload.len(),
                });
            }
            payload[..expected].to_vec()
        }
        PgmVariant::P2 => {
            let mut pixels = Vec::with_capacity(expected);
            while pixels.len() < expected {
                cursor.skip_separators();
                if cursor.peek().is_none() {
                    return Err(PgmError::TruncatedPayload {
                        offset: cursor.pos,
                        expected,
                        found: pixels.len(),
                    });
                }
                let (value, at) = cursor.read_uint("sample").map_err(|err| match err {
                    PgmError::BadHeader { offset, .. } => PgmError::BadSample {
                        offset,
                        reason: "expected a decimal sample".into(),
                    },
                    other => other,
                })?;
                if value > 255 {
                    return Err(PgmError::BadSample {
                        offset: at,
                        reason: format!("sample {value} exceeds 255"),
                    });
                }
                pixels.push(value as u8);
            }
            pixels
        }
    };

    Ok(GrayImage::new(width, height, pixels).expect("validated dimensions"))
}

/// Encodes a grayscale image as PGM bytes. P2 output puts one image row
/// per line with single spaces; both variants write maxval 255, and
/// `read_pgm` inverts either exactly.
pub fn write_pgm(img: &GrayImage, variant: PgmVariant) -> Vec<u8> {
    let mut out = Vec::new();
    match variant {
        PgmVariant::P2 => {
            out.extend_from_slice(format!("P2\n{} {}\n255\n", img.width(), img.height()).as_bytes());
            let mut line = String::new();
            for row in 0..img.height() {
                line.clear();
                for (col, pixel) in img.row(row).iter().enumerate() {
                    if col > 0 {
                        line.push(' ');
                    }
                    line.push_str(&pixel.to_string());
                }
                line.push('\n');
                out.extend_from_slice(line.as_bytes());
            }
        }
        PgmVariant::P5 => {
            out.extend_from_slice(format!("P5\n{} {}\n255\n", img.width(), img.height()).as_bytes());
            out.extend_from_slice(img.pixels());
        }
    }
    out
}
