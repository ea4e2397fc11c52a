//! Grayscale file I/O: PGM (P2/P5, maxval <= 255) and, behind the `png`
//! feature, 8-bit PNG input.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::GrayImage;

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Loads a PGM or PNG image. Samples are rescaled to 0..=255 when the file's
/// maxval is below 255.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(PNG_SIGNATURE) {
        return decode_png(&bytes);
    }
    decode_pgm(&bytes)
}

/// Writes a binary P5 PGM, rounding half up and clamping to 0..=255.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

pub fn quantize(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// What `load_image(save_image(img))` yields.
pub fn round_clamp(img: &GrayImage) -> GrayImage {
    img.map(|v| f64::from(quantize(v)))
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.len());
    out.extend_from_slice(header.as_bytes());
    out.extend(img.pixels().iter().map(|&v| quantize(v)));
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut cur = HeaderCursor { bytes, pos: 0 };
    let ascii = match bytes.get(..2) {
        Some(b"P2") => true,
        Some(b"P5") => false,
        Some(m) if m[0] == b'P' => {
            return Err(Error::Unsupported(format!(
                "netpbm variant {} (only P2/P5 grayscale)",
                String::from_utf8_lossy(m)
            )))
        }
        _ => return Err(Error::Malformed("missing PGM magic number".into())),
    };
    cur.pos = 2;
    let width = cur.next_number("width")?;
    let height = cur.next_number("height")?;
    let maxval = cur.next_number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Malformed(format!("zero dimension {width}x{height}")));
    }
    if maxval == 0 {
        return Err(Error::Malformed("maxval must be positive".into()));
    }
    if maxval > 255 {
        return Err(Error::Unsupported(format!(
            "maxval {maxval} needs more than 8 bits per sample"
        )));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::Malformed("image too large".into()))?;

    let raw: Vec<usize> = if ascii {
        (0..count).map(|_| cur.next_number("sample")).collect::<Result<_>>()?
    } else {
        // Exactly one whitespace byte separates maxval from the raster.
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(Error::Malformed("missing raster separator".into())),
        }
        let data = &bytes[cur.pos..];
        if data.len() < count {
            return Err(Error::Malformed(format!(
                "truncated raster: expected {count} bytes, found {}",
                data.len()
            )));
        }
        data[..count].iter().map(|&b| usize::from(b)).collect()
    };

    let scale = 255.0 / maxval as f64;
    let mut pixels = Vec::with_capacity(count);
    for v in raw {
        if v > maxval {
            return Err(Error::Malformed(format!("sample {v} exceeds maxval {maxval}")));
        }
        pixels.push(if maxval == 255 { v as f64 } else { v as f64 * scale });
    }
    GrayImage::new(width, height, pixels)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn next_number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Malformed(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Malformed(format!("{what} out of range")))
    }
}

#[cfg(feature = "png")]
fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    use png::{BitDepth, ColorType, Transformations};

    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| Error::Malformed(format!("png: {e}")))?;
    if reader.info().bit_depth == BitDepth::Sixteen {
        return Err(Error::Unsupported("16-bit PNG".into()));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Malformed("png: image too large".into()))?;
    let mut buf = vec![0; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Malformed(format!("png: {e}")))?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let channels = match frame.color_type {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        ColorType::Rgb => 3,
        ColorType::Rgba => 4,
        ColorType::Indexed => return Err(Error::Unsupported("unexpanded palette PNG".into())),
    };
    let color = channels >= 3;
    let pixels = buf[..frame.buffer_size()]
        .chunks_exact(channels)
        .map(|px| {
            if color {
                (f64::from(px[0]) + f64::from(px[1]) + f64::from(px[2])) / 3.0
            } else {
                f64::from(px[0])
            }
        })
        .collect();
    GrayImage::new(w, h, pixels)
}

#[cfg(not(feature = "png"))]
fn decode_png(_bytes: &[u8]) -> Result<GrayImage> {
    Err(Error::Unsupported("PNG support not compiled in".into()))
}
