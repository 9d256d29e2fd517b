//! PNG and binary PPM/PGM ingestion into [`Image`] with values in `[0, 1]`.

use std::io::{Cursor, Read, Write};
use std::path::Path;

use super::{create, open, IoError};
use crate::img::Image;

/// Decodes PNG (by signature) or binary `P5`/`P6` netpbm. Alpha channels are dropped.
pub fn read_image<R: Read>(mut r: R) -> Result<Image, IoError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        decode_png(&bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(&bytes)
    } else {
        Err(IoError::Unsupported("image is neither PNG nor binary PPM/PGM".into()))
    }
}

fn decode_png(bytes: &[u8]) -> Result<Image, IoError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| IoError::Format(format!("PNG: {e}")))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| IoError::Format("PNG too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| IoError::Format(format!("PNG: {e}")))?;
    let (src_channels, keep) = match info.color_type {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        png::ColorType::Indexed => return Err(IoError::Format("PNG palette was not expanded".into())),
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let wide = info.bit_depth == png::BitDepth::Sixteen;
    let max = if wide { 65535.0 } else { 255.0 };
    let mut data = Vec::with_capacity(w * h * keep);
    for y in 0..h {
        let row = &buf[y * info.line_size..(y + 1) * info.line_size];
        for x in 0..w {
            for c in 0..keep {
                let s = x * src_channels + c;
                let v = if wide { u16::from_be_bytes([row[2 * s], row[2 * s + 1]]) as f64 } else { row[s] as f64 };
                data.push(v / max);
            }
        }
    }
    Image::new(w, h, keep, data).map_err(|e| IoError::Invalid(e.to_string()))
}

fn decode_pnm(bytes: &[u8]) -> Result<Image, IoError> {
    let channels = if bytes[1] == b'6' { 3 } else { 1 };
    // Header: magic, width, height, maxval separated by whitespace and comments,
    // followed by exactly one whitespace byte.
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(IoError::Format("PNM header ends early".into())),
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| IoError::Format("PNM header field is not a number".into()))?;
    }
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(IoError::Format("PNM header must end with whitespace".into()));
    }
    pos += 1;
    let [w, h, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(IoError::Format(format!("PNM maxval {maxval} out of range")));
    }
    let bps = if maxval < 256 { 1 } else { 2 };
    let n = w * h * channels;
    let body = &bytes[pos..];
    if body.len() < n * bps {
        return Err(IoError::Format(format!("PNM body has {} bytes, expected {}", body.len(), n * bps)));
    }
    let data = (0..n)
        .map(|i| {
            let v = if bps == 1 { body[i] as f64 } else { u16::from_be_bytes([body[2 * i], body[2 * i + 1]]) as f64 };
            (v / maxval as f64).min(1.0)
        })
        .collect();
    Image::new(w, h, channels, data).map_err(|e| IoError::Invalid(e.to_string()))
}

/// Writes an 8-bit binary PGM (1 channel) or PPM (3 channels).
pub fn write_pnm<W: Write>(mut w: W, img: &Image) -> Result<(), IoError> {
    let magic = if img.channels() == 3 { "P6" } else { "P5" };
    write!(w, "{magic}\n{} {}\n255\n", img.width(), img.height())?;
    let bytes: Vec<u8> = img.data().iter().map(|v| (v * 255.0).round() as u8).collect();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn load_image(path: &Path) -> Result<Image, IoError> {
    read_image(open(path)?)
}

pub fn save_pnm(path: &Path, img: &Image) -> Result<(), IoError> {
    write_pnm(create(path)?, img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_fixture() {
        let mut bytes = b"P6\n# comment\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 51, 255, 10, 20, 30, 255, 255, 255, 1, 2, 3]);
        let img = read_image(bytes.as_slice()).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 2, 3));
        assert_eq!(img.get(0, 0, 1), 51.0 / 255.0);
        assert_eq!(img.get(1, 0, 2), 30.0 / 255.0);
        assert_eq!(img.get(0, 1, 0), 1.0);
        assert_eq!(img.get(1, 1, 2), 3.0 / 255.0);
    }

    #[test]
    fn pgm_sixteen_bit() {
        let mut bytes = b"P5 1 1 1000\n".to_vec();
        bytes.extend_from_slice(&500u16.to_be_bytes());
        let img = read_image(bytes.as_slice()).unwrap();
        assert_eq!(img.get(0, 0, 0), 0.5);
    }

    #[test]
    fn png_rgba_drops_alpha() {
        let mut bytes = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut bytes, 2, 1);
            enc.set_color(png::ColorType::Rgba);
            enc.set_depth(png::BitDepth::Eight);
            let mut wr = enc.write_header().unwrap();
            wr.write_image_data(&[255, 0, 0, 7, 0, 102, 0, 9]).unwrap();
        }
        let img = read_image(bytes.as_slice()).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.get(1, 0, 1), 0.4);
        assert_eq!(img.get(0, 0, 0), 1.0);
    }

    #[test]
    fn pnm_round_trip() {
        let img = Image::new(2, 1, 1, vec![0.0, 128.0 / 255.0]).unwrap();
        let mut buf = Vec::new();
        write_pnm(&mut buf, &img).unwrap();
        assert_eq!(read_image(buf.as_slice()).unwrap(), img);
    }

    #[test]
    fn rejects_unknown_and_short() {
        assert!(read_image(&b"GIF89a"[..]).is_err());
        assert!(read_image(&b"P6 2 2 255\n\x00"[..]).is_err());
    }
}
