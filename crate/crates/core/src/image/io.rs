use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::ImageBuffer;
use crate::error::{Error, Result};

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Decodes a PNG (8/16-bit gray or RGB), binary PGM (P5) or PPM (P6).
///
/// 16-bit samples are reduced to 8 bits by a right shift. PNG alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let bytes = fs::read(path.as_ref())?;
    decode(&bytes)
}

pub(crate) fn decode(bytes: &[u8]) -> Result<ImageBuffer> {
    if bytes.starts_with(PNG_MAGIC) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(bytes)
    } else {
        Err(Error::Format("not a PNG, PGM (P5) or PPM (P6) file".into()))
    }
}

fn decode_png(bytes: &[u8]) -> Result<ImageBuffer> {
    let mut decoder = png::Decoder::new(bytes);
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| Error::Format(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::Format(e.to_string()))?;
    buf.truncate(info.buffer_size());

    let (src_channels, keep) = match info.color_type {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        png::ColorType::Indexed => return Err(Error::Format("palette PNG was not expanded".into())),
    };
    let samples: Vec<u8> = match info.bit_depth {
        png::BitDepth::Sixteen => buf.chunks_exact(2).map(|be| (u16::from_be_bytes([be[0], be[1]]) >> 8) as u8).collect(),
        png::BitDepth::Eight => buf,
        other => return Err(Error::Format(format!("unexpected bit depth {other:?} after expansion"))),
    };
    let data = if src_channels == keep {
        samples
    } else {
        samples.chunks_exact(src_channels).flat_map(|px| px[..keep].to_vec()).collect()
    };
    ImageBuffer::new(info.width as usize, info.height as usize, keep, data)
}

fn decode_pnm(bytes: &[u8]) -> Result<ImageBuffer> {
    let channels = if bytes[1] == b'5' { 1 } else { 3 };
    let mut pos = 2;
    let mut header = [0usize; 3];
    for slot in header.iter_mut() {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(Error::Format("truncated PNM header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *slot = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("bad PNM header field".into()))?;
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("missing whitespace after PNM header".into()));
    }
    pos += 1;
    let [width, height, maxval] = header;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PNM maxval {maxval} out of range")));
    }
    let n = width * height * channels;
    let raster = &bytes[pos..];
    let data = if maxval < 256 {
        raster.get(..n).ok_or_else(|| Error::Format("truncated PNM raster".into()))?.to_vec()
    } else {
        let raw = raster.get(..2 * n).ok_or_else(|| Error::Format("truncated PNM raster".into()))?;
        raw.chunks_exact(2).map(|be| (u16::from_be_bytes([be[0], be[1]]) >> 8) as u8).collect()
    };
    ImageBuffer::new(width, height, channels, data)
}

/// Encodes an 8-bit PNG in memory.
pub fn encode_png(img: &ImageBuffer) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(if img.channels() == 1 { png::ColorType::Grayscale } else { png::ColorType::Rgb });
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::Format(e.to_string()))?;
        writer.write_image_data(img.data()).map_err(|e| Error::Format(e.to_string()))?;
    }
    Ok(out)
}

pub fn save_png(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_png(img)?)?;
    Ok(())
}

/// Writes P5 for single-channel buffers and P6 for RGB.
pub fn save_pnm(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    write!(w, "{magic}\n{} {}\n255\n", img.width(), img.height())?;
    w.write_all(img.data())?;
    w.flush()?;
    Ok(())
}

/// Chooses the encoder from the file extension (`png`, `pgm`, `ppm`, `pnm`).
pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => save_png(img, path),
        Some("pgm") | Some("ppm") | Some("pnm") => save_pnm(img, path),
        _ => Err(Error::Format(format!("unsupported output extension: {}", path.display()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_ppm() {
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend([0u8; 12]);
        let img = decode(&bytes).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 2, 3));
        assert_eq!(img.data(), &[0u8; 12]);
    }

    #[test]
    fn single_pixel_pgm_with_comment() {
        let img = decode(b"P5 # a comment\n1 1\n255\n\xff").unwrap();
        assert_eq!(img.data(), &[255]);
    }

    #[test]
    fn sixteen_bit_pgm_is_shifted() {
        let img = decode(b"P5\n2 1\n65535\n\x12\x34\xff\xff").unwrap();
        assert_eq!(img.data(), &[0x12, 0xff]);
    }

    #[test]
    fn png_gradient_round_trips() {
        let data: Vec<u8> = (0..16).map(|i| (i * 17) as u8).collect();
        let img = ImageBuffer::new(4, 4, 1, data).unwrap();
        assert_eq!(decode(&encode_png(&img).unwrap()).unwrap(), img);
        let rgb = ImageBuffer::new(4, 4, 3, (0..48).map(|i| (i * 5) as u8).collect()).unwrap();
        assert_eq!(decode(&encode_png(&rgb).unwrap()).unwrap(), rgb);
    }

    #[test]
    fn sixteen_bit_png_is_shifted() {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 2, 1);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Sixteen);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[0xab, 0xcd, 0x01, 0x02]).unwrap();
        }
        assert_eq!(decode(&out).unwrap().data(), &[0xab, 0x01]);
    }

    #[test]
    fn rejects_garbage_and_truncation() {
        assert!(matches!(decode(b"GIF89a"), Err(Error::Format(_))));
        assert!(matches!(decode(b"P6\n2 2\n255\n\x00"), Err(Error::Format(_))));
        assert!(matches!(decode(b"\x89PNG\r\n\x1a\nbroken"), Err(Error::Format(_))));
    }

    #[test]
    fn file_round_trip_pnm() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageBuffer::new(3, 2, 3, (0..18).map(|i| i as u8 * 9).collect()).unwrap();
        let p = dir.path().join("x.ppm");
        save_image(&img, &p).unwrap();
        assert_eq!(load_image(&p).unwrap(), img);
        assert!(matches!(load_image(dir.path().join("missing.png")), Err(Error::Io(_))));
    }
}
