//! Depth maps (16-bit PNG with a scale in a text chunk, or raw little-endian
//! f32) and binary masks (PBM or PNG).

use std::io::Cursor;
use std::path::Path;

use occlureg_core::scene::{DepthMap, MaskImage};

use super::cloud::extension;
use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};

/// PNG text keyword holding the number of stored units per depth unit.
pub const DEPTH_SCALE_KEY: &str = "depth_scale";
/// Tenth-of-a-millimetre steps for metric depth; 65535 units ≈ 6.5 m.
pub const DEFAULT_DEPTH_SCALE: f64 = 10_000.0;

fn encode_png(
    width: u32,
    height: u32,
    depth: png::BitDepth,
    data: &[u8],
    text: Option<(&str, String)>,
) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(depth);
        let png_err = |e: png::EncodingError| Error::format(Path::new("<png>"), e.to_string());
        if let Some((k, v)) = text {
            enc.add_text_chunk(k.to_string(), v).map_err(png_err)?;
        }
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(data).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(out)
}

struct DecodedGray {
    width: u32,
    height: u32,
    /// One sample per pixel, widened to u16.
    samples: Vec<u16>,
    bits: png::BitDepth,
    text: Vec<(String, String)>,
}

fn decode_gray(bytes: &[u8], path: &Path) -> Result<DecodedGray> {
    let bad = |e: png::DecodingError| Error::format(path, e.to_string());
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::EXPAND);
    let mut reader = dec.read_info().map_err(bad)?;
    let text = reader.info().uncompressed_latin1_text.iter().map(|c| (c.keyword.clone(), c.text.clone())).collect();
    let size = reader.output_buffer_size().ok_or_else(|| Error::format(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(bad)?;
    if info.color_type != png::ColorType::Grayscale {
        return Err(Error::format(path, "expected a single-channel grayscale PNG"));
    }
    let (w, h) = (info.width, info.height);
    let n = w as usize * h as usize;
    let samples: Vec<u16> = match info.bit_depth {
        png::BitDepth::Sixteen => (0..h as usize)
            .flat_map(|r| {
                let row = &buf[r * info.line_size..];
                (0..w as usize).map(move |c| u16::from_be_bytes([row[2 * c], row[2 * c + 1]]))
            })
            .collect(),
        _ => (0..h as usize).flat_map(|r| buf[r * info.line_size..][..w as usize].iter().map(|&b| b as u16)).collect(),
    };
    debug_assert_eq!(samples.len(), n);
    Ok(DecodedGray { width: w, height: h, samples, bits: info.bit_depth, text })
}

/// 16-bit grayscale PNG storing `round(depth · scale)`; `0` stays invalid.
pub fn encode_depth_png(depth: &DepthMap, scale: f64) -> Result<Vec<u8>> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Config("depth scale must be positive".into()));
    }
    let mut data = Vec::with_capacity(depth.depth.len() * 2);
    for &d in &depth.depth {
        let v = (d * scale).round();
        if v > u16::MAX as f64 {
            return Err(Error::Config(format!("depth {d} overflows 16 bits at scale {scale}")));
        }
        // A valid depth must not collapse to the invalid marker.
        let v = if d > 0.0 { v.max(1.0) } else { 0.0 };
        data.extend_from_slice(&(v as u16).to_be_bytes());
    }
    encode_png(depth.width, depth.height, png::BitDepth::Sixteen, &data, Some((DEPTH_SCALE_KEY, format!("{scale}"))))
}

/// Returns the depth map and the scale it was stored with. The scale comes
/// from the PNG text chunk, or `fallback_scale` when the chunk is absent.
pub fn decode_depth_png(bytes: &[u8], path: &Path, fallback_scale: Option<f64>) -> Result<(DepthMap, f64)> {
    let img = decode_gray(bytes, path)?;
    if img.bits != png::BitDepth::Sixteen {
        return Err(Error::format(path, "depth PNG must be 16-bit"));
    }
    let scale = match img.text.iter().find(|(k, _)| k == DEPTH_SCALE_KEY) {
        Some((_, v)) => v.trim().parse::<f64>().map_err(|_| Error::format(path, "bad depth_scale text"))?,
        None => fallback_scale.ok_or_else(|| Error::format(path, "depth PNG lacks a depth_scale text chunk"))?,
    };
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::format(path, "depth scale must be positive"));
    }
    let depth = img.samples.iter().map(|&v| v as f64 / scale).collect();
    Ok((DepthMap::new(img.width, img.height, depth)?, scale))
}

pub fn encode_depth_raw(depth: &DepthMap) -> Vec<u8> {
    depth.depth.iter().flat_map(|&d| (d as f32).to_le_bytes()).collect()
}

/// Raw little-endian f32 grid, row-major; dimensions come from elsewhere
/// (the intrinsics). Non-finite or negative values are treated as invalid.
pub fn decode_depth_raw(bytes: &[u8], width: u32, height: u32, path: &Path) -> Result<DepthMap> {
    let n = width as usize * height as usize;
    if bytes.len() != 4 * n {
        return Err(Error::format(
            path,
            format!("expected {} bytes for {width}×{height} f32 depth, found {}", 4 * n, bytes.len()),
        ));
    }
    let depth = bytes
        .chunks_exact(4)
        .map(|c| {
            let v = f32::from_le_bytes(c.try_into().unwrap()) as f64;
            if v.is_finite() && v > 0.0 {
                v
            } else {
                0.0
            }
        })
        .collect();
    Ok(DepthMap::new(width, height, depth)?)
}

/// Binary PBM (P4); set bits are mask pixels.
pub fn encode_pbm(mask: &MaskImage) -> Vec<u8> {
    let mut out = format!("P4\n{} {}\n", mask.width, mask.height).into_bytes();
    let w = mask.width as usize;
    for row in mask.data.chunks(w.max(1)) {
        for byte in row.chunks(8) {
            let mut b = 0u8;
            for (k, &on) in byte.iter().enumerate() {
                if on {
                    b |= 0x80 >> k;
                }
            }
            out.push(b);
        }
    }
    out
}

/// Reads P1 (ASCII) or P4 (binary) PBM.
pub fn decode_pbm(bytes: &[u8], path: &Path) -> Result<MaskImage> {
    let bad = |m: &str| Error::format(path, m.to_string());
    let mut pos = 0;
    let mut token = || -> Option<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        (pos > start).then(|| String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token().ok_or_else(|| bad("empty PBM"))?;
    let width: u32 = token().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad PBM width"))?;
    let height: u32 = token().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad PBM height"))?;
    let (w, h) = (width as usize, height as usize);
    let data = match magic.as_str() {
        "P4" => {
            // Exactly one whitespace byte separates the header from the raster.
            let start = pos + 1;
            let stride = w.div_ceil(8);
            if bytes.len() < start + stride * h {
                return Err(bad("truncated P4 raster"));
            }
            let raster = &bytes[start..];
            (0..h).flat_map(|r| (0..w).map(move |c| raster[r * stride + c / 8] & (0x80 >> (c % 8)) != 0)).collect()
        }
        "P1" => {
            let mut data = Vec::with_capacity(w * h);
            for &b in &bytes[pos..] {
                match b {
                    b'0' => data.push(false),
                    b'1' => data.push(true),
                    c if c.is_ascii_whitespace() => {}
                    _ => return Err(bad("unexpected byte in P1 raster")),
                }
            }
            if data.len() != w * h {
                return Err(bad("P1 raster has the wrong pixel count"));
            }
            data
        }
        _ => return Err(bad("not a PBM (expected P1 or P4)")),
    };
    Ok(MaskImage::new(width, height, data)?)
}

/// 8-bit grayscale PNG, 255 for mask pixels.
pub fn encode_mask_png(mask: &MaskImage) -> Result<Vec<u8>> {
    let data: Vec<u8> = mask.data.iter().map(|&m| if m { 255 } else { 0 }).collect();
    encode_png(mask.width, mask.height, png::BitDepth::Eight, &data, None)
}

/// Any grayscale PNG; nonzero pixels are mask pixels.
pub fn decode_mask_png(bytes: &[u8], path: &Path) -> Result<MaskImage> {
    let img = decode_gray(bytes, path)?;
    Ok(MaskImage::new(img.width, img.height, img.samples.iter().map(|&v| v != 0).collect())?)
}

pub fn read_mask(path: &Path) -> Result<MaskImage> {
    let bytes = read_bytes(path)?;
    match extension(path).as_str() {
        "pbm" => decode_pbm(&bytes, path),
        "png" => decode_mask_png(&bytes, path),
        other => Err(Error::format(path, format!("unknown mask extension {other:?}"))),
    }
}

pub fn write_mask(path: &Path, mask: &MaskImage) -> Result<()> {
    let bytes = match extension(path).as_str() {
        "pbm" => encode_pbm(mask),
        "png" => encode_mask_png(mask)?,
        other => return Err(Error::format(path, format!("unknown mask extension {other:?}"))),
    };
    write_bytes(path, &bytes)
}

/// `.png` needs its scale chunk (or `fallback_scale`); `.raw`/`.f32` take
/// the size from `width`/`height`.
pub fn read_depth(path: &Path, width: u32, height: u32, fallback_scale: Option<f64>) -> Result<DepthMap> {
    let bytes = read_bytes(path)?;
    let depth = match extension(path).as_str() {
        "png" => decode_depth_png(&bytes, path, fallback_scale)?.0,
        "raw" | "f32" => decode_depth_raw(&bytes, width, height, path)?,
        other => return Err(Error::format(path, format!("unknown depth extension {other:?}"))),
    };
    if (depth.width, depth.height) != (width, height) {
        return Err(Error::format(
            path,
            format!("depth is {}×{}, intrinsics say {width}×{height}", depth.width, depth.height),
        ));
    }
    Ok(depth)
}

pub fn write_depth(path: &Path, depth: &DepthMap, scale: f64) -> Result<()> {
    let bytes = match extension(path).as_str() {
        "png" => encode_depth_png(depth, scale)?,
        "raw" | "f32" => encode_depth_raw(depth),
        other => return Err(Error::format(path, format!("unknown depth extension {other:?}"))),
    };
    write_bytes(path, &bytes)
}
