//! Image, attention-map and mask files.
//!
//! `.png` goes through the `image` crate; `.pgm`, `.ppm` and `.pnm` use the
//! binary PNM codec. Attention maps and masks are always single-channel
//! PGM; masks store 0 for excluded and 255 for included pixels.

use std::fs;
use std::path::{Path, PathBuf};

use image::{codecs::png::PngEncoder, ExtendedColorType, ImageEncoder, ImageFormat};
use log::warn;
use pixattack_core::{AttentionMap, Image, PixelMask};

use crate::{pnm, FormatError};

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, FormatError> {
    fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    fs::write(path, bytes).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Png,
    Pnm,
}

fn kind_of(path: &Path) -> Result<Kind, FormatError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "png" => Ok(Kind::Png),
        "pgm" | "ppm" | "pnm" => Ok(Kind::Pnm),
        _ => Err(FormatError::UnsupportedExtension(PathBuf::from(path))),
    }
}

pub fn decode_png(bytes: &[u8]) -> Result<Image, FormatError> {
    let dynamic = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
    let color = dynamic.color();
    if color.has_alpha() || color.bytes_per_pixel() / color.channel_count() > 1 {
        warn!("PNG is {color:?}; alpha and extra bit depth are dropped");
    }
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    let img = if color.has_color() {
        Image::new(h, w, 3, dynamic.to_rgb8().into_raw())?
    } else {
        Image::new(h, w, 1, dynamic.to_luma8().into_raw())?
    };
    Ok(img)
}

pub fn encode_png(image: &Image) -> Result<Vec<u8>, FormatError> {
    let color = if image.channels() == 1 {
        ExtendedColorType::L8
    } else {
        ExtendedColorType::Rgb8
    };
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(image.data(), image.width() as u32, image.height() as u32, color)?;
    Ok(out)
}

/// Loads a PNG or binary PNM image, chosen by extension.
pub fn load_image(path: &Path) -> Result<Image, FormatError> {
    let kind = kind_of(path)?;
    let bytes = read_bytes(path)?;
    match kind {
        Kind::Png => decode_png(&bytes),
        Kind::Pnm => pnm::decode(&bytes),
    }
}

pub fn save_image(path: &Path, image: &Image) -> Result<(), FormatError> {
    let bytes = match kind_of(path)? {
        Kind::Png => encode_png(image)?,
        Kind::Pnm => {
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default();
            let expected = if image.channels() == 1 { "pgm" } else { "ppm" };
            if !ext.eq_ignore_ascii_case(expected) && !ext.eq_ignore_ascii_case("pnm") {
                warn!("writing a {}-channel image to {}", image.channels(), path.display());
            }
            pnm::encode(image)
        }
    };
    write_bytes(path, &bytes)
}

fn load_gray(path: &Path) -> Result<Image, FormatError> {
    let img = pnm::decode(&read_bytes(path)?)?;
    if img.channels() != 1 {
        return Err(FormatError::Pnm(format!("{} is not a single-channel PGM", path.display())));
    }
    Ok(img)
}

fn check_size(found: (usize, usize), expected: Option<(usize, usize)>) -> Result<(), FormatError> {
    match expected {
        Some(e) if e != found => Err(FormatError::SizeMismatch { expected: e, found }),
        _ => Ok(()),
    }
}

/// Loads an attention map; `expected` is the target image's `(height, width)`.
pub fn load_attention(path: &Path, expected: Option<(usize, usize)>) -> Result<AttentionMap, FormatError> {
    let img = load_gray(path)?;
    check_size((img.height(), img.width()), expected)?;
    Ok(AttentionMap::new(img.height(), img.width(), img.into_data())?)
}

pub fn save_attention(path: &Path, map: &AttentionMap) -> Result<(), FormatError> {
    let img = Image::new(map.height(), map.width(), 1, map.values().to_vec())?;
    write_bytes(path, &pnm::encode(&img))
}

/// Any nonzero byte counts as included.
pub fn load_mask(path: &Path, expected: Option<(usize, usize)>) -> Result<PixelMask, FormatError> {
    let img = load_gray(path)?;
    check_size((img.height(), img.width()), expected)?;
    let bits = img.data().iter().map(|&v| v != 0).collect();
    Ok(PixelMask::from_bits(img.height(), img.width(), bits)?)
}

pub fn save_mask(path: &Path, mask: &PixelMask) -> Result<(), FormatError> {
    let data = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let img = Image::new(mask.height(), mask.width(), 1, data)?;
    write_bytes(path, &pnm::encode(&img))
}
