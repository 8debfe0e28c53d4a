//! Conversion between 8-bit raster files and real-valued channel planes.

use std::io::Cursor;
use std::path::Path;

use adaseg_core::ImageBuffer;
use image::codecs::png::PngEncoder;
use image::{ColorType, DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};

#[derive(Debug, thiserror::Error)]
pub enum ImageIoError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("cannot decode image: {0}")]
    Decode(#[from] image::ImageError),
    #[error("unsupported pixel format {0:?}; only 8-bit gray, RGB and RGBA are accepted")]
    UnsupportedFormat(ColorType),
    #[error("image has zero width or height")]
    ZeroDimension,
    #[error("invalid image: {0}")]
    Invalid(#[from] adaseg_core::Error),
    #[error("color planes do not match a {width}x{height} image with {channels} channel(s)")]
    ColorShape { width: usize, height: usize, channels: usize },
}

/// Reads a PNG, binary PPM or binary PGM file.
pub fn load_image(path: &Path) -> Result<ImageBuffer, ImageIoError> {
    let bytes = std::fs::read(path).map_err(|source| ImageIoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    decode_image(&bytes)
}

/// Decodes an in-memory PNG, PPM or PGM. Alpha is dropped; gray stays one channel.
pub fn decode_image(bytes: &[u8]) -> Result<ImageBuffer, ImageIoError> {
    let decoded = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| ImageIoError::Decode(image::ImageError::IoError(e)))?
        .decode()?;
    from_dynamic(&decoded)
}

fn from_dynamic(img: &DynamicImage) -> Result<ImageBuffer, ImageIoError> {
    let (width, height) = (img.width() as usize, img.height() as usize);
    if width == 0 || height == 0 {
        return Err(ImageIoError::ZeroDimension);
    }
    let buffer = match img {
        DynamicImage::ImageLuma8(g) => ImageBuffer::from_interleaved(width, height, 1, g.as_raw())?,
        DynamicImage::ImageLumaA8(g) => {
            let gray: Vec<u8> = g.as_raw().chunks_exact(2).map(|p| p[0]).collect();
            ImageBuffer::from_interleaved(width, height, 1, &gray)?
        }
        DynamicImage::ImageRgb8(rgb) => ImageBuffer::from_interleaved(width, height, 3, rgb.as_raw())?,
        DynamicImage::ImageRgba8(rgba) => {
            let rgb: Vec<u8> = rgba.as_raw().chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect();
            ImageBuffer::from_interleaved(width, height, 3, &rgb)?
        }
        other => return Err(ImageIoError::UnsupportedFormat(other.color())),
    };
    Ok(buffer)
}

/// Nearest integer with ties away from zero, clamped to `[0, 255]`.
pub fn quantize(value: f64) -> u8 {
    // float-to-int casts saturate, and map NaN to zero
    value.round().clamp(0.0, 255.0) as u8
}

/// Interleaves and quantizes color planes.
pub fn interleave(planes: &[Vec<f64>], pixels: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(pixels * planes.len());
    for i in 0..pixels {
        for plane in planes {
            out.push(quantize(plane[i]));
        }
    }
    out
}

/// Encodes 8-bit interleaved samples as PNG (gray for one channel, RGB for three).
pub fn encode_png(width: usize, height: usize, channels: usize, samples: &[u8]) -> Result<Vec<u8>, ImageIoError> {
    let color = match channels {
        1 => ExtendedColorType::L8,
        3 => ExtendedColorType::Rgb8,
        _ => {
            return Err(ImageIoError::ColorShape {
                width,
                height,
                channels,
            })
        }
    };
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(samples, width as u32, height as u32, color)?;
    Ok(out)
}

/// Quantizes `colors` (one plane per channel of `img`) and encodes them as PNG.
pub fn encode_colors(img: &ImageBuffer, colors: &[Vec<f64>]) -> Result<Vec<u8>, ImageIoError> {
    let pixels = img.pixel_count();
    if colors.len() != img.channel_count() || colors.iter().any(|c| c.len() != pixels) {
        return Err(ImageIoError::ColorShape {
            width: img.width(),
            height: img.height(),
            channels: img.channel_count(),
        });
    }
    encode_png(img.width(), img.height(), colors.len(), &interleave(colors, pixels))
}

/// Writes `colors` as an 8-bit PNG with the dimensions of `img`.
pub fn save_image(img: &ImageBuffer, colors: &[Vec<f64>], path: &Path) -> Result<(), ImageIoError> {
    let png = encode_colors(img, colors)?;
    write_file(path, &png)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ImageIoError> {
    std::fs::write(path, bytes).map_err(|source| ImageIoError::Write {
        path: path.display().to_string(),
        source,
    })
}
