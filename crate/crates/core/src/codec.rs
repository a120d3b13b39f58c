//! Tile and map image encodings.

use std::fmt;
use std::io::Cursor;

use image::codecs::jpeg::JpegEncoder;
use image::codecs::png::PngEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// JPEG quality used for tiles and map images.
pub const JPEG_QUALITY: u8 = 90;

/// Largest per-channel error a JPEG round trip of smooth imagery may show
/// at [`JPEG_QUALITY`].
pub const JPEG_ROUND_TRIP_TOLERANCE: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Jpeg,
    Gif,
    Png,
}

impl Encoding {
    pub fn media_type(self) -> &'static str {
        match self {
            Encoding::Jpeg => "image/jpeg",
            Encoding::Gif => "image/gif",
            Encoding::Png => "image/png",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Encoding::Jpeg => "jpg",
            Encoding::Gif => "gif",
            Encoding::Png => "png",
        }
    }

    pub fn from_media_type(media: &str) -> Option<Self> {
        let media = media.trim();
        [Encoding::Jpeg, Encoding::Gif, Encoding::Png].into_iter().find(|e| e.media_type().eq_ignore_ascii_case(media))
    }

    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "jpg" | "jpeg" => Some(Encoding::Jpeg),
            "gif" => Some(Encoding::Gif),
            "png" => Some(Encoding::Png),
            _ => None,
        }
    }

    /// Identifies an encoding from the leading magic bytes.
    pub fn sniff(bytes: &[u8]) -> Option<Self> {
        if bytes.starts_with(&[0xFF, 0xD8, 0xFF]) {
            Some(Encoding::Jpeg)
        } else if bytes.starts_with(b"GIF87a") || bytes.starts_with(b"GIF89a") {
            Some(Encoding::Gif)
        } else if bytes.starts_with(&[0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A]) {
            Some(Encoding::Png)
        } else {
            None
        }
    }

    fn format(self) -> ImageFormat {
        match self {
            Encoding::Jpeg => ImageFormat::Jpeg,
            Encoding::Gif => ImageFormat::Gif,
            Encoding::Png => ImageFormat::Png,
        }
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

pub fn encode(canvas: &RgbImage, encoding: Encoding) -> Result<Vec<u8>> {
    let (w, h) = canvas.dimensions();
    let mut buf = Vec::new();
    match encoding {
        Encoding::Jpeg => JpegEncoder::new_with_quality(&mut buf, JPEG_QUALITY).write_image(
            canvas.as_raw(),
            w,
            h,
            ExtendedColorType::Rgb8,
        )?,
        Encoding::Png => PngEncoder::new(&mut buf).write_image(canvas.as_raw(), w, h, ExtendedColorType::Rgb8)?,
        Encoding::Gif => {
            let rgba = DynamicImage::ImageRgb8(canvas.clone()).into_rgba8();
            DynamicImage::ImageRgba8(rgba).write_to(&mut Cursor::new(&mut buf), ImageFormat::Gif)?
        }
    }
    Ok(buf)
}

/// Decodes bytes that must be in `encoding`.
pub fn decode(bytes: &[u8], encoding: Encoding) -> Result<RgbImage> {
    match Encoding::sniff(bytes) {
        Some(found) if found == encoding => {}
        Some(found) => {
            return Err(Error::Codec(format!("expected {encoding} data, found {found}")));
        }
        None => return Err(Error::Codec(format!("data is not {encoding}"))),
    }
    Ok(image::load_from_memory_with_format(bytes, encoding.format())?.into_rgb8())
}

/// Decodes bytes in any supported encoding.
pub fn decode_any(bytes: &[u8]) -> Result<RgbImage> {
    let encoding = Encoding::sniff(bytes).ok_or_else(|| Error::Codec("unrecognized image data".into()))?;
    decode(bytes, encoding)
}
