//! Feature images as 8-bit sRGB PNGs read through CIELAB: L is lightness,
//! A carries the latent `u` and B the latent `v`.

use std::io::Cursor;
use std::path::Path;

use image::{ColorType, ImageFormat, ImageReader, RgbImage};
use pcfmap_core::color::{ab_from_latent, lab_to_rgb, latent_from_ab, rgb_to_lab, Lab};
use pcfmap_core::image::FeatureImage;

use crate::error::{IoError, Result};
use crate::fsio;

pub fn feature_image_from_rgb(rgb: &RgbImage) -> Result<FeatureImage> {
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut l = Vec::with_capacity(w * h);
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    for px in rgb.pixels() {
        let lab = rgb_to_lab(px[0], px[1], px[2]);
        let (pu, pv) = latent_from_ab(lab.a, lab.b);
        l.push(lab.l.clamp(0.0, 100.0));
        u.push(pu);
        v.push(pv);
    }
    Ok(FeatureImage::new(w, h, l, u, v)?)
}

/// Inverse of [`feature_image_from_rgb`]. A/B are taken unrounded from the
/// latent coordinate, so any image that came from a PNG maps back to the
/// same bytes; colours outside sRGB are clamped.
pub fn feature_image_to_rgb(img: &FeatureImage) -> RgbImage {
    let mut out = RgbImage::new(img.width() as u32, img.height() as u32);
    for (i, px) in out.pixels_mut().enumerate() {
        let (a, b) = ab_from_latent(img.latent_u()[i], img.latent_v()[i]);
        px.0 = lab_to_rgb(Lab { l: img.lightness()[i], a, b });
    }
    out
}

pub fn decode_png(bytes: &[u8], path: &Path) -> Result<RgbImage> {
    let reader = ImageReader::with_format(Cursor::new(bytes), ImageFormat::Png);
    let decoded = reader.decode().map_err(|e| IoError::format(path, e.to_string()))?;
    match decoded.color() {
        ColorType::Rgb8 | ColorType::Rgba8 => Ok(decoded.to_rgb8()),
        other => Err(IoError::format(path, format!("expected 8-bit RGB or RGBA, found {other:?}"))),
    }
}

pub fn encode_png(rgb: &RgbImage, path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    rgb.write_to(&mut Cursor::new(&mut bytes), ImageFormat::Png).map_err(|e| IoError::format(path, e.to_string()))?;
    Ok(bytes)
}

pub fn load_feature_image(path: &Path) -> Result<FeatureImage> {
    feature_image_from_rgb(&decode_png(&fsio::read(path)?, path)?)
}

pub fn save_feature_image(img: &FeatureImage, path: &Path) -> Result<()> {
    fsio::write_atomic(path, &encode_png(&feature_image_to_rgb(img), path)?)
}

pub fn save_rgb(rgb: &RgbImage, path: &Path) -> Result<()> {
    fsio::write_atomic(path, &encode_png(rgb, path)?)
}
