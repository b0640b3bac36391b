//! Stipple renders: black dots on white, as an anti-aliased PNG or an SVG
//! in unit-square coordinates.

use std::fmt::Write as _;
use std::path::Path;

use image::GrayImage;
use pcfmap_core::PointPattern;

use crate::error::{IoError, Result};
use crate::fsio;

/// Subsamples per pixel axis for coverage.
const SUPERSAMPLE: usize = 4;

/// Per-point radii in unit-square units: the pattern's own or `default`.
pub fn dot_radii(pattern: &PointPattern, default: Option<f64>) -> std::result::Result<Vec<f64>, &'static str> {
    match (pattern.radii(), default) {
        _ if pattern.is_empty() => Ok(Vec::new()),
        (Some(r), _) => Ok(r.to_vec()),
        (None, Some(r)) if r > 0.0 && r.is_finite() => Ok(vec![r; pattern.len()]),
        (None, Some(_)) => Err("default radius must be positive"),
        (None, None) => Err("pattern has no radii and no default radius was given"),
    }
}

/// `0.4 ×` the mean nearest-neighbour distance, the base dot size.
pub fn base_radius(pattern: &PointPattern) -> Option<f64> {
    pattern.mean_nearest_neighbor_distance().map(|d| 0.4 * d)
}

pub fn render_png(
    pattern: &PointPattern,
    size: u32,
    default_radius: Option<f64>,
) -> std::result::Result<GrayImage, &'static str> {
    let radii = dot_radii(pattern, default_radius)?;
    let n = size as usize;
    let mut white = vec![1.0f64; n * n];
    let step = 1.0 / SUPERSAMPLE as f64;
    for (p, r) in pattern.points().iter().zip(&radii) {
        let (cx, cy, rad) = (p.x * size as f64, p.y * size as f64, r * size as f64);
        let x0 = (cx - rad).floor().max(0.0) as usize;
        let y0 = (cy - rad).floor().max(0.0) as usize;
        let x1 = ((cx + rad).ceil() as usize).min(n);
        let y1 = ((cy + rad).ceil() as usize).min(n);
        for py in y0..y1 {
            for px in x0..x1 {
                let mut inside = 0;
                for sy in 0..SUPERSAMPLE {
                    for sx in 0..SUPERSAMPLE {
                        let dx = px as f64 + (sx as f64 + 0.5) * step - cx;
                        let dy = py as f64 + (sy as f64 + 0.5) * step - cy;
                        if dx * dx + dy * dy <= rad * rad {
                            inside += 1;
                        }
                    }
                }
                white[py * n + px] *= 1.0 - inside as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
            }
        }
    }
    Ok(GrayImage::from_fn(size, size, |x, y| image::Luma([(white[y as usize * n + x as usize] * 255.0).round() as u8])))
}

pub fn render_svg(
    pattern: &PointPattern,
    size: u32,
    default_radius: Option<f64>,
) -> std::result::Result<String, &'static str> {
    let radii = dot_radii(pattern, default_radius)?;
    let mut out = String::with_capacity(64 * (pattern.len() + 4));
    let _ =
        writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 1 1">"#);
    out.push_str("<rect width=\"1\" height=\"1\" fill=\"white\"/>\n<g fill=\"black\">\n");
    for (p, r) in pattern.points().iter().zip(&radii) {
        let _ = writeln!(out, r#"<circle cx="{:.6}" cy="{:.6}" r="{:.6}"/>"#, p.x, p.y, r);
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

pub fn write_png(pattern: &PointPattern, size: u32, default_radius: Option<f64>, path: &Path) -> Result<()> {
    let img = render_png(pattern, size, default_radius).map_err(|e| IoError::format(path, e))?;
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| IoError::format(path, e.to_string()))?;
    fsio::write_atomic(path, &bytes)
}

pub fn write_svg(pattern: &PointPattern, size: u32, default_radius: Option<f64>, path: &Path) -> Result<()> {
    let svg = render_svg(pattern, size, default_radius).map_err(|e| IoError::format(path, e))?;
    fsio::write_atomic(path, svg.as_bytes())
}
