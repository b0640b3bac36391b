//! Palette charts. Both use the feature-image colour mapping: column ↔ `u`
//! (A channel), row ↔ `v` (B channel), with `v = 0` on the top row.

use image::{Rgb, RgbImage};
use pcfmap_core::color::{ab_from_latent, lab_to_rgb, Lab};
use pcfmap_core::palette::Palette;

const SCATTER_LIGHTNESS: f64 = 75.0;
const SWATCH_LIGHTNESS: f64 = 88.0;
/// Vertical extent of the PCF plots in the swatches.
const PCF_CEILING: f64 = 2.5;

fn latent_colour(u: f64, v: f64, lightness: f64) -> Rgb<u8> {
    let (a, b) = ab_from_latent(u, v);
    Rgb(lab_to_rgb(Lab { l: lightness, a, b }))
}

fn disc(img: &mut RgbImage, cx: f64, cy: f64, r: f64, colour: Rgb<u8>) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    for y in (cy - r).floor() as i64..=(cy + r).ceil() as i64 {
        for x in (cx - r).floor() as i64..=(cx + r).ceil() as i64 {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            if x >= 0 && y >= 0 && x < w && y < h && dx * dx + dy * dy <= r * r {
                img.put_pixel(x as u32, y as u32, colour);
            }
        }
    }
}

/// Basis coordinates as dots over the latent colour plane.
pub fn scatter(palette: &Palette, size: u32) -> RgbImage {
    let s = size as f64;
    let mut img = RgbImage::from_fn(size, size, |x, y| {
        latent_colour((x as f64 + 0.5) / s, (y as f64 + 0.5) / s, SCATTER_LIGHTNESS)
    });
    let r = (s / 128.0).max(1.5);
    for e in palette.basis() {
        let (cx, cy) = (e.latent.u * s, e.latent.v * s);
        disc(&mut img, cx, cy, r + 1.0, Rgb([255, 255, 255]));
        disc(&mut img, cx, cy, r, Rgb([0, 0, 0]));
    }
    img
}

/// `cells × cells` grid of latent coordinates, each tinted with its colour
/// and carrying the table PCF as a curve (radius left to right).
pub fn swatches(palette: &Palette, cells: u32, cell_px: u32) -> pcfmap_core::Result<RgbImage> {
    let side = cells * cell_px;
    let mut img = RgbImage::new(side, side);
    let bins = palette.bin_count();
    let margin = (cell_px / 10).max(1) as f64;
    let span = cell_px as f64 - 2.0 * margin;
    for row in 0..cells {
        for col in 0..cells {
            let (u, v) = ((col as f64 + 0.5) / cells as f64, (row as f64 + 0.5) / cells as f64);
            let tint = latent_colour(u, v, SWATCH_LIGHTNESS);
            let (x0, y0) = (col * cell_px, row * cell_px);
            for y in y0..y0 + cell_px {
                for x in x0..x0 + cell_px {
                    let edge = x == x0 || y == y0;
                    img.put_pixel(x, y, if edge { Rgb([255, 255, 255]) } else { tint });
                }
            }
            let pcf = palette.lut_pcf(u, v)?;
            let to_px = |t: f64, g: f64| {
                let x = x0 as f64 + margin + t * span;
                let y = y0 as f64 + margin + (1.0 - (g / PCF_CEILING).clamp(0.0, 1.0)) * span;
                (x, y)
            };
            // reference line at g = 1
            let (_, y_one) = to_px(0.0, 1.0);
            for x in 0..span as u32 {
                img.put_pixel(x0 + margin as u32 + x, y_one as u32, Rgb([150, 150, 150]));
            }
            let steps = 16 * cell_px as usize;
            for k in 0..=steps {
                let t = k as f64 / steps as f64;
                let pos = t * (bins - 1) as f64;
                let j = (pos as usize).min(bins - 2);
                let g = pcf[j] as f64 + (pos - j as f64) * (pcf[j + 1] - pcf[j]) as f64;
                let (x, y) = to_px(t, g);
                disc(&mut img, x, y, 0.8, Rgb([0, 0, 0]));
            }
        }
    }
    Ok(img)
}
