//! sRGB ↔ CIELAB (D65) and the affine AB ↔ latent mapping.
//!
//! The reference white is the image of linear RGB (1,1,1) under the sRGB
//! matrix, so white maps to L = 100, a = b = 0 up to rounding in the last bit.

const M: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

const WHITE: [f64; 3] = [M[0][0] + M[0][1] + M[0][2], M[1][0] + M[1][1] + M[1][2], M[2][0] + M[2][1] + M[2][2]];

const DELTA: f64 = 6.0 / 29.0;

fn inverse(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let cof = [
        [c(1, 2, 1, 2), -c(1, 2, 0, 2), c(1, 2, 0, 1)],
        [-c(0, 2, 1, 2), c(0, 2, 0, 2), -c(0, 2, 0, 1)],
        [c(0, 1, 1, 2), -c(0, 1, 0, 2), c(0, 1, 0, 1)],
    ];
    let det = m[0][0] * cof[0][0] + m[0][1] * cof[0][1] + m[0][2] * cof[0][2];
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = cof[j][i] / det;
        }
    }
    out
}

fn mul(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        libm::pow((c + 0.055) / 1.055, 2.4)
    }
}

pub fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * libm::pow(c, 1.0 / 2.4) - 0.055
    }
}

fn f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        libm::cbrt(t)
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn f_inv(t: f64) -> f64 {
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

/// CIELAB triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

pub fn rgb_to_lab(r: u8, g: u8, b: u8) -> Lab {
    let lin = [r, g, b].map(|c| srgb_to_linear(c as f64 / 255.0));
    let xyz = mul(&M, lin);
    let fx = f(xyz[0] / WHITE[0]);
    let fy = f(xyz[1] / WHITE[1]);
    let fz = f(xyz[2] / WHITE[2]);
    Lab { l: 116.0 * fy - 16.0, a: 500.0 * (fx - fy), b: 200.0 * (fy - fz) }
}

/// Inverse of [`rgb_to_lab`]; colours outside the sRGB gamut are clamped.
pub fn lab_to_rgb(lab: Lab) -> [u8; 3] {
    let fy = (lab.l + 16.0) / 116.0;
    let fx = fy + lab.a / 500.0;
    let fz = fy - lab.b / 200.0;
    let xyz = [WHITE[0] * f_inv(fx), WHITE[1] * f_inv(fy), WHITE[2] * f_inv(fz)];
    let lin = mul(&inverse(&M), xyz);
    lin.map(|c| {
        let s = linear_to_srgb(c.clamp(0.0, 1.0));
        libm::round((s * 255.0).clamp(0.0, 255.0)) as u8
    })
}

/// Latent coordinate from the A/B channels: `(a + 128)/255`, clamped to `[0,1]`.
pub fn latent_from_ab(a: f64, b: f64) -> (f64, f64) {
    (((a + 128.0) / 255.0).clamp(0.0, 1.0), ((b + 128.0) / 255.0).clamp(0.0, 1.0))
}

/// Exact inverse of [`latent_from_ab`] on unclamped values.
pub fn ab_from_latent(u: f64, v: f64) -> (f64, f64) {
    (255.0 * u - 128.0, 255.0 * v - 128.0)
}

/// Integer A/B levels for a latent coordinate, rounding half away from zero.
pub fn quantize_ab(u: f64, v: f64) -> (i32, i32) {
    let (a, b) = ab_from_latent(u, v);
    (libm::round(a) as i32, libm::round(b) as i32)
}
