//! Spectrum-matching gradient descent on the torus.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::par;
use crate::pattern::{wrap_unit, Point, PointPattern};
use crate::pcf::{pattern_pcf, Pcf, PcfConfig};
use crate::rng::{mix_seed, SplitRng};
use crate::spectrum::{sample_indexed, Lattice, RadialPowerSpectrum};

pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_STEP: f64 = 1e-3;

/// Accepted steps grow by this factor, rejected ones are halved.
const GROWTH: f64 = 1.2;
const MAX_STEP_FACTOR: f64 = 16.0;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone)]
pub struct Realization {
    pub pattern: PointPattern,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Loss `Σ_k (S_k − t_k)²` and its gradient for one target.
struct SpectrumObjective<'a> {
    target: &'a [f64],
    lattice: Lattice,
}

struct Evaluated {
    re: Vec<f64>,
    im: Vec<f64>,
    spectrum: Vec<f64>,
    loss: f64,
}

impl<'a> SpectrumObjective<'a> {
    fn new(target: &'a RadialPowerSpectrum) -> Self {
        Self { target: target.bins(), lattice: Lattice::new(target.len()) }
    }

    fn evaluate(&self, points: &[Point]) -> Evaluated {
        let (re, im) = self.lattice.transform(points);
        let spectrum = self.lattice.radial_average(&re, &im, points.len(), self.target.len());
        let loss = spectrum.iter().zip(self.target).skip(1).map(|(s, t)| (s - t) * (s - t)).sum();
        Evaluated { re, im, spectrum, loss }
    }

    /// `∂L/∂x_j = 4π Im Σ_f f_x c_f conj(F_f) e_j(f)` with
    /// `c_f = 2(S_k − t_k)/(n M_k)` and `e_j(f) = exp(−2πi f·x_j)`.
    fn gradient(&self, points: &[Point], at: &Evaluated) -> Vec<f64> {
        let lat = &self.lattice;
        let n = points.len() as f64;
        let len = lat.len;
        let mut w_re = vec![0.0; len];
        let mut w_im = vec![0.0; len];
        for i in 0..len {
            let k = lat.bin_of[i] as usize;
            if k == 0 {
                continue;
            }
            let c = 2.0 * (at.spectrum[k] - self.target[k]) / (n * lat.bin_counts[k] as f64);
            w_re[i] = c * at.re[i];
            w_im[i] = -c * at.im[i];
        }
        let mut wx_re = vec![0.0; len];
        let mut wx_im = vec![0.0; len];
        for row in &lat.rows {
            for fx in row.fx_lo..=row.fx_hi {
                let i = row.offset + (fx - row.fx_lo) as usize;
                wx_re[i] = fx as f64 * w_re[i];
                wx_im[i] = fx as f64 * w_im[i];
            }
        }
        let kmax = lat.max_freq as usize;
        let per_point = par::map_indexed(points.len(), |j| {
            let mut cx = vec![(0.0, 0.0); 2 * kmax + 1];
            let mut cy = vec![(0.0, 0.0); kmax + 1];
            lat.phasors(points[j], &mut cx, &mut cy);
            let cx_re: Vec<f64> = cx.iter().map(|c| c.0).collect();
            let cx_im: Vec<f64> = cx.iter().map(|c| c.1).collect();
            let (mut gx, mut gy) = (0.0, 0.0);
            for row in &lat.rows {
                let n = (row.fx_hi - row.fx_lo + 1) as usize;
                let start = (row.fx_lo + lat.max_freq) as usize;
                let (p_re, p_im) = dot(
                    &w_re[row.offset..row.offset + n],
                    &w_im[row.offset..row.offset + n],
                    &cx_re[start..start + n],
                    &cx_im[start..start + n],
                );
                let (q_re, q_im) = dot(
                    &wx_re[row.offset..row.offset + n],
                    &wx_im[row.offset..row.offset + n],
                    &cx_re[start..start + n],
                    &cx_im[start..start + n],
                );
                let (a_re, a_im) = cy[row.fy as usize];
                // Im(cy · Q) and fy · Im(cy · P)
                gx += a_re * q_im + a_im * q_re;
                gy += row.fy as f64 * (a_re * p_im + a_im * p_re);
            }
            (4.0 * PI * gx, 4.0 * PI * gy)
        });
        let mut grad = Vec::with_capacity(2 * points.len());
        for (gx, gy) in per_point {
            grad.push(gx);
            grad.push(gy);
        }
        grad
    }
}

/// Complex dot product `Σ w·c` over split real/imaginary slices.
fn dot(w_re: &[f64], w_im: &[f64], c_re: &[f64], c_im: &[f64]) -> (f64, f64) {
    let mut re = [0.0; 4];
    let mut im = [0.0; 4];
    let n = w_re.len();
    let chunks = n / 4;
    for c in 0..chunks {
        for l in 0..4 {
            let i = 4 * c + l;
            re[l] += w_re[i] * c_re[i] - w_im[i] * c_im[i];
            im[l] += w_re[i] * c_im[i] + w_im[i] * c_re[i];
        }
    }
    let mut tr = (re[0] + re[1]) + (re[2] + re[3]);
    let mut ti = (im[0] + im[1]) + (im[2] + im[3]);
    for i in 4 * chunks..n {
        tr += w_re[i] * c_re[i] - w_im[i] * c_im[i];
        ti += w_re[i] * c_im[i] + w_im[i] * c_re[i];
    }
    (tr, ti)
}

/// Spectrum loss of `points` against `target` (bins 1.. only).
pub fn spectrum_loss(points: &[Point], target: &RadialPowerSpectrum) -> f64 {
    SpectrumObjective::new(target).evaluate(points).loss
}

/// Loss and gradient, laid out as `[∂x_0, ∂y_0, ∂x_1, …]`.
pub fn spectrum_loss_gradient(points: &[Point], target: &RadialPowerSpectrum) -> (f64, Vec<f64>) {
    let obj = SpectrumObjective::new(target);
    let at = obj.evaluate(points);
    let grad = obj.gradient(points, &at);
    (at.loss, grad)
}

/// Gradient descent from `n` seeded uniform points. Each step moves the
/// point with the largest gradient by `step` and the rest proportionally;
/// a step that raises the loss is halved until it does not, and accepted
/// steps grow by a factor of 1.2 up to 16× the initial step.
pub fn realize(
    target: &RadialPowerSpectrum,
    n: usize,
    iterations: usize,
    step_size: f64,
    seed: u64,
) -> Result<Realization> {
    if n < 2 {
        return Err(Error::InvalidArgument("realize needs at least 2 points"));
    }
    if iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be at least 1"));
    }
    if !(step_size > 0.0) {
        return Err(Error::InvalidArgument("step size must be positive"));
    }
    let mut rng = SplitRng::new(seed);
    let mut points: Vec<Point> = (0..n).map(|_| Point::new(rng.uniform(), rng.uniform())).collect();
    let obj = SpectrumObjective::new(target);
    let mut current = obj.evaluate(&points);
    let initial_loss = current.loss;
    let mut step = step_size;
    let max_step = MAX_STEP_FACTOR * step_size;
    let mut candidate = points.clone();
    for _ in 0..iterations {
        let grad = obj.gradient(&points, &current);
        let longest = grad.chunks_exact(2).map(|g| libm::sqrt(g[0] * g[0] + g[1] * g[1])).fold(0.0, f64::max);
        if !(longest > 0.0) {
            break;
        }
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let scale = step / longest;
            for (c, (p, g)) in candidate.iter_mut().zip(points.iter().zip(grad.chunks_exact(2))) {
                *c = Point::new(wrap_unit(p.x - scale * g[0]), wrap_unit(p.y - scale * g[1]));
            }
            let trial = obj.evaluate(&candidate);
            if trial.loss <= current.loss {
                core::mem::swap(&mut points, &mut candidate);
                current = trial;
                step = (step * GROWTH).min(max_step);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(Realization { pattern: PointPattern::new(points)?, initial_loss, final_loss: current.loss })
}

/// One realized basis pattern and its PCF.
#[derive(Debug, Clone)]
pub struct BasisPattern {
    pub pattern: PointPattern,
    pub pcf: Pcf,
    pub final_loss: f64,
}

/// Samples `count` spectra, realizes each and measures its PCF. Pattern `i`
/// depends only on `(seed, i)`.
pub fn generate_basis(
    count: usize,
    n_points: usize,
    iterations: usize,
    step_size: f64,
    seed: u64,
    pcf: &PcfConfig,
) -> Result<Vec<BasisPattern>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1"));
    }
    par::map_indexed(count, |i| {
        let (_, spectrum) = sample_indexed(seed, i as u64);
        let r = realize(&spectrum, n_points, iterations, step_size, mix_seed(seed, i as u64))?;
        let g = pattern_pcf(&r.pattern, pcf)?;
        Ok(BasisPattern { pattern: r.pattern, pcf: g, final_loss: r.final_loss })
    })
    .into_iter()
    .collect()
}
