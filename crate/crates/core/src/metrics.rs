//! Full-reference quality metrics: mean squared error and single-scale SSIM.

use crate::error::{DehazeError, Result};
use crate::image::{ImageRgb, ScalarMap};

/// Side of the Gaussian SSIM window.
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// Anything holding a flat sample buffer with a width and height.
pub trait Samples {
    fn dims(&self) -> (usize, usize);
    fn samples(&self) -> &[f64];
}

impl Samples for ImageRgb {
    fn dims(&self) -> (usize, usize) {
        ImageRgb::dims(self)
    }
    fn samples(&self) -> &[f64] {
        self.data()
    }
}

impl Samples for ScalarMap {
    fn dims(&self) -> (usize, usize) {
        ScalarMap::dims(self)
    }
    fn samples(&self) -> &[f64] {
        self.data()
    }
}

fn same_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(DehazeError::DimensionMismatch {
            expected: a,
            actual: b,
        });
    }
    Ok(())
}

/// Mean over all samples (every channel of every pixel) of the squared difference.
pub fn mse<T: Samples>(a: &T, b: &T) -> Result<f64> {
    same_dims(a.dims(), b.dims())?;
    let (x, y) = (a.samples(), b.samples());
    let sum: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
    Ok(sum / x.len() as f64)
}

/// `mse` restricted to the samples selected by `keep` (one flag per pixel).
pub fn masked_mse(a: &ScalarMap, b: &ScalarMap, keep: &[bool]) -> Result<f64> {
    same_dims(a.dims(), b.dims())?;
    if keep.len() != a.len() {
        return Err(DehazeError::DataLength {
            width: a.width(),
            height: a.height(),
            channels: 1,
            actual: keep.len(),
        });
    }
    let (sum, n) = a
        .data()
        .iter()
        .zip(b.data())
        .zip(keep)
        .filter(|(_, &k)| k)
        .fold((0.0, 0usize), |(s, n), ((p, q), _)| {
            (s + (p - q) * (p - q), n + 1)
        });
    if n == 0 {
        return Err(DehazeError::InvalidParameter {
            name: "mask",
            reason: "selects no pixels".into(),
        });
    }
    Ok(sum / n as f64)
}

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - half;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.map(|t| t / sum)
}

/// Separable Gaussian filter keeping only positions where the window fits.
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&line[x..]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * rows[(y + k) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM between the Rec. 601 luma of two images.
///
/// Gaussian 11x11 window with sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range
/// 1, population statistics, averaged over window positions fully inside the
/// image.
pub fn ssim(a: &ImageRgb, b: &ImageRgb) -> Result<f64> {
    same_dims(a.dims(), b.dims())?;
    ssim_gray(&a.luma(), &b.luma())
}

/// Mean SSIM between two single-channel maps.
pub fn ssim_gray(a: &ScalarMap, b: &ScalarMap) -> Result<f64> {
    same_dims(a.dims(), b.dims())?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(DehazeError::InvalidParameter {
            name: "image",
            reason: format!("SSIM needs both sides >= {SSIM_WINDOW}, got {w}x{h}"),
        });
    }
    let taps = gaussian_taps();
    let (x, y) = (a.data(), b.data());
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();
    let mx = filter_valid(x, w, h, &taps);
    let my = filter_valid(y, w, h, &taps);
    let mxx = filter_valid(&xx, w, h, &taps);
    let myy = filter_valid(&yy, w, h, &taps);
    let mxy = filter_valid(&xy, w, h, &taps);
    let c1 = K1 * K1;
    let c2 = K2 * K2;
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let cov = mxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}
