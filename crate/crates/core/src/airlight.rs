//! Air-light estimation by dark channel pixel selection.

use crate::error::{DehazeError, Result};
use crate::image::{AirLight, ImageRgb, ScalarMap};
use crate::morphology;

/// Fraction of the brightest dark channel pixels considered as air-light candidates.
pub const DEFAULT_TOP_FRACTION: f64 = 0.001;

/// Minimum over the channels and over the round patch of the raw intensities.
pub fn dark_channel(img: &ImageRgb, radius: usize) -> ScalarMap {
    let per_pixel = img.pixels().map(|p| p[0].min(p[1]).min(p[2])).collect();
    let m = ScalarMap::from_parts_unchecked(img.width(), img.height(), per_pixel);
    morphology::erode(&m, radius)
}

/// Picks the brightest pixel (largest `R + G + B`) among the
/// `ceil(top_fraction * N)` pixels with the largest dark channel.
///
/// Ties in the dark channel ranking and in brightness both go to the smaller
/// row-major index, so the estimate is deterministic.
pub fn estimate_airlight(img: &ImageRgb, radius: usize, top_fraction: f64) -> Result<AirLight> {
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(DehazeError::InvalidParameter {
            name: "top_fraction",
            reason: format!("must lie in (0, 1], got {top_fraction}"),
        });
    }
    let dark = dark_channel(img, radius);
    let n = img.len();
    let count = ((top_fraction * n as f64).ceil() as usize).clamp(1, n);

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps smaller indices first among equal dark channel values
    order.sort_by(|&a, &b| dark.data()[b].total_cmp(&dark.data()[a]));

    let mut best = order[0];
    let mut best_sum = f64::NEG_INFINITY;
    for &i in &order[..count] {
        let s: f64 = img.pixel_at(i).iter().sum();
        if s > best_sum || (s == best_sum && i < best) {
            best = i;
            best_sum = s;
        }
    }
    if best_sum <= 0.0 {
        return Err(DehazeError::AirLightIndeterminate);
    }
    Ok(AirLight::new(img.pixel_at(best)))
}
