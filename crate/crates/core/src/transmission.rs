//! Transmission lower bound, initial transmission and fidelity weights.
//!
//! The lower bound `b(x) = 1 - min_c I^c(x) / A^c` holds for any scene
//! radiance and is tight at dark pixels. Under a local constant assumption on
//! a round mask the initial transmission is the patch maximum of `b`, and the
//! pixels attaining that maximum are the likely dark pixels. The weight map
//! measures how far each initial estimate sits from its own lower bound.

use serde::{Deserialize, Serialize};

use crate::error::{DehazeError, Result};
use crate::image::{min_channel, AirLight, ImageRgb, Mask, ScalarMap};
use crate::morphology;

/// Floor on `t_init - b` before inverting it into a weight.
pub const DEFAULT_GAP_FLOOR: f64 = 1e-3;

/// Radius of the round mask used on 640-pixel images.
pub const DEFAULT_MASK_RADIUS: usize = 25;

/// Image side the default mask radius is tuned for.
pub const REFERENCE_SIDE: usize = 640;

/// Mask radius scaled from the default so it covers the same fraction of an
/// image whose longer side is `side` pixels. Never below 1.
pub fn scaled_radius(side: usize) -> usize {
    ((DEFAULT_MASK_RADIUS * side) as f64 / REFERENCE_SIDE as f64)
        .round()
        .max(1.0) as usize
}

/// Local constant assumption used to produce the initial transmission.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    /// Patch maximum of the lower bound.
    Dilation,
    /// Morphological opening of the air-light normalized intensity, which is
    /// the closing of the lower bound.
    Opening,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Initializer {
    pub kind: InitKind,
    pub radius: usize,
}

impl Initializer {
    pub fn dilation(radius: usize) -> Self {
        Self {
            kind: InitKind::Dilation,
            radius,
        }
    }

    pub fn opening(radius: usize) -> Self {
        Self {
            kind: InitKind::Opening,
            radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius == 0 {
            return Err(DehazeError::InvalidParameter {
                name: "radius",
                reason: "mask radius must be at least 1".into(),
            });
        }
        Ok(())
    }
}

impl Default for Initializer {
    fn default() -> Self {
        Self::dilation(DEFAULT_MASK_RADIUS)
    }
}

/// `b = 1 - min_c I^c / A^c`, clamped to `[0, 1]`.
pub fn lower_bound(img: &ImageRgb, airlight: &AirLight) -> ScalarMap {
    min_channel(img, airlight).map(|m| (1.0 - m).clamp(0.0, 1.0))
}

pub fn initial_transmission(b: &ScalarMap, init: &Initializer) -> Result<ScalarMap> {
    init.validate()?;
    Ok(match init.kind {
        InitKind::Dilation => morphology::dilate(b, init.radius),
        // 1 - dilate(erode(1 - b)) == erode(dilate(b))
        InitKind::Opening => morphology::close(b, init.radius),
    })
}

/// `W = 1 / max(t_init - b, gap_floor)^2`, divided by its mean.
///
/// Negative gaps count as zero. Because of the mean normalization any common
/// scale factor on the raw weights cancels.
pub fn weight_map(t_init: &ScalarMap, b: &ScalarMap, gap_floor: f64) -> Result<ScalarMap> {
    t_init.ensure_same_dims(b.dims())?;
    if !(gap_floor > 0.0) {
        return Err(DehazeError::InvalidParameter {
            name: "gap_floor",
            reason: format!("must be positive, got {gap_floor}"),
        });
    }
    let raw: Vec<f64> = t_init
        .data()
        .iter()
        .zip(b.data())
        .map(|(&t, &lb)| {
            let gap = (t - lb).max(0.0).max(gap_floor);
            1.0 / (gap * gap)
        })
        .collect();
    Ok(ScalarMap::from_parts_unchecked(
        t_init.width(),
        t_init.height(),
        normalize_mean(raw),
    ))
}

fn normalize_mean(mut raw: Vec<f64>) -> Vec<f64> {
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    for w in &mut raw {
        *w /= mean;
    }
    raw
}

/// Pixels whose initial estimate is within `tol` of their lower bound.
pub fn dark_pixel_mask(t_init: &ScalarMap, b: &ScalarMap, tol: f64) -> Result<Mask> {
    t_init.ensure_same_dims(b.dims())?;
    let data = t_init
        .data()
        .iter()
        .zip(b.data())
        .map(|(&t, &lb)| t - lb <= tol)
        .collect();
    Mask::new(t_init.width(), t_init.height(), data)
}
