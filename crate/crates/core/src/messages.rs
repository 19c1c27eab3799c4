//! External messages that override the initial transmission.
//!
//! A message is a pixel set `C` asserted to share one transmission `t_s`.
//! Without an explicit target, `t_s` is the largest lower bound over `C`,
//! the smallest value consistent with `t >= b` on every member.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DehazeError, Result};
use crate::image::{ImageRgb, PixelCoord, ScalarMap};

/// Slack allowed when an explicit target sits under the lower bound of its set.
pub const TARGET_SLACK: f64 = 1e-3;

/// Cells per channel of the RGB clustering grid.
pub const CLUSTER_BINS: usize = 16;

/// Default minimum cluster size, as a fraction of all pixels.
pub const DEFAULT_MIN_FRACTION: f64 = 0.005;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EwdcMessage {
    pub pixels: Vec<PixelCoord>,
    #[serde(default)]
    pub target: Option<f64>,
}

impl EwdcMessage {
    pub fn new(pixels: Vec<PixelCoord>, target: Option<f64>) -> Self {
        Self { pixels, target }
    }

    /// Largest lower bound over the pixel set, after bounds checking.
    pub fn max_lower_bound(&self, b: &ScalarMap) -> Result<f64> {
        if self.pixels.is_empty() {
            return Err(DehazeError::EmptyMessage);
        }
        let (w, h) = b.dims();
        let mut max = f64::NEG_INFINITY;
        for p in &self.pixels {
            if !p.in_bounds(w, h) {
                return Err(DehazeError::PixelOutOfBounds {
                    x: p.x,
                    y: p.y,
                    width: w,
                    height: h,
                });
            }
            max = max.max(b.get(p.x, p.y));
        }
        Ok(max)
    }

    /// Target transmission for this message given the lower bound map.
    pub fn resolve_target(&self, b: &ScalarMap) -> Result<f64> {
        let bound = self.max_lower_bound(b)?;
        match self.target {
            None => Ok(bound),
            Some(t) if !(0.0..=1.0).contains(&t) => Err(DehazeError::InvalidParameter {
                name: "target",
                reason: format!("must lie in [0, 1], got {t}"),
            }),
            Some(t) if t < bound - TARGET_SLACK => {
                Err(DehazeError::InfeasibleTarget { target: t, bound })
            }
            Some(t) => Ok(t),
        }
    }
}

/// On-disk message list: `{"messages":[{"pixels":[[x,y],...],"target":0.42|null}]}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MessageFile {
    pub messages: Vec<EwdcMessage>,
}

impl MessageFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DehazeError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| DehazeError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("messages always serialize");
        std::fs::write(path, text).map_err(|source| DehazeError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn cell_of(v: f64) -> usize {
    ((v * CLUSTER_BINS as f64) as usize).min(CLUSTER_BINS - 1)
}

/// Clusters pixels on a 16x16x16 RGB grid and emits one message per cell
/// holding at least `min_fraction` of the image. Targets are left to be
/// resolved as the largest lower bound of each cluster.
///
/// Messages come out in cell order (red-major); pixels within a message in
/// row-major order.
pub fn cluster_messages(
    img: &ImageRgb,
    b: &ScalarMap,
    min_fraction: f64,
) -> Result<Vec<EwdcMessage>> {
    b.ensure_same_dims(img.dims())?;
    if !(min_fraction > 0.0 && min_fraction < 1.0) {
        return Err(DehazeError::InvalidParameter {
            name: "min_fraction",
            reason: format!("must lie in (0, 1), got {min_fraction}"),
        });
    }
    let bins = CLUSTER_BINS;
    let mut cells: Vec<Vec<PixelCoord>> = vec![Vec::new(); bins * bins * bins];
    let w = img.width();
    for (i, p) in img.pixels().enumerate() {
        let cell = (cell_of(p[0]) * bins + cell_of(p[1])) * bins + cell_of(p[2]);
        cells[cell].push(PixelCoord::new(i % w, i / w));
    }
    let threshold = min_fraction * img.len() as f64;
    Ok(cells
        .into_iter()
        .filter(|c| !c.is_empty() && c.len() as f64 >= threshold)
        .map(|pixels| EwdcMessage::new(pixels, None))
        .collect())
}
