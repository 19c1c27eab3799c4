//! PNG renderings of session maps.

use wdc::{DehazeResult, ImageRgb, ScalarMap};

/// Which map a preview shows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PreviewKind {
    /// Recovered radiance.
    Radiance,
    /// Refined transmission on the blue to red ramp.
    Transmission,
    /// Lower bound, grayscale.
    LowerBound,
    /// Weight map divided by its maximum, grayscale.
    Weights,
}

impl PreviewKind {
    /// Parses the file name used in preview URLs, e.g. `t.png`.
    pub fn from_file_name(name: &str) -> Option<Self> {
        match name {
            "j.png" => Some(Self::Radiance),
            "t.png" => Some(Self::Transmission),
            "b.png" => Some(Self::LowerBound),
            "weights.png" => Some(Self::Weights),
            _ => None,
        }
    }
}

/// Blue to red ramp over `[0, 1]`: `(v, 0, 1 - v)`. Warmer means more
/// transmission, so nearer scene points render red.
pub fn pseudo_color(map: &ScalarMap) -> ImageRgb {
    ImageRgb::from_fn(map.width(), map.height(), |x, y| {
        let v = map.get(x, y).clamp(0.0, 1.0);
        [v, 0.0, 1.0 - v]
    })
    .expect("map dimensions are valid")
}

fn gray(map: &ScalarMap) -> ImageRgb {
    ImageRgb::from_fn(map.width(), map.height(), |x, y| [map.get(x, y); 3])
        .expect("map dimensions are valid")
}

pub fn render(result: &DehazeResult, kind: PreviewKind) -> wdc::Result<Vec<u8>> {
    match kind {
        PreviewKind::Radiance => result.radiance.to_png_bytes(),
        PreviewKind::Transmission => pseudo_color(&result.transmission).to_png_bytes(),
        PreviewKind::LowerBound => gray(&result.lower_bound).to_png_bytes(),
        PreviewKind::Weights => {
            let max = result.weights.max();
            gray(&result.weights.map(|w| w / max)).to_png_bytes()
        }
    }
}
