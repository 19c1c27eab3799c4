//! Forward haze synthesis and deterministic test scenes with known truth.
//!
//! Scenes blend a textured radiance toward the air-light with
//! `t = exp(-beta * depth)`. Every radiance carries a dense jittered lattice
//! of dark texels (one channel at zero) so that the dark channel premise holds
//! in every mask-sized patch; at those texels the lower bound equals the true
//! transmission.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DehazeError, Result};
use crate::image::{load_image, save_image16, AirLight, ImageRgb, ScalarMap};

pub const DEFAULT_BETA: f64 = 0.4;
pub const DEFAULT_SCENE_AIRLIGHT: [f64; 3] = [0.9, 0.95, 1.0];
pub const SCENE_SEED: u64 = 0x5eed_da2c;

/// Lattice pitch of the dark texels.
pub const DARK_TEXEL_PITCH: usize = 4;

pub const MIN_SCENE_SIZE: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub radiance: ImageRgb,
    /// Scene depth in arbitrary units, `>= 0`.
    pub depth: ScalarMap,
    /// Attenuation per depth unit, `>= 0`.
    pub beta: f64,
    pub airlight: AirLight,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.depth.ensure_same_dims(self.radiance.dims())?;
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(DehazeError::InvalidParameter {
                name: "beta",
                reason: format!("must be finite and >= 0, got {}", self.beta),
            });
        }
        if self.depth.data().iter().any(|&d| d < 0.0) {
            return Err(DehazeError::InvalidParameter {
                name: "depth",
                reason: "must be non-negative".into(),
            });
        }
        Ok(())
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_airlight(mut self, airlight: AirLight) -> Self {
        self.airlight = airlight;
        self
    }

    /// `t = exp(-beta * depth)`.
    pub fn transmission(&self) -> ScalarMap {
        self.depth.map(|d| (-self.beta * d).exp())
    }
}

/// Returns the hazy image `I = t J + (1 - t) A` and the true transmission.
pub fn synthesize_haze(spec: &SceneSpec) -> Result<(ImageRgb, ScalarMap)> {
    spec.validate()?;
    let t = spec.transmission();
    let a = spec.airlight.rgb();
    let data = spec
        .radiance
        .pixels()
        .zip(t.data())
        .flat_map(|(j, &t)| (0..3).map(move |c| t * j[c] + (1.0 - t) * a[c]))
        .collect();
    let hazy = ImageRgb::new(spec.radiance.width(), spec.radiance.height(), data)?;
    Ok((hazy, t))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneKind {
    /// Three horizontal bands at depths 4, 2, 1 from top to bottom.
    Steps,
    /// A depth-1 rectangle in front of a depth-8 background.
    Occluder,
    /// Depth ramping linearly from 1 on the left to 8 on the right.
    Gradient,
    /// An occluder pierced by small windows onto the depth-8 background.
    Holes,
}

impl SceneKind {
    pub const ALL: [SceneKind; 4] = [Self::Steps, Self::Occluder, Self::Gradient, Self::Holes];
}

impl std::str::FromStr for SceneKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "steps" => Ok(Self::Steps),
            "occluder" => Ok(Self::Occluder),
            "gradient" => Ok(Self::Gradient),
            "holes" => Ok(Self::Holes),
            other => Err(format!("unknown scene kind {other:?}")),
        }
    }
}

const FAR_DEPTH: f64 = 8.0;

/// Occluder rectangle `[x0, x1) x [y0, y1)`.
pub fn occluder_rect(size: usize) -> (usize, usize, usize, usize) {
    (size / 5, size - size / 5, size / 5, size - size / 5)
}

/// Window side and pitch of the holes scene; windows are centered in each
/// pitch cell of the occluder.
pub fn hole_layout(size: usize) -> (usize, usize) {
    let side = (size / 16).max(2);
    (side, 3 * side)
}

/// Whether pixel `(x, y)` of a holes scene shows the background through a window.
pub fn in_hole(size: usize, x: usize, y: usize) -> bool {
    let (x0, x1, y0, y1) = occluder_rect(size);
    if x < x0 || x >= x1 || y < y0 || y >= y1 {
        return false;
    }
    let (side, pitch) = hole_layout(size);
    let pad = (pitch - side) / 2;
    let (cx, cy) = ((x - x0) % pitch, (y - y0) % pitch);
    // only whole cells get a window
    let whole_x = (x - x0) / pitch < (x1 - x0) / pitch;
    let whole_y = (y - y0) / pitch < (y1 - y0) / pitch;
    whole_x && whole_y && (pad..pad + side).contains(&cx) && (pad..pad + side).contains(&cy)
}

/// Region label and depth of a pixel.
fn layout(kind: SceneKind, size: usize, x: usize, y: usize) -> (usize, f64) {
    match kind {
        SceneKind::Steps => {
            let band = (3 * y / size).min(2);
            (band, [4.0, 2.0, 1.0][band])
        }
        SceneKind::Occluder | SceneKind::Holes => {
            let (x0, x1, y0, y1) = occluder_rect(size);
            let inside = (x0..x1).contains(&x) && (y0..y1).contains(&y);
            if inside && !(kind == SceneKind::Holes && in_hole(size, x, y)) {
                (1, 1.0)
            } else {
                (0, FAR_DEPTH)
            }
        }
        SceneKind::Gradient => (0, 1.0 + (FAR_DEPTH - 1.0) * x as f64 / (size - 1) as f64),
    }
}

fn palette(kind: SceneKind) -> &'static [[f64; 3]] {
    match kind {
        SceneKind::Steps => &[[0.42, 0.55, 0.72], [0.70, 0.58, 0.38], [0.40, 0.66, 0.47]],
        SceneKind::Occluder | SceneKind::Holes => &[[0.52, 0.63, 0.44], [0.74, 0.44, 0.33]],
        SceneKind::Gradient => &[[0.62, 0.55, 0.46]],
    }
}

/// Bilinearly interpolated lattice noise in `[-1, 1]`.
struct ValueNoise {
    cell: usize,
    cols: usize,
    values: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, size: usize, cell: usize) -> Self {
        let cols = size / cell + 2;
        let values = (0..cols * cols)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        Self { cell, cols, values }
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        let (gx, gy) = (x / self.cell, y / self.cell);
        let fx = (x % self.cell) as f64 / self.cell as f64;
        let fy = (y % self.cell) as f64 / self.cell as f64;
        let v = |i: usize, j: usize| self.values[j * self.cols + i];
        let top = v(gx, gy) * (1.0 - fx) + v(gx + 1, gy) * fx;
        let bottom = v(gx, gy + 1) * (1.0 - fx) + v(gx + 1, gy + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

const TEXTURE_AMPLITUDE: f64 = 0.25;
const TEXTURE_CELL: usize = 4;

/// Builds one of the fixed test scenes with `beta = 0.4` and
/// `A = (0.9, 0.95, 1.0)`. The same kind and size always give the same scene.
pub fn make_test_scene(kind: SceneKind, size: usize) -> Result<SceneSpec> {
    if size < MIN_SCENE_SIZE {
        return Err(DehazeError::InvalidParameter {
            name: "size",
            reason: format!("scenes need at least {MIN_SCENE_SIZE} pixels per side, got {size}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SCENE_SEED ^ kind as u64);
    let noise: Vec<ValueNoise> = (0..3)
        .map(|_| ValueNoise::new(&mut rng, size, TEXTURE_CELL))
        .collect();

    // one dark texel per lattice cell, jittered by up to one pixel
    let pitch = DARK_TEXEL_PITCH;
    let cells = size.div_ceil(pitch);
    let mut dark = vec![None; size * size];
    for cy in 0..cells {
        for cx in 0..cells {
            let x = cx * pitch + rng.random_range(0..2usize);
            let y = cy * pitch + rng.random_range(0..2usize);
            if x < size && y < size {
                dark[y * size + x] = Some(rng.random_range(0..3usize));
            }
        }
    }

    let colors = palette(kind);
    let mut depth = Vec::with_capacity(size * size);
    let radiance = ImageRgb::from_fn(size, size, |x, y| {
        let (region, d) = layout(kind, size, x, y);
        depth.push(d);
        let base = colors[region];
        let mut rgb = [0.0; 3];
        for c in 0..3 {
            rgb[c] = (base[c] + TEXTURE_AMPLITUDE * noise[c].at(x, y)).clamp(0.05, 0.95);
        }
        if dark[y * size + x].is_some() {
            // shadow texel: the weakest channel of the local color drops to zero
            let weakest = (0..3)
                .min_by(|&a, &b| rgb[a].total_cmp(&rgb[b]))
                .unwrap_or(0);
            rgb[weakest] = 0.0;
        }
        rgb
    })?;
    Ok(SceneSpec {
        radiance,
        depth: ScalarMap::new(size, size, depth)?,
        beta: DEFAULT_BETA,
        airlight: AirLight::new(DEFAULT_SCENE_AIRLIGHT),
    })
}

/// JSON descriptor of a scene stored next to its PNG sidecars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub beta: f64,
    pub airlight: AirLight,
    /// 16-bit RGB PNG, relative to the descriptor.
    pub radiance: PathBuf,
    /// 16-bit grayscale PNG holding `depth / depth_scale`.
    pub depth: PathBuf,
    pub depth_scale: f64,
}

fn sidecar(json: &Path, suffix: &str) -> PathBuf {
    let stem = json
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    PathBuf::from(format!("{stem}.{suffix}.png"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DehazeError + '_ {
    move |source| DehazeError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `<stem>.json`, `<stem>.radiance.png` and `<stem>.depth.png`.
///
/// Depth is quantized to 1/65535 of its maximum.
pub fn save_scene(spec: &SceneSpec, json_path: impl AsRef<Path>) -> Result<()> {
    spec.validate()?;
    let json_path = json_path.as_ref();
    let dir = json_path.parent().unwrap_or(Path::new(""));
    let scale = spec.depth.max().max(f64::MIN_POSITIVE);
    let file = SceneFile {
        beta: spec.beta,
        airlight: spec.airlight,
        radiance: sidecar(json_path, "radiance"),
        depth: sidecar(json_path, "depth"),
        depth_scale: scale,
    };
    save_image16(&spec.radiance, dir.join(&file.radiance))?;
    spec.depth
        .map(|d| d / scale)
        .save_png16(dir.join(&file.depth))?;
    let text = serde_json::to_string_pretty(&file).expect("scene descriptor serializes");
    std::fs::write(json_path, text).map_err(io_err(json_path))
}

pub fn load_scene(json_path: impl AsRef<Path>) -> Result<SceneSpec> {
    let json_path = json_path.as_ref();
    let text = std::fs::read_to_string(json_path).map_err(io_err(json_path))?;
    let file: SceneFile = serde_json::from_str(&text).map_err(|source| DehazeError::Json {
        path: json_path.to_path_buf(),
        source,
    })?;
    let dir = json_path.parent().unwrap_or(Path::new(""));
    let radiance = load_image(dir.join(&file.radiance))?;
    let depth = ScalarMap::load_png(dir.join(&file.depth))?.map(|v| v * file.depth_scale);
    let spec = SceneSpec {
        radiance,
        depth,
        beta: file.beta,
        airlight: file.airlight,
    };
    spec.validate()?;
    Ok(spec)
}
