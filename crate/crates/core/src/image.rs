//! Raster containers and raster I/O.
//!
//! Every raster is row-major with a top-left origin. Color samples are `f64`
//! in `[0, 1]`; constructors clamp so downstream code never sees values out of
//! range.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::error::{DehazeError, Result};

/// Smallest value an air-light channel may take.
pub const AIRLIGHT_FLOOR: f64 = 1.0 / 255.0;

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(DehazeError::EmptyRaster { width, height });
    }
    width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or(DehazeError::DimensionOverflow {
            width: width as u64,
            height: height as u64,
        })?;
    Ok(())
}

/// Zero-based raster coordinate. Serialized as `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct PixelCoord {
    pub x: usize,
    pub y: usize,
}

impl PixelCoord {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Row-major index into a raster of the given width.
    pub fn index(self, width: usize) -> usize {
        self.y * width + self.x
    }

    pub fn in_bounds(self, width: usize, height: usize) -> bool {
        self.x < width && self.y < height
    }
}

impl From<(usize, usize)> for PixelCoord {
    fn from((x, y): (usize, usize)) -> Self {
        Self { x, y }
    }
}

impl From<PixelCoord> for (usize, usize) {
    fn from(p: PixelCoord) -> Self {
        (p.x, p.y)
    }
}

/// Floating point RGB raster with channels in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageRgb {
    /// Builds an image from interleaved RGB samples, clamping each to `[0, 1]`.
    pub fn new(width: usize, height: usize, mut data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height * 3 {
            return Err(DehazeError::DataLength {
                width,
                height,
                channels: 3,
                actual: data.len(),
            });
        }
        for v in &mut data {
            if !v.is_finite() {
                return Err(DehazeError::NonFinite);
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        Self::from_fn(width, height, |_, _| rgb)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Interleaved samples, `len() * 3` values.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixel_at(y * self.width + x)
    }

    pub fn pixel_at(&self, index: usize) -> [f64; 3] {
        let i = index * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    /// Rec. 601 luma, used by the SSIM metric.
    pub fn luma(&self) -> ScalarMap {
        let data = self
            .pixels()
            .map(|[r, g, b]| 0.299 * r + 0.587 * g + 0.114 * b)
            .collect();
        ScalarMap {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn to_rgb8(&self) -> ImageBuffer<Rgb<u8>, Vec<u8>> {
        let bytes = self.data.iter().map(|&v| quantize_u8(v)).collect();
        ImageBuffer::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions")
    }

    /// Encodes as an 8-bit RGB PNG into memory.
    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        encode_png(DynamicImage::ImageRgb8(self.to_rgb8()))
    }

    /// Decodes PNG/PPM bytes held in memory.
    pub fn from_encoded(bytes: &[u8]) -> Result<Self> {
        let decoded = image::load_from_memory(bytes)
            .map_err(|e| DehazeError::UnsupportedFormat(e.to_string()))?;
        Self::from_dynamic(decoded)
    }

    pub fn from_dynamic(img: DynamicImage) -> Result<Self> {
        let (w, h) = (img.width() as usize, img.height() as usize);
        check_dims(w, h)?;
        let data: Vec<f64> = match img {
            DynamicImage::ImageLuma8(_)
            | DynamicImage::ImageLumaA8(_)
            | DynamicImage::ImageRgb8(_)
            | DynamicImage::ImageRgba8(_) => img
                .to_rgb8()
                .into_raw()
                .into_iter()
                .map(|v| f64::from(v) / 255.0)
                .collect(),
            DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_) => img
                .to_rgb16()
                .into_raw()
                .into_iter()
                .map(|v| f64::from(v) / 65535.0)
                .collect(),
            DynamicImage::ImageRgb32F(_) | DynamicImage::ImageRgba32F(_) => img
                .to_rgb32f()
                .into_raw()
                .into_iter()
                .map(f64::from)
                .collect(),
            other => {
                return Err(DehazeError::UnsupportedFormat(format!(
                    "color type {:?}",
                    other.color()
                )))
            }
        };
        Self::new(w, h, data)
    }
}

/// Round-half-up quantization of a `[0, 1]` sample to a byte.
pub fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn quantize_u16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0 + 0.5).floor() as u16
}

fn encode_png(img: DynamicImage) -> Result<Vec<u8>> {
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| DehazeError::UnsupportedFormat(e.to_string()))?;
    Ok(out.into_inner())
}

/// Reads a PNG (8 or 16 bit) or binary PPM into `[0, 1]` RGB. Alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageRgb> {
    let path = path.as_ref();
    let read_err = |source| DehazeError::ImageRead {
        path: path.to_path_buf(),
        source,
    };
    let decoded = image::ImageReader::open(path)
        .map_err(|e| read_err(image::ImageError::IoError(e)))?
        .with_guessed_format()
        .map_err(|e| read_err(image::ImageError::IoError(e)))?
        .decode()
        .map_err(read_err)?;
    ImageRgb::from_dynamic(decoded)
}

/// Writes an 8-bit RGB PNG.
pub fn save_image(img: &ImageRgb, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    img.to_rgb8()
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| DehazeError::ImageWrite {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes a 16-bit RGB PNG, `round(v * 65535)` per sample.
pub fn save_image16(img: &ImageRgb, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raw = img.data.iter().map(|&v| quantize_u16(v)).collect();
    let buf: ImageBuffer<Rgb<u16>, Vec<u16>> =
        ImageBuffer::from_raw(img.width as u32, img.height as u32, raw)
            .expect("buffer length matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| DehazeError::ImageWrite {
            path: path.to_path_buf(),
            source,
        })
}

/// Downscales with bilinear sampling so that the longer side is at most
/// `max_side`. Never upscales.
pub fn resize_max_side(img: &ImageRgb, max_side: usize) -> ImageRgb {
    let (w, h) = img.dims();
    if max_side == 0 || w.max(h) <= max_side {
        return img.clone();
    }
    bilinear_downscale(w, h, max_side, |x, y| img.pixel(x, y))
}

/// Output size of a downscale to `max_side`, which must be below the longer side.
fn scaled_dims(w: usize, h: usize, max_side: usize) -> (usize, usize) {
    let longest = w.max(h);
    let scale = max_side as f64 / longest as f64;
    let scaled = |len: usize| -> usize {
        if len == longest {
            max_side
        } else {
            ((len as f64 * scale).round() as usize).max(1)
        }
    };
    (scaled(w), scaled(h))
}

fn bilinear_downscale(
    w: usize,
    h: usize,
    max_side: usize,
    pixel: impl Fn(usize, usize) -> [f64; 3],
) -> ImageRgb {
    let (nw, nh) = scaled_dims(w, h, max_side);

    // pixel-center aligned source coordinate, clamped to the valid range
    let taps = |dst: usize, src_len: usize, dst_len: usize| -> (usize, usize, f64) {
        let s = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5)
            .clamp(0.0, (src_len - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(src_len - 1);
        (i0, i1, s - i0 as f64)
    };
    let xs: Vec<_> = (0..nw).map(|x| taps(x, w, nw)).collect();
    let ys: Vec<_> = (0..nh).map(|y| taps(y, h, nh)).collect();

    let mut data = Vec::with_capacity(nw * nh * 3);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let p00 = pixel(x0, y0);
            let p10 = pixel(x1, y0);
            let p01 = pixel(x0, y1);
            let p11 = pixel(x1, y1);
            for c in 0..3 {
                let top = p00[c] + (p10[c] - p00[c]) * fx;
                let bottom = p01[c] + (p11[c] - p01[c]) * fx;
                data.push(top + (bottom - top) * fy);
            }
        }
    }
    ImageRgb::new(nw, nh, data).expect("resized dimensions are valid")
}

/// Decodes PNG/PPM bytes and downscales to `max_side` straight from the
/// decoded buffer, so large inputs never exist at full size in `f64`.
///
/// The result equals `resize_max_side(&ImageRgb::from_encoded(bytes)?, max_side)`.
pub fn decode_max_side(bytes: &[u8], max_side: usize) -> Result<ImageRgb> {
    let decoded = image::load_from_memory(bytes)
        .map_err(|e| DehazeError::UnsupportedFormat(e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    check_dims(w, h)?;
    if max_side == 0 || w.max(h) <= max_side {
        return ImageRgb::from_dynamic(decoded);
    }
    let out = match decoded.color() {
        image::ColorType::L8
        | image::ColorType::La8
        | image::ColorType::Rgb8
        | image::ColorType::Rgba8 => {
            let buf = decoded.into_rgb8();
            bilinear_downscale(w, h, max_side, |x, y| {
                buf.get_pixel(x as u32, y as u32)
                    .0
                    .map(|v| f64::from(v) / 255.0)
            })
        }
        image::ColorType::L16
        | image::ColorType::La16
        | image::ColorType::Rgb16
        | image::ColorType::Rgba16 => {
            let buf = decoded.into_rgb16();
            bilinear_downscale(w, h, max_side, |x, y| {
                buf.get_pixel(x as u32, y as u32)
                    .0
                    .map(|v| f64::from(v) / 65535.0)
            })
        }
        image::ColorType::Rgb32F | image::ColorType::Rgba32F => {
            let buf = decoded.into_rgb32f();
            bilinear_downscale(w, h, max_side, |x, y| {
                buf.get_pixel(x as u32, y as u32)
                    .0
                    .map(|v| f64::from(v).clamp(0.0, 1.0))
            })
        }
        other => {
            return Err(DehazeError::UnsupportedFormat(format!(
                "color type {other:?}"
            )))
        }
    };
    Ok(out)
}

/// Global atmospheric color. Channels are kept in `[1/255, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct AirLight([f64; 3]);

impl AirLight {
    pub fn new(rgb: [f64; 3]) -> Self {
        Self(rgb.map(|v| {
            if v.is_finite() {
                v.clamp(AIRLIGHT_FLOOR, 1.0)
            } else {
                AIRLIGHT_FLOOR
            }
        }))
    }

    pub fn rgb(&self) -> [f64; 3] {
        self.0
    }
}

impl From<[f64; 3]> for AirLight {
    fn from(rgb: [f64; 3]) -> Self {
        Self::new(rgb)
    }
}

impl From<AirLight> for [f64; 3] {
    fn from(a: AirLight) -> Self {
        a.0
    }
}

/// Per pixel `min_c I^c / A^c`. Values above 1 are kept.
pub fn min_channel(img: &ImageRgb, airlight: &AirLight) -> ScalarMap {
    let a = airlight.rgb();
    let data = img
        .pixels()
        .map(|p| (0..3).map(|c| p[c] / a[c]).fold(f64::INFINITY, f64::min))
        .collect();
    ScalarMap {
        width: img.width(),
        height: img.height(),
        data,
    }
}

/// Single channel raster of reals (lower bound, transmission, weights...).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScalarMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(DehazeError::DataLength {
                width,
                height,
                channels: 1,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(DehazeError::NonFinite);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Like [`ScalarMap::new`] but clamps every value into `[0, 1]`.
    pub fn clamped(width: usize, height: usize, mut data: Vec<f64>) -> Result<Self> {
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub(crate) fn from_parts_unchecked(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarMap {
        Self::from_parts_unchecked(
            self.width,
            self.height,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn ensure_same_dims(&self, other: (usize, usize)) -> Result<()> {
        if self.dims() != other {
            return Err(DehazeError::DimensionMismatch {
                expected: self.dims(),
                actual: other,
            });
        }
        Ok(())
    }

    /// 16-bit grayscale rendering, `round(v * 65535)` after clamping to `[0, 1]`.
    pub fn to_luma16(&self) -> ImageBuffer<Luma<u16>, Vec<u16>> {
        let raw = self.data.iter().map(|&v| quantize_u16(v)).collect();
        ImageBuffer::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length matches dimensions")
    }

    pub fn to_png16_bytes(&self) -> Result<Vec<u8>> {
        encode_png(DynamicImage::ImageLuma16(self.to_luma16()))
    }

    /// Writes the map as a 16-bit grayscale PNG.
    pub fn save_png16(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_luma16()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| DehazeError::ImageWrite {
                path: path.to_path_buf(),
                source,
            })
    }

    /// Reads a grayscale PNG back into `[0, 1]` (16-bit maps are exact to 1/65535).
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let decoded = image::open(path).map_err(|source| DehazeError::ImageRead {
            path: path.to_path_buf(),
            source,
        })?;
        let (w, h) = (decoded.width() as usize, decoded.height() as usize);
        let data = decoded
            .to_luma16()
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 65535.0)
            .collect();
        Self::new(w, h, data)
    }
}

/// Boolean raster, e.g. the likely-dark-pixel mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(DehazeError::DataLength {
                width,
                height,
                channels: 1,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn to_map(&self) -> ScalarMap {
        ScalarMap::from_parts_unchecked(
            self.width,
            self.height,
            self.data
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        )
    }

    pub fn save_png16(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_map().save_png16(path)
    }
}
