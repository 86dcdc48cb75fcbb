//! Georeferenced rasters: the affine pixel/world mapping, in-memory
//! temperature grids with a validity mask, and windowed access to GeoTIFFs.

mod geotiff;
mod writer;

pub use geotiff::{load_raster, GeoTiffSource};
pub use writer::{write_geotiff, RasterData, TiffLayout, WriteOptions};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Affine map from pixel (col, row) corner coordinates to projected world
/// coordinates in meters.
///
/// ```text
/// x = origin_x + col * pixel_w + row * rot_row
/// y = origin_y + col * rot_col + row * pixel_h
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_w: f64,
    /// Negative for north-up rasters.
    pub pixel_h: f64,
    pub rot_row: f64,
    pub rot_col: f64,
    /// EPSG code of a projected CRS.
    pub epsg: u32,
}

impl GeoTransform {
    /// North-up transform with square pixels of `gsd` meters.
    pub fn north_up(origin_x: f64, origin_y: f64, gsd: f64, epsg: u32) -> Self {
        Self { origin_x, origin_y, pixel_w: gsd, pixel_h: -gsd, rot_row: 0.0, rot_col: 0.0, epsg }
    }

    /// Unit pixels, no offset. Mostly useful in tests.
    pub fn identity() -> Self {
        Self { origin_x: 0.0, origin_y: 0.0, pixel_w: 1.0, pixel_h: 1.0, rot_row: 0.0, rot_col: 0.0, epsg: 0 }
    }

    pub fn determinant(&self) -> f64 {
        self.pixel_w * self.pixel_h - self.rot_row * self.rot_col
    }

    fn is_singular(&self) -> bool {
        let scale = (self.pixel_w * self.pixel_h).abs() + (self.rot_row * self.rot_col).abs();
        !(self.determinant().abs() > 1e-12 * scale)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pixel_w > 0.0) {
            return Err(Error::InvalidTransform(format!("pixel width {} must be > 0", self.pixel_w)));
        }
        if self.pixel_h == 0.0 || !self.pixel_h.is_finite() {
            return Err(Error::InvalidTransform("pixel height must be non-zero".into()));
        }
        if self.is_singular() {
            return Err(Error::InvalidTransform("linear part is singular".into()));
        }
        Ok(())
    }

    /// Ground area of one pixel in square meters.
    pub fn pixel_area(&self) -> f64 {
        self.determinant().abs()
    }

    /// Geometric-mean ground sampling distance in meters.
    pub fn gsd(&self) -> f64 {
        self.pixel_area().sqrt()
    }

    pub fn pixel_to_world(&self, col: f64, row: f64) -> (f64, f64) {
        (
            self.origin_x + col * self.pixel_w + row * self.rot_row,
            self.origin_y + col * self.rot_col + row * self.pixel_h,
        )
    }

    pub fn world_to_pixel(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let det = self.determinant();
        if self.is_singular() {
            return Err(Error::InvalidTransform("cannot invert a singular transform".into()));
        }
        let dx = x - self.origin_x;
        let dy = y - self.origin_y;
        let col = (self.pixel_h * dx - self.rot_row * dy) / det;
        let row = (-self.rot_col * dx + self.pixel_w * dy) / det;
        Ok((col, row))
    }

    /// World coordinates of the center of pixel (col, row).
    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        self.pixel_to_world(col as f64 + 0.5, row as f64 + 0.5)
    }

    /// Transform of a sub-window whose top-left pixel is (col_off, row_off).
    pub fn translated(&self, col_off: usize, row_off: usize) -> Self {
        let (x, y) = self.pixel_to_world(col_off as f64, row_off as f64);
        Self { origin_x: x, origin_y: y, ..*self }
    }
}

/// Rectangular block of pixels. May extend past the raster edge; reads clamp it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelWindow {
    pub col_off: usize,
    pub row_off: usize,
    pub width: usize,
    pub height: usize,
}

impl PixelWindow {
    pub fn new(col_off: usize, row_off: usize, width: usize, height: usize) -> Self {
        Self { col_off, row_off, width, height }
    }

    /// Intersection with a `width` x `height` image, or `None` when empty.
    pub fn clamp_to(&self, width: usize, height: usize) -> Option<PixelWindow> {
        if self.col_off >= width || self.row_off >= height || self.width == 0 || self.height == 0 {
            return None;
        }
        let w = self.width.min(width - self.col_off);
        let h = self.height.min(height - self.row_off);
        Some(PixelWindow::new(self.col_off, self.row_off, w, h))
    }

    pub fn contains_pixel(&self, col: usize, row: usize) -> bool {
        col >= self.col_off && col < self.col_off + self.width && row >= self.row_off && row < self.row_off + self.height
    }
}

/// Temperatures in °C on a georeferenced grid, with a per-pixel validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalRaster {
    pub width: usize,
    pub height: usize,
    /// Row-major values.
    pub values: Vec<f32>,
    /// `true` for valid pixels; nodata pixels are `false`.
    pub valid: Vec<bool>,
    pub transform: GeoTransform,
}

impl ThermalRaster {
    /// Builds a raster, marking non-finite values invalid.
    pub fn new(width: usize, height: usize, values: Vec<f32>, mut valid: Vec<bool>, transform: GeoTransform) -> Result<Self> {
        let n = width * height;
        if values.len() != n || valid.len() != n {
            return Err(Error::InvalidParameter(format!(
                "raster buffers hold {} values / {} mask entries, expected {n}",
                values.len(),
                valid.len()
            )));
        }
        for (flag, v) in valid.iter_mut().zip(&values) {
            if !v.is_finite() {
                *flag = false;
            }
        }
        Ok(Self { width, height, values, valid, transform })
    }

    /// Builds a raster from raw values, treating `nodata` (and non-finite values) as invalid.
    pub fn from_values(width: usize, height: usize, values: Vec<f32>, nodata: Option<f64>, transform: GeoTransform) -> Result<Self> {
        let valid = values.iter().map(|&v| is_valid_sample(v, nodata)).collect();
        Self::new(width, height, values, valid, transform)
    }

    pub fn filled(width: usize, height: usize, value: f32, transform: GeoTransform) -> Self {
        Self { width, height, values: vec![value; width * height], valid: vec![true; width * height], transform }
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    /// Value at (col, row) if the pixel is in bounds and valid.
    #[inline]
    pub fn get(&self, col: usize, row: usize) -> Option<f32> {
        if col >= self.width || row >= self.height {
            return None;
        }
        let i = self.index(col, row);
        self.valid[i].then(|| self.values[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn valid_values(&self) -> impl Iterator<Item = f32> + '_ {
        self.values.iter().zip(&self.valid).filter(|(_, &ok)| ok).map(|(&v, _)| v)
    }

    /// Copies a window out of this raster (clamped to bounds).
    pub fn window(&self, window: PixelWindow) -> Result<ThermalRaster> {
        let w = window.clamp_to(self.width, self.height).ok_or(Error::WindowOutOfBounds(window))?;
        let mut values = Vec::with_capacity(w.width * w.height);
        let mut valid = Vec::with_capacity(w.width * w.height);
        for row in w.row_off..w.row_off + w.height {
            let start = self.index(w.col_off, row);
            values.extend_from_slice(&self.values[start..start + w.width]);
            valid.extend_from_slice(&self.valid[start..start + w.width]);
        }
        Ok(ThermalRaster {
            width: w.width,
            height: w.height,
            values,
            valid,
            transform: self.transform.translated(w.col_off, w.row_off),
        })
    }

    /// Same grid and mask with new values (nodata positions are kept as they are).
    pub fn with_values(&self, values: Vec<f32>) -> ThermalRaster {
        debug_assert_eq!(values.len(), self.values.len());
        ThermalRaster { width: self.width, height: self.height, values, valid: self.valid.clone(), transform: self.transform }
    }
}

pub(crate) fn is_valid_sample(v: f32, nodata: Option<f64>) -> bool {
    if !v.is_finite() {
        return false;
    }
    match nodata {
        Some(nd) if nd.is_nan() => true,
        Some(nd) => v != nd as f32,
        None => true,
    }
}

/// Anything that can serve rectangular windows of a single-band raster.
///
/// Implementations must be safe to read from several threads at once.
pub trait WindowSource: Sync {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn transform(&self) -> &GeoTransform;
    fn read_window(&self, window: PixelWindow) -> Result<ThermalRaster>;
}

impl WindowSource for ThermalRaster {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn transform(&self) -> &GeoTransform {
        &self.transform
    }
    fn read_window(&self, window: PixelWindow) -> Result<ThermalRaster> {
        self.window(window)
    }
}
