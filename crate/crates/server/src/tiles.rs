//! 256 px web-mercator PNG tiles over the IR and RGB orthomosaics.
//!
//! Each output pixel center is taken from web mercator to the raster's CRS
//! and sampled nearest-neighbour. Pixel positions derive from the global
//! pixel index at the zoom level, so adjacent tiles are seamless: their
//! concatenation equals one render of the combined extent.

use std::path::Path;

use pvinspect_core::crs::{self, Projector, WEB_MERCATOR_HALF_EXTENT};
use pvinspect_core::raster::{GeoTiffSource, GeoTransform, PixelWindow, WindowSource};

use crate::ServerError;

pub const TILE_SIZE: usize = 256;
pub const MAX_ZOOM: u32 = 30;

/// Upper bound on pixels decoded per window read; larger coverage is read in
/// row strips.
const STRIP_PIXELS: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Ir,
    Rgb,
}

impl std::str::FromStr for LayerKind {
    type Err = ServerError;
    fn from_str(s: &str) -> Result<Self, ServerError> {
        match s {
            "ir" => Ok(Self::Ir),
            "rgb" => Ok(Self::Rgb),
            other => Err(ServerError::NotFound(format!("unknown layer {other:?}"))),
        }
    }
}

enum Paint {
    /// Linear gray between the ortho clip temperatures.
    Gray { lo: f64, hi: f64 },
    Rgb,
}

pub struct Layer {
    source: GeoTiffSource,
    projector: Projector,
    paint: Paint,
}

impl std::fmt::Debug for Layer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Layer").field("source", &self.source).finish()
    }
}

fn core_err(e: pvinspect_core::Error) -> ServerError {
    ServerError::Internal(e.to_string())
}

impl Layer {
    /// Thermal layer rendered as gray with `stretch` (°C) mapped to 0..=255.
    pub fn thermal(path: &Path, stretch: [f64; 2]) -> Result<Self, ServerError> {
        let source = GeoTiffSource::open(path, 0).map_err(core_err)?;
        let projector = Projector::new(source.transform().epsg).map_err(core_err)?;
        Ok(Self { source, projector, paint: Paint::Gray { lo: stretch[0], hi: stretch[1] } })
    }

    /// Three-band 8-bit visible layer.
    pub fn visible(path: &Path) -> Result<Self, ServerError> {
        let source = GeoTiffSource::open(path, 0).map_err(core_err)?;
        if source.bands() < 3 {
            return Err(ServerError::Internal(format!("{} has {} band(s), need 3", path.display(), source.bands())));
        }
        let projector = Projector::new(source.transform().epsg).map_err(core_err)?;
        Ok(Self { source, projector, paint: Paint::Rgb })
    }

    fn transform(&self) -> &GeoTransform {
        self.source.transform()
    }

    /// Source pixel under each output pixel of tile `z/x/y`, or `None` where
    /// the pixel falls outside the raster.
    fn lookup(&self, z: u32, x: u64, y: u64) -> Result<Vec<Option<(usize, usize)>>, ServerError> {
        let res = 2.0 * WEB_MERCATOR_HALF_EXTENT / (TILE_SIZE as f64 * (1u64 << z) as f64);
        let (w, h) = (self.source.width() as f64, self.source.height() as f64);
        let mut out = Vec::with_capacity(TILE_SIZE * TILE_SIZE);
        for j in 0..TILE_SIZE {
            let my = WEB_MERCATOR_HALF_EXTENT - ((y * TILE_SIZE as u64 + j as u64) as f64 + 0.5) * res;
            for i in 0..TILE_SIZE {
                let mx = -WEB_MERCATOR_HALF_EXTENT + ((x * TILE_SIZE as u64 + i as u64) as f64 + 0.5) * res;
                let (lon, lat) = crs::web_mercator_to_lonlat(mx, my);
                let hit = match self.projector.from_lonlat(lon, lat) {
                    Ok((px, py)) => {
                        let (c, r) = self.transform().world_to_pixel(px, py).map_err(core_err)?;
                        let (c, r) = (c.floor(), r.floor());
                        (c >= 0.0 && r >= 0.0 && c < w && r < h).then_some((c as usize, r as usize))
                    }
                    Err(_) => None,
                };
                out.push(hit);
            }
        }
        Ok(out)
    }

    /// RGBA pixels of tile `z/x/y`; `None` when no output pixel has data.
    pub fn render(&self, z: u32, x: u64, y: u64) -> Result<Option<Vec<u8>>, ServerError> {
        if z > MAX_ZOOM || x >= 1u64 << z || y >= 1u64 << z {
            return Err(ServerError::BadRequest(format!("tile {z}/{x}/{y} out of range")));
        }
        let hits = self.lookup(z, x, y)?;
        let Some(bounds) = hits.iter().flatten().fold(None, |acc: Option<(usize, usize, usize, usize)>, &(c, r)| {
            Some(match acc {
                None => (c, r, c, r),
                Some((c0, r0, c1, r1)) => (c0.min(c), r0.min(r), c1.max(c), r1.max(r)),
            })
        }) else {
            return Ok(None);
        };
        let (c0, r0, c1, r1) = bounds;
        let width = c1 - c0 + 1;
        let strip_rows = (STRIP_PIXELS / width).max(1);
        let bands = if matches!(self.paint, Paint::Rgb) { 3 } else { 1 };

        let mut rgba = vec![0u8; TILE_SIZE * TILE_SIZE * 4];
        let mut any = false;
        // output pixels ordered by source row so each strip is visited once
        let mut order: Vec<usize> = (0..hits.len()).filter(|&k| hits[k].is_some()).collect();
        order.sort_by_key(|&k| hits[k].map(|(_, r)| r));
        let mut cursor = 0;
        let mut row = r0;
        while row <= r1 && cursor < order.len() {
            let rows = strip_rows.min(r1 - row + 1);
            let window = PixelWindow::new(c0, row, width, rows);
            let strips = (0..bands).map(|b| self.source.read_band_window(window, b)).collect::<Result<Vec<_>, _>>().map_err(core_err)?;
            while cursor < order.len() {
                let k = order[cursor];
                let (c, r) = hits[k].expect("filtered");
                if r >= row + rows {
                    break;
                }
                cursor += 1;
                let px = &mut rgba[k * 4..k * 4 + 4];
                let (lc, lr) = (c - c0, r - row);
                match self.paint {
                    Paint::Gray { lo, hi } => {
                        if let Some(v) = strips[0].get(lc, lr) {
                            let g = gray(v as f64, lo, hi);
                            px.copy_from_slice(&[g, g, g, 255]);
                            any = true;
                        }
                    }
                    Paint::Rgb => {
                        let s: Vec<Option<f32>> = strips.iter().map(|b| b.get(lc, lr)).collect();
                        if let [Some(r), Some(g), Some(b)] = s[..] {
                            px.copy_from_slice(&[channel(r), channel(g), channel(b), 255]);
                            any = true;
                        }
                    }
                }
            }
            row += rows;
        }
        Ok(any.then_some(rgba))
    }
}

/// Temperature to gray level: `lo` maps to 0, `hi` to 255, clamped.
pub fn gray(v: f64, lo: f64, hi: f64) -> u8 {
    if hi <= lo {
        return if v >= hi { 255 } else { 0 };
    }
    (((v - lo) / (hi - lo)).clamp(0.0, 1.0) * 255.0).round() as u8
}

fn channel(v: f32) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Encodes 256x256 RGBA pixels as PNG.
pub fn encode_png(rgba: &[u8]) -> Result<Vec<u8>, ServerError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, TILE_SIZE as u32, TILE_SIZE as u32);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().map_err(|e| ServerError::Internal(e.to_string()))?;
        w.write_image_data(rgba).map_err(|e| ServerError::Internal(e.to_string()))?;
    }
    Ok(out)
}

/// IR and optional RGB layers of one results directory.
#[derive(Debug, Default)]
pub struct TileLayers {
    pub ir: Option<Layer>,
    pub rgb: Option<Layer>,
}

impl TileLayers {
    pub fn get(&self, kind: LayerKind) -> Option<&Layer> {
        match kind {
            LayerKind::Ir => self.ir.as_ref(),
            LayerKind::Rgb => self.rgb.as_ref(),
        }
    }
}

/// Web-mercator tile containing (lon, lat) at zoom `z`.
pub fn tile_for_lonlat(lon: f64, lat: f64, z: u32) -> (u64, u64) {
    let (mx, my) = crs::lonlat_to_web_mercator(lon, lat);
    let n = (1u64 << z) as f64;
    let span = 2.0 * WEB_MERCATOR_HALF_EXTENT;
    let x = ((mx + WEB_MERCATOR_HALF_EXTENT) / span * n).floor().clamp(0.0, n - 1.0);
    let y = ((WEB_MERCATOR_HALF_EXTENT - my) / span * n).floor().clamp(0.0, n - 1.0);
    (x as u64, y as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pvinspect_core::raster::{write_geotiff, RasterData, WriteOptions};

    #[test]
    fn gray_maps_clip_range_to_full_scale() {
        assert_eq!(gray(20.0, 20.0, 40.0), 0);
        assert_eq!(gray(40.0, 20.0, 40.0), 255);
        assert_eq!(gray(30.0, 20.0, 40.0), 128);
        assert_eq!(gray(-5.0, 20.0, 40.0), 0);
        assert_eq!(gray(99.0, 20.0, 40.0), 255);
    }

    /// 400x400 px ramp at 0.05 m in UTM 14N.
    fn ramp(dir: &Path) -> (std::path::PathBuf, Projector, GeoTransform) {
        let n = 400;
        let t = GeoTransform::north_up(500_000.0, 3_500_000.0, 0.05, 32614);
        let vals: Vec<f32> = (0..n * n).map(|i| 20.0 + 20.0 * (i % n) as f32 / (n - 1) as f32).collect();
        let path = dir.join("ramp.tif");
        write_geotiff(&path, n, n, RasterData::Float32(&vals), &t, &WriteOptions::default()).unwrap();
        (path, Projector::new(32614).unwrap(), t)
    }

    #[test]
    fn covered_tile_renders_and_far_tile_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let (path, proj, t) = ramp(dir.path());
        let layer = Layer::thermal(&path, [20.0, 40.0]).unwrap();
        let (cx, cy) = t.pixel_to_world(200.0, 200.0);
        let (lon, lat) = proj.to_lonlat(cx, cy).unwrap();
        let (x, y) = tile_for_lonlat(lon, lat, 20);
        let px = layer.render(20, x, y).unwrap().expect("covered");
        assert!(px.chunks(4).any(|p| p[3] == 255));
        let (fx, fy) = tile_for_lonlat(lon + 1.0, lat, 20);
        assert!(layer.render(20, fx, fy).unwrap().is_none());
        assert!(matches!(layer.render(3, 8, 0), Err(ServerError::BadRequest(_))));
    }

    #[test]
    fn extreme_columns_render_black_and_white() {
        let dir = tempfile::tempdir().unwrap();
        let (path, proj, t) = ramp(dir.path());
        let layer = Layer::thermal(&path, [20.0, 40.0]).unwrap();
        // at zoom 22 output pixels are finer than source pixels, so every
        // source column under a tile is sampled
        let grays_at = |col: f64| -> Vec<u8> {
            let (wx, wy) = t.pixel_to_world(col, 200.0);
            let (lon, lat) = proj.to_lonlat(wx, wy).unwrap();
            let (x, y) = tile_for_lonlat(lon, lat, 22);
            let px = layer.render(22, x, y).unwrap().unwrap();
            px.chunks(4).filter(|p| p[3] == 255).map(|p| p[0]).collect()
        };
        assert_eq!(grays_at(0.5).iter().min(), Some(&0));
        assert_eq!(grays_at(399.5).iter().max(), Some(&255));
    }

    #[test]
    fn adjacent_tiles_are_seamless() {
        let dir = tempfile::tempdir().unwrap();
        let (path, proj, t) = ramp(dir.path());
        let layer = Layer::thermal(&path, [20.0, 40.0]).unwrap();
        let (cx, cy) = t.pixel_to_world(200.0, 200.0);
        let (lon, lat) = proj.to_lonlat(cx, cy).unwrap();
        // at zoom 22 one output pixel is finer than one source pixel
        let z = 22;
        let (x, y) = tile_for_lonlat(lon, lat, z);
        let left = layer.lookup(z, x, y).unwrap();
        let right = layer.lookup(z, x + 1, y).unwrap();
        // independent oracle: project the two seam columns directly
        let res = 2.0 * WEB_MERCATOR_HALF_EXTENT / (TILE_SIZE as f64 * (1u64 << z) as f64);
        for j in 0..TILE_SIZE {
            let my = WEB_MERCATOR_HALF_EXTENT - ((y * 256 + j as u64) as f64 + 0.5) * res;
            for (gx, got) in [(x * 256 + 255, left[j * 256 + 255]), (x * 256 + 256, right[j * 256])] {
                let mx = -WEB_MERCATOR_HALF_EXTENT + (gx as f64 + 0.5) * res;
                let (lo, la) = crs::web_mercator_to_lonlat(mx, my);
                let (px, py) = proj.from_lonlat(lo, la).unwrap();
                let (c, r) = t.world_to_pixel(px, py).unwrap();
                let want = (c >= 0.0 && r >= 0.0 && c < 400.0 && r < 400.0).then(|| (c.floor() as usize, r.floor() as usize));
                assert_eq!(got, want);
            }
            // the seam advances by at most one source pixel
            if let (Some((a, ra)), Some((b, rb))) = (left[j * 256 + 255], right[j * 256]) {
                assert!(b >= a && b - a <= 1 && ra.abs_diff(rb) <= 1);
            }
        }
    }

    #[test]
    fn png_round_trips() {
        let mut rgba = vec![0u8; TILE_SIZE * TILE_SIZE * 4];
        rgba[3] = 255;
        let bytes = encode_png(&rgba).unwrap();
        let dec = png::Decoder::new(std::io::Cursor::new(bytes));
        let mut reader = dec.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        reader.next_frame(&mut buf).unwrap();
        assert_eq!(buf, rgba);
    }
}
