//! GeoTIFF reading on top of the `tiff` decoder.
//!
//! [`GeoTiffSource`] parses the header once and then serves windows by
//! decoding only the strips or tiles that intersect the request, so large
//! cloud-optimized files are never read in full. Decoders are pooled, which
//! makes concurrent reads from one handle safe.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use tiff::decoder::{Decoder, DecodingResult, Limits};
use tiff::tags::Tag;
use tiff::ColorType;

use super::{GeoTransform, PixelWindow, ThermalRaster, WindowSource};
use crate::{crs, Error, Result};

type TiffDecoder = Decoder<BufReader<File>>;

const GT_MODEL_TYPE: u16 = 1024;
const GT_RASTER_TYPE: u16 = 1025;
const GEOGRAPHIC_TYPE: u16 = 2048;
const PROJECTED_CS_TYPE: u16 = 3072;
const MODEL_TYPE_GEOGRAPHIC: u16 = 2;
const RASTER_PIXEL_IS_POINT: u16 = 2;

#[derive(Debug, Clone, Copy)]
struct ChunkLayout {
    chunk_w: usize,
    chunk_h: usize,
    across: usize,
    down: usize,
    /// PlanarConfiguration = 2: one plane of chunks per band.
    planar: bool,
}

/// An open GeoTIFF serving windowed reads of one band.
pub struct GeoTiffSource {
    path: PathBuf,
    width: usize,
    height: usize,
    bands: usize,
    band: usize,
    nodata: Option<f64>,
    transform: GeoTransform,
    layout: ChunkLayout,
    pool: Mutex<Vec<TiffDecoder>>,
}

impl std::fmt::Debug for GeoTiffSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeoTiffSource")
            .field("path", &self.path)
            .field("width", &self.width)
            .field("height", &self.height)
            .field("bands", &self.bands)
            .field("band", &self.band)
            .finish()
    }
}

fn open_decoder(path: &Path) -> Result<TiffDecoder> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(Decoder::new(BufReader::new(file))?.with_limits(Limits::unlimited()))
}

impl GeoTiffSource {
    /// Opens `path` and selects `band` (0-based) for reads.
    pub fn open(path: impl AsRef<Path>, band: usize) -> Result<Self> {
        let path = path.as_ref();
        let mut dec = open_decoder(path)?;
        let (w, h) = dec.dimensions()?;
        let bands = match dec.colortype()? {
            ColorType::Gray(_) => 1,
            ColorType::RGB(_) => 3,
            ColorType::RGBA(_) => 4,
            ColorType::GrayA(_) => 2,
            ColorType::Multiband { num_samples, .. } => num_samples as usize,
            other => return Err(Error::UnsupportedSampleFormat(format!("{other:?}"))),
        };
        if band >= bands {
            return Err(Error::MissingBand { band, bands });
        }
        let planar = dec.find_tag_unsigned::<u16>(Tag::PlanarConfiguration)?.unwrap_or(1) == 2;
        let (cw, ch) = dec.chunk_dimensions();
        let (cw, ch) = (cw as usize, ch as usize);
        let layout = ChunkLayout {
            chunk_w: cw,
            chunk_h: ch,
            across: (w as usize).div_ceil(cw),
            down: (h as usize).div_ceil(ch),
            planar,
        };

        let mut transform = read_transform(&mut dec, path, 0)?;
        let geokeys = read_geokeys(&mut dec)?;
        let epsg = crs_from_geokeys(&geokeys)?;
        transform.epsg = epsg;
        if crs::is_geographic(epsg)? || geokeys.iter().any(|&(k, v)| k == GT_MODEL_TYPE && v == MODEL_TYPE_GEOGRAPHIC) {
            return Err(Error::GeographicCrs(epsg));
        }
        let pixel_is_point = geokeys.iter().any(|&(k, v)| k == GT_RASTER_TYPE && v == RASTER_PIXEL_IS_POINT);
        if pixel_is_point {
            transform = GeoTransform {
                origin_x: transform.origin_x - 0.5 * (transform.pixel_w + transform.rot_row),
                origin_y: transform.origin_y - 0.5 * (transform.rot_col + transform.pixel_h),
                ..transform
            };
        }
        transform.validate()?;

        let nodata = match dec.find_tag(Tag::GdalNodata)? {
            Some(v) => {
                let text = v.into_string()?;
                let text = text.trim_matches(char::from(0)).trim();
                Some(text.parse::<f64>().map_err(|_| Error::UnsupportedSampleFormat(format!("nodata value {text:?}")))?)
            }
            None => None,
        };

        Ok(Self {
            path: path.to_path_buf(),
            width: w as usize,
            height: h as usize,
            bands,
            band,
            nodata,
            transform,
            layout,
            pool: Mutex::new(vec![dec]),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn nodata(&self) -> Option<f64> {
        self.nodata
    }

    fn checkout(&self) -> Result<TiffDecoder> {
        let pooled = self.pool.lock().unwrap_or_else(|p| p.into_inner()).pop();
        match pooled {
            Some(d) => Ok(d),
            None => open_decoder(&self.path),
        }
    }

    fn checkin(&self, dec: TiffDecoder) {
        self.pool.lock().unwrap_or_else(|p| p.into_inner()).push(dec);
    }

    /// Reads `window` of an arbitrary band (clamped to the image bounds).
    pub fn read_band_window(&self, window: PixelWindow, band: usize) -> Result<ThermalRaster> {
        if band >= self.bands {
            return Err(Error::MissingBand { band, bands: self.bands });
        }
        let w = window.clamp_to(self.width, self.height).ok_or(Error::WindowOutOfBounds(window))?;
        let mut values = vec![0f32; w.width * w.height];
        let mut dec = self.checkout()?;
        let result = self.fill_window(&mut dec, w, band, &mut values);
        // A decoder that failed mid-read is dropped rather than reused.
        if result.is_ok() {
            self.checkin(dec);
        }
        result?;
        ThermalRaster::from_values(w.width, w.height, values, self.nodata, self.transform.translated(w.col_off, w.row_off))
    }

    fn fill_window(&self, dec: &mut TiffDecoder, w: PixelWindow, band: usize, out: &mut [f32]) -> Result<()> {
        let l = self.layout;
        let first_cx = w.col_off / l.chunk_w;
        let last_cx = (w.col_off + w.width - 1) / l.chunk_w;
        let first_cy = w.row_off / l.chunk_h;
        let last_cy = (w.row_off + w.height - 1) / l.chunk_h;
        let (spp, sample) = if l.planar { (1, 0) } else { (self.bands, band) };
        let plane_offset = if l.planar { band * l.across * l.down } else { 0 };

        for cy in first_cy..=last_cy {
            for cx in first_cx..=last_cx {
                let idx = (plane_offset + cy * l.across + cx) as u32;
                let (dw, dh) = dec.chunk_data_dimensions(idx);
                let (dw, dh) = (dw as usize, dh as usize);
                let chunk = dec.read_chunk(idx)?;
                let x0 = cx * l.chunk_w;
                let y0 = cy * l.chunk_h;
                let col_lo = w.col_off.max(x0);
                let col_hi = (w.col_off + w.width).min(x0 + dw);
                let row_lo = w.row_off.max(y0);
                let row_hi = (w.row_off + w.height).min(y0 + dh);
                for row in row_lo..row_hi {
                    let src_row = (row - y0) * dw;
                    let dst_row = (row - w.row_off) * w.width;
                    for col in col_lo..col_hi {
                        let s = (src_row + col - x0) * spp + sample;
                        out[dst_row + col - w.col_off] = sample_at(&chunk, s)?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn sample_at(chunk: &DecodingResult, i: usize) -> Result<f32> {
    Ok(match chunk {
        DecodingResult::F32(v) => v[i],
        DecodingResult::F64(v) => v[i] as f32,
        DecodingResult::U8(v) => v[i] as f32,
        DecodingResult::U16(v) => v[i] as f32,
        DecodingResult::I16(v) => v[i] as f32,
        DecodingResult::U32(v) => v[i] as f32,
        DecodingResult::I32(v) => v[i] as f32,
        DecodingResult::I8(v) => v[i] as f32,
        other => {
            let name = match other {
                DecodingResult::U64(_) => "uint64",
                DecodingResult::I64(_) => "int64",
                DecodingResult::F16(_) => "float16",
                _ => "unknown",
            };
            return Err(Error::UnsupportedSampleFormat(name.into()));
        }
    })
}

impl WindowSource for GeoTiffSource {
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
        self.read_band_window(window, self.band)
    }
}

/// Loads one band of a GeoTIFF in full. Values are returned as stored (°C expected).
pub fn load_raster(path: impl AsRef<Path>, band: usize) -> Result<ThermalRaster> {
    let src = GeoTiffSource::open(path, band)?;
    src.read_window(PixelWindow::new(0, 0, src.width, src.height))
}

fn read_geokeys(dec: &mut TiffDecoder) -> Result<Vec<(u16, u16)>> {
    let Some(dir) = dec.find_tag(Tag::GeoKeyDirectoryTag)? else {
        return Ok(Vec::new());
    };
    let dir = dir.into_u16_vec()?;
    if dir.len() < 4 {
        return Ok(Vec::new());
    }
    let n = dir[3] as usize;
    let mut keys = Vec::with_capacity(n);
    for k in 0..n {
        let base = 4 + 4 * k;
        if base + 3 >= dir.len() {
            break;
        }
        // Only inline SHORT values (location 0) carry codes we need.
        if dir[base + 1] == 0 {
            keys.push((dir[base], dir[base + 3]));
        }
    }
    Ok(keys)
}

fn crs_from_geokeys(keys: &[(u16, u16)]) -> Result<u32> {
    let find = |id| keys.iter().find(|&&(k, _)| k == id).map(|&(_, v)| v as u32);
    if let Some(code) = find(PROJECTED_CS_TYPE).filter(|&c| c != 0 && c != 32767) {
        return Ok(code);
    }
    if let Some(code) = find(GEOGRAPHIC_TYPE).filter(|&c| c != 0 && c != 32767) {
        return Err(Error::GeographicCrs(code));
    }
    Err(Error::UnknownCrs("no EPSG code in GeoKeyDirectory".into()))
}

fn read_transform(dec: &mut TiffDecoder, path: &Path, epsg: u32) -> Result<GeoTransform> {
    if let Some(m) = dec.find_tag(Tag::ModelTransformationTag)? {
        let m = m.into_f64_vec()?;
        if m.len() >= 8 {
            return Ok(GeoTransform {
                origin_x: m[3],
                origin_y: m[7],
                pixel_w: m[0],
                pixel_h: m[5],
                rot_row: m[1],
                rot_col: m[4],
                epsg,
            });
        }
    }
    let scale = dec.find_tag(Tag::ModelPixelScaleTag)?.map(|v| v.into_f64_vec()).transpose()?;
    let tie = dec.find_tag(Tag::ModelTiepointTag)?.map(|v| v.into_f64_vec()).transpose()?;
    match (scale, tie) {
        (Some(s), Some(t)) if s.len() >= 2 && t.len() >= 6 => {
            let (i, j, x, y) = (t[0], t[1], t[3], t[4]);
            Ok(GeoTransform {
                origin_x: x - i * s[0],
                origin_y: y + j * s[1],
                pixel_w: s[0],
                pixel_h: -s[1],
                rot_row: 0.0,
                rot_col: 0.0,
                epsg,
            })
        }
        _ => Err(Error::MissingGeotransform(path.to_path_buf())),
    }
}
