//! Minimal GeoTIFF writer: little-endian, uncompressed, tiled or stripped,
//! float32 single band or 8-bit RGB. Used for fixtures and synthetic sites.

use std::fs::File;
use std::io::{BufWriter, Seek, SeekFrom, Write};
use std::path::Path;

use super::GeoTransform;
use crate::{crs, Error, Result};

const TYPE_ASCII: u16 = 2;
const TYPE_SHORT: u16 = 3;
const TYPE_LONG: u16 = 4;
const TYPE_DOUBLE: u16 = 12;

#[derive(Debug, Clone, Copy)]
pub enum RasterData<'a> {
    Float32(&'a [f32]),
    /// Interleaved RGB triplets.
    Rgb8(&'a [u8]),
}

impl RasterData<'_> {
    fn samples_per_pixel(&self) -> usize {
        match self {
            RasterData::Float32(_) => 1,
            RasterData::Rgb8(_) => 3,
        }
    }

    fn bytes_per_sample(&self) -> usize {
        match self {
            RasterData::Float32(_) => 4,
            RasterData::Rgb8(_) => 1,
        }
    }

    fn len(&self) -> usize {
        match self {
            RasterData::Float32(v) => v.len(),
            RasterData::Rgb8(v) => v.len(),
        }
    }

    /// Appends pixels [start, start + count) as little-endian bytes.
    fn push_pixels(&self, out: &mut Vec<u8>, start: usize, count: usize) {
        match self {
            RasterData::Float32(v) => {
                for x in &v[start..start + count] {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            RasterData::Rgb8(v) => out.extend_from_slice(&v[start * 3..(start + count) * 3]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiffLayout {
    Tiled { tile_size: u32 },
    Strips { rows_per_strip: u32 },
}

#[derive(Debug, Clone, Copy)]
pub struct WriteOptions {
    pub layout: TiffLayout,
    pub nodata: Option<f64>,
}

impl Default for WriteOptions {
    fn default() -> Self {
        Self { layout: TiffLayout::Tiled { tile_size: 256 }, nodata: None }
    }
}

struct Entry {
    tag: u16,
    kind: u16,
    count: u32,
    payload: Vec<u8>,
}

impl Entry {
    fn shorts(tag: u16, values: &[u16]) -> Self {
        Self { tag, kind: TYPE_SHORT, count: values.len() as u32, payload: values.iter().flat_map(|v| v.to_le_bytes()).collect() }
    }
    fn longs(tag: u16, values: &[u32]) -> Self {
        Self { tag, kind: TYPE_LONG, count: values.len() as u32, payload: values.iter().flat_map(|v| v.to_le_bytes()).collect() }
    }
    fn doubles(tag: u16, values: &[f64]) -> Self {
        Self { tag, kind: TYPE_DOUBLE, count: values.len() as u32, payload: values.iter().flat_map(|v| v.to_le_bytes()).collect() }
    }
    fn ascii(tag: u16, text: &str) -> Self {
        let mut payload = text.as_bytes().to_vec();
        payload.push(0);
        Self { tag, kind: TYPE_ASCII, count: payload.len() as u32, payload }
    }
}

/// Writes `data` (row-major, `width` x `height`) as a GeoTIFF.
pub fn write_geotiff(
    path: &Path,
    width: usize,
    height: usize,
    data: RasterData<'_>,
    transform: &GeoTransform,
    options: &WriteOptions,
) -> Result<()> {
    let spp = data.samples_per_pixel();
    if data.len() != width * height * spp {
        return Err(Error::InvalidParameter(format!(
            "raster data holds {} samples, expected {}",
            data.len(),
            width * height * spp
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter("cannot write an empty raster".into()));
    }
    transform.validate()?;
    let epsg = u16::try_from(transform.epsg)
        .map_err(|_| Error::UnknownCrs(format!("EPSG:{} does not fit a GeoKey", transform.epsg)))?;
    let geographic = crs::is_geographic(transform.epsg)?;

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::with_capacity(1 << 20, file);
    let io = |e| Error::io(path, e);

    out.write_all(b"II").map_err(io)?;
    out.write_all(&42u16.to_le_bytes()).map_err(io)?;
    out.write_all(&0u32.to_le_bytes()).map_err(io)?;
    let mut pos: u64 = 8;

    let bps = data.bytes_per_sample();
    let mut offsets = Vec::new();
    let mut counts = Vec::new();
    let mut buf = Vec::new();
    match options.layout {
        TiffLayout::Tiled { tile_size } => {
            let ts = tile_size as usize;
            if ts == 0 || !ts.is_multiple_of(16) {
                return Err(Error::InvalidParameter(format!("tile size {ts} must be a positive multiple of 16")));
            }
            let zero_row = vec![0u8; ts * spp * bps];
            for ty in (0..height).step_by(ts) {
                for tx in (0..width).step_by(ts) {
                    buf.clear();
                    let w = ts.min(width - tx);
                    for r in 0..ts {
                        let row = ty + r;
                        if row < height {
                            data.push_pixels(&mut buf, row * width + tx, w);
                            buf.extend_from_slice(&zero_row[..(ts - w) * spp * bps]);
                        } else {
                            buf.extend_from_slice(&zero_row);
                        }
                    }
                    offsets.push(u32::try_from(pos).map_err(|_| too_big())?);
                    counts.push(buf.len() as u32);
                    out.write_all(&buf).map_err(io)?;
                    pos += buf.len() as u64;
                }
            }
        }
        TiffLayout::Strips { rows_per_strip } => {
            let rps = rows_per_strip.max(1) as usize;
            for y in (0..height).step_by(rps) {
                buf.clear();
                let rows = rps.min(height - y);
                data.push_pixels(&mut buf, y * width, rows * width);
                offsets.push(u32::try_from(pos).map_err(|_| too_big())?);
                counts.push(buf.len() as u32);
                out.write_all(&buf).map_err(io)?;
                pos += buf.len() as u64;
            }
        }
    }

    let mut entries = vec![
        Entry::longs(256, &[width as u32]),
        Entry::longs(257, &[height as u32]),
        Entry::shorts(258, &vec![(bps * 8) as u16; spp]),
        Entry::shorts(259, &[1]),
        Entry::shorts(262, &[if spp == 3 { 2 } else { 1 }]),
        Entry::shorts(277, &[spp as u16]),
        Entry::shorts(284, &[1]),
        Entry::shorts(339, &vec![if spp == 3 { 1 } else { 3 }; spp]),
    ];
    match options.layout {
        TiffLayout::Tiled { tile_size } => {
            entries.push(Entry::longs(322, &[tile_size]));
            entries.push(Entry::longs(323, &[tile_size]));
            entries.push(Entry::longs(324, &offsets));
            entries.push(Entry::longs(325, &counts));
        }
        TiffLayout::Strips { rows_per_strip } => {
            entries.push(Entry::longs(273, &offsets));
            entries.push(Entry::longs(278, &[rows_per_strip.max(1)]));
            entries.push(Entry::longs(279, &counts));
        }
    }
    let t = transform;
    if t.rot_row == 0.0 && t.rot_col == 0.0 && t.pixel_h < 0.0 {
        entries.push(Entry::doubles(33550, &[t.pixel_w, -t.pixel_h, 0.0]));
        entries.push(Entry::doubles(33922, &[0.0, 0.0, 0.0, t.origin_x, t.origin_y, 0.0]));
    } else {
        #[rustfmt::skip]
        let m = [
            t.pixel_w, t.rot_row, 0.0, t.origin_x,
            t.rot_col, t.pixel_h, 0.0, t.origin_y,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ];
        entries.push(Entry::doubles(34264, &m));
    }
    let (model_type, cs_key) = if geographic { (2, 2048) } else { (1, 3072) };
    #[rustfmt::skip]
    let geokeys = [
        1, 1, 0, 3,
        1024, 0, 1, model_type,
        1025, 0, 1, 1,
        cs_key, 0, 1, epsg,
    ];
    entries.push(Entry::shorts(34735, &geokeys));
    if let Some(nd) = options.nodata {
        entries.push(Entry::ascii(42113, &format_nodata(nd)));
    }
    entries.sort_by_key(|e| e.tag);

    // IFD on a word boundary, followed by the out-of-line payloads.
    if pos % 2 == 1 {
        out.write_all(&[0]).map_err(io)?;
        pos += 1;
    }
    let ifd_offset = pos;
    let ifd_len = 2 + entries.len() as u64 * 12 + 4;
    let mut extra_pos = ifd_offset + ifd_len;
    let mut ifd = Vec::with_capacity(ifd_len as usize);
    let mut extra = Vec::new();
    ifd.extend_from_slice(&(entries.len() as u16).to_le_bytes());
    for e in &entries {
        ifd.extend_from_slice(&e.tag.to_le_bytes());
        ifd.extend_from_slice(&e.kind.to_le_bytes());
        ifd.extend_from_slice(&e.count.to_le_bytes());
        if e.payload.len() <= 4 {
            let mut inline = [0u8; 4];
            inline[..e.payload.len()].copy_from_slice(&e.payload);
            ifd.extend_from_slice(&inline);
        } else {
            ifd.extend_from_slice(&u32::try_from(extra_pos).map_err(|_| too_big())?.to_le_bytes());
            extra.extend_from_slice(&e.payload);
            extra_pos += e.payload.len() as u64;
            if extra_pos % 2 == 1 {
                extra.push(0);
                extra_pos += 1;
            }
        }
    }
    ifd.extend_from_slice(&0u32.to_le_bytes());
    out.write_all(&ifd).map_err(io)?;
    out.write_all(&extra).map_err(io)?;

    out.seek(SeekFrom::Start(4)).map_err(io)?;
    out.write_all(&u32::try_from(ifd_offset).map_err(|_| too_big())?.to_le_bytes()).map_err(io)?;
    out.flush().map_err(io)?;
    Ok(())
}

fn too_big() -> Error {
    Error::InvalidParameter("raster too large for a classic (non-Big) TIFF".into())
}

fn format_nodata(nd: f64) -> String {
    if nd.fract() == 0.0 && nd.abs() < 1e15 {
        format!("{}", nd as i64)
    } else {
        format!("{nd}")
    }
}
