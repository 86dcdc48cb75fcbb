//! Normalization chain and overlapping tile plan.
//!
//! The chain is: ortho-level percentile clipping and linear stretch, tiling
//! with overlap, tile-level min-max rescale, then histogram equalization.
//! Every step keeps the nodata mask untouched and produces values in [0, 1].

use serde::{Deserialize, Serialize};

use crate::raster::{PixelWindow, ThermalRaster};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizationParams {
    pub lo_percentile: f64,
    pub hi_percentile: f64,
    pub equalization_bins: usize,
}

impl Default for NormalizationParams {
    fn default() -> Self {
        Self { lo_percentile: 0.01, hi_percentile: 0.99, equalization_bins: 256 }
    }
}

impl NormalizationParams {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.lo_percentile, self.hi_percentile);
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            return Err(Error::InvalidConfig(format!("percentiles must satisfy 0 <= lo < hi <= 1, got {lo} / {hi}")));
        }
        if self.equalization_bins < 2 {
            return Err(Error::InvalidConfig("equalization_bins must be >= 2".into()));
        }
        Ok(())
    }
}

/// Linear-interpolated percentile of `values` (reorders the slice).
fn select_percentile(values: &mut [f32], p: f64) -> f64 {
    let n = values.len();
    let rank = p * (n - 1) as f64;
    let i = (rank.floor() as usize).min(n - 1);
    let frac = rank - i as f64;
    let (_, &mut a, upper) = values.select_nth_unstable_by(i, f32::total_cmp);
    let a = a as f64;
    if frac > 0.0 && !upper.is_empty() {
        let b = upper.iter().copied().fold(f32::INFINITY, f32::min) as f64;
        a + frac * (b - a)
    } else {
        a
    }
}

/// Low and high percentiles (°C) over the valid pixels of an orthomosaic.
pub fn ortho_statistics(raster: &ThermalRaster, params: &NormalizationParams) -> Result<(f64, f64)> {
    params.validate()?;
    let mut values: Vec<f32> = raster.valid_values().collect();
    if values.is_empty() {
        return Err(Error::AllNodata);
    }
    let hi = select_percentile(&mut values, params.hi_percentile);
    let lo = select_percentile(&mut values, params.lo_percentile);
    Ok((lo, hi))
}

/// Clamps to [p_lo, p_hi] and rescales to [0, 1]. A degenerate range maps
/// every valid pixel to 0.
pub fn clip_and_stretch(raster: &ThermalRaster, p_lo: f64, p_hi: f64) -> Result<ThermalRaster> {
    if !(p_lo <= p_hi) {
        return Err(Error::InvalidParameter(format!("p_lo {p_lo} > p_hi {p_hi}")));
    }
    let span = p_hi - p_lo;
    let values = raster
        .values
        .iter()
        .zip(&raster.valid)
        .map(|(&v, &ok)| {
            if !ok || span == 0.0 {
                0.0
            } else {
                ((v as f64 - p_lo) / span).clamp(0.0, 1.0) as f32
            }
        })
        .collect();
    Ok(raster.with_values(values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilePlan {
    pub tile_size: usize,
    pub overlap: f64,
    pub stride: usize,
    /// Row-major.
    pub windows: Vec<PixelWindow>,
}

fn axis_offsets(len: usize, tile: usize, stride: usize) -> Vec<usize> {
    if len <= tile {
        return vec![0];
    }
    let mut offsets = Vec::new();
    let mut off = 0;
    loop {
        offsets.push(off);
        if off + tile >= len {
            break;
        }
        off = (off + stride).min(len - tile);
    }
    offsets
}

/// Overlapping windows covering a `width` x `height` image. The last column
/// and row are shifted inward so every window is `tile_size` square when the
/// image is at least that large.
pub fn plan_tiles(width: usize, height: usize, tile_size: usize, overlap: f64) -> Result<TilePlan> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter("image must be at least 1x1".into()));
    }
    if tile_size == 0 || !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidParameter(format!("tile_size {tile_size} / overlap {overlap} out of range")));
    }
    let stride = ((tile_size as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let cols = axis_offsets(width, tile_size, stride);
    let rows = axis_offsets(height, tile_size, stride);
    let mut windows = Vec::with_capacity(cols.len() * rows.len());
    for &r in &rows {
        for &c in &cols {
            windows.push(PixelWindow::new(c, r, tile_size.min(width), tile_size.min(height)));
        }
    }
    Ok(TilePlan { tile_size, overlap, stride, windows })
}

/// Min-max rescale of a tile's valid pixels. `Error::AllNodata` tells the
/// caller to drop the tile.
pub fn tile_normalize(tile: &ThermalRaster) -> Result<ThermalRaster> {
    let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
    for v in tile.valid_values() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        return Err(Error::AllNodata);
    }
    clip_and_stretch(tile, lo as f64, hi as f64)
}

/// Maps each valid pixel to the empirical CDF of its bin over `bins` equal
/// bins on [0, 1].
pub fn histogram_equalize(tile: &ThermalRaster, bins: usize) -> ThermalRaster {
    let bins = bins.max(2);
    let bin_of = |v: f32| ((v.clamp(0.0, 1.0) as f64 * bins as f64) as usize).min(bins - 1);
    let mut hist = vec![0u64; bins];
    let mut n = 0u64;
    for v in tile.valid_values() {
        hist[bin_of(v)] += 1;
        n += 1;
    }
    if n == 0 {
        return tile.with_values(vec![0.0; tile.values.len()]);
    }
    let mut cdf = Vec::with_capacity(bins);
    let mut acc = 0u64;
    for h in hist {
        acc += h;
        cdf.push((acc as f64 / n as f64) as f32);
    }
    let values = tile.values.iter().zip(&tile.valid).map(|(&v, &ok)| if ok { cdf[bin_of(v)] } else { 0.0 }).collect();
    tile.with_values(values)
}
