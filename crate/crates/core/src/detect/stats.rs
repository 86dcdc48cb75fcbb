use super::PanelStats;
use crate::geometry::OrientedRect;
use crate::raster::ThermalRaster;
use crate::{Error, Result};

/// Calls `f(col, row)` for each in-bounds pixel whose center lies in `rect`.
pub(crate) fn for_each_pixel_in(raster: &ThermalRaster, rect: &OrientedRect, mut f: impl FnMut(usize, usize)) {
    let t = &raster.transform;
    let (mut c0, mut r0, mut c1, mut r1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in rect.corners() {
        let Ok((c, r)) = t.world_to_pixel(p[0], p[1]) else { return };
        c0 = c0.min(c);
        r0 = r0.min(r);
        c1 = c1.max(c);
        r1 = r1.max(r);
    }
    let clamp = |v: f64, hi: usize| v.max(0.0).min(hi as f64) as usize;
    let (c0, c1) = (clamp(c0.floor() - 1.0, raster.width), clamp(c1.ceil() + 1.0, raster.width));
    let (r0, r1) = (clamp(r0.floor() - 1.0, raster.height), clamp(r1.ceil() + 1.0, raster.height));
    for row in r0..r1 {
        for col in c0..c1 {
            let (x, y) = t.pixel_center(col, row);
            if rect.contains([x, y]) {
                f(col, row);
            }
        }
    }
}

/// Valid values at pixel centers inside `rect`, in row-major order.
pub fn panel_values(raster: &ThermalRaster, rect: &OrientedRect) -> Vec<f64> {
    let mut out = Vec::new();
    for_each_pixel_in(raster, rect, |c, r| {
        if let Some(v) = raster.get(c, r) {
            out.push(v as f64);
        }
    });
    out
}

/// Median; the two middle values are averaged for even counts. Reorders the slice.
pub fn median(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let (_, &mut hi, _) = values.select_nth_unstable_by(n / 2, f64::total_cmp);
    if n % 2 == 1 {
        return Some(hi);
    }
    let lo = values[..n / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some((lo + hi) / 2.0)
}

fn stats_of(values: &mut [f64]) -> PanelStats {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let med = median(values).expect("non-empty");
    PanelStats { median_c: med, mean_c: mean, max_c: max, dev_median: med, dev_mean: mean, dev_max: max, valid_pixel_count: n }
        .with_baseline(0.0)
}

/// Panel statistics with deviations against a zero baseline; `None` when the
/// panel has fewer than `min_valid` valid pixels (uninspectable).
pub fn raw_panel_stats(raster: &ThermalRaster, rect: &OrientedRect, min_valid: usize) -> Option<PanelStats> {
    let mut v = panel_values(raster, rect);
    (v.len() >= min_valid.max(1)).then(|| stats_of(&mut v))
}

pub fn compute_panel_stats(raster: &ThermalRaster, rect: &OrientedRect, site_baseline: f64, min_valid: usize) -> Option<PanelStats> {
    raw_panel_stats(raster, rect, min_valid).map(|s| s.with_baseline(site_baseline))
}

/// Median of the per-panel medians.
pub fn site_baseline(stats: &[PanelStats]) -> Result<f64> {
    let mut medians: Vec<f64> = stats.iter().map(|s| s.median_c).collect();
    median(&mut medians).ok_or_else(|| Error::InvalidParameter("no inspectable panels to form a site baseline".into()))
}
