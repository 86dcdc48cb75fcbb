use serde::{Deserialize, Serialize};

use super::stats::{for_each_pixel_in, median};
use super::{DetectParams, Hotspot};
use crate::geometry::OrientedRect;
use crate::raster::ThermalRaster;

/// Maximum valid value per grid cell of the inset panel, row-major over
/// `grid = [rows, cols]`. Rows split the panel height, columns its width.
/// Empty when the margin swallows the panel; `None` for cells without valid
/// pixels.
pub fn cell_maxima(raster: &ThermalRaster, panel: &OrientedRect, grid: [usize; 2], margin_m: f64) -> Vec<Option<f64>> {
    let [rows, cols] = grid;
    let Some(inner) = panel.inset(margin_m) else { return Vec::new() };
    let mut cells: Vec<Option<f64>> = vec![None; rows * cols];
    let t = raster.transform;
    for_each_pixel_in(raster, &inner, |c, r| {
        let Some(v) = raster.get(c, r) else { return };
        let (x, y) = t.pixel_center(c, r);
        let (a, b) = inner.to_local([x, y]);
        let col = (((a / inner.width + 0.5) * cols as f64).floor().max(0.0) as usize).min(cols - 1);
        let row = (((b / inner.height + 0.5) * rows as f64).floor().max(0.0) as usize).min(rows - 1);
        let cell = &mut cells[row * cols + col];
        *cell = Some(cell.map_or(v as f64, |m: f64| m.max(v as f64)));
    });
    cells
}

/// Grid cells whose maximum exceeds the panel median by at least the
/// hotspot threshold.
pub fn detect_hotspots(raster: &ThermalRaster, panel: &OrientedRect, panel_median: f64, params: &DetectParams) -> Vec<Hotspot> {
    let cols = params.hotspot_grid[1];
    cell_maxima(raster, panel, params.hotspot_grid, params.margin_m)
        .into_iter()
        .enumerate()
        .filter_map(|(i, m)| {
            let m = m?;
            let delta_t = m - panel_median;
            (delta_t >= params.hotspot_delta_c).then(|| Hotspot {
                cell: (i / cols, i % cols),
                cell_max_c: m,
                delta_t,
                severity: params.severity_edges.classify(delta_t),
            })
        })
        .collect()
}

/// The warmest of the three long stripes of a panel relative to the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripeExcess {
    /// 0..3 across the short side.
    pub stripe: usize,
    pub stripe_median_c: f64,
    pub others_median_c: f64,
    /// `stripe_median_c - others_median_c`.
    pub excess: f64,
}

/// Splits the inset panel into thirds across its short side (each stripe runs
/// the full length of the panel) and reports the stripe whose median most
/// exceeds the median of the other two. `None` if any stripe has no valid
/// pixels.
pub fn stripe_excess(raster: &ThermalRaster, panel: &OrientedRect, margin_m: f64) -> Option<StripeExcess> {
    let inner = panel.inset(margin_m)?;
    let across_width = inner.width <= inner.height;
    let mut stripes: [Vec<f64>; 3] = Default::default();
    let t = raster.transform;
    for_each_pixel_in(raster, &inner, |c, r| {
        let Some(v) = raster.get(c, r) else { return };
        let (x, y) = t.pixel_center(c, r);
        let (a, b) = inner.to_local([x, y]);
        let f = if across_width { a / inner.width } else { b / inner.height } + 0.5;
        let k = ((f * 3.0).floor().max(0.0) as usize).min(2);
        stripes[k].push(v as f64);
    });
    if stripes.iter().any(|s| s.is_empty()) {
        return None;
    }
    let mut best: Option<StripeExcess> = None;
    for k in 0..3 {
        let mut own = stripes[k].clone();
        let mut others: Vec<f64> = (0..3).filter(|&j| j != k).flat_map(|j| stripes[j].iter().copied()).collect();
        let sm = median(&mut own)?;
        let om = median(&mut others)?;
        let cand = StripeExcess { stripe: k, stripe_median_c: sm, others_median_c: om, excess: sm - om };
        if best.is_none_or(|b| cand.excess > b.excess) {
            best = Some(cand);
        }
    }
    best
}
