use super::{Table, ThresholdMethod};
use crate::geometry::{min_area_rect, OrientedRect, Point};
use crate::raster::ThermalRaster;

const OTSU_BINS: usize = 256;

fn bin_of(v: f32) -> usize {
    ((v.clamp(0.0, 1.0) as f64 * OTSU_BINS as f64) as usize).min(OTSU_BINS - 1)
}

/// Otsu's split of unit-range values into 256 bins. Returns the last
/// background bin, or `None` when no split separates anything (e.g. a
/// constant image).
pub fn otsu_threshold(values: impl Iterator<Item = f32>) -> Option<usize> {
    let mut hist = [0u64; OTSU_BINS];
    for v in values {
        hist[bin_of(v)] += 1;
    }
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return None;
    }
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &h)| i as f64 * h as f64).sum();
    let (mut w0, mut sum0) = (0u64, 0.0);
    let mut best: Option<(f64, usize)> = None;
    for (k, &h) in hist.iter().enumerate().take(OTSU_BINS - 1) {
        w0 += h;
        sum0 += k as f64 * h as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let m0 = sum0 / w0 as f64;
        let m1 = (sum_all - sum0) / w1 as f64;
        let between = w0 as f64 * w1 as f64 * (m0 - m1) * (m0 - m1);
        if best.is_none_or(|(b, _)| between > b) {
            best = Some((between, k));
        }
    }
    best.filter(|(b, _)| *b > 0.0).map(|(_, k)| k)
}

#[derive(Clone, Copy)]
struct Run {
    row: usize,
    start: usize,
    /// Exclusive.
    end: usize,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // smaller root wins so labels do not depend on merge order
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// Foreground runs of each row, then 8-connected components over runs.
fn components(raster: &ThermalRaster, is_fg: impl Fn(f32) -> bool) -> Vec<Vec<Run>> {
    let mut runs: Vec<Run> = Vec::new();
    let mut parent: Vec<usize> = Vec::new();
    let mut prev_row: std::ops::Range<usize> = 0..0;
    for row in 0..raster.height {
        let base = row * raster.width;
        let row_start = runs.len();
        let mut col = 0;
        while col < raster.width {
            let fg = |c: usize| raster.valid[base + c] && is_fg(raster.values[base + c]);
            if !fg(col) {
                col += 1;
                continue;
            }
            let start = col;
            while col < raster.width && fg(col) {
                col += 1;
            }
            let id = runs.len();
            runs.push(Run { row, start, end: col });
            parent.push(id);
            for j in prev_row.clone() {
                let p = runs[j];
                // diagonal neighbours touch when the ranges are within one pixel
                if p.start <= col && p.end >= start {
                    union(&mut parent, id, j);
                }
            }
        }
        prev_row = row_start..runs.len();
    }
    let mut groups: Vec<Vec<Run>> = Vec::new();
    let mut slot = vec![usize::MAX; runs.len()];
    for (i, run) in runs.iter().enumerate() {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(*run);
    }
    groups
}

/// Tables as the minimum-area rectangles of warm connected regions.
///
/// `ortho_norm` is the ortho after percentile stretch (values in [0, 1]).
/// Components smaller than `min_area_m2` are dropped. Output is ordered by
/// area (largest first), then by center northing (north first), then easting.
pub fn detect_tables(ortho_norm: &ThermalRaster, min_area_m2: f64, method: ThresholdMethod) -> Vec<OrientedRect> {
    let groups = match method {
        ThresholdMethod::Otsu => match otsu_threshold(ortho_norm.valid_values()) {
            Some(k) => components(ortho_norm, |v| bin_of(v) > k),
            None => Vec::new(),
        },
        ThresholdMethod::Fixed(t) => components(ortho_norm, |v| v as f64 >= t),
    };
    let t = &ortho_norm.transform;
    let pixel_area = t.pixel_area();
    let mut rects: Vec<OrientedRect> = groups
        .into_iter()
        .filter(|runs| runs.iter().map(|r| r.end - r.start).sum::<usize>() as f64 * pixel_area >= min_area_m2)
        .filter_map(|runs| {
            let mut pts: Vec<Point> = Vec::with_capacity(runs.len() * 4);
            for r in &runs {
                for (c, rr) in [(r.start, r.row), (r.end, r.row), (r.start, r.row + 1), (r.end, r.row + 1)] {
                    let (x, y) = t.pixel_to_world(c as f64, rr as f64);
                    pts.push([x, y]);
                }
            }
            min_area_rect(&pts).ok()
        })
        .collect();
    rects.sort_by(|a, b| {
        b.area()
            .total_cmp(&a.area())
            .then(b.center[1].total_cmp(&a.center[1]))
            .then(a.center[0].total_cmp(&b.center[0]))
    });
    rects
}

/// Names tables "T0001", "T0002", ... in the given order.
pub fn assign_table_ids(rects: Vec<OrientedRect>) -> Vec<Table> {
    rects.into_iter().enumerate().map(|(i, rect)| Table { id: format!("T{:04}", i + 1), rect }).collect()
}
