//! Oriented-rectangle and polygon algebra in world meters.
//!
//! Everything here is pure and works in the projected CRS of the site, so
//! results from different tiles can be compared directly.

mod angles;
mod hull;
mod nms;
mod polygon;
mod rect;

pub use angles::{angle_distance, circular_mean, snap_panel_angles, wrap_angle};
pub use hull::{convex_hull, min_area_rect};
pub use nms::{merge_detections, Suppressible};
pub use polygon::{inset, polygon_iou, Polygon};
pub use rect::OrientedRect;

/// World coordinate pair (x east, y north), meters.
pub type Point = [f64; 2];

#[inline]
pub(crate) fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Shoelace signed area, positive for counter-clockwise rings. Computed
/// relative to the first vertex so projected coordinates keep their precision.
pub(crate) fn signed_area(ring: &[Point]) -> f64 {
    let Some(&o) = ring.first() else { return 0.0 };
    let mut s = 0.0;
    for w in ring.windows(2).skip(1) {
        s += cross(o, w[0], w[1]);
    }
    s / 2.0
}
