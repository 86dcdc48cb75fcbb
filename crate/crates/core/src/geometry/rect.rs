use serde::{Deserialize, Serialize};

use super::{Point, Polygon};

/// Rectangle with `width` measured along `angle` (degrees counter-clockwise
/// from east) and `height` along the perpendicular.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedRect {
    pub center: Point,
    pub width: f64,
    pub height: f64,
    pub angle: f64,
}

impl OrientedRect {
    pub fn new(center: Point, width: f64, height: f64, angle: f64) -> Self {
        Self { center, width, height, angle }
    }

    /// Unit vectors along the width and height axes.
    pub fn axes(&self) -> (Point, Point) {
        let (s, c) = self.angle.to_radians().sin_cos();
        ([c, s], [-s, c])
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }

    /// Corners in counter-clockwise order, starting at the (-w/2, -h/2) corner.
    pub fn corners(&self) -> [Point; 4] {
        let (u, v) = self.axes();
        let (hw, hh) = (self.width / 2.0, self.height / 2.0);
        let at = |a: f64, b: f64| [self.center[0] + a * u[0] + b * v[0], self.center[1] + a * u[1] + b * v[1]];
        [at(-hw, -hh), at(hw, -hh), at(hw, hh), at(-hw, hh)]
    }

    /// Point in rectangle-local coordinates: (along width, along height).
    pub fn to_local(&self, p: Point) -> (f64, f64) {
        let (u, v) = self.axes();
        let d = [p[0] - self.center[0], p[1] - self.center[1]];
        (d[0] * u[0] + d[1] * u[1], d[0] * v[0] + d[1] * v[1])
    }

    /// World position of local coordinates (along width, along height).
    pub fn from_local(&self, a: f64, b: f64) -> Point {
        let (u, v) = self.axes();
        [self.center[0] + a * u[0] + b * v[0], self.center[1] + a * u[1] + b * v[1]]
    }

    /// Boundary counts as inside.
    pub fn contains(&self, p: Point) -> bool {
        let (a, b) = self.to_local(p);
        let eps = 1e-9;
        a.abs() <= self.width / 2.0 + eps && b.abs() <= self.height / 2.0 + eps
    }

    /// Shrinks both dimensions by `2 * margin`. `None` when the rectangle
    /// would collapse.
    pub fn inset(&self, margin: f64) -> Option<OrientedRect> {
        if !(margin >= 0.0) {
            return None;
        }
        let (w, h) = (self.width - 2.0 * margin, self.height - 2.0 * margin);
        (w > 0.0 && h > 0.0).then_some(OrientedRect { width: w, height: h, ..*self })
    }

    /// Axis-aligned bounds as (min_x, min_y, max_x, max_y).
    pub fn bounds(&self) -> [f64; 4] {
        let c = self.corners();
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for p in c {
            b[0] = b[0].min(p[0]);
            b[1] = b[1].min(p[1]);
            b[2] = b[2].max(p[0]);
            b[3] = b[3].max(p[1]);
        }
        b
    }

    pub fn to_polygon(&self) -> Polygon {
        Polygon::from_ccw_unchecked(self.corners().to_vec())
    }
}
