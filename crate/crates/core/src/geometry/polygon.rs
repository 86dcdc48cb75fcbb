use serde::{Deserialize, Serialize};

use super::{cross, signed_area, Point};
use crate::{Error, Result};

/// Simple polygon without holes. The exterior ring is stored counter-clockwise
/// and open (the first vertex is not repeated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Polygon {
    ring: Vec<Point>,
}

impl TryFrom<Vec<Point>> for Polygon {
    type Error = Error;
    fn try_from(v: Vec<Point>) -> Result<Self> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<Point> {
    fn from(p: Polygon) -> Self {
        p.ring
    }
}

impl Polygon {
    /// Validates and normalizes a ring: drops a closing vertex and repeated
    /// vertices, rejects fewer than three vertices, zero area and
    /// self-intersections, and reorients clockwise input.
    pub fn new(mut ring: Vec<Point>) -> Result<Self> {
        if ring.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::DegenerateGeometry("polygon has non-finite coordinates".into()));
        }
        ring.dedup();
        while ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() < 3 {
            return Err(Error::DegenerateGeometry(format!("polygon needs 3 distinct vertices, got {}", ring.len())));
        }
        let area = signed_area(&ring);
        if area.abs() <= 1e-18 {
            return Err(Error::DegenerateGeometry("polygon has zero area".into()));
        }
        if self_intersects(&ring) {
            return Err(Error::DegenerateGeometry("polygon ring self-intersects".into()));
        }
        if area < 0.0 {
            ring.reverse();
        }
        Ok(Self { ring })
    }

    pub(crate) fn from_ccw_unchecked(ring: Vec<Point>) -> Self {
        debug_assert!(signed_area(&ring) > 0.0);
        Self { ring }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.ring
    }

    /// Ring with the first vertex repeated at the end.
    pub fn closed_ring(&self) -> Vec<Point> {
        let mut r = self.ring.clone();
        r.push(self.ring[0]);
        r
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.ring)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point {
        let n = self.ring.len();
        let o = self.ring[0];
        let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let p = [self.ring[i][0] - o[0], self.ring[i][1] - o[1]];
            let q = [self.ring[(i + 1) % n][0] - o[0], self.ring[(i + 1) % n][1] - o[1]];
            let c = p[0] * q[1] - q[0] * p[1];
            a2 += c;
            cx += (p[0] + q[0]) * c;
            cy += (p[1] + q[1]) * c;
        }
        [o[0] + cx / (3.0 * a2), o[1] + cy / (3.0 * a2)]
    }

    /// (min_x, min_y, max_x, max_y)
    pub fn bounds(&self) -> [f64; 4] {
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for p in &self.ring {
            b[0] = b[0].min(p[0]);
            b[1] = b[1].min(p[1]);
            b[2] = b[2].max(p[0]);
            b[3] = b[3].max(p[1]);
        }
        b
    }

    pub fn is_convex(&self) -> bool {
        let n = self.ring.len();
        (0..n).all(|i| cross(self.ring[i], self.ring[(i + 1) % n], self.ring[(i + 2) % n]) >= 0.0)
    }

    /// Even-odd ray cast; points on the boundary count as inside.
    pub fn contains(&self, p: Point) -> bool {
        let n = self.ring.len();
        let scale = {
            let b = self.bounds();
            (b[2] - b[0]).max(b[3] - b[1]).max(1.0)
        };
        let eps = 1e-12 * scale;
        let mut inside = false;
        for i in 0..n {
            let a = self.ring[i];
            let b = self.ring[(i + 1) % n];
            if on_segment(a, b, p, eps) {
                return true;
            }
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Fan triangles from the first vertex, each with its signed area sign.
    fn fan(&self) -> impl Iterator<Item = ([Point; 3], f64)> + '_ {
        let o = self.ring[0];
        self.ring.windows(2).skip(1).filter_map(move |w| {
            let c = cross(o, w[0], w[1]);
            if c == 0.0 {
                None
            } else if c > 0.0 {
                Some(([o, w[0], w[1]], 1.0))
            } else {
                Some(([o, w[1], w[0]], -1.0))
            }
        })
    }
}

fn on_segment(a: Point, b: Point, p: Point, eps: f64) -> bool {
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    if len == 0.0 {
        return (p[0] - a[0]).hypot(p[1] - a[1]) <= eps;
    }
    if (cross(a, b, p) / len).abs() > eps {
        return false;
    }
    let t = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / (len * len);
    (-eps..=1.0 + eps).contains(&t)
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: Point, q: Point, r: Point| {
        cross(p, q, r) == 0.0
            && r[0] >= p[0].min(q[0])
            && r[0] <= p[0].max(q[0])
            && r[1] >= p[1].min(q[1])
            && r[1] <= p[1].max(q[1])
    };
    on(c, d, a) || on(c, d, b) || on(a, b, c) || on(a, b, d)
}

fn self_intersects(ring: &[Point]) -> bool {
    let n = ring.len();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        for j in i + 1..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(a, b, ring[j], ring[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

/// Clips a convex CCW polygon by a convex CCW clip polygon.
fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut out = subject.to_vec();
    let m = clip.len();
    for i in 0..m {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % m]);
        let input = std::mem::take(&mut out);
        let k = input.len();
        for j in 0..k {
            let p = input[j];
            let q = input[(j + 1) % k];
            let cp = cross(a, b, p);
            let cq = cross(a, b, q);
            if cp >= 0.0 {
                out.push(p);
            }
            if (cp >= 0.0) != (cq >= 0.0) {
                let t = cp / (cp - cq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
    }
    out
}

fn intersection_area(a: &Polygon, b: &Polygon) -> f64 {
    let (ba, bb) = (a.bounds(), b.bounds());
    if ba[2] < bb[0] || bb[2] < ba[0] || ba[3] < bb[1] || bb[3] < ba[1] {
        return 0.0;
    }
    if a.is_convex() && b.is_convex() {
        let c = clip_convex(&a.ring, &b.ring);
        return if c.len() < 3 { 0.0 } else { signed_area(&c).max(0.0) };
    }
    // The signed fan triangles of a ring sum to its indicator function, so the
    // pairwise sum of triangle intersections is the area of a ∩ b.
    let mut total = 0.0;
    for (ta, sa) in a.fan() {
        for (tb, sb) in b.fan() {
            let c = clip_convex(&ta, &tb);
            if c.len() >= 3 {
                total += sa * sb * signed_area(&c);
            }
        }
    }
    total.max(0.0)
}

/// Intersection over union, in [0, 1].
pub fn polygon_iou(a: &Polygon, b: &Polygon) -> f64 {
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Moves every edge of a convex polygon inward by `margin`. `None` when the
/// polygon is not convex or when an edge would vanish or flip.
pub fn inset(p: &Polygon, margin: f64) -> Option<Polygon> {
    if !(margin >= 0.0) || !p.is_convex() {
        return None;
    }
    if margin == 0.0 {
        return Some(p.clone());
    }
    let n = p.ring.len();
    // Each edge as a line n·x = c with inward unit normal n.
    let lines: Vec<(Point, f64)> = (0..n)
        .map(|i| {
            let a = p.ring[i];
            let b = p.ring[(i + 1) % n];
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            let nrm = [-(b[1] - a[1]) / len, (b[0] - a[0]) / len];
            (nrm, nrm[0] * a[0] + nrm[1] * a[1] + margin)
        })
        .collect();
    let mut ring = Vec::with_capacity(n);
    for i in 0..n {
        let (n1, c1) = lines[(i + n - 1) % n];
        let (n2, c2) = lines[i];
        let det = n1[0] * n2[1] - n1[1] * n2[0];
        if det.abs() < 1e-15 {
            return None;
        }
        ring.push([(c1 * n2[1] - c2 * n1[1]) / det, (n1[0] * c2 - n2[0] * c1) / det]);
    }
    for i in 0..n {
        let (a, b) = (p.ring[i], p.ring[(i + 1) % n]);
        let (a2, b2) = (ring[i], ring[(i + 1) % n]);
        let dot = (b[0] - a[0]) * (b2[0] - a2[0]) + (b[1] - a[1]) * (b2[1] - a2[1]);
        if dot <= 0.0 {
            return None;
        }
    }
    Polygon::new(ring).ok()
}
