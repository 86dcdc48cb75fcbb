use super::{cross, OrientedRect, Point};
use crate::{Error, Result};

/// Andrew's monotone chain. Counter-clockwise, collinear points dropped.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.iter().copied().filter(|p| p[0].is_finite() && p[1].is_finite()).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Brings an angle into [-45, 45), swapping the dimensions for each quarter turn.
fn canonical(width: f64, height: f64, angle: f64) -> (f64, f64, f64) {
    let mut a = angle.rem_euclid(180.0);
    let (mut w, mut h) = (width, height);
    if a >= 135.0 {
        a -= 180.0;
    } else if a >= 45.0 {
        a -= 90.0;
        std::mem::swap(&mut w, &mut h);
    }
    (w, h, a)
}

/// Smallest-area rectangle enclosing `points`, by rotating each hull edge onto
/// the x axis. The angle is reported in [-45, 45) with the width measured
/// along it.
pub fn min_area_rect(points: &[Point]) -> Result<OrientedRect> {
    let hull = convex_hull(points);
    if hull.len() < 3 {
        return Err(Error::DegenerateGeometry("min_area_rect needs three non-collinear points".into()));
    }
    // Work relative to the first hull vertex to keep large UTM coordinates precise.
    let o = hull[0];
    let local: Vec<Point> = hull.iter().map(|p| [p[0] - o[0], p[1] - o[1]]).collect();
    let n = local.len();
    let mut best: Option<(f64, OrientedRect)> = None;
    for i in 0..n {
        let a = local[i];
        let b = local[(i + 1) % n];
        let theta = (b[1] - a[1]).atan2(b[0] - a[0]);
        let (s, c) = theta.sin_cos();
        let (mut u0, mut u1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &local {
            let u = p[0] * c + p[1] * s;
            let v = -p[0] * s + p[1] * c;
            u0 = u0.min(u);
            u1 = u1.max(u);
            v0 = v0.min(v);
            v1 = v1.max(v);
        }
        let area = (u1 - u0) * (v1 - v0);
        if best.as_ref().is_none_or(|(ba, _)| area < ba * (1.0 - 1e-12)) {
            let (uc, vc) = ((u0 + u1) / 2.0, (v0 + v1) / 2.0);
            let center = [o[0] + uc * c - vc * s, o[1] + uc * s + vc * c];
            let (w, h, ang) = canonical(u1 - u0, v1 - v0, theta.to_degrees());
            best = Some((area, OrientedRect::new(center, w, h, ang)));
        }
    }
    Ok(best.expect("hull has edges").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_square() {
        let r = min_area_rect(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert!((r.center[0] - 0.5).abs() < 1e-12 && (r.center[1] - 0.5).abs() < 1e-12);
        assert!((r.width - 1.0).abs() < 1e-12 && (r.height - 1.0).abs() < 1e-12);
        assert!(r.angle.abs() < 1e-9);
    }

    #[test]
    fn rotated_rect_is_recovered() {
        for angle in [-44.0, -30.0, -3.5, 0.0, 7.25, 30.0, 44.9] {
            let truth = OrientedRect::new([512_345.0, 3_500_321.0], 10.4, 4.08, angle);
            let r = min_area_rect(&truth.corners()).unwrap();
            assert!((r.angle - angle).abs() < 1e-7, "{angle}: {r:?}");
            assert!((r.width - 10.4).abs() < 1e-7 && (r.height - 4.08).abs() < 1e-7);
            assert!((r.center[0] - truth.center[0]).abs() < 1e-7 && (r.center[1] - truth.center[1]).abs() < 1e-7);
        }
        // a long side at 60 degrees is reported at -30 with the dims swapped
        let r = min_area_rect(&OrientedRect::new([0.0, 0.0], 3.0, 1.0, 60.0).corners()).unwrap();
        assert!((r.angle + 30.0).abs() < 1e-9 && (r.width - 1.0).abs() < 1e-9 && (r.height - 3.0).abs() < 1e-9);
    }

    #[test]
    fn collinear_points_are_rejected() {
        assert!(min_area_rect(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).is_err());
        assert!(min_area_rect(&[[0.0, 0.0], [1.0, 1.0]]).is_err());
    }

    #[test]
    fn beats_a_swept_angle_oracle_and_encloses_all_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let pts: Vec<Point> =
                (0..100).map(|_| [rng.random_range(-10.0..10.0), rng.random_range(-4.0..4.0)]).collect();
            let r = min_area_rect(&pts).unwrap();
            for p in &pts {
                let (a, b) = r.to_local(*p);
                assert!(a.abs() <= r.width / 2.0 + 1e-9 && b.abs() <= r.height / 2.0 + 1e-9);
            }
            for k in 0..360 {
                let t = (k as f64 * 0.5).to_radians();
                let (s, c) = t.sin_cos();
                let us: Vec<f64> = pts.iter().map(|p| p[0] * c + p[1] * s).collect();
                let vs: Vec<f64> = pts.iter().map(|p| -p[0] * s + p[1] * c).collect();
                let span = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
                assert!(r.area() <= span(&us) * span(&vs) + 1e-9);
            }
        }
    }

    #[test]
    fn hull_drops_interior_and_collinear_points() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [2.0, 2.0], [1.0, 1.0], [0.0, 2.0]];
        let h = convex_hull(&pts);
        assert_eq!(h, vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]);
    }
}
