use super::OrientedRect;

/// Wraps `angle` into [-period/2, period/2).
pub fn wrap_angle(angle: f64, period: f64) -> f64 {
    let half = period / 2.0;
    (angle + half).rem_euclid(period) - half
}

/// Smallest absolute difference between two angles modulo `period`.
pub fn angle_distance(a: f64, b: f64, period: f64) -> f64 {
    wrap_angle(a - b, period).abs()
}

/// Circular mean of angles that are only defined modulo `period` degrees.
/// `None` for an empty set or when the angles cancel out.
pub fn circular_mean(angles: &[f64], period: f64) -> Option<f64> {
    let k = std::f64::consts::TAU / period;
    let (mut s, mut c) = (0.0, 0.0);
    for a in angles {
        let (si, ci) = (a * k).sin_cos();
        s += si;
        c += ci;
    }
    if angles.is_empty() || s.hypot(c) < 1e-9 * angles.len() as f64 {
        return None;
    }
    Some(wrap_angle(s.atan2(c) / k, period))
}

/// Aligns every panel with its table.
///
/// With `refine`, the table angle first moves to the circular mean (period
/// 90°) of the panel angles. Each panel is then turned by the smallest
/// rotation that makes it parallel to the table; centers and dimensions are
/// untouched. Returns the (possibly refined) table and the snapped panels.
pub fn snap_panel_angles(panels: &[OrientedRect], table: &OrientedRect, refine: bool) -> (OrientedRect, Vec<OrientedRect>) {
    let mut table = *table;
    if refine {
        let angles: Vec<f64> = panels.iter().map(|p| p.angle).collect();
        if let Some(mean) = circular_mean(&angles, 90.0) {
            table.angle = table.angle + wrap_angle(mean - table.angle, 90.0);
        }
    }
    let snapped = panels
        .iter()
        .map(|p| OrientedRect { angle: wrap_angle(p.angle + wrap_angle(table.angle - p.angle, 90.0), 180.0), ..*p })
        .collect();
    (table, snapped)
}
