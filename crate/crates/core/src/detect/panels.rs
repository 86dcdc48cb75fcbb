use super::{Panel, PanelLayout, Table};
use crate::geometry::OrientedRect;
use crate::{Error, Result};

/// Count of panels along one table axis and how far the ratio was from an integer.
fn fit_axis(length: f64, pitch: f64) -> (usize, f64) {
    let ratio = length / pitch;
    let n = ratio.round();
    (n as usize, (ratio - n).abs())
}

/// Lays a regular panel grid over a table.
///
/// Columns follow the table's width axis, rows its height axis. Both module
/// orientations are tried and the one whose counts are closer to whole
/// numbers wins; the pitch is then stretched to span the table exactly and
/// each panel is the pitch minus the gap, centered in its cell.
pub fn fit_panel_grid(table: &Table, layout: &PanelLayout) -> Result<Vec<Panel>> {
    let r = &table.rect;
    let g = layout.gap_m;
    let (c1, e1) = fit_axis(r.width, layout.width_m + g);
    let (r1, f1) = fit_axis(r.height, layout.height_m + g);
    let (c2, e2) = fit_axis(r.width, layout.height_m + g);
    let (r2, f2) = fit_axis(r.height, layout.width_m + g);
    let (cols, rows) = if e2 + f2 < e1 + f1 && c2 >= 1 && r2 >= 1 { (c2, r2) } else { (c1, r1) };
    if cols == 0 || rows == 0 {
        return Err(Error::InvalidParameter(format!(
            "table {} ({:.2} x {:.2} m) holds less than one {}x{} m panel",
            table.id, r.width, r.height, layout.width_m, layout.height_m
        )));
    }
    let (pitch_w, pitch_h) = (r.width / cols as f64, r.height / rows as f64);
    let (pw, ph) = ((pitch_w - g).max(pitch_w * 0.5), (pitch_h - g).max(pitch_h * 0.5));
    let mut panels = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        for col in 0..cols {
            let a = -r.width / 2.0 + (col as f64 + 0.5) * pitch_w;
            let b = -r.height / 2.0 + (row as f64 + 0.5) * pitch_h;
            panels.push(Panel {
                id: format!("{}-R{}-C{:02}", table.id, row, col),
                table_id: table.id.clone(),
                row,
                col,
                rect: OrientedRect::new(r.from_local(a, b), pw, ph, r.angle),
            });
        }
    }
    Ok(panels)
}
