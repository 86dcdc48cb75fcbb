use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{DefectClass, DetectParams, Detection, Hotspot, Panel, PanelStats, Source, StripeExcess, Table, Verdict};
use crate::geometry::{angle_distance, circular_mean, min_area_rect, snap_panel_angles, Point};

/// Everything measured on one inspectable panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelObservation {
    pub panel: Panel,
    /// Deviations are against the site baseline.
    pub stats: PanelStats,
    pub hotspots: Vec<Hotspot>,
    pub stripe: Option<StripeExcess>,
}

/// Maps how far a measurement clears its threshold onto [0.5, 1).
pub fn confidence_from_excess(excess: f64, scale: f64) -> f64 {
    let e = excess.max(0.0);
    (0.5 + 0.5 * e / (e + scale.max(f64::MIN_POSITIVE))).clamp(0.5, 1.0)
}

fn uniformly_elevated(o: &PanelObservation, p: &DetectParams) -> bool {
    o.stats.dev_median >= p.offline_delta_c && o.stats.max_c - o.stats.median_c < p.uniformity_c
}

fn detection(id: String, class: DefectClass, geometry: crate::geometry::Polygon, delta_t: Option<f64>, confidence: f64, panel_ids: Vec<String>, p: &DetectParams) -> Detection {
    Detection {
        id,
        class,
        geometry,
        delta_t,
        severity: delta_t.map(|d| p.severity_edges.classify(d)),
        confidence,
        panel_ids,
        source: Source::Baseline,
        verdict: Verdict::Pending,
        hotspots: Vec::new(),
    }
}

/// Panel-level defects of one table, at most one class per panel.
///
/// Rules, first match wins: membership in a row run of at least
/// `string_min_run` uniformly elevated neighbours (one StringOutage for the
/// run), a uniformly elevated panel (PanelOffline), one warm third of the
/// panel (DiodeBypass), two or more hot cells (MultiHotspot), one hot cell
/// (Hotspot). `delta_t` is the defect temperature minus `baseline`.
pub fn classify_table(observations: &[PanelObservation], baseline: f64, p: &DetectParams) -> Vec<Detection> {
    let mut rows: BTreeMap<(&str, usize), Vec<&PanelObservation>> = BTreeMap::new();
    for o in observations {
        rows.entry((o.panel.table_id.as_str(), o.panel.row)).or_default().push(o);
    }
    let mut out = Vec::new();
    let mut in_string: BTreeSet<&str> = BTreeSet::new();
    for row in rows.values_mut() {
        row.sort_by_key(|o| o.panel.col);
        let mut i = 0;
        while i < row.len() {
            if !uniformly_elevated(row[i], p) {
                i += 1;
                continue;
            }
            let mut j = i + 1;
            while j < row.len() && row[j].panel.col == row[j - 1].panel.col + 1 && uniformly_elevated(row[j], p) {
                j += 1;
            }
            let run = &row[i..j];
            if run.len() >= p.string_min_run {
                let corners: Vec<Point> = run.iter().flat_map(|o| o.panel.rect.corners()).collect();
                let Ok(rect) = min_area_rect(&corners) else {
                    i = j;
                    continue;
                };
                let dev = run.iter().map(|o| o.stats.dev_median).fold(f64::NEG_INFINITY, f64::max);
                let weakest = run.iter().map(|o| o.stats.dev_median).fold(f64::INFINITY, f64::min);
                out.push(detection(
                    format!("SO-{}", run[0].panel.id),
                    DefectClass::StringOutage,
                    rect.to_polygon(),
                    Some(dev),
                    confidence_from_excess(weakest - p.offline_delta_c, p.offline_delta_c),
                    run.iter().map(|o| o.panel.id.clone()).collect(),
                    p,
                ));
                in_string.extend(run.iter().map(|o| o.panel.id.as_str()));
            }
            i = j;
        }
    }
    for row in rows.values() {
        for o in row {
            if in_string.contains(o.panel.id.as_str()) {
                continue;
            }
            if let Some(d) = classify_panel(o, baseline, p) {
                out.push(d);
            }
        }
    }
    out
}

/// Single-panel rules (everything except string outages).
fn classify_panel(o: &PanelObservation, baseline: f64, p: &DetectParams) -> Option<Detection> {
    let geom = || o.panel.rect.to_polygon();
    let ids = || vec![o.panel.id.clone()];
    if uniformly_elevated(o, p) {
        let conf = confidence_from_excess(o.stats.dev_median - p.offline_delta_c, p.offline_delta_c);
        return Some(detection(format!("PO-{}", o.panel.id), DefectClass::PanelOffline, geom(), Some(o.stats.dev_median), conf, ids(), p));
    }
    if let Some(s) = o.stripe.filter(|s| s.excess >= p.diode_delta_c) {
        let conf = confidence_from_excess(s.excess - p.diode_delta_c, p.diode_delta_c);
        let dt = s.stripe_median_c - baseline;
        return Some(detection(format!("DB-{}", o.panel.id), DefectClass::DiodeBypass, geom(), Some(dt), conf, ids(), p));
    }
    if o.hotspots.is_empty() {
        return None;
    }
    let class = if o.hotspots.len() >= 2 { DefectClass::MultiHotspot } else { DefectClass::Hotspot };
    let hottest = o.hotspots.iter().map(|h| h.cell_max_c).fold(f64::NEG_INFINITY, f64::max);
    let strongest = o.hotspots.iter().map(|h| h.delta_t).fold(f64::NEG_INFINITY, f64::max);
    let conf = confidence_from_excess(strongest - p.hotspot_delta_c, p.hotspot_delta_c);
    let mut d = detection(format!("{}-{}", class.code(), o.panel.id), class, geom(), Some(hottest - baseline), conf, ids(), p);
    d.hotspots = o.hotspots.clone();
    Some(d)
}

/// Tables whose orientation departs from the site's dominant orientation.
///
/// Each table's angle is first refined to the circular mean of its panels'
/// angles (period 90°); the site orientation is the circular mean of those
/// refined angles. A table whose residual exceeds `misalign_deg` yields one
/// detection covering the table and all of its panels, without a
/// temperature differential.
pub fn detect_misalignment(tables: &[Table], panels: &[Panel], p: &DetectParams) -> Vec<Detection> {
    let mut by_table: BTreeMap<&str, Vec<crate::geometry::OrientedRect>> = BTreeMap::new();
    let mut ids: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for panel in panels {
        by_table.entry(panel.table_id.as_str()).or_default().push(panel.rect);
        ids.entry(panel.table_id.as_str()).or_default().push(panel.id.clone());
    }
    let refined: Vec<(&Table, f64)> = tables
        .iter()
        .filter_map(|t| {
            let rects = by_table.get(t.id.as_str())?;
            Some((t, snap_panel_angles(rects, &t.rect, true).0.angle))
        })
        .collect();
    let angles: Vec<f64> = refined.iter().map(|(_, a)| *a).collect();
    let Some(site) = circular_mean(&angles, 90.0) else { return Vec::new() };
    refined
        .into_iter()
        .filter_map(|(t, a)| {
            let residual = angle_distance(a, site, 90.0);
            (residual > p.misalign_deg).then(|| {
                detection(
                    format!("TM-{}", t.id),
                    DefectClass::TrackerMisalignment,
                    t.rect.to_polygon(),
                    None,
                    confidence_from_excess(residual - p.misalign_deg, p.misalign_deg),
                    ids[t.id.as_str()].clone(),
                    p,
                )
            })
        })
        .collect()
}
