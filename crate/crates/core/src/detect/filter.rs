use super::{DefectClass, Detection, Panel, Source, Table};

/// Drops detections that do not sit on the structure.
///
/// Baseline detections are born on panels, so they only need their centroid
/// inside some table (a two-row table's centroid may fall in the gap between
/// panel rows). Imported detections must have their centroid inside a panel,
/// or inside a table for table-level misalignment.
pub fn filter_off_structure(dets: Vec<Detection>, panels: &[Panel], tables: &[Table]) -> Vec<Detection> {
    dets.into_iter()
        .filter(|d| {
            let c = d.geometry.centroid();
            match d.source {
                Source::Baseline => tables.iter().any(|t| t.rect.contains(c)),
                // table-level findings sit on the table, not on one module
                Source::Imported if d.class == DefectClass::TrackerMisalignment => tables.iter().any(|t| t.rect.contains(c)),
                Source::Imported => panels.iter().any(|p| p.rect.contains(c)),
            }
        })
        .collect()
}
