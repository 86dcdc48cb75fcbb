use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Detection, Panel, SeverityBands, Source, Verdict};
use crate::geojson_io::{collection_epsg, detection_from_feature, parse_feature_collection, GeoCodec};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedFeature {
    /// Position in the input collection.
    pub index: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImportReport {
    pub accepted: usize,
    pub rejected: Vec<RejectedFeature>,
}

/// Reads externally produced detections from GeoJSON text.
///
/// Every accepted feature becomes an imported, pending detection in the site
/// CRS (`site_epsg`). A `projected_crs` member, when present, must name a
/// known CRS. Features with an unknown class or unusable geometry are skipped
/// and listed in the report. When a feature carries no `panel_ids`, they are
/// filled with the panels whose centers it covers, or else the panel under
/// its centroid.
pub fn import_detections(text: &str, site_epsg: u32, panels: &[Panel], bands: &SeverityBands) -> Result<(Vec<Detection>, ImportReport)> {
    let fc = parse_feature_collection(text)?;
    collection_epsg(&fc)?;
    let codec = GeoCodec::new(site_epsg)?;
    let mut report = ImportReport::default();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (index, f) in fc.features.iter().enumerate() {
        let raw_id = f
            .properties
            .as_ref()
            .and_then(|p| p.get("id"))
            .and_then(|v| v.as_str())
            .map(str::to_string);
        let mut d = match detection_from_feature(f, &codec, bands, &format!("IMP-{:04}", index + 1)) {
            Ok(d) => d,
            Err(e) => {
                report.rejected.push(RejectedFeature { index, id: raw_id, reason: e.to_string() });
                continue;
            }
        };
        if !seen.insert(d.id.clone()) {
            report.rejected.push(RejectedFeature { index, id: Some(d.id), reason: "duplicate id".into() });
            continue;
        }
        d.source = Source::Imported;
        d.verdict = Verdict::Pending;
        if d.panel_ids.is_empty() {
            d.panel_ids = panels.iter().filter(|p| d.geometry.contains(p.rect.center)).map(|p| p.id.clone()).collect();
            if d.panel_ids.is_empty() {
                let c = d.geometry.centroid();
                d.panel_ids = panels.iter().filter(|p| p.rect.contains(c)).map(|p| p.id.clone()).take(1).collect();
            }
        }
        out.push(d);
    }
    report.accepted = out.len();
    Ok((out, report))
}
