//! Hand-built results directories for unit tests.

use std::path::Path;

use pvinspect_core::analytics::{build_report, EconomicsConfig, LossModel, ModuleType, MountType, RatingConfig, ReportInputs, SiteMetadata};
use pvinspect_core::detect::{DefectClass, Detection, SeverityBands, Source, Verdict};
use pvinspect_core::geojson_io::{detections_to_geojson, write_collection, write_json, GeoCodec};
use pvinspect_core::geometry::OrientedRect;
use pvinspect_core::pipeline;

pub fn hotspot(id: &str, delta_t: f64) -> Detection {
    Detection {
        id: id.into(),
        class: DefectClass::Hotspot,
        geometry: OrientedRect::new([500_100.0, 3_500_050.0], 1.0, 2.0, 0.0).to_polygon(),
        delta_t: Some(delta_t),
        severity: Some(SeverityBands::default().classify(delta_t)),
        confidence: 0.9,
        panel_ids: vec![format!("P-{id}")],
        source: Source::Baseline,
        verdict: Verdict::Pending,
        hotspots: vec![],
    }
}

/// Writes `report.json` and `detections.geojson` for a site of `capacity` MW.
pub fn write_results(dir: &Path, capacity: f64, dets: &[Detection]) {
    let site = SiteMetadata {
        site_id: "unit".into(),
        capacity_mw_dc: capacity,
        module_wattage_w: 400.0,
        module_type: ModuleType::Mono,
        mount_type: MountType::GroundFixed,
        commission_year: 2020,
        state: "TX".into(),
        location: [31.6, -99.0],
    };
    let report = build_report(&ReportInputs {
        site: &site,
        loss: &LossModel::default(),
        economics: &EconomicsConfig::default(),
        rating: &RatingConfig::default(),
        detections: dets,
        site_baseline_c: Some(35.0),
        panels_total: 2500,
        panels_inspectable: 2500,
    })
    .unwrap();
    write_json(&report, &dir.join(pipeline::REPORT_FILE)).unwrap();
    let codec = GeoCodec::new(32614).unwrap();
    write_collection(&detections_to_geojson(dets, &codec).unwrap(), &dir.join(pipeline::DETECTIONS_FILE)).unwrap();
}
