//! Baseline detectors: tables from the normalized ortho, panel grids inside
//! tables, per-panel statistics, grid-cell hotspots and the defect taxonomy.
//! External predictions enter through [`import_detections`].

mod classify;
mod filter;
mod hotspots;
mod import;
mod panels;
mod stats;
mod tables;
mod types;

pub use classify::{classify_table, confidence_from_excess, detect_misalignment, PanelObservation};
pub use filter::filter_off_structure;
pub use hotspots::{cell_maxima, detect_hotspots, stripe_excess, StripeExcess};
pub use import::{import_detections, ImportReport, RejectedFeature};
pub use panels::fit_panel_grid;
pub use stats::{compute_panel_stats, median, panel_values, raw_panel_stats, site_baseline};
pub use tables::{assign_table_ids, detect_tables, otsu_threshold};
pub use types::{
    DefectClass, Detection, Hotspot, Panel, PanelStats, Severity, SeverityBands, Source, Table, Verdict,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How the normalized ortho is split into table and background pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMethod {
    Otsu,
    /// Pixels at or above this normalized value are foreground.
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ThresholdRepr {
    Value(f64),
    Name(String),
}

impl Serialize for ThresholdMethod {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ThresholdMethod::Otsu => ThresholdRepr::Name("otsu".into()),
            ThresholdMethod::Fixed(v) => ThresholdRepr::Value(*v),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ThresholdMethod {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match ThresholdRepr::deserialize(d)? {
            ThresholdRepr::Value(v) => Ok(ThresholdMethod::Fixed(v)),
            ThresholdRepr::Name(n) if n.eq_ignore_ascii_case("otsu") => Ok(ThresholdMethod::Otsu),
            ThresholdRepr::Name(n) => Err(serde::de::Error::custom(format!("unknown threshold method {n:?}"))),
        }
    }
}

/// Nominal module footprint and spacing inside a table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelLayout {
    /// Along the table's width axis.
    pub width_m: f64,
    /// Along the table's height axis.
    pub height_m: f64,
    pub gap_m: f64,
}

impl Default for PanelLayout {
    fn default() -> Self {
        Self { width_m: 1.0, height_m: 2.0, gap_m: 0.04 }
    }
}

/// Every threshold the baseline detectors use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectParams {
    pub table_threshold: ThresholdMethod,
    pub min_table_area_m2: f64,
    pub panel: PanelLayout,
    /// Panels with fewer valid pixels are uninspectable.
    pub min_valid_pixels: usize,
    /// Hotspot grid as (rows along the panel height, cols along its width).
    pub hotspot_grid: [usize; 2],
    pub hotspot_delta_c: f64,
    /// Inset applied to a panel before gridding, meters.
    pub margin_m: f64,
    pub severity_edges: SeverityBands,
    pub offline_delta_c: f64,
    /// Largest max - median spread still considered uniform heating.
    pub uniformity_c: f64,
    pub diode_delta_c: f64,
    pub string_min_run: usize,
    pub misalign_deg: f64,
    pub nms_iou: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            table_threshold: ThresholdMethod::Otsu,
            min_table_area_m2: 4.0,
            panel: PanelLayout::default(),
            min_valid_pixels: 16,
            hotspot_grid: [4, 4],
            hotspot_delta_c: 5.0,
            margin_m: 0.1,
            severity_edges: SeverityBands::default(),
            offline_delta_c: 4.0,
            uniformity_c: 3.0,
            diode_delta_c: 4.0,
            string_min_run: 4,
            misalign_deg: 8.0,
            nms_iou: 0.5,
        }
    }
}

impl DetectParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if let ThresholdMethod::Fixed(t) = self.table_threshold {
            if !(0.0..=1.0).contains(&t) {
                return bad(format!("table_threshold {t} must lie in [0, 1]"));
            }
        }
        let p = &self.panel;
        if !(p.width_m > 0.0 && p.height_m > 0.0 && p.gap_m >= 0.0) {
            return bad(format!("panel layout {p:?} must have positive dims and a non-negative gap"));
        }
        if !(self.min_table_area_m2 >= 0.0) {
            return bad("min_table_area_m2 must be >= 0".into());
        }
        if self.hotspot_grid[0] == 0 || self.hotspot_grid[1] == 0 {
            return bad("hotspot_grid needs at least one row and one column".into());
        }
        for (name, v) in [
            ("hotspot_delta_c", self.hotspot_delta_c),
            ("offline_delta_c", self.offline_delta_c),
            ("uniformity_c", self.uniformity_c),
            ("diode_delta_c", self.diode_delta_c),
            ("misalign_deg", self.misalign_deg),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be a positive number, got {v}"));
            }
        }
        if !(self.margin_m >= 0.0) {
            return bad("margin_m must be >= 0".into());
        }
        if self.string_min_run < 2 {
            return bad("string_min_run must be >= 2".into());
        }
        if !(self.nms_iou > 0.0 && self.nms_iou <= 1.0) {
            return bad(format!("nms_iou {} must lie in (0, 1]", self.nms_iou));
        }
        self.severity_edges.validate()
    }
}
