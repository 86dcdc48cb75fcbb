use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{OrientedRect, Polygon, Suppressible};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DefectClass {
    Hotspot,
    MultiHotspot,
    DiodeBypass,
    PanelOffline,
    StringOutage,
    TrackerMisalignment,
}

impl DefectClass {
    pub const ALL: [DefectClass; 6] = [
        DefectClass::Hotspot,
        DefectClass::MultiHotspot,
        DefectClass::DiodeBypass,
        DefectClass::PanelOffline,
        DefectClass::StringOutage,
        DefectClass::TrackerMisalignment,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DefectClass::Hotspot => "Hotspot",
            DefectClass::MultiHotspot => "MultiHotspot",
            DefectClass::DiodeBypass => "DiodeBypass",
            DefectClass::PanelOffline => "PanelOffline",
            DefectClass::StringOutage => "StringOutage",
            DefectClass::TrackerMisalignment => "TrackerMisalignment",
        }
    }

    /// Prefix used in detection ids.
    pub fn code(self) -> &'static str {
        match self {
            DefectClass::Hotspot => "HS",
            DefectClass::MultiHotspot => "MH",
            DefectClass::DiodeBypass => "DB",
            DefectClass::PanelOffline => "PO",
            DefectClass::StringOutage => "SO",
            DefectClass::TrackerMisalignment => "TM",
        }
    }
}

impl fmt::Display for DefectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DefectClass {
    type Err = Error;

    /// Case-insensitive; `_`, `-` and spaces are ignored ("multi_hotspot" works).
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| !matches!(c, '_' | '-' | ' ')).flat_map(char::to_lowercase).collect();
        DefectClass::ALL
            .into_iter()
            .find(|c| c.as_str().to_lowercase() == key)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown defect class {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    S1,
    S2,
    S3,
    S4,
    S5,
}

impl Severity {
    pub const ALL: [Severity; 5] = [Severity::S1, Severity::S2, Severity::S3, Severity::S4, Severity::S5];

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::S1 => "S1",
            Severity::S2 => "S2",
            Severity::S3 => "S3",
            Severity::S4 => "S4",
            Severity::S5 => "S5",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Severity::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown severity {s:?}")))
    }
}

/// Lower edges of S2..S5 in °C. Anything below the first edge is S1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeverityBands(pub [f64; 4]);

impl Default for SeverityBands {
    fn default() -> Self {
        SeverityBands([5.0, 8.0, 11.0, 15.0])
    }
}

impl SeverityBands {
    /// The outer edges are fixed at 5 and 15 °C; the interior ones must increase.
    pub fn validate(&self) -> Result<()> {
        let e = self.0;
        if e[0] != 5.0 || e[3] != 15.0 {
            return Err(Error::InvalidConfig(format!("severity edges must start at 5 and end at 15 °C, got {e:?}")));
        }
        if !e.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(format!("severity edges must increase strictly, got {e:?}")));
        }
        Ok(())
    }

    /// Banded lookup; negative differentials are S1.
    pub fn classify(&self, delta_t: f64) -> Severity {
        let idx = self.0.iter().filter(|&&edge| delta_t >= edge).count();
        Severity::ALL[idx]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    #[default]
    Pending,
    Accepted,
    Rejected,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pending => "pending",
            Verdict::Accepted => "accepted",
            Verdict::Rejected => "rejected",
        }
    }

    /// Counts toward the site rating.
    pub fn is_active(self) -> bool {
        self != Verdict::Rejected
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pending" => Ok(Verdict::Pending),
            "accepted" => Ok(Verdict::Accepted),
            "rejected" => Ok(Verdict::Rejected),
            _ => Err(Error::InvalidParameter(format!("unknown verdict {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    #[default]
    Baseline,
    Imported,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Baseline => "baseline",
            Source::Imported => "imported",
        }
    }
}

impl FromStr for Source {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "baseline" => Ok(Source::Baseline),
            "imported" => Ok(Source::Imported),
            _ => Err(Error::InvalidParameter(format!("unknown detection source {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub id: String,
    pub rect: OrientedRect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub id: String,
    pub table_id: String,
    /// Index along the table's height axis.
    pub row: usize,
    /// Index along the table's width axis.
    pub col: usize,
    pub rect: OrientedRect,
}

/// Temperatures inside one panel footprint, and their deviation from the site
/// baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelStats {
    pub median_c: f64,
    pub mean_c: f64,
    pub max_c: f64,
    pub dev_median: f64,
    pub dev_mean: f64,
    pub dev_max: f64,
    pub valid_pixel_count: usize,
}

impl PanelStats {
    pub fn with_baseline(mut self, baseline: f64) -> Self {
        self.dev_median = self.median_c - baseline;
        self.dev_mean = self.mean_c - baseline;
        self.dev_max = self.max_c - baseline;
        self
    }
}

/// One hot grid cell inside a panel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    /// (row, col) in the panel grid; rows run along the panel height.
    pub cell: (usize, usize),
    pub cell_max_c: f64,
    /// Cell maximum minus panel median.
    pub delta_t: f64,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub id: String,
    pub class: DefectClass,
    pub geometry: Polygon,
    pub delta_t: Option<f64>,
    pub severity: Option<Severity>,
    pub confidence: f64,
    pub panel_ids: Vec<String>,
    pub source: Source,
    pub verdict: Verdict,
    #[serde(default)]
    pub hotspots: Vec<Hotspot>,
}

impl Suppressible for Detection {
    fn polygon(&self) -> &Polygon {
        &self.geometry
    }
    fn class_key(&self) -> &str {
        self.class.as_str()
    }
    fn confidence(&self) -> f64 {
        self.confidence
    }
    fn tie_key(&self) -> &str {
        &self.id
    }
}
