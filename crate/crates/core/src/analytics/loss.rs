use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SiteMetadata;
use crate::detect::{DefectClass, Detection};
use crate::{Error, Result};

/// Fraction of a module's nameplate power lost to each defect class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossModel {
    pub hotspot: f64,
    pub multi_hotspot: f64,
    pub diode_bypass: f64,
    pub panel_offline: f64,
    /// Applied to every member panel of the string.
    pub string_outage: f64,
    pub tracker_misalignment: f64,
}

impl Default for LossModel {
    fn default() -> Self {
        Self {
            hotspot: 0.33,
            multi_hotspot: 0.66,
            diode_bypass: 0.33,
            panel_offline: 1.0,
            string_outage: 1.0,
            tracker_misalignment: 0.10,
        }
    }
}

impl LossModel {
    pub fn fraction(&self, class: DefectClass) -> f64 {
        match class {
            DefectClass::Hotspot => self.hotspot,
            DefectClass::MultiHotspot => self.multi_hotspot,
            DefectClass::DiodeBypass => self.diode_bypass,
            DefectClass::PanelOffline => self.panel_offline,
            DefectClass::StringOutage => self.string_outage,
            DefectClass::TrackerMisalignment => self.tracker_misalignment,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for class in DefectClass::ALL {
            let f = self.fraction(class);
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidConfig(format!("loss fraction for {class} must be in [0, 1], got {f}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconomicsConfig {
    pub capacity_factor: f64,
    pub energy_price_usd_per_mwh: f64,
    pub horizon_years: f64,
}

impl Default for EconomicsConfig {
    fn default() -> Self {
        Self { capacity_factor: 0.25, energy_price_usd_per_mwh: 30.0, horizon_years: 1.0 }
    }
}

impl EconomicsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.capacity_factor > 0.0 && self.capacity_factor <= 1.0) {
            return Err(Error::InvalidConfig(format!("capacity_factor must be in (0, 1], got {}", self.capacity_factor)));
        }
        if !(self.energy_price_usd_per_mwh > 0.0 && self.energy_price_usd_per_mwh.is_finite()) {
            return Err(Error::InvalidConfig("energy_price_usd_per_mwh must be > 0".into()));
        }
        if !(self.horizon_years > 0.0 && self.horizon_years.is_finite()) {
            return Err(Error::InvalidConfig("horizon_years must be > 0".into()));
        }
        Ok(())
    }
}

/// Capacity of defective modules in MW. Each panel counts once, at the
/// largest loss fraction among the detections touching it. A detection
/// without panel ids stands in for a single module of its own.
pub fn defective_capacity<'a>(detections: impl IntoIterator<Item = &'a Detection>, meta: &SiteMetadata, loss: &LossModel) -> f64 {
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut orphans: BTreeMap<&str, f64> = BTreeMap::new();
    for d in detections {
        let f = loss.fraction(d.class);
        if d.panel_ids.is_empty() {
            let e = orphans.entry(d.id.as_str()).or_insert(0.0);
            *e = e.max(f);
        }
        for id in &d.panel_ids {
            let e = worst.entry(id.as_str()).or_insert(0.0);
            *e = e.max(f);
        }
    }
    let sum: f64 = worst.values().chain(orphans.values()).map(|f| f * meta.module_wattage_w).sum();
    sum / 1e6
}

/// Loss attributed to a single detection, ignoring overlap with others.
pub fn detection_loss_mw(d: &Detection, meta: &SiteMetadata, loss: &LossModel) -> f64 {
    loss.fraction(d.class) * meta.module_wattage_w * d.panel_ids.len().max(1) as f64 / 1e6
}

/// Returns (power loss MW DC, revenue loss USD over the horizon).
pub fn power_and_revenue_loss(c_defect_mw: f64, econ: &EconomicsConfig) -> (f64, f64) {
    let revenue = c_defect_mw * econ.capacity_factor * 8760.0 * econ.energy_price_usd_per_mwh * econ.horizon_years;
    (c_defect_mw, revenue)
}
