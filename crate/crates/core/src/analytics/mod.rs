//! Site rating algebra, capacity-based loss estimates and fleet roll-ups.

mod fleet;
mod loss;
mod rating;
mod report;

pub use fleet::{aggregate_fleet, write_fleet_csv, FleetSummary};
pub use loss::{defective_capacity, detection_loss_mw, power_and_revenue_loss, EconomicsConfig, LossModel};
pub use rating::{
    equipment_letter, equipment_letter_for_apm, operating_letter, operational_ratio, rate_site, temperature_letter, Letter,
    Rating, RatingConfig, TemperatureCuts,
};
pub use report::{build_report, ReportInputs, SiteHealthReport, ESTIMATION_BASIS};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModuleType {
    PolyCrystalline,
    ThinFilm,
    Mono,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MountType {
    GroundFixed,
    Tracker,
    Rooftop,
    Canopy,
    Mixed,
}

impl MountType {
    pub fn as_str(self) -> &'static str {
        match self {
            MountType::GroundFixed => "ground-fixed",
            MountType::Tracker => "tracker",
            MountType::Rooftop => "rooftop",
            MountType::Canopy => "canopy",
            MountType::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteMetadata {
    pub site_id: String,
    pub capacity_mw_dc: f64,
    pub module_wattage_w: f64,
    pub module_type: ModuleType,
    pub mount_type: MountType,
    pub commission_year: i32,
    pub state: String,
    /// (lat, lon) in degrees.
    pub location: [f64; 2],
}

impl SiteMetadata {
    pub fn validate(&self) -> Result<()> {
        if self.site_id.trim().is_empty() {
            return Err(Error::InvalidConfig("site_id must not be empty".into()));
        }
        if !(self.capacity_mw_dc > 0.0 && self.capacity_mw_dc.is_finite()) {
            return Err(Error::InvalidConfig(format!("capacity_mw_dc must be > 0, got {}", self.capacity_mw_dc)));
        }
        if !(self.module_wattage_w > 0.0 && self.module_wattage_w.is_finite()) {
            return Err(Error::InvalidConfig(format!("module_wattage_w must be > 0, got {}", self.module_wattage_w)));
        }
        let [lat, lon] = self.location;
        if !((-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)) {
            return Err(Error::InvalidConfig(format!("location {:?} is not a valid (lat, lon)", self.location)));
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) fn test_site(capacity_mw_dc: f64) -> SiteMetadata {
    SiteMetadata {
        site_id: "site".into(),
        capacity_mw_dc,
        module_wattage_w: 400.0,
        module_type: ModuleType::Mono,
        mount_type: MountType::GroundFixed,
        commission_year: 2018,
        state: "TX".into(),
        location: [31.6, -99.0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metadata_validation() {
        let mut m = test_site(1.0);
        m.validate().unwrap();
        m.capacity_mw_dc = 0.0;
        assert!(m.validate().is_err());
        let mut m = test_site(1.0);
        m.module_wattage_w = -1.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn enums_use_kebab_case() {
        assert_eq!(serde_json::to_string(&ModuleType::PolyCrystalline).unwrap(), "\"poly-crystalline\"");
        assert_eq!(serde_json::to_string(&MountType::GroundFixed).unwrap(), "\"ground-fixed\"");
        let m: MountType = serde_json::from_str("\"tracker\"").unwrap();
        assert_eq!(m.as_str(), "tracker");
    }
}
