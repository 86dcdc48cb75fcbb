use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::MountType;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Letter {
    A,
    B,
    C,
    D,
}

impl Letter {
    pub fn as_char(self) -> char {
        match self {
            Letter::A => 'A',
            Letter::B => 'B',
            Letter::C => 'C',
            Letter::D => 'D',
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Operating, temperature-safety and equipment letters, in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rating {
    pub operating: Letter,
    pub temperature: Letter,
    pub equipment: Letter,
}

impl Rating {
    /// Every letter is A or B.
    pub fn is_good_or_better(&self) -> bool {
        self.operating <= Letter::B && self.temperature <= Letter::B && self.equipment <= Letter::B
    }
}

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.operating, self.temperature, self.equipment)
    }
}

/// (C_total - C_defect) / C_total.
pub fn operational_ratio(c_total_mw: f64, c_defect_mw: f64) -> Result<f64> {
    if !(c_total_mw > 0.0) {
        return Err(Error::InvalidParameter(format!("plant capacity {c_total_mw} MW must be > 0")));
    }
    if !(c_defect_mw >= 0.0) || c_defect_mw > c_total_mw {
        return Err(Error::InvalidParameter(format!(
            "defective capacity {c_defect_mw} MW must lie in [0, {c_total_mw}] MW"
        )));
    }
    Ok((c_total_mw - c_defect_mw) / c_total_mw)
}

/// A at 99.5 % and above, B from 97.5 %, C from 80 %, D below 80 %.
pub fn operating_letter(or_ratio: f64) -> Letter {
    if or_ratio >= 0.995 {
        Letter::A
    } else if or_ratio >= 0.975 {
        Letter::B
    } else if or_ratio >= 0.80 {
        Letter::C
    } else {
        Letter::D
    }
}

/// Upper bounds (exclusive) of the A, B and C temperature bands, in °C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemperatureCuts(pub [f64; 3]);

impl Default for TemperatureCuts {
    fn default() -> Self {
        TemperatureCuts([10.0, 15.0, 20.0])
    }
}

impl TemperatureCuts {
    pub fn validate(&self) -> Result<()> {
        let c = self.0;
        if !(c[0] > 0.0 && c[0] < c[1] && c[1] < c[2]) {
            return Err(Error::InvalidConfig(format!("temperature cuts must be positive and increasing, got {c:?}")));
        }
        Ok(())
    }
}

pub fn temperature_letter(delta_t_max: f64, cuts: &TemperatureCuts) -> Letter {
    let [a, b, c] = cuts.0;
    if delta_t_max < a {
        Letter::A
    } else if delta_t_max < b {
        Letter::B
    } else if delta_t_max < c {
        Letter::C
    } else {
        Letter::D
    }
}

/// Anomalies per MW of capacity, and its letter: A below 13, B below 52,
/// C below 173, D from 173.
pub fn equipment_letter(a_total: usize, c_total_mw: f64) -> Result<(f64, Letter)> {
    if !(c_total_mw > 0.0) {
        return Err(Error::InvalidParameter(format!("plant capacity {c_total_mw} MW must be > 0")));
    }
    let apm = a_total as f64 / c_total_mw;
    Ok((apm, equipment_letter_for_apm(apm)))
}

pub fn equipment_letter_for_apm(apm: f64) -> Letter {
    if apm < 13.0 {
        Letter::A
    } else if apm < 52.0 {
        Letter::B
    } else if apm < 173.0 {
        Letter::C
    } else {
        Letter::D
    }
}

pub fn rate_site(or_ratio: f64, delta_t_max: f64, apm: f64, cuts: &TemperatureCuts) -> Rating {
    Rating {
        operating: operating_letter(or_ratio),
        temperature: temperature_letter(delta_t_max, cuts),
        equipment: equipment_letter_for_apm(apm),
    }
}

/// Rating knobs: the default temperature cuts and optional per-mount overrides.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatingConfig {
    pub temperature_cuts: TemperatureCuts,
    pub temperature_cuts_by_mount: BTreeMap<MountType, TemperatureCuts>,
}

impl RatingConfig {
    pub fn cuts_for(&self, mount: MountType) -> TemperatureCuts {
        self.temperature_cuts_by_mount.get(&mount).copied().unwrap_or(self.temperature_cuts)
    }

    pub fn validate(&self) -> Result<()> {
        self.temperature_cuts.validate()?;
        self.temperature_cuts_by_mount.values().try_for_each(TemperatureCuts::validate)
    }
}
