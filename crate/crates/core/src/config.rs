//! Inspection run configuration: one TOML document holding every tunable.
//!
//! Relative paths are resolved against the directory of the config file.
//! The resolved config, with all defaults filled in, is what gets echoed
//! into the run manifest and hashed.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::{EconomicsConfig, LossModel, RatingConfig, SiteMetadata};
use crate::detect::DetectParams;
use crate::preprocess::NormalizationParams;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    /// Thermal orthomosaic, one band of temperatures in °C.
    pub ir: PathBuf,
    /// Optional aligned RGB orthomosaic, shown by the review server only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rgb: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TilingParams {
    pub tile_size: usize,
    pub overlap: f64,
}

impl Default for TilingParams {
    fn default() -> Self {
        Self { tile_size: 1024, overlap: 0.25 }
    }
}

/// Where detections come from: the built-in detectors or a GeoJSON file of
/// external predictions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum DetectorSelection {
    #[default]
    Baseline,
    Import(PathBuf),
}

impl fmt::Display for DetectorSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorSelection::Baseline => f.write_str("baseline"),
            DetectorSelection::Import(p) => write!(f, "import:{}", p.display()),
        }
    }
}

impl FromStr for DetectorSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "baseline" {
            return Ok(DetectorSelection::Baseline);
        }
        match s.strip_prefix("import:") {
            Some(p) if !p.trim().is_empty() => Ok(DetectorSelection::Import(PathBuf::from(p.trim()))),
            _ => Err(Error::InvalidConfig(format!("detector must be \"baseline\" or \"import:<path>\", got {s:?}"))),
        }
    }
}

impl Serialize for DetectorSelection {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DetectorSelection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_worker_count() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InspectionConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_worker_count")]
    pub worker_count: usize,
    #[serde(default)]
    pub detector: DetectorSelection,
    pub inputs: InputPaths,
    pub site: SiteMetadata,
    #[serde(default)]
    pub normalization: NormalizationParams,
    #[serde(default)]
    pub tiling: TilingParams,
    #[serde(default)]
    pub detect: DetectParams,
    #[serde(default)]
    pub loss: LossModel,
    #[serde(default)]
    pub economics: EconomicsConfig,
    #[serde(default)]
    pub rating: RatingConfig,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl InspectionConfig {
    /// Parses TOML text; relative paths stay relative.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Reads, parses and resolves a config file. Does not validate.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        self.output_dir = resolve(base, &self.output_dir);
        self.inputs.ir = resolve(base, &self.inputs.ir);
        if let Some(rgb) = &self.inputs.rgb {
            self.inputs.rgb = Some(resolve(base, rgb));
        }
        if let DetectorSelection::Import(p) = &self.detector {
            self.detector = DetectorSelection::Import(resolve(base, p));
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.site.validate()?;
        self.normalization.validate()?;
        self.detect.validate()?;
        self.loss.validate()?;
        self.economics.validate()?;
        self.rating.validate()?;
        if self.tiling.tile_size < 16 {
            return Err(Error::InvalidConfig(format!("tiling.tile_size must be >= 16, got {}", self.tiling.tile_size)));
        }
        if !(0.0..0.9).contains(&self.tiling.overlap) {
            return Err(Error::InvalidConfig(format!("tiling.overlap must lie in [0, 0.9), got {}", self.tiling.overlap)));
        }
        if self.worker_count == 0 {
            return Err(Error::InvalidConfig("worker_count must be >= 1".into()));
        }
        let mut files = vec![("inputs.ir", &self.inputs.ir)];
        if let Some(rgb) = &self.inputs.rgb {
            files.push(("inputs.rgb", rgb));
        }
        if let DetectorSelection::Import(p) = &self.detector {
            files.push(("detector import", p));
        }
        for (what, p) in files {
            if !p.is_file() {
                return Err(Error::InvalidConfig(format!("{what}: file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Lowercase hex SHA-256 of the canonical JSON echo of this config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
