use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("TIFF decoding error: {0}")]
    Tiff(#[from] tiff::TiffError),

    #[error("{0}: raster has no affine geotransform (ModelPixelScale/ModelTiepoint or ModelTransformation)")]
    MissingGeotransform(PathBuf),

    #[error("unsupported sample format: {0}")]
    UnsupportedSampleFormat(String),

    #[error("band {band} does not exist (raster has {bands} band(s))")]
    MissingBand { band: usize, bands: usize },

    #[error(
        "raster CRS EPSG:{0} is geographic; reproject the orthomosaic to a projected (metric) CRS first"
    )]
    GeographicCrs(u32),

    #[error("unknown or unsupported CRS: {0}")]
    UnknownCrs(String),

    #[error("invalid geotransform: {0}")]
    InvalidTransform(String),

    #[error("pixel window {0:?} lies fully outside the raster")]
    WindowOutOfBounds(crate::raster::PixelWindow),

    #[error("raster has no valid (non-nodata) pixels")]
    AllNodata,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed GeoJSON: {0}")]
    GeoJson(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("projection error: {0}")]
    Projection(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}
