//! Inspection pipeline for thermal infrared orthomosaics of photovoltaic sites.
//!
//! The crate turns a georeferenced temperature raster into tables, panels,
//! defect detections and a three-letter site health rating with power and
//! revenue loss estimates. Stages mirror the processing DAG:
//!
//! ```text
//! raster  -> preprocess -> detect (tables, panels, hotspots, classes)
//!         -> geometry (filter, merge) -> analytics (rating, losses) -> artifacts
//! ```
//!
//! [`pipeline::run_inspection`] drives the whole chain; every stage is also
//! usable on its own.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod config;
pub mod crs;
pub mod detect;
pub mod error;
pub mod geojson_io;
pub mod geometry;
pub mod pipeline;
pub mod preprocess;
pub mod raster;
pub mod synth;

pub use error::{Error, Result};
