//! Orchestration of a full inspection run.
//!
//! Stages run in a fixed order: ingest, ortho statistics, clip and stretch,
//! table detection, tile planning and gating, per-tile normalization, panel
//! grids and statistics, defect detection (or import), off-structure filter,
//! cross-tile merge, analytics, artifacts. Tile and panel work runs on a
//! bounded rayon pool; every reduction is sequential and ordered, so outputs
//! do not depend on the worker count.
//!
//! Each stage is a public function, and [`run_inspection`] is just their
//! composition.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use geojson::FeatureCollection;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{build_report, ReportInputs, SiteHealthReport};
use crate::config::{DetectorSelection, InspectionConfig};
use crate::crs::format_epsg;
use crate::detect::{
    assign_table_ids, classify_table, detect_hotspots, detect_misalignment, detect_tables, filter_off_structure,
    fit_panel_grid, import_detections, raw_panel_stats, site_baseline, stripe_excess, DetectParams, Detection,
    ImportReport, Panel, PanelObservation, PanelStats, Table,
};
use crate::geojson_io::{detections_to_geojson, panels_to_geojson, tables_to_geojson, write_collection, write_json, GeoCodec};
use crate::geometry::{merge_detections, polygon_iou, Polygon};
use crate::preprocess::{clip_and_stretch, histogram_equalize, ortho_statistics, plan_tiles, tile_normalize, NormalizationParams, TilePlan};
use crate::raster::{load_raster, GeoTransform, PixelWindow, ThermalRaster};
use crate::{Error, Result};

pub const TABLES_FILE: &str = "tables.geojson";
pub const PANELS_FILE: &str = "panels.geojson";
pub const DETECTIONS_FILE: &str = "detections.geojson";
pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Ingest,
    OrthoStats,
    Stretch,
    Tables,
    TilePlan,
    Normalize,
    Panels,
    Detect,
    Filter,
    Merge,
    Analytics,
    Artifacts,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::OrthoStats => "ortho_stats",
            Stage::Stretch => "stretch",
            Stage::Tables => "tables",
            Stage::TilePlan => "tile_plan",
            Stage::Normalize => "normalize",
            Stage::Panels => "panels",
            Stage::Detect => "detect",
            Stage::Filter => "filter",
            Stage::Merge => "merge",
            Stage::Analytics => "analytics",
            Stage::Artifacts => "artifacts",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A gated tile and what the normalization chain saw in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileRecord {
    /// Position in the full tile plan.
    pub index: usize,
    pub window: PixelWindow,
    pub valid_pixels: usize,
    /// Mean of the equalized tile; `None` when the tile was all nodata.
    pub equalized_mean: Option<f64>,
    /// Panels whose statistics were taken in this tile.
    pub panels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterInfo {
    pub path: PathBuf,
    pub width: usize,
    pub height: usize,
    pub crs: String,
    pub transform: GeoTransform,
    pub valid_pixels: usize,
}

/// Self-describing record of a run: config echo, inputs, counts and timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: InspectionConfig,
    pub config_sha256: String,
    pub raster: Option<RasterInfo>,
    /// Stages that finished, in order.
    pub stages: Vec<Stage>,
    pub counts: BTreeMap<String, usize>,
    pub timings_ms: BTreeMap<String, f64>,
    /// Clip percentiles in °C.
    pub stretch_range_c: Option<[f64; 2]>,
    pub site_baseline_c: Option<f64>,
    pub tiles: Vec<TileRecord>,
    pub import_report: Option<ImportReport>,
    pub artifacts: Vec<String>,
}

impl Manifest {
    fn new(config: &InspectionConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            config_sha256: config.hash(),
            raster: None,
            stages: Vec::new(),
            counts: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
            stretch_range_c: None,
            site_baseline_c: None,
            tiles: Vec::new(),
            import_report: None,
            artifacts: Vec::new(),
        }
    }

    fn count(&mut self, key: &str, n: usize) {
        self.counts.insert(key.to_string(), n);
    }
}

/// A stage failure, carrying the manifest as far as the run got.
#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub source: Error,
    pub manifest: Box<Manifest>,
}

impl PipelineError {
    /// Bad configuration as opposed to a failure while running.
    pub fn is_validation(&self) -> bool {
        self.stage == Stage::Config
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {} failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for PipelineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

pub struct InspectionResult {
    pub tables: Vec<Table>,
    pub panels: Vec<Panel>,
    /// Deviations against the site baseline, for inspectable panels.
    pub panel_stats: BTreeMap<String, PanelStats>,
    pub detections: Vec<Detection>,
    pub report: SiteHealthReport,
    pub manifest: Manifest,
    pub tables_geojson: FeatureCollection,
    pub panels_geojson: FeatureCollection,
    pub detections_geojson: FeatureCollection,
}

// ---------------------------------------------------------------------------
// Stages

/// Ortho percentiles and the stretched [0, 1] ortho.
pub fn stretch_ortho(raster: &ThermalRaster, params: &NormalizationParams) -> Result<((f64, f64), ThermalRaster)> {
    let (lo, hi) = ortho_statistics(raster, params)?;
    Ok(((lo, hi), clip_and_stretch(raster, lo, hi)?))
}

pub fn find_tables(ortho_norm: &ThermalRaster, params: &DetectParams) -> Vec<Table> {
    assign_table_ids(detect_tables(ortho_norm, params.min_table_area_m2, params.table_threshold))
}

fn window_polygon(t: &GeoTransform, w: &PixelWindow) -> Polygon {
    let (c0, r0) = (w.col_off as f64, w.row_off as f64);
    let (c1, r1) = (c0 + w.width as f64, r0 + w.height as f64);
    let pts = [(c0, r0), (c0, r1), (c1, r1), (c1, r0)].map(|(c, r)| {
        let (x, y) = t.pixel_to_world(c, r);
        [x, y]
    });
    Polygon::new(pts.to_vec()).expect("a tile window is a proper rectangle")
}

/// Indices into `plan.windows` of tiles overlapping at least one table.
pub fn gate_tiles(plan: &TilePlan, tables: &[Table], transform: &GeoTransform) -> Vec<usize> {
    let table_polys: Vec<(Polygon, [f64; 4])> = tables.iter().map(|t| (t.rect.to_polygon(), t.rect.bounds())).collect();
    plan.windows
        .iter()
        .enumerate()
        .filter(|(_, w)| {
            let tile = window_polygon(transform, w);
            let tb = tile.bounds();
            table_polys.iter().any(|(p, b)| b[0] < tb[2] && tb[0] < b[2] && b[1] < tb[3] && tb[1] < b[3] && polygon_iou(&tile, p) > 0.0)
        })
        .map(|(i, _)| i)
        .collect()
}

/// Tile-level min-max rescale and histogram equalization of each gated tile.
pub fn normalize_tiles(ortho_norm: &ThermalRaster, plan: &TilePlan, gated: &[usize], bins: usize) -> Result<Vec<TileRecord>> {
    gated
        .par_iter()
        .map(|&i| {
            let window = plan.windows[i];
            let tile = ortho_norm.window(window)?;
            let valid_pixels = tile.valid_count();
            let equalized_mean = match tile_normalize(&tile) {
                Ok(t) => {
                    let eq = histogram_equalize(&t, bins);
                    Some(eq.valid_values().map(f64::from).sum::<f64>() / valid_pixels as f64)
                }
                Err(Error::AllNodata) => None,
                Err(e) => return Err(e),
            };
            Ok(TileRecord { index: i, window, valid_pixels, equalized_mean, panels: 0 })
        })
        .collect()
}

/// Panel grids for every table; tables too small for one module are skipped
/// and counted.
pub fn fit_panels(tables: &[Table], params: &DetectParams) -> (Vec<Panel>, usize) {
    let mut failures = 0;
    let mut panels = Vec::new();
    for t in tables {
        match fit_panel_grid(t, &params.panel) {
            Ok(p) => panels.extend(p),
            Err(_) => failures += 1,
        }
    }
    (panels, failures)
}

fn footprint_inside(t: &GeoTransform, w: &PixelWindow, panel: &Panel) -> bool {
    panel.rect.corners().iter().all(|p| match t.world_to_pixel(p[0], p[1]) {
        Ok((c, r)) => {
            c >= w.col_off as f64 && c <= (w.col_off + w.width) as f64 && r >= w.row_off as f64 && r <= (w.row_off + w.height) as f64
        }
        Err(_) => false,
    })
}

/// For each panel, the position in `tiles` of the first tile that contains
/// its whole footprint, if any.
pub fn home_tiles(panels: &[Panel], tiles: &[TileRecord], transform: &GeoTransform) -> Vec<Option<usize>> {
    panels.par_iter().map(|p| tiles.iter().position(|t| footprint_inside(transform, &t.window, p))).collect()
}

/// Raw measurements of one panel before the site baseline is known.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelMeasurement {
    /// Deviations against zero.
    pub stats: PanelStats,
    pub hotspots: Vec<crate::detect::Hotspot>,
    pub stripe: Option<crate::detect::StripeExcess>,
}

fn measure(raster: &ThermalRaster, panel: &Panel, params: &DetectParams, with_defects: bool) -> Option<PanelMeasurement> {
    let stats = raw_panel_stats(raster, &panel.rect, params.min_valid_pixels)?;
    let (hotspots, stripe) = if with_defects {
        (detect_hotspots(raster, &panel.rect, stats.median_c, params), stripe_excess(raster, &panel.rect, params.margin_m))
    } else {
        (Vec::new(), None)
    };
    Some(PanelMeasurement { stats, hotspots, stripe })
}

/// Measures every panel, grouped by home tile so each group reads one
/// window of the ortho. Panels without a home tile read the full ortho.
/// `None` marks an uninspectable panel.
pub fn measure_panels(
    raster: &ThermalRaster,
    panels: &[Panel],
    tiles: &[TileRecord],
    homes: &[Option<usize>],
    params: &DetectParams,
    with_defects: bool,
) -> Result<Vec<Option<PanelMeasurement>>> {
    let mut groups: BTreeMap<Option<usize>, Vec<usize>> = BTreeMap::new();
    for (i, h) in homes.iter().enumerate() {
        groups.entry(*h).or_default().push(i);
    }
    let groups: Vec<(Option<usize>, Vec<usize>)> = groups.into_iter().collect();
    let measured: Vec<Vec<(usize, Option<PanelMeasurement>)>> = groups
        .par_iter()
        .map(|(home, members)| {
            let window;
            let source = match home {
                Some(t) => {
                    window = raster.window(tiles[*t].window)?;
                    &window
                }
                None => raster,
            };
            Ok(members.iter().map(|&i| (i, measure(source, &panels[i], params, with_defects))).collect())
        })
        .collect::<Result<_>>()?;
    let mut out = vec![None; panels.len()];
    for (i, m) in measured.into_iter().flatten() {
        out[i] = m;
    }
    Ok(out)
}

/// Built-in detectors over measured panels: per-table classification plus
/// table misalignment.
pub fn baseline_detections(
    tables: &[Table],
    panels: &[Panel],
    measurements: &[Option<PanelMeasurement>],
    baseline: f64,
    params: &DetectParams,
) -> Vec<Detection> {
    let mut by_table: BTreeMap<&str, Vec<PanelObservation>> = BTreeMap::new();
    for (panel, m) in panels.iter().zip(measurements) {
        if let Some(m) = m {
            by_table.entry(panel.table_id.as_str()).or_default().push(PanelObservation {
                panel: panel.clone(),
                stats: m.stats.with_baseline(baseline),
                hotspots: m.hotspots.clone(),
                stripe: m.stripe,
            });
        }
    }
    let per_table: Vec<Vec<Detection>> = tables
        .par_iter()
        .map(|t| by_table.get(t.id.as_str()).map(|obs| classify_table(obs, baseline, params)).unwrap_or_default())
        .collect();
    let mut out: Vec<Detection> = per_table.into_iter().flatten().collect();
    out.extend(detect_misalignment(tables, panels, params));
    out
}

/// Class-aware NMS across tiles; survivors sorted by id.
pub fn merge_and_sort(dets: &[Detection], nms_iou: f64) -> Vec<Detection> {
    let mut merged = merge_detections(dets, nms_iou);
    merged.sort_by(|a, b| a.id.cmp(&b.id));
    merged
}

// ---------------------------------------------------------------------------
// Driver

struct Run {
    manifest: Manifest,
    clock: Instant,
}

impl Run {
    fn step<T>(&mut self, stage: Stage, f: impl FnOnce(&mut Manifest) -> Result<T>) -> std::result::Result<T, PipelineError> {
        let start = Instant::now();
        match f(&mut self.manifest) {
            Ok(v) => {
                let ms = start.elapsed().as_secs_f64() * 1e3;
                tracing::debug!(stage = stage.as_str(), ms, "stage done");
                self.manifest.stages.push(stage);
                *self.manifest.timings_ms.entry(stage.as_str().to_string()).or_default() += ms;
                Ok(v)
            }
            Err(source) => {
                tracing::warn!(stage = stage.as_str(), error = %source, "stage failed");
                Err(PipelineError { stage, source, manifest: Box::new(self.manifest.clone()) })
            }
        }
    }
}

/// Runs every stage and writes the artifacts into `config.output_dir`.
pub fn run_inspection(config: &InspectionConfig) -> std::result::Result<InspectionResult, PipelineError> {
    let mut run = Run { manifest: Manifest::new(config), clock: Instant::now() };
    run.step(Stage::Config, |_| config.validate())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count)
        .build()
        .map_err(|e| PipelineError { stage: Stage::Config, source: Error::InvalidConfig(e.to_string()), manifest: Box::new(run.manifest.clone()) })?;
    pool.install(|| execute(config, &mut run))
}

fn execute(config: &InspectionConfig, run: &mut Run) -> std::result::Result<InspectionResult, PipelineError> {
    let params = &config.detect;
    let (raster, codec) = run.step(Stage::Ingest, |m| {
        let r = load_raster(&config.inputs.ir, 0)?;
        let codec = GeoCodec::new(r.transform.epsg)?;
        m.raster = Some(RasterInfo {
            path: config.inputs.ir.clone(),
            width: r.width,
            height: r.height,
            crs: format_epsg(r.transform.epsg),
            transform: r.transform,
            valid_pixels: r.valid_count(),
        });
        Ok((r, codec))
    })?;

    // A blank (all nodata) ortho yields an empty site rather than an error.
    let range = run.step(Stage::OrthoStats, |m| match ortho_statistics(&raster, &config.normalization) {
        Ok(r) => {
            m.stretch_range_c = Some([r.0, r.1]);
            Ok(Some(r))
        }
        Err(Error::AllNodata) => Ok(None),
        Err(e) => Err(e),
    })?;
    let ortho_norm = run.step(Stage::Stretch, |_| {
        let (lo, hi) = range.unwrap_or((0.0, 0.0));
        clip_and_stretch(&raster, lo, hi)
    })?;
    let tables = run.step(Stage::Tables, |m| {
        let t = if range.is_some() { find_tables(&ortho_norm, params) } else { Vec::new() };
        m.count("tables", t.len());
        Ok(t)
    })?;
    let (plan, gated) = run.step(Stage::TilePlan, |m| {
        let plan = plan_tiles(raster.width, raster.height, config.tiling.tile_size, config.tiling.overlap)?;
        let gated = gate_tiles(&plan, &tables, &raster.transform);
        m.count("tiles_planned", plan.windows.len());
        m.count("tiles_gated", gated.len());
        m.count("tiles_skipped_no_table", plan.windows.len() - gated.len());
        Ok((plan, gated))
    })?;
    let mut tiles = run.step(Stage::Normalize, |m| {
        let t = normalize_tiles(&ortho_norm, &plan, &gated, config.normalization.equalization_bins)?;
        m.count("tiles_all_nodata", t.iter().filter(|r| r.equalized_mean.is_none()).count());
        Ok(t)
    })?;
    drop(ortho_norm);

    let with_defects = config.detector == DetectorSelection::Baseline;
    let (panels, measurements, baseline) = run.step(Stage::Panels, |m| {
        let (panels, failures) = fit_panels(&tables, params);
        let homes = home_tiles(&panels, &tiles, &raster.transform);
        for h in homes.iter().flatten() {
            tiles[*h].panels += 1;
        }
        let measurements = measure_panels(&raster, &panels, &tiles, &homes, params, with_defects)?;
        let stats: Vec<PanelStats> = measurements.iter().flatten().map(|x| x.stats).collect();
        let baseline = if stats.is_empty() { None } else { Some(site_baseline(&stats)?) };
        m.count("panels", panels.len());
        m.count("panels_inspectable", stats.len());
        m.count("panels_outside_tiles", homes.iter().filter(|h| h.is_none()).count());
        m.count("table_fit_failures", failures);
        m.count("tiles_passed_to_detectors", tiles.iter().filter(|t| t.panels > 0).count());
        m.site_baseline_c = baseline;
        Ok((panels, measurements, baseline))
    })?;
    run.manifest.tiles = tiles;

    let raw = run.step(Stage::Detect, |m| {
        let dets = match &config.detector {
            DetectorSelection::Baseline => match baseline {
                Some(b) => baseline_detections(&tables, &panels, &measurements, b, params),
                None => Vec::new(),
            },
            DetectorSelection::Import(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let (dets, report) = import_detections(&text, codec.epsg(), &panels, &params.severity_edges)?;
                m.count("imported_rejected", report.rejected.len());
                m.import_report = Some(report);
                dets
            }
        };
        m.count("detections_raw", dets.len());
        Ok(dets)
    })?;
    let on_structure = run.step(Stage::Filter, |m| {
        let kept = filter_off_structure(raw, &panels, &tables);
        m.count("detections_on_structure", kept.len());
        Ok(kept)
    })?;
    let detections = run.step(Stage::Merge, |m| {
        let merged = merge_and_sort(&on_structure, params.nms_iou);
        m.count("detections", merged.len());
        m.count("detections_merged_away", on_structure.len() - merged.len());
        Ok(merged)
    })?;

    let panel_stats: BTreeMap<String, PanelStats> = panels
        .iter()
        .zip(&measurements)
        .filter_map(|(p, m)| Some((p.id.clone(), m.as_ref()?.stats.with_baseline(baseline?))))
        .collect();
    let report = run.step(Stage::Analytics, |_| {
        build_report(&ReportInputs {
            site: &config.site,
            loss: &config.loss,
            economics: &config.economics,
            rating: &config.rating,
            detections: &detections,
            site_baseline_c: baseline,
            panels_total: panels.len(),
            panels_inspectable: panel_stats.len(),
        })
    })?;

    let (tables_geojson, panels_geojson, detections_geojson) = run.step(Stage::Artifacts, |_| {
        Ok((
            tables_to_geojson(&tables, &codec)?,
            panels_to_geojson(&panels, &panel_stats, &codec)?,
            detections_to_geojson(&detections, &codec)?,
        ))
    })?;
    let out_dir = config.output_dir.clone();
    run.step(Stage::Artifacts, |m| {
        write_artifacts(&out_dir, &tables_geojson, &panels_geojson, &detections_geojson, &report)?;
        m.artifacts = [TABLES_FILE, PANELS_FILE, DETECTIONS_FILE, REPORT_FILE, MANIFEST_FILE].map(String::from).to_vec();
        Ok(())
    })?;
    run.manifest.stages.dedup();
    run.manifest.timings_ms.insert("total".into(), run.clock.elapsed().as_secs_f64() * 1e3);
    let manifest = run.manifest.clone();
    run.step(Stage::Artifacts, |_| write_json(&manifest, &out_dir.join(MANIFEST_FILE)))?;

    Ok(InspectionResult {
        tables,
        panels,
        panel_stats,
        detections,
        report,
        manifest,
        tables_geojson,
        panels_geojson,
        detections_geojson,
    })
}

fn write_artifacts(
    dir: &Path,
    tables: &FeatureCollection,
    panels: &FeatureCollection,
    detections: &FeatureCollection,
    report: &SiteHealthReport,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_collection(tables, &dir.join(TABLES_FILE))?;
    write_collection(panels, &dir.join(PANELS_FILE))?;
    write_collection(detections, &dir.join(DETECTIONS_FILE))?;
    write_json(report, &dir.join(REPORT_FILE))
}

/// Reads `report.json` from a results directory.
pub fn read_report(results_dir: &Path) -> Result<SiteHealthReport> {
    let path = results_dir.join(REPORT_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads `manifest.json` from a results directory.
pub fn read_manifest(results_dir: &Path) -> Result<Manifest> {
    let path = results_dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}
