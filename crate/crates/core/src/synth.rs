//! Synthetic site generator: a georeferenced thermal ortho of warm panel
//! tables on cool textured ground, with planted defects of every class and a
//! ground-truth GeoJSON to score detections against.
//!
//! Every random draw comes from a seeded ChaCha stream, and each raster row
//! uses its own stream, so output is identical regardless of thread count.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::analytics::{EconomicsConfig, LossModel, ModuleType, MountType, RatingConfig, SiteMetadata};
use crate::config::{DetectorSelection, InputPaths, InspectionConfig, TilingParams};
use crate::crs::Projector;
use crate::detect::{DefectClass, DetectParams, Detection, SeverityBands, Source, Verdict};
use crate::geojson_io::{detections_to_geojson, write_collection, GeoCodec};
use crate::geometry::{min_area_rect, OrientedRect};
use crate::preprocess::NormalizationParams;
use crate::raster::{write_geotiff, GeoTransform, RasterData, ThermalRaster, TiffLayout, WriteOptions};
use crate::{Error, Result};

pub const NODATA: f32 = -9999.0;
pub const GROUND_C: f64 = 22.0;
pub const ROAD_C: f64 = 26.5;
pub const PANEL_C: f64 = 35.0;
pub const INVERTER_C: f64 = 45.0;
const GAP_DROP_C: f64 = 1.5;

pub const PANEL_COLS: usize = 10;
pub const PANEL_ROWS: usize = 2;
pub const MODULE_W_M: f64 = 1.0;
pub const MODULE_H_M: f64 = 2.0;
pub const GAP_M: f64 = 0.04;
pub const MODULE_WATTAGE_W: f64 = 400.0;

const PITCH_ALONG_M: f64 = 16.0;
const PITCH_ACROSS_M: f64 = 8.0;
const STRING_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    /// Raster is `size` x `size` pixels.
    pub size: usize,
    pub gsd: f64,
    pub tables_along: usize,
    pub tables_across: usize,
    pub epsg: u32,
    /// World coordinates of the raster's top-left corner.
    pub origin: [f64; 2],
}

impl SynthParams {
    /// About 4096² pixels and 2000 panels.
    pub fn standard(seed: u64) -> Self {
        Self { seed, size: 4096, gsd: 0.05, tables_along: 10, tables_across: 10, epsg: 32614, origin: [500_000.0, 3_500_000.0] }
    }

    /// 8192² pixels and 8000 panels.
    pub fn large(seed: u64) -> Self {
        Self { size: 8192, tables_along: 20, tables_across: 20, ..Self::standard(seed) }
    }

    pub fn panel_count(&self) -> usize {
        self.tables_along * self.tables_across * PANEL_COLS * PANEL_ROWS
    }

    pub fn capacity_mw_dc(&self) -> f64 {
        self.panel_count() as f64 * MODULE_WATTAGE_W / 1e6
    }
}

/// What a defect does to one panel's temperature field.
#[derive(Debug, Clone, PartialEq)]
enum PanelMod {
    Normal,
    Uniform(f64),
    /// Third `k` across the short side, raised by the amplitude.
    Stripe(usize, f64),
    /// Panel-local spike centers with their amplitudes.
    Spikes(Vec<([f64; 2], f64)>),
}

#[derive(Debug, Clone)]
struct SynthTable {
    rect: OrientedRect,
    offset: f64,
    panel_offsets: Vec<f64>,
    mods: Vec<PanelMod>,
}

impl SynthTable {
    fn panel_rect(&self, row: usize, col: usize) -> OrientedRect {
        let a = -self.rect.width / 2.0 + (col as f64 + 0.5) * (MODULE_W_M + GAP_M);
        let b = -self.rect.height / 2.0 + (row as f64 + 0.5) * (MODULE_H_M + GAP_M);
        OrientedRect::new(self.rect.from_local(a, b), MODULE_W_M, MODULE_H_M, self.rect.angle)
    }

    /// Temperature at table-local (a, b), or `None` outside the table.
    fn temperature(&self, a: f64, b: f64, noise: f64) -> Option<f64> {
        let (hw, hh) = (self.rect.width / 2.0, self.rect.height / 2.0);
        if a.abs() > hw || b.abs() > hh {
            return None;
        }
        let (pw, ph) = (MODULE_W_M + GAP_M, MODULE_H_M + GAP_M);
        let col = (((a + hw) / pw).floor() as usize).min(PANEL_COLS - 1);
        let row = (((b + hh) / ph).floor() as usize).min(PANEL_ROWS - 1);
        let pa = a + hw - (col as f64 + 0.5) * pw;
        let pb = b + hh - (row as f64 + 0.5) * ph;
        let i = row * PANEL_COLS + col;
        let base = PANEL_C + self.offset + self.panel_offsets[i] + 0.15 * noise;
        if pa.abs() > MODULE_W_M / 2.0 || pb.abs() > MODULE_H_M / 2.0 {
            return Some(base - GAP_DROP_C);
        }
        let extra = match &self.mods[i] {
            PanelMod::Normal => 0.0,
            PanelMod::Uniform(amp) => *amp,
            PanelMod::Stripe(k, amp) => {
                let third = (((pa / MODULE_W_M + 0.5) * 3.0).floor().max(0.0) as usize).min(2);
                if third == *k {
                    *amp
                } else {
                    0.0
                }
            }
            PanelMod::Spikes(spikes) => spikes
                .iter()
                .filter(|(c, _)| (pa - c[0]).hypot(pb - c[1]) <= SPIKE_RADIUS_M)
                .map(|&(_, amp)| amp)
                .fold(0.0, f64::max),
        };
        Some(base + extra)
    }
}

/// Three quarters of a 5 cm pixel: the nearest pixel center always falls inside.
const SPIKE_RADIUS_M: f64 = 0.0375;

/// Center of hotspot grid cell (row, col) on a panel, in panel-local meters,
/// using the default 4x4 grid over the 0.1 m inset.
fn cell_center(row: usize, col: usize) -> [f64; 2] {
    let (w, h) = (MODULE_W_M - 0.2, MODULE_H_M - 0.2);
    [-w / 2.0 + (col as f64 + 0.5) * w / 4.0, -h / 2.0 + (row as f64 + 0.5) * h / 4.0]
}

pub struct SyntheticSite {
    pub params: SynthParams,
    pub raster: ThermalRaster,
    /// Interleaved RGB, same grid as `raster`.
    pub rgb: Vec<u8>,
    pub tables: Vec<OrientedRect>,
    /// Planted defects as detections (verdict pending, confidence 1).
    pub truth: Vec<Detection>,
    pub site: SiteMetadata,
}

/// Amplitude drawn inside a severity band, clear of its edges.
fn amplitude_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo + 0.75..hi - 0.5)
}

fn hotspot_amplitude(rng: &mut ChaCha8Rng) -> f64 {
    // S2, S3 or S4; S5 is reserved for one multi-hotspot cell.
    let [s2, s3, s4, s5] = SeverityBands::default().0;
    let bands = [(s2, s3), (s3, s4), (s4, s5 - 1.0)];
    let (lo, hi) = bands[rng.random_range(0..bands.len())];
    amplitude_in(rng, lo, hi)
}

fn distinct_cells(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    let mut all: Vec<(usize, usize)> = (0..4).flat_map(|r| (0..4).map(move |c| (r, c))).collect();
    all.shuffle(rng);
    all.truncate(n);
    all
}

pub fn generate(params: &SynthParams) -> Result<SyntheticSite> {
    let p = *params;
    let extent = p.size as f64 * p.gsd;
    let layout_w = p.tables_along as f64 * PITCH_ALONG_M;
    let layout_h = p.tables_across as f64 * PITCH_ACROSS_M;
    if layout_w.hypot(layout_h) + 20.0 > extent {
        return Err(Error::InvalidParameter(format!(
            "{}x{} tables do not fit on a {extent:.1} m raster",
            p.tables_along, p.tables_across
        )));
    }
    let n_tables = p.tables_along * p.tables_across;
    if n_tables < 12 {
        return Err(Error::InvalidParameter("need at least 12 tables to plant every defect".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let theta = rng.random_range(3.0..10.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let transform = GeoTransform::north_up(p.origin[0], p.origin[1], p.gsd, p.epsg);
    let center = [p.origin[0] + extent / 2.0, p.origin[1] - extent / 2.0];
    let site_frame = OrientedRect::new(center, layout_w, layout_h, theta);

    let table_w = PANEL_COLS as f64 * (MODULE_W_M + GAP_M);
    let table_h = PANEL_ROWS as f64 * (MODULE_H_M + GAP_M);
    let offset_dist = Normal::new(0.0, 0.2).expect("valid normal");
    let mut tables: Vec<SynthTable> = Vec::with_capacity(n_tables);
    for j in 0..p.tables_across {
        for i in 0..p.tables_along {
            let u = (i as f64 - (p.tables_along as f64 - 1.0) / 2.0) * PITCH_ALONG_M + rng.random_range(-0.3..0.3);
            let v = (j as f64 - (p.tables_across as f64 - 1.0) / 2.0) * PITCH_ACROSS_M + rng.random_range(-0.3..0.3);
            let angle = theta + rng.random_range(-0.5..0.5);
            let rect = OrientedRect::new(site_frame.from_local(u, v), table_w, table_h, angle);
            let offset = offset_dist.sample(&mut rng);
            let panel_offsets = (0..PANEL_COLS * PANEL_ROWS).map(|_| 0.5 * offset_dist.sample(&mut rng)).collect();
            tables.push(SynthTable { rect, offset, panel_offsets, mods: vec![PanelMod::Normal; PANEL_COLS * PANEL_ROWS] });
        }
    }

    // Twelve defects on twelve distinct tables.
    let plan = [
        DefectClass::Hotspot,
        DefectClass::Hotspot,
        DefectClass::Hotspot,
        DefectClass::MultiHotspot,
        DefectClass::MultiHotspot,
        DefectClass::DiodeBypass,
        DefectClass::DiodeBypass,
        DefectClass::PanelOffline,
        DefectClass::PanelOffline,
        DefectClass::StringOutage,
        DefectClass::StringOutage,
        DefectClass::TrackerMisalignment,
    ];
    let mut order: Vec<usize> = (0..n_tables).collect();
    order.shuffle(&mut rng);
    let bands = SeverityBands::default();
    let mut truth = Vec::with_capacity(plan.len());
    let mut severe_planted = false;
    for (k, (&class, &ti)) in plan.iter().zip(&order).enumerate() {
        let t = &mut tables[ti];
        let row = rng.random_range(0..PANEL_ROWS);
        let col = rng.random_range(0..PANEL_COLS);
        let idx = row * PANEL_COLS + col;
        let (panels, delta_t): (Vec<(usize, usize)>, Option<f64>) = match class {
            DefectClass::Hotspot => {
                let amp = hotspot_amplitude(&mut rng);
                let (r, c) = distinct_cells(&mut rng, 1)[0];
                t.mods[idx] = PanelMod::Spikes(vec![(cell_center(r, c), amp)]);
                (vec![(row, col)], Some(amp))
            }
            DefectClass::MultiHotspot => {
                let cells = distinct_cells(&mut rng, 2);
                let first = if severe_planted {
                    hotspot_amplitude(&mut rng)
                } else {
                    severe_planted = true;
                    rng.random_range(bands.0[3] + 1.5..bands.0[3] + 3.0)
                };
                let amps = [first, hotspot_amplitude(&mut rng)];
                t.mods[idx] = PanelMod::Spikes(cells.iter().zip(amps).map(|(&(r, c), a)| (cell_center(r, c), a)).collect());
                (vec![(row, col)], Some(amps[0].max(amps[1])))
            }
            DefectClass::DiodeBypass => {
                let amp = rng.random_range(5.5..7.5);
                t.mods[idx] = PanelMod::Stripe(rng.random_range(0..3), amp);
                (vec![(row, col)], Some(amp))
            }
            DefectClass::PanelOffline => {
                let amp = rng.random_range(5.5..7.5);
                t.mods[idx] = PanelMod::Uniform(amp);
                (vec![(row, col)], Some(amp))
            }
            DefectClass::StringOutage => {
                let start = rng.random_range(0..=PANEL_COLS - STRING_LEN);
                let amp = rng.random_range(5.5..7.0);
                let members: Vec<_> = (start..start + STRING_LEN).map(|c| (row, c)).collect();
                for &(r, c) in &members {
                    t.mods[r * PANEL_COLS + c] = PanelMod::Uniform(amp);
                }
                (members, Some(amp))
            }
            DefectClass::TrackerMisalignment => {
                t.rect.angle += rng.random_range(11.0..14.0);
                ((0..PANEL_ROWS).flat_map(|r| (0..PANEL_COLS).map(move |c| (r, c))).collect(), None)
            }
        };
        let rects: Vec<OrientedRect> = panels.iter().map(|&(r, c)| t.panel_rect(r, c)).collect();
        let geometry = match class {
            DefectClass::TrackerMisalignment => t.rect.to_polygon(),
            DefectClass::StringOutage => {
                let corners: Vec<_> = rects.iter().flat_map(|r| r.corners()).collect();
                min_area_rect(&corners)?.to_polygon()
            }
            _ => rects[0].to_polygon(),
        };
        truth.push(Detection {
            id: format!("GT-{:02}-{}", k + 1, class.code()),
            class,
            geometry,
            delta_t,
            severity: delta_t.map(|d| bands.classify(d)),
            confidence: 1.0,
            panel_ids: panels.iter().map(|&(r, c)| format!("S{:04}-R{r}-C{c:02}", ti + 1)).collect(),
            source: Source::Baseline,
            verdict: Verdict::Pending,
            hotspots: Vec::new(),
        });
    }

    // Site furniture outside the table field.
    let half_span = site_frame.bounds();
    let road_y = half_span[1] - 6.0;
    let inverter = OrientedRect::new([center[0] + 10.0, half_span[3] + 5.0], 1.5, 1.5, 0.0);
    let nodata_corner = p.size / 16;

    let table_rows: Vec<(usize, usize)> = tables
        .iter()
        .map(|t| {
            let b = t.rect.bounds();
            let r0 = ((p.origin[1] - b[3]) / p.gsd).floor().max(0.0) as usize;
            let r1 = (((p.origin[1] - b[1]) / p.gsd).ceil() as usize + 1).min(p.size);
            (r0, r1)
        })
        .collect();
    let table_cols: Vec<(usize, usize)> = tables
        .iter()
        .map(|t| {
            let b = t.rect.bounds();
            let c0 = ((b[0] - p.origin[0]) / p.gsd).floor().max(0.0) as usize;
            let c1 = (((b[2] - p.origin[0]) / p.gsd).ceil() as usize + 1).min(p.size);
            (c0, c1)
        })
        .collect();

    let mut values = vec![0f32; p.size * p.size];
    let mut rgb = vec![0u8; p.size * p.size * 3];
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    values.par_chunks_mut(p.size).zip(rgb.par_chunks_mut(p.size * 3)).enumerate().for_each(|(row, (vals, px))| {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        rng.set_stream(row as u64 + 1);
        let noise: Vec<f64> = (0..p.size).map(|_| unit.sample(&mut rng)).collect();
        let y = p.origin[1] - (row as f64 + 0.5) * p.gsd;
        let row_texture = 0.6 * (y * 0.11).sin();
        for col in 0..p.size {
            let x = p.origin[0] + (col as f64 + 0.5) * p.gsd;
            let (t, color) = if col + row < nodata_corner {
                (NODATA as f64, [0, 0, 0])
            } else if (y - road_y).abs() <= 2.0 {
                (ROAD_C + 0.3 * noise[col], [128, 128, 124])
            } else if inverter.contains([x, y]) {
                (INVERTER_C + 0.2 * noise[col], [210, 210, 215])
            } else {
                let g = GROUND_C + row_texture + 0.6 * (x * 0.07 + 0.5 * (y * 0.03).cos()).sin() + 0.3 * noise[col];
                let shade = (g - GROUND_C) * 12.0;
                (g, [(100.0 + shade) as u8, (112.0 + shade) as u8, 70])
            };
            vals[col] = t as f32;
            px[col * 3..col * 3 + 3].copy_from_slice(&color);
        }
        for (ti, table) in tables.iter().enumerate() {
            let (r0, r1) = table_rows[ti];
            if row < r0 || row >= r1 {
                continue;
            }
            let (c0, c1) = table_cols[ti];
            for col in c0..c1 {
                let x = p.origin[0] + (col as f64 + 0.5) * p.gsd;
                let (a, b) = table.rect.to_local([x, y]);
                if let Some(t) = table.temperature(a, b, noise[col]) {
                    vals[col] = t as f32;
                    let color = if t < PANEL_C - 1.0 { [170, 170, 175] } else { [28, 42, 96] };
                    px[col * 3..col * 3 + 3].copy_from_slice(&color);
                }
            }
        }
    });
    let raster = ThermalRaster::from_values(p.size, p.size, values, Some(NODATA as f64), transform)?;

    let (lon, lat) = Projector::new(p.epsg)?.to_lonlat(center[0], center[1])?;
    let site = SiteMetadata {
        site_id: format!("synth-{}", p.seed),
        capacity_mw_dc: p.capacity_mw_dc(),
        module_wattage_w: MODULE_WATTAGE_W,
        module_type: ModuleType::Mono,
        mount_type: MountType::GroundFixed,
        commission_year: 2016,
        state: "TX".into(),
        location: [(lat * 1e6).round() / 1e6, (lon * 1e6).round() / 1e6],
    };
    Ok(SyntheticSite { params: p, raster, rgb, tables: tables.iter().map(|t| t.rect).collect(), truth, site })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutputs {
    pub ir: PathBuf,
    pub rgb: PathBuf,
    pub ground_truth: PathBuf,
    pub config: PathBuf,
}

/// Inspection config for a fixture written by [`write_site`], with paths
/// relative to the fixture directory.
pub fn fixture_config(site: &SyntheticSite) -> InspectionConfig {
    InspectionConfig {
        output_dir: PathBuf::from("results"),
        worker_count: 4,
        detector: DetectorSelection::Baseline,
        inputs: InputPaths { ir: PathBuf::from("ir.tif"), rgb: Some(PathBuf::from("rgb.tif")) },
        site: site.site.clone(),
        normalization: NormalizationParams::default(),
        tiling: TilingParams::default(),
        detect: DetectParams::default(),
        loss: LossModel::default(),
        economics: EconomicsConfig::default(),
        rating: RatingConfig::default(),
    }
}

/// Writes `ir.tif`, `rgb.tif`, `ground_truth.geojson` and `config.toml`.
pub fn write_site(site: &SyntheticSite, dir: &Path) -> Result<SynthOutputs> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n = site.params.size;
    let out = SynthOutputs {
        ir: dir.join("ir.tif"),
        rgb: dir.join("rgb.tif"),
        ground_truth: dir.join("ground_truth.geojson"),
        config: dir.join("config.toml"),
    };
    let tiled = WriteOptions { layout: TiffLayout::Tiled { tile_size: 256 }, nodata: Some(NODATA as f64) };
    write_geotiff(&out.ir, n, n, RasterData::Float32(&site.raster.values), &site.raster.transform, &tiled)?;
    let rgb_opts = WriteOptions { nodata: None, ..tiled };
    write_geotiff(&out.rgb, n, n, RasterData::Rgb8(&site.rgb), &site.raster.transform, &rgb_opts)?;
    let codec = GeoCodec::new(site.params.epsg)?;
    write_collection(&detections_to_geojson(&site.truth, &codec)?, &out.ground_truth)?;
    let text = fixture_config(site).to_toml_string()?;
    std::fs::write(&out.config, text).map_err(|e| Error::io(&out.config, e))?;
    Ok(out)
}

/// Detections scored against planted truth.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MatchScore {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    /// (truth id, detection id) pairs.
    pub matches: Vec<(String, String)>,
}

/// One-to-one matching of detections to truth of the same class with IoU at
/// least `min_iou`, taking candidate pairs in descending IoU order.
pub fn score_detections(truth: &[Detection], detections: &[Detection], min_iou: f64) -> MatchScore {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ti, t) in truth.iter().enumerate() {
        for (di, d) in detections.iter().enumerate() {
            if t.class != d.class {
                continue;
            }
            let iou = crate::geometry::polygon_iou(&t.geometry, &d.geometry);
            if iou >= min_iou {
                pairs.push((iou, ti, di));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut t_used, mut d_used) = (vec![false; truth.len()], vec![false; detections.len()]);
    let mut matches = Vec::new();
    for (_, ti, di) in pairs {
        if !t_used[ti] && !d_used[di] {
            t_used[ti] = true;
            d_used[di] = true;
            matches.push((truth[ti].id.clone(), detections[di].id.clone()));
        }
    }
    let tp = matches.len();
    let ratio = |n: usize, d: usize| if d == 0 { 1.0 } else { n as f64 / d as f64 };
    MatchScore {
        true_positives: tp,
        false_positives: detections.len() - tp,
        false_negatives: truth.len() - tp,
        precision: ratio(tp, detections.len()),
        recall: ratio(tp, truth.len()),
        matches,
    }
}
