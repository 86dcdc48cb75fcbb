use std::path::Path;

use pvinspect_core::config::{DetectorSelection, InspectionConfig};
use pvinspect_core::detect::DefectClass;
use pvinspect_core::geojson_io::read_detections;
use pvinspect_core::geometry::polygon_iou;
use pvinspect_core::pipeline::{self, run_inspection, Stage};
use pvinspect_core::raster::{write_geotiff, GeoTransform, RasterData, WriteOptions};
use pvinspect_core::synth::{self, generate, score_detections, write_site, SynthParams};

fn small(seed: u64) -> SynthParams {
    SynthParams { size: 2000, tables_along: 4, tables_across: 4, ..SynthParams::standard(seed) }
}

fn fixture(dir: &Path, params: &SynthParams) -> (synth::SyntheticSite, InspectionConfig) {
    let site = generate(params).unwrap();
    let out = write_site(&site, dir).unwrap();
    (site, InspectionConfig::load(&out.config).unwrap())
}

/// Loss-table arithmetic straight from the planted defects.
fn expected_operating(site: &synth::SyntheticSite) -> (f64, f64) {
    let watts: f64 = site
        .truth
        .iter()
        .map(|d| {
            let f = match d.class {
                DefectClass::Hotspot | DefectClass::DiodeBypass => 0.33,
                DefectClass::MultiHotspot => 0.66,
                DefectClass::PanelOffline | DefectClass::StringOutage => 1.0,
                DefectClass::TrackerMisalignment => 0.10,
            };
            f * 400.0 * d.panel_ids.len() as f64
        })
        .sum();
    let c_defect = watts / 1e6;
    (c_defect, (site.site.capacity_mw_dc - c_defect) / site.site.capacity_mw_dc)
}

#[test]
fn standard_site_matches_planted_defects_and_hand_computed_rating() {
    let dir = tempfile::tempdir().unwrap();
    let (site, cfg) = fixture(dir.path(), &SynthParams::standard(42));
    let res = run_inspection(&cfg).unwrap();
    let score = score_detections(&site.truth, &res.detections, 0.5);
    assert!(score.precision >= 0.95 && score.recall >= 0.95, "{score:?}");

    let (c_defect, or) = expected_operating(&site);
    assert!((c_defect - 0.006788).abs() < 1e-12);
    assert!((res.report.c_defect_mw - c_defect).abs() < 1e-12);
    assert!((res.report.or_ratio - or).abs() < 1e-12);
    // OR 0.9915 -> B, one S5 cell (15..20 °C) -> C, 10 non-string anomalies on 0.8 MW -> APM 12.5 -> A
    assert_eq!(res.report.rating, "BCA");
    assert_eq!(res.report.a_total, 10);
    assert_eq!(res.report.apm, 12.5);
    assert_eq!(res.panels.len(), 2000);
    assert_eq!(res.tables.len(), 100);
}

#[test]
fn recall_and_precision_hold_across_seeds() {
    for seed in [1, 7, 19, 23] {
        let dir = tempfile::tempdir().unwrap();
        let (site, cfg) = fixture(dir.path(), &small(seed));
        let res = run_inspection(&cfg).unwrap();
        let score = score_detections(&site.truth, &res.detections, 0.5);
        assert_eq!((score.false_positives, score.false_negatives), (0, 0), "seed {seed}: {score:?}");
    }
}

#[test]
fn artifacts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (_, cfg) = fixture(dir.path(), &small(3));
    let res = run_inspection(&cfg).unwrap();
    for f in [pipeline::TABLES_FILE, pipeline::PANELS_FILE, pipeline::DETECTIONS_FILE, pipeline::REPORT_FILE, pipeline::MANIFEST_FILE] {
        assert!(cfg.output_dir.join(f).is_file(), "{f} missing");
    }
    let manifest = pipeline::read_manifest(&cfg.output_dir).unwrap();
    assert_eq!(manifest.config_sha256, cfg.hash());
    assert_eq!(manifest.config, cfg);
    assert_eq!(manifest.stages.last(), Some(&Stage::Artifacts));
    assert_eq!(pipeline::read_report(&cfg.output_dir).unwrap(), res.report);

    // every detection references existing panels
    let ids: std::collections::BTreeSet<_> = res.panels.iter().map(|p| p.id.as_str()).collect();
    assert!(res.detections.iter().all(|d| !d.panel_ids.is_empty() && d.panel_ids.iter().all(|p| ids.contains(p.as_str()))));
}

#[test]
fn tiles_without_tables_never_reach_detectors() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mut cfg) = fixture(dir.path(), &small(5));
    cfg.tiling.tile_size = 256;
    let res = run_inspection(&cfg).unwrap();
    let c = &res.manifest.counts;
    assert!(c["tiles_skipped_no_table"] > 0);
    assert_eq!(c["tiles_gated"] + c["tiles_skipped_no_table"], c["tiles_planned"]);
    assert_eq!(res.manifest.tiles.len(), c["tiles_gated"]);
    let t = res.manifest.raster.as_ref().unwrap().transform;
    for tile in &res.manifest.tiles {
        let w = tile.window;
        let corners = [(0, 0), (0, w.height), (w.width, w.height), (w.width, 0)].map(|(dc, dr)| {
            let (x, y) = t.pixel_to_world((w.col_off + dc) as f64, (w.row_off + dr) as f64);
            [x, y]
        });
        let poly = pvinspect_core::geometry::Polygon::new(corners.to_vec()).unwrap();
        assert!(res.tables.iter().any(|tb| polygon_iou(&poly, &tb.rect.to_polygon()) > 0.0));
    }
    let measured: usize = res.manifest.tiles.iter().map(|t| t.panels).sum();
    assert_eq!(measured + c["panels_outside_tiles"], c["panels"]);
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let (_, cfg) = fixture(dir.path(), &small(11));
    let mut outputs = Vec::new();
    for workers in [1, 8] {
        let mut c = cfg.clone();
        c.worker_count = workers;
        c.output_dir = dir.path().join(format!("w{workers}"));
        run_inspection(&c).unwrap();
        let files: Vec<Vec<u8>> = [pipeline::TABLES_FILE, pipeline::PANELS_FILE, pipeline::DETECTIONS_FILE, pipeline::REPORT_FILE]
            .iter()
            .map(|f| std::fs::read(c.output_dir.join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn stages_compose_to_the_same_result() {
    let dir = tempfile::tempdir().unwrap();
    let (_, cfg) = fixture(dir.path(), &small(8));
    let res = run_inspection(&cfg).unwrap();

    let p = &cfg.detect;
    let raster = pvinspect_core::raster::load_raster(&cfg.inputs.ir, 0).unwrap();
    let (_, norm) = pipeline::stretch_ortho(&raster, &cfg.normalization).unwrap();
    let tables = pipeline::find_tables(&norm, p);
    let plan = pvinspect_core::preprocess::plan_tiles(raster.width, raster.height, cfg.tiling.tile_size, cfg.tiling.overlap).unwrap();
    let gated = pipeline::gate_tiles(&plan, &tables, &raster.transform);
    let tiles = pipeline::normalize_tiles(&norm, &plan, &gated, cfg.normalization.equalization_bins).unwrap();
    let (panels, _) = pipeline::fit_panels(&tables, p);
    let homes = pipeline::home_tiles(&panels, &tiles, &raster.transform);
    let m = pipeline::measure_panels(&raster, &panels, &tiles, &homes, p, true).unwrap();
    let stats: Vec<_> = m.iter().flatten().map(|x| x.stats).collect();
    let baseline = pvinspect_core::detect::site_baseline(&stats).unwrap();
    let raw = pipeline::baseline_detections(&tables, &panels, &m, baseline, p);
    let kept = pvinspect_core::detect::filter_off_structure(raw, &panels, &tables);
    let dets = pipeline::merge_and_sort(&kept, p.nms_iou);

    assert_eq!(tables, res.tables);
    assert_eq!(panels, res.panels);
    assert_eq!(dets, res.detections);
}

#[test]
fn imported_ground_truth_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (site, mut cfg) = fixture(dir.path(), &small(2));
    cfg.detector = DetectorSelection::Import(dir.path().join("ground_truth.geojson"));
    let res = run_inspection(&cfg).unwrap();
    let score = score_detections(&site.truth, &res.detections, 0.5);
    assert_eq!(score.true_positives, site.truth.len(), "{score:?}");
    assert_eq!(res.manifest.counts["imported_rejected"], 0);
    assert!(res.detections.iter().all(|d| d.source == pvinspect_core::detect::Source::Imported));
    let (epsg, back) = read_detections(&dir.path().join("ground_truth.geojson"), &Default::default()).unwrap();
    assert_eq!(epsg, 32614);
    assert_eq!(back.len(), site.truth.len());
}

#[test]
fn blank_ortho_rates_aaa() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mut cfg) = fixture(dir.path(), &small(1));
    let blank = dir.path().join("blank.tif");
    let t = GeoTransform::north_up(500_000.0, 3_500_000.0, 0.05, 32614);
    write_geotiff(&blank, 300, 200, RasterData::Float32(&vec![22.0; 300 * 200]), &t, &WriteOptions::default()).unwrap();
    cfg.inputs.ir = blank;
    let res = run_inspection(&cfg).unwrap();
    assert!(res.detections.is_empty() && res.tables.is_empty());
    assert_eq!(res.report.rating, "AAA");
    assert_eq!(res.report.or_ratio, 1.0);
}

#[test]
fn failures_name_their_stage() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mut cfg) = fixture(dir.path(), &small(1));
    let bogus = dir.path().join("bogus.tif");
    std::fs::write(&bogus, b"not a tiff").unwrap();
    cfg.inputs.ir = bogus;
    let err = run_inspection(&cfg).err().unwrap();
    assert_eq!(err.stage, Stage::Ingest);
    assert!(!err.is_validation());
    assert_eq!(err.manifest.stages, vec![Stage::Config]);

    cfg.inputs.ir = dir.path().join("missing.tif");
    let err = run_inspection(&cfg).err().unwrap();
    assert!(err.is_validation());
}
