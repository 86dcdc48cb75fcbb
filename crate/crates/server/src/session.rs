//! Review state over one results directory.
//!
//! Verdicts live in `review/journal.jsonl`, one JSON entry per change, with a
//! `review/snapshot.json` written every [`SNAPSHOT_EVERY`] entries. The result
//! artifacts written by the pipeline are never modified.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use geojson::{Feature, FeatureCollection, Geometry, JsonValue};
use pvinspect_core::analytics::{build_report, detection_loss_mw, power_and_revenue_loss, ReportInputs, SiteHealthReport};
use pvinspect_core::detect::{DefectClass, Detection, Severity, SeverityBands, Verdict};
use pvinspect_core::geojson_io::{self, GeoCodec};
use pvinspect_core::pipeline;
use serde::{Deserialize, Serialize};

use crate::ServerError;

pub const REVIEW_DIR: &str = "review";
pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const SNAPSHOT_EVERY: u64 = 25;

/// Current review state of one detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub verdict: Verdict,
    #[serde(default)]
    pub note: String,
    /// RFC 3339 time of the last change; absent for untouched detections.
    #[serde(default)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: u64,
    pub id: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub note: String,
    pub timestamp: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    journal_entries: u64,
    verdicts: BTreeMap<String, VerdictRecord>,
}

/// Outcome of one verdict submission.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictOutcome {
    pub id: String,
    pub verdict: Verdict,
    pub note: String,
    /// False when the submission repeated the current state.
    pub changed: bool,
    pub journal_entries: u64,
    pub site: SiteHealthReport,
}

/// Severity display band: S5/S4 red, S3 orange, S1/S2 yellow.
pub fn severity_color(severity: Option<Severity>) -> Option<&'static str> {
    severity.map(|s| match s {
        Severity::S5 | Severity::S4 => "red",
        Severity::S3 => "orange",
        Severity::S1 | Severity::S2 => "yellow",
    })
}

/// Query filter for the detections listing. Empty sets match everything.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionFilter {
    pub severity: Vec<Severity>,
    pub class: Vec<DefectClass>,
    pub verdict: Vec<Verdict>,
}

impl DetectionFilter {
    /// Parses comma-separated `severity`, `class` and `verdict` values.
    /// Other keys are ignored; an unparsable value is an error.
    pub fn from_query(query: &HashMap<String, String>) -> Result<Self, ServerError> {
        fn list<T: std::str::FromStr>(query: &HashMap<String, String>, key: &str) -> Result<Vec<T>, ServerError> {
            match query.get(key) {
                None => Ok(Vec::new()),
                Some(v) => v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse().map_err(|_| ServerError::BadRequest(format!("invalid {key} filter value {s:?}"))))
                    .collect(),
            }
        }
        Ok(Self { severity: list(query, "severity")?, class: list(query, "class")?, verdict: list(query, "verdict")? })
    }

    pub fn matches(&self, d: &Detection) -> bool {
        (self.severity.is_empty() || d.severity.is_some_and(|s| self.severity.contains(&s)))
            && (self.class.is_empty() || self.class.contains(&d.class))
            && (self.verdict.is_empty() || self.verdict.contains(&d.verdict))
    }
}

pub struct ReviewSession {
    results_dir: PathBuf,
    /// Report as written by the pipeline; supplies site and model settings.
    template: SiteHealthReport,
    detections: Vec<Detection>,
    /// WGS84 geometry per detection, projected once at load.
    wgs84: Vec<Geometry>,
    index: HashMap<String, usize>,
    verdicts: BTreeMap<String, VerdictRecord>,
    journal_entries: u64,
    report: SiteHealthReport,
}

impl std::fmt::Debug for ReviewSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReviewSession")
            .field("results_dir", &self.results_dir)
            .field("detections", &self.detections.len())
            .field("journal_entries", &self.journal_entries)
            .finish()
    }
}

fn core_err(e: pvinspect_core::Error) -> ServerError {
    ServerError::Internal(e.to_string())
}

fn io_err(path: &Path, e: std::io::Error) -> ServerError {
    ServerError::Internal(format!("{}: {e}", path.display()))
}

impl ReviewSession {
    /// Loads `report.json` and `detections.geojson`, then replays any
    /// snapshot and journal found under `review/`.
    pub fn open(results_dir: &Path) -> Result<Self, ServerError> {
        let report_path = results_dir.join(pipeline::REPORT_FILE);
        if !report_path.is_file() {
            return Err(ServerError::NotFound(format!("no results in {}", results_dir.display())));
        }
        let template = pipeline::read_report(results_dir).map_err(core_err)?;
        let bands = match pipeline::read_manifest(results_dir) {
            Ok(m) => m.config.detect.severity_edges,
            Err(_) => SeverityBands::default(),
        };
        let (epsg, detections) = geojson_io::read_detections(&results_dir.join(pipeline::DETECTIONS_FILE), &bands).map_err(core_err)?;
        let codec = GeoCodec::new(epsg).map_err(core_err)?;
        let wgs84 = detections.iter().map(|d| codec.polygon_to_geometry(&d.geometry)).collect::<Result<Vec<_>, _>>().map_err(core_err)?;
        let mut index = HashMap::with_capacity(detections.len());
        for (i, d) in detections.iter().enumerate() {
            if index.insert(d.id.clone(), i).is_some() {
                return Err(ServerError::Internal(format!("duplicate detection id {}", d.id)));
            }
        }
        let verdicts = detections
            .iter()
            .map(|d| (d.id.clone(), VerdictRecord { verdict: d.verdict, note: String::new(), timestamp: None }))
            .collect();
        let mut session = Self {
            results_dir: results_dir.to_path_buf(),
            report: template.clone(),
            template,
            detections,
            wgs84,
            index,
            verdicts,
            journal_entries: 0,
        };
        session.replay()?;
        session.rebuild_report()?;
        if session.journal_entries > 0 {
            session.write_snapshot()?;
        }
        Ok(session)
    }

    fn review_dir(&self) -> PathBuf {
        self.results_dir.join(REVIEW_DIR)
    }

    pub fn journal_path(&self) -> PathBuf {
        self.review_dir().join(JOURNAL_FILE)
    }

    fn snapshot_path(&self) -> PathBuf {
        self.review_dir().join(SNAPSHOT_FILE)
    }

    fn replay(&mut self) -> Result<(), ServerError> {
        let snap_path = self.snapshot_path();
        if snap_path.is_file() {
            let text = std::fs::read_to_string(&snap_path).map_err(|e| io_err(&snap_path, e))?;
            let snap: Snapshot = serde_json::from_str(&text).map_err(|e| ServerError::Internal(format!("corrupt snapshot: {e}")))?;
            for (id, rec) in snap.verdicts {
                self.set_state(&id, rec)?;
            }
            self.journal_entries = snap.journal_entries;
        }
        let path = self.journal_path();
        if !path.is_file() {
            return Ok(());
        }
        let file = File::open(&path).map_err(|e| io_err(&path, e))?;
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| io_err(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: JournalEntry = serde_json::from_str(&line).map_err(|e| ServerError::Internal(format!("corrupt journal line: {e}")))?;
            if entry.seq <= self.journal_entries {
                continue;
            }
            if entry.seq != self.journal_entries + 1 {
                return Err(ServerError::Internal(format!("journal gap before entry {}", entry.seq)));
            }
            self.set_state(&entry.id, VerdictRecord { verdict: entry.verdict, note: entry.note, timestamp: Some(entry.timestamp) })?;
            self.journal_entries = entry.seq;
        }
        Ok(())
    }

    fn set_state(&mut self, id: &str, rec: VerdictRecord) -> Result<(), ServerError> {
        let i = *self.index.get(id).ok_or_else(|| ServerError::Internal(format!("review state references unknown detection {id}")))?;
        self.detections[i].verdict = rec.verdict;
        self.verdicts.insert(id.to_string(), rec);
        Ok(())
    }

    fn rebuild_report(&mut self) -> Result<(), ServerError> {
        self.report = recompute(&self.template, &self.detections)?;
        Ok(())
    }

    fn write_snapshot(&self) -> Result<(), ServerError> {
        let dir = self.review_dir();
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let snap = Snapshot { journal_entries: self.journal_entries, verdicts: self.verdicts.clone() };
        let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        geojson_io::write_json(&snap, &tmp).map_err(core_err)?;
        let path = self.snapshot_path();
        std::fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))
    }

    /// Records a verdict. Repeating the current verdict and note is a no-op
    /// and leaves the journal untouched.
    pub fn set_verdict(&mut self, id: &str, verdict: Verdict, note: &str) -> Result<VerdictOutcome, ServerError> {
        let current = self.verdicts.get(id).ok_or_else(|| ServerError::NotFound(format!("unknown detection {id}")))?;
        let changed = current.verdict != verdict || current.note != note;
        if changed {
            let entry = JournalEntry {
                seq: self.journal_entries + 1,
                id: id.to_string(),
                verdict,
                note: note.to_string(),
                timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            };
            self.append(&entry)?;
            self.journal_entries = entry.seq;
            self.set_state(id, VerdictRecord { verdict, note: entry.note, timestamp: Some(entry.timestamp) })?;
            self.rebuild_report()?;
            if self.journal_entries.is_multiple_of(SNAPSHOT_EVERY) {
                self.write_snapshot()?;
            }
        }
        Ok(VerdictOutcome {
            id: id.to_string(),
            verdict,
            note: note.to_string(),
            changed,
            journal_entries: self.journal_entries,
            site: self.report.clone(),
        })
    }

    fn append(&self, entry: &JournalEntry) -> Result<(), ServerError> {
        let dir = self.review_dir();
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let path = self.journal_path();
        let mut line = serde_json::to_vec(entry).map_err(|e| ServerError::Internal(e.to_string()))?;
        line.push(b'\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| io_err(&path, e))?;
        f.write_all(&line).and_then(|_| f.sync_data()).map_err(|e| io_err(&path, e))
    }

    pub fn report(&self) -> &SiteHealthReport {
        &self.report
    }

    pub fn detections(&self) -> &[Detection] {
        &self.detections
    }

    pub fn verdicts(&self) -> &BTreeMap<String, VerdictRecord> {
        &self.verdicts
    }

    pub fn journal_entries(&self) -> u64 {
        self.journal_entries
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    fn feature(&self, i: usize) -> Feature {
        let d = &self.detections[i];
        let mut props = geojson_io::detection_properties(d);
        let loss_mw = detection_loss_mw(d, &self.template.site, &self.template.loss_model);
        let (_, revenue) = power_and_revenue_loss(loss_mw, &self.template.economics);
        props.insert("color".into(), severity_color(d.severity).map_or(JsonValue::Null, JsonValue::from));
        props.insert("power_loss_mw_dc".into(), JsonValue::from(loss_mw));
        props.insert("revenue_loss_usd".into(), JsonValue::from(revenue));
        let rec = &self.verdicts[&d.id];
        props.insert("note".into(), JsonValue::from(rec.note.clone()));
        props.insert("reviewed_at".into(), rec.timestamp.clone().map_or(JsonValue::Null, JsonValue::from));
        Feature {
            bbox: None,
            geometry: Some(self.wgs84[i].clone()),
            id: Some(geojson::feature::Id::String(d.id.clone())),
            properties: Some(props),
            foreign_members: None,
        }
    }

    /// WGS84 features matching `filter`, in detection order.
    pub fn detections_geojson(&self, filter: &DetectionFilter) -> FeatureCollection {
        let features = (0..self.detections.len()).filter(|&i| filter.matches(&self.detections[i])).map(|i| self.feature(i)).collect();
        FeatureCollection { bbox: None, features, foreign_members: None }
    }

    pub fn detection_feature(&self, id: &str) -> Option<Feature> {
        self.index.get(id).map(|&i| self.feature(i))
    }
}

/// Site report over `detections` with the site, loss, economics and rating
/// settings of `template`.
pub fn recompute(template: &SiteHealthReport, detections: &[Detection]) -> Result<SiteHealthReport, ServerError> {
    build_report(&ReportInputs {
        site: &template.site,
        loss: &template.loss_model,
        economics: &template.economics,
        rating: &template.rating_config,
        detections,
        site_baseline_c: template.site_baseline_c,
        panels_total: template.panels_total,
        panels_inspectable: template.panels_inspectable,
    })
    .map_err(core_err)
}
