//! GeoJSON encoding of tables, panels and detections.
//!
//! Coordinates are written as WGS84 longitude/latitude. The site's projected
//! CRS is recorded in a `projected_crs` member of each FeatureCollection so
//! readers can return to the exact working coordinates.

use std::collections::BTreeMap;
use std::path::Path;

use geojson::{Feature, FeatureCollection, Geometry, GeometryValue, JsonObject, JsonValue};

use crate::crs::{self, Projector};
use crate::detect::{Detection, Hotspot, Panel, PanelStats, SeverityBands, Table};
use crate::geometry::{Point, Polygon};
use crate::{Error, Result};

pub const PROJECTED_CRS_MEMBER: &str = "projected_crs";

/// Converts geometry between the site CRS and GeoJSON coordinates.
#[derive(Debug)]
pub struct GeoCodec {
    projector: Projector,
}

impl GeoCodec {
    pub fn new(epsg: u32) -> Result<Self> {
        Ok(Self { projector: Projector::new(epsg)? })
    }

    pub fn epsg(&self) -> u32 {
        self.projector.epsg()
    }

    pub fn to_lonlat(&self, p: Point) -> Result<Point> {
        let (lon, lat) = self.projector.to_lonlat(p[0], p[1])?;
        Ok([lon, lat])
    }

    pub fn from_lonlat(&self, p: Point) -> Result<Point> {
        let (x, y) = self.projector.from_lonlat(p[0], p[1])?;
        Ok([x, y])
    }

    pub fn polygon_to_geometry(&self, polygon: &Polygon) -> Result<Geometry> {
        let ring = polygon.closed_ring().into_iter().map(|p| self.to_lonlat(p)).collect::<Result<Vec<Point>>>()?;
        Ok(Geometry::new_polygon([ring]))
    }

    /// Exterior ring of a Polygon geometry; holes are not supported.
    pub fn geometry_to_polygon(&self, geometry: &Geometry) -> Result<Polygon> {
        let GeometryValue::Polygon { coordinates } = &geometry.value else {
            return Err(Error::GeoJson(format!("expected a Polygon geometry, got {}", geometry.value.type_name())));
        };
        if coordinates.len() != 1 {
            return Err(Error::GeoJson(format!("polygons with holes are not supported ({} rings)", coordinates.len())));
        }
        let ring = coordinates[0]
            .iter()
            .map(|pos| {
                if pos.len() < 2 {
                    return Err(Error::GeoJson("position with fewer than two coordinates".into()));
                }
                self.from_lonlat([pos[0], pos[1]])
            })
            .collect::<Result<Vec<Point>>>()?;
        Polygon::new(ring)
    }

    pub fn collection(&self, features: Vec<Feature>) -> FeatureCollection {
        let mut members = JsonObject::new();
        members.insert(PROJECTED_CRS_MEMBER.into(), JsonValue::from(crs::format_epsg(self.epsg())));
        FeatureCollection { bbox: None, features, foreign_members: Some(members) }
    }
}

fn feature(id: &str, geometry: Geometry, properties: JsonObject) -> Feature {
    Feature {
        bbox: None,
        geometry: Some(geometry),
        id: Some(geojson::feature::Id::String(id.to_string())),
        properties: Some(properties),
        foreign_members: None,
    }
}

fn obj(pairs: impl IntoIterator<Item = (&'static str, JsonValue)>) -> JsonObject {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn opt_f64(v: Option<f64>) -> JsonValue {
    v.map_or(JsonValue::Null, JsonValue::from)
}

pub fn tables_to_geojson(tables: &[Table], codec: &GeoCodec) -> Result<FeatureCollection> {
    let features = tables
        .iter()
        .map(|t| {
            let props = obj([
                ("id", JsonValue::from(t.id.clone())),
                ("width_m", JsonValue::from(t.rect.width)),
                ("height_m", JsonValue::from(t.rect.height)),
                ("angle_deg", JsonValue::from(t.rect.angle)),
            ]);
            Ok(feature(&t.id, codec.polygon_to_geometry(&t.rect.to_polygon())?, props))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(codec.collection(features))
}

/// Panels with their statistics; panels missing from `stats` are marked
/// uninspectable.
pub fn panels_to_geojson(panels: &[Panel], stats: &BTreeMap<String, PanelStats>, codec: &GeoCodec) -> Result<FeatureCollection> {
    let features = panels
        .iter()
        .map(|p| {
            let s = stats.get(&p.id);
            let props = obj([
                ("id", JsonValue::from(p.id.clone())),
                ("table_id", JsonValue::from(p.table_id.clone())),
                ("row", JsonValue::from(p.row)),
                ("col", JsonValue::from(p.col)),
                ("inspectable", JsonValue::from(s.is_some())),
                ("median_c", opt_f64(s.map(|s| s.median_c))),
                ("mean_c", opt_f64(s.map(|s| s.mean_c))),
                ("max_c", opt_f64(s.map(|s| s.max_c))),
                ("dev_median", opt_f64(s.map(|s| s.dev_median))),
                ("dev_mean", opt_f64(s.map(|s| s.dev_mean))),
                ("dev_max", opt_f64(s.map(|s| s.dev_max))),
                ("valid_pixel_count", s.map_or(JsonValue::Null, |s| JsonValue::from(s.valid_pixel_count))),
            ]);
            Ok(feature(&p.id, codec.polygon_to_geometry(&p.rect.to_polygon())?, props))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(codec.collection(features))
}

pub fn detection_properties(d: &Detection) -> JsonObject {
    obj([
        ("id", JsonValue::from(d.id.clone())),
        ("class", JsonValue::from(d.class.as_str())),
        ("delta_t", opt_f64(d.delta_t)),
        ("severity", d.severity.map_or(JsonValue::Null, |s| JsonValue::from(s.as_str()))),
        ("confidence", JsonValue::from(d.confidence)),
        ("panel_ids", JsonValue::from(d.panel_ids.clone())),
        ("verdict", JsonValue::from(d.verdict.as_str())),
        ("source", JsonValue::from(d.source.as_str())),
        ("hotspots", serde_json::to_value(&d.hotspots).unwrap_or(JsonValue::Null)),
    ])
}

pub fn detection_to_feature(d: &Detection, codec: &GeoCodec) -> Result<Feature> {
    Ok(feature(&d.id, codec.polygon_to_geometry(&d.geometry)?, detection_properties(d)))
}

pub fn detections_to_geojson(dets: &[Detection], codec: &GeoCodec) -> Result<FeatureCollection> {
    let features = dets.iter().map(|d| detection_to_feature(d, codec)).collect::<Result<Vec<_>>>()?;
    Ok(codec.collection(features))
}

fn prop<'a>(props: &'a JsonObject, key: &str) -> Option<&'a JsonValue> {
    props.get(key).filter(|v| !v.is_null())
}

/// Reads one detection feature. Missing optional properties fall back to
/// defaults (confidence 1, no ΔT, pending, baseline); severity is always
/// recomputed from ΔT with `bands`. Features without an id get `fallback_id`.
pub fn detection_from_feature(f: &Feature, codec: &GeoCodec, bands: &SeverityBands, fallback_id: &str) -> Result<Detection> {
    let empty = JsonObject::new();
    let props = f.properties.as_ref().unwrap_or(&empty);
    let class_text = prop(props, "class").and_then(JsonValue::as_str).ok_or_else(|| Error::GeoJson("feature has no class".into()))?;
    let class = class_text.parse()?;
    let geometry = codec.geometry_to_polygon(f.geometry.as_ref().ok_or_else(|| Error::GeoJson("feature has no geometry".into()))?)?;
    let id = prop(props, "id")
        .and_then(JsonValue::as_str)
        .map(str::to_string)
        .or_else(|| match &f.id {
            Some(geojson::feature::Id::String(s)) => Some(s.clone()),
            Some(geojson::feature::Id::Number(n)) => Some(n.to_string()),
            None => None,
        })
        .unwrap_or_else(|| fallback_id.to_string());
    let number = |key: &str| -> Result<Option<f64>> {
        match prop(props, key) {
            None => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| Error::GeoJson(format!("property {key} must be a number"))),
        }
    };
    let confidence = number("confidence")?.unwrap_or(1.0);
    if !(0.0..=1.0).contains(&confidence) {
        return Err(Error::GeoJson(format!("confidence {confidence} outside [0, 1]")));
    }
    let delta_t = number("delta_t")?;
    if delta_t.is_some_and(|d| !d.is_finite()) {
        return Err(Error::GeoJson("delta_t must be finite".into()));
    }
    let panel_ids = match prop(props, "panel_ids") {
        None => Vec::new(),
        Some(v) => serde_json::from_value(v.clone()).map_err(|_| Error::GeoJson("panel_ids must be a list of strings".into()))?,
    };
    let hotspots: Vec<Hotspot> = match prop(props, "hotspots") {
        None => Vec::new(),
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::GeoJson(format!("bad hotspots: {e}")))?,
    };
    let verdict = prop(props, "verdict").and_then(JsonValue::as_str).map(str::parse).transpose()?.unwrap_or_default();
    let source = prop(props, "source").and_then(JsonValue::as_str).map(str::parse).transpose()?.unwrap_or_default();
    Ok(Detection {
        id,
        class,
        geometry,
        delta_t,
        severity: delta_t.map(|d| bands.classify(d)),
        confidence,
        panel_ids,
        source,
        verdict,
        hotspots,
    })
}

pub fn parse_feature_collection(text: &str) -> Result<FeatureCollection> {
    text.parse::<FeatureCollection>().map_err(|e| Error::GeoJson(e.to_string()))
}

/// EPSG code named by the collection's `projected_crs` member, if any.
pub fn collection_epsg(fc: &FeatureCollection) -> Result<Option<u32>> {
    match fc.foreign_members.as_ref().and_then(|m| m.get(PROJECTED_CRS_MEMBER)) {
        None | Some(JsonValue::Null) => Ok(None),
        Some(JsonValue::String(s)) => crs::parse_epsg(s).map(Some),
        Some(JsonValue::Number(n)) => crs::parse_epsg(&n.to_string()).map(Some),
        Some(other) => Err(Error::UnknownCrs(other.to_string())),
    }
}

/// Reads a detections file written by this crate; any bad feature is an error.
pub fn read_detections(path: &Path, bands: &SeverityBands) -> Result<(u32, Vec<Detection>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fc = parse_feature_collection(&text)?;
    let epsg = collection_epsg(&fc)?.ok_or_else(|| Error::GeoJson(format!("{} has no {PROJECTED_CRS_MEMBER} member", path.display())))?;
    let codec = GeoCodec::new(epsg)?;
    let dets = fc
        .features
        .iter()
        .enumerate()
        .map(|(i, f)| detection_from_feature(f, &codec, bands, &format!("D{:04}", i + 1)))
        .collect::<Result<Vec<_>>>()?;
    Ok((epsg, dets))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_collection(fc: &FeatureCollection, path: &Path) -> Result<()> {
    write_json(fc, path)
}
