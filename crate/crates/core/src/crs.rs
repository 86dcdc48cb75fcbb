//! Conversions between a site's projected CRS, WGS84 and web mercator.

use proj4rs::proj::Proj;
use proj4rs::transform::transform;

use crate::{Error, Result};

pub const WGS84: u32 = 4326;
pub const WEB_MERCATOR: u32 = 3857;

/// Half the web-mercator world width in meters.
pub const WEB_MERCATOR_HALF_EXTENT: f64 = 20_037_508.342_789_244;

fn definition(epsg: u32) -> Result<&'static str> {
    u16::try_from(epsg)
        .ok()
        .and_then(crs_definitions::from_code)
        .map(|d| d.proj4)
        .ok_or_else(|| Error::UnknownCrs(format!("EPSG:{epsg}")))
}

pub fn is_geographic(epsg: u32) -> Result<bool> {
    Ok(definition(epsg)?.contains("+proj=longlat"))
}

/// Parses "EPSG:32614" (case-insensitive) or a bare code.
pub fn parse_epsg(text: &str) -> Result<u32> {
    let t = text.trim();
    let code = t.strip_prefix("EPSG:").or_else(|| t.strip_prefix("epsg:")).unwrap_or(t);
    let epsg: u32 = code.parse().map_err(|_| Error::UnknownCrs(text.to_string()))?;
    definition(epsg)?;
    Ok(epsg)
}

pub fn format_epsg(epsg: u32) -> String {
    format!("EPSG:{epsg}")
}

/// Forward and inverse transforms between one CRS and WGS84 longitude/latitude.
pub struct Projector {
    epsg: u32,
    local: Proj,
    wgs84: Proj,
    local_is_geographic: bool,
}

impl std::fmt::Debug for Projector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Projector").field("epsg", &self.epsg).finish()
    }
}

impl Projector {
    pub fn new(epsg: u32) -> Result<Self> {
        let local_def = definition(epsg)?;
        let local = Proj::from_proj_string(local_def).map_err(|e| Error::Projection(format!("{e:?}")))?;
        let wgs84 = Proj::from_proj_string(definition(WGS84)?).map_err(|e| Error::Projection(format!("{e:?}")))?;
        Ok(Self { epsg, local, wgs84, local_is_geographic: local_def.contains("+proj=longlat") })
    }

    pub fn epsg(&self) -> u32 {
        self.epsg
    }

    /// Projected (x, y) to (lon, lat) in degrees.
    pub fn to_lonlat(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let mut p = if self.local_is_geographic { (x.to_radians(), y.to_radians(), 0.0) } else { (x, y, 0.0) };
        transform(&self.local, &self.wgs84, &mut p).map_err(|e| Error::Projection(format!("{e:?}")))?;
        Ok((p.0.to_degrees(), p.1.to_degrees()))
    }

    /// (lon, lat) in degrees to projected (x, y).
    pub fn from_lonlat(&self, lon: f64, lat: f64) -> Result<(f64, f64)> {
        let mut p = (lon.to_radians(), lat.to_radians(), 0.0);
        transform(&self.wgs84, &self.local, &mut p).map_err(|e| Error::Projection(format!("{e:?}")))?;
        if self.local_is_geographic {
            Ok((p.0.to_degrees(), p.1.to_degrees()))
        } else {
            Ok((p.0, p.1))
        }
    }
}

/// Spherical web mercator, closed form.
pub fn lonlat_to_web_mercator(lon: f64, lat: f64) -> (f64, f64) {
    let r = 6_378_137.0;
    let lat = lat.clamp(-85.051_128_779_806_59, 85.051_128_779_806_59);
    (r * lon.to_radians(), r * (std::f64::consts::FRAC_PI_4 + lat.to_radians() / 2.0).tan().ln())
}

pub fn web_mercator_to_lonlat(x: f64, y: f64) -> (f64, f64) {
    let r = 6_378_137.0;
    ((x / r).to_degrees(), (2.0 * (y / r).exp().atan() - std::f64::consts::FRAC_PI_2).to_degrees())
}
