//! Administrative region geometry: simple closed polygons keyed by a
//! 4-digit postal prefix, optionally subdivided into named sub-districts.
//!
//! Two file formats are accepted: a native polygon CSV
//! (`code,province,subdistrict,lat1,lon1,lat2,lon2,...`, empty subdistrict
//! name = the region ring itself) and a GeoJSON FeatureCollection of
//! Polygon features carrying a `postal_code` property (plus optional
//! `province` and `subdistrict`).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::model::GeoPoint;

/// A closed polygon ring. Stored without the repeated closing vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonRing {
    vertices: Vec<GeoPoint>,
}

impl PolygonRing {
    /// Validates and normalizes a ring: at least 3 distinct vertices, the
    /// closing vertex (if repeated) removed, and no self-intersection
    /// (O(n^2) segment test).
    pub fn new(mut vertices: Vec<GeoPoint>) -> Result<Self, String> {
        if vertices.len() >= 2 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(format!(
                "polygon needs at least 3 vertices, found {}",
                vertices.len()
            ));
        }
        let ring = Self { vertices };
        if let Some((i, j)) = ring.find_self_intersection() {
            return Err(format!("polygon self-intersects (segments {i} and {j})"));
        }
        Ok(ring)
    }

    pub fn vertices(&self) -> &[GeoPoint] {
        &self.vertices
    }

    fn segments(&self) -> impl Iterator<Item = (GeoPoint, GeoPoint)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    fn find_self_intersection(&self) -> Option<(usize, usize)> {
        let segs: Vec<(GeoPoint, GeoPoint)> = self.segments().collect();
        let n = segs.len();
        for i in 0..n {
            for j in (i + 1)..n {
                // Skip adjacent segments (they share an endpoint).
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if segments_properly_intersect(segs[i], segs[j]) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Even-odd ray cast; points on an edge or vertex count as inside.
    pub fn contains(&self, p: GeoPoint) -> bool {
        for (a, b) in self.segments() {
            if point_on_segment(p, a, b) {
                return true;
            }
        }
        let (px, py) = (p.lon(), p.lat());
        let mut inside = false;
        for (a, b) in self.segments() {
            let (x1, y1) = (a.lon(), a.lat());
            let (x2, y2) = (b.lon(), b.lat());
            if (y1 > py) != (y2 > py) {
                let x_cross = x1 + (py - y1) / (y2 - y1) * (x2 - x1);
                if px < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let mut min_lat = f64::INFINITY;
        let mut min_lon = f64::INFINITY;
        let mut max_lat = f64::NEG_INFINITY;
        let mut max_lon = f64::NEG_INFINITY;
        for v in &self.vertices {
            min_lat = min_lat.min(v.lat());
            min_lon = min_lon.min(v.lon());
            max_lat = max_lat.max(v.lat());
            max_lon = max_lon.max(v.lon());
        }
        (min_lat, min_lon, max_lat, max_lon)
    }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn point_on_segment(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> bool {
    let (px, py) = (p.lon(), p.lat());
    let (ax, ay) = (a.lon(), a.lat());
    let (bx, by) = (b.lon(), b.lat());
    if cross((ax, ay), (bx, by), (px, py)).abs() > 1e-12 {
        return false;
    }
    px >= ax.min(bx) && px <= ax.max(bx) && py >= ay.min(by) && py <= ay.max(by)
}

fn segments_properly_intersect(s1: (GeoPoint, GeoPoint), s2: (GeoPoint, GeoPoint)) -> bool {
    let a = (s1.0.lon(), s1.0.lat());
    let b = (s1.1.lon(), s1.1.lat());
    let c = (s2.0.lon(), s2.0.lat());
    let d = (s2.1.lon(), s2.1.lat());
    let d1 = cross(a, b, c);
    let d2 = cross(a, b, d);
    let d3 = cross(c, d, a);
    let d4 = cross(c, d, b);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// One administrative region with optional sub-district rings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDef {
    pub code: String,
    pub province: String,
    pub polygon: PolygonRing,
    pub subdistricts: Vec<(String, PolygonRing)>,
}

/// Result of locating a point among the loaded regions. `overlapping` is
/// set when more than one region contains the point; the first region in
/// file order wins.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionAssignment {
    pub code: String,
    pub subdistrict: Option<String>,
    pub overlapping: bool,
}

/// Point-in-polygon lookup over the loaded regions (file order).
pub fn assign_region(p: GeoPoint, regions: &[RegionDef]) -> Option<RegionAssignment> {
    let mut hit: Option<&RegionDef> = None;
    let mut overlapping = false;
    for region in regions {
        let bb = region.polygon.bounding_box();
        if p.lat() < bb.0 || p.lon() < bb.1 || p.lat() > bb.2 || p.lon() > bb.3 {
            continue;
        }
        if region.polygon.contains(p) {
            if hit.is_none() {
                hit = Some(region);
            } else {
                overlapping = true;
            }
        }
    }
    hit.map(|region| {
        let subdistrict = region
            .subdistricts
            .iter()
            .find(|(_, ring)| ring.contains(p))
            .map(|(name, _)| name.clone());
        RegionAssignment {
            code: region.code.clone(),
            subdistrict,
            overlapping,
        }
    })
}

fn parse_ring_coords(
    path: &str,
    line_no: usize,
    fields: &[&str],
) -> Result<PolygonRing, IngestError> {
    if fields.len() % 2 != 0 {
        return Err(IngestError::format(
            path,
            line_no,
            "coordinates",
            "odd number of coordinate values (need lat,lon pairs)",
        ));
    }
    let mut vertices = Vec::with_capacity(fields.len() / 2);
    for pair in fields.chunks(2) {
        let lat: f64 = pair[0]
            .trim()
            .parse()
            .map_err(|_| IngestError::format(path, line_no, "lat", "not a number"))?;
        let lon: f64 = pair[1]
            .trim()
            .parse()
            .map_err(|_| IngestError::format(path, line_no, "lon", "not a number"))?;
        vertices.push(
            GeoPoint::new(lat, lon)
                .map_err(|e| IngestError::format(path, line_no, "lat/lon", e.to_string()))?,
        );
    }
    PolygonRing::new(vertices).map_err(|e| IngestError::InvalidGeometry {
        path: path.to_string(),
        message: format!("line {line_no}: {e}"),
    })
}

fn load_regions_csv(path: &str, source: &str) -> Result<Vec<RegionDef>, IngestError> {
    let mut regions: Vec<RegionDef> = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with("# ") || line.starts_with("code,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(IngestError::format(
                path,
                line_no,
                "row",
                "expected code,province,subdistrict,coords...",
            ));
        }
        let code = fields[0].trim().to_string();
        let province = fields[1].trim().to_string();
        let subdistrict = fields[2].trim();
        let ring = parse_ring_coords(path, line_no, &fields[3..])?;
        if subdistrict.is_empty() {
            if regions.iter().any(|r| r.code == code) {
                return Err(IngestError::DuplicateKey {
                    path: path.to_string(),
                    line: line_no,
                    key: code,
                });
            }
            regions.push(RegionDef {
                code,
                province,
                polygon: ring,
                subdistricts: Vec::new(),
            });
        } else {
            let region = regions.iter_mut().find(|r| r.code == code).ok_or_else(|| {
                IngestError::format(
                    path,
                    line_no,
                    "code",
                    format!("sub-district before region row for code {code:?}"),
                )
            })?;
            region.subdistricts.push((subdistrict.to_string(), ring));
        }
    }
    Ok(regions)
}

fn json_ring(path: &str, geometry: &serde_json::Value) -> Result<PolygonRing, IngestError> {
    let bad = |message: &str| IngestError::InvalidGeometry {
        path: path.to_string(),
        message: message.to_string(),
    };
    if geometry["type"] != "Polygon" {
        return Err(bad("only Polygon geometries are supported"));
    }
    let exterior = geometry["coordinates"]
        .as_array()
        .and_then(|rings| rings.first())
        .and_then(|r| r.as_array())
        .ok_or_else(|| bad("missing polygon exterior ring"))?;
    let mut vertices = Vec::with_capacity(exterior.len());
    for position in exterior {
        let lon = position[0].as_f64().ok_or_else(|| bad("non-numeric lon"))?;
        let lat = position[1].as_f64().ok_or_else(|| bad("non-numeric lat"))?;
        vertices.push(GeoPoint::new(lat, lon).map_err(|e| bad(&e.to_string()))?);
    }
    PolygonRing::new(vertices).map_err(|e| bad(&e))
}

fn load_regions_geojson(path: &str, source: &str) -> Result<Vec<RegionDef>, IngestError> {
    let doc: serde_json::Value =
        serde_json::from_str(source).map_err(|e| IngestError::BadFile {
            path: path.to_string(),
            message: format!("invalid JSON: {e}"),
        })?;
    let features = doc["features"].as_array().ok_or_else(|| IngestError::BadFile {
        path: path.to_string(),
        message: "expected a FeatureCollection with a features array".to_string(),
    })?;
    let mut regions: Vec<RegionDef> = Vec::new();
    let mut pending_subdistricts: Vec<(String, String, PolygonRing)> = Vec::new();
    for feature in features {
        let props = &feature["properties"];
        let code = props["postal_code"]
            .as_str()
            .ok_or_else(|| IngestError::BadFile {
                path: path.to_string(),
                message: "feature missing postal_code property".to_string(),
            })?
            .to_string();
        let ring = json_ring(path, &feature["geometry"])?;
        match props["subdistrict"].as_str() {
            Some(name) => pending_subdistricts.push((code, name.to_string(), ring)),
            None => {
                if regions.iter().any(|r| r.code == code) {
                    return Err(IngestError::DuplicateKey {
                        path: path.to_string(),
                        line: 0,
                        key: code,
                    });
                }
                regions.push(RegionDef {
                    code,
                    province: props["province"].as_str().unwrap_or("").to_string(),
                    polygon: ring,
                    subdistricts: Vec::new(),
                });
            }
        }
    }
    for (code, name, ring) in pending_subdistricts {
        let region = regions
            .iter_mut()
            .find(|r| r.code == code)
            .ok_or_else(|| IngestError::BadFile {
                path: path.to_string(),
                message: format!("sub-district {name:?} references unknown region {code:?}"),
            })?;
        region.subdistricts.push((name, ring));
    }
    Ok(regions)
}

/// Loads region geometry, auto-detecting GeoJSON (leading `{`) vs the
/// native CSV format.
pub fn load_regions(path: impl AsRef<Path>) -> Result<Vec<RegionDef>, IngestError> {
    let path_str = path.as_ref().display().to_string();
    let source = fs::read_to_string(path.as_ref()).map_err(|e| IngestError::io(&path_str, e))?;
    load_regions_from_str(&path_str, &source)
}

pub fn load_regions_from_str(path: &str, source: &str) -> Result<Vec<RegionDef>, IngestError> {
    if source.trim_start().starts_with('{') {
        load_regions_geojson(path, source)
    } else {
        load_regions_csv(path, source)
    }
}
