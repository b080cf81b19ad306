//! Hotspot CSV reader with the peatland / confidence filter applied while
//! streaming. Header: `id,date,lat,lon,confidence,peatland`.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{IngestError, ParseMode};
use crate::model::{Confidence, FireHotspot, GeoPoint};

/// Which rows survive loading. Both filters on reproduces the upstream
/// "peatland hotspot, high confidence" selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HotspotFilter {
    pub peatland_only: bool,
    pub high_confidence_only: bool,
}

impl Default for HotspotFilter {
    fn default() -> Self {
        Self {
            peatland_only: true,
            high_confidence_only: true,
        }
    }
}

impl HotspotFilter {
    pub fn none() -> Self {
        Self {
            peatland_only: false,
            high_confidence_only: false,
        }
    }
}

/// Row counts observed while loading. Filtering is monotone:
/// `after_confidence_filter <= after_peat_filter <= total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HotspotReport {
    pub total: u64,
    pub malformed: u64,
    pub after_peat_filter: u64,
    pub after_confidence_filter: u64,
}

fn parse_row(
    path: &str,
    line_no: usize,
    line: &str,
    seen_ids: &mut std::collections::HashSet<String>,
) -> Result<FireHotspot, IngestError> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 6 {
        return Err(IngestError::format(
            path,
            line_no,
            "row",
            format!("expected 6 fields, found {}", fields.len()),
        ));
    }
    let id = fields[0].trim();
    if id.is_empty() {
        return Err(IngestError::format(path, line_no, "id", "empty id"));
    }
    if !seen_ids.insert(id.to_string()) {
        return Err(IngestError::DuplicateKey {
            path: path.to_string(),
            line: line_no,
            key: id.to_string(),
        });
    }
    let date = NaiveDate::parse_from_str(fields[1].trim(), "%Y-%m-%d")
        .map_err(|e| IngestError::format(path, line_no, "date", e.to_string()))?;
    let lat: f64 = fields[2]
        .trim()
        .parse()
        .map_err(|_| IngestError::format(path, line_no, "lat", "not a number"))?;
    let lon: f64 = fields[3]
        .trim()
        .parse()
        .map_err(|_| IngestError::format(path, line_no, "lon", "not a number"))?;
    let location = GeoPoint::new(lat, lon)
        .map_err(|e| IngestError::format(path, line_no, "lat/lon", e.to_string()))?;
    let confidence = match fields[4].trim().to_ascii_lowercase().as_str() {
        "high" => Confidence::High,
        "low" => Confidence::Low,
        other => {
            return Err(IngestError::format(
                path,
                line_no,
                "confidence",
                format!("expected high or low, found {other:?}"),
            ))
        }
    };
    let peatland = match fields[5].trim().to_ascii_lowercase().as_str() {
        "true" => true,
        "false" => false,
        other => {
            return Err(IngestError::format(
                path,
                line_no,
                "peatland",
                format!("expected true or false, found {other:?}"),
            ))
        }
    };
    Ok(FireHotspot {
        id: id.to_string(),
        date,
        location,
        confidence,
        peatland,
    })
}

/// Loads hotspots, dropping and counting rows that fail the filter.
pub fn load_hotspots(
    path: impl AsRef<Path>,
    filter: HotspotFilter,
    mode: ParseMode,
) -> Result<(Vec<FireHotspot>, HotspotReport), IngestError> {
    let path_str = path.as_ref().display().to_string();
    let file = File::open(path.as_ref()).map_err(|e| IngestError::io(&path_str, e))?;
    let reader = BufReader::new(file);

    let mut report = HotspotReport::default();
    let mut out = Vec::new();
    let mut seen_ids = std::collections::HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| IngestError::io(&path_str, e))?;
        let line_no = idx + 1;
        if idx == 0 && line.starts_with("id,") {
            continue; // header
        }
        if line.trim().is_empty() {
            continue;
        }
        report.total += 1;
        let hotspot = match parse_row(&path_str, line_no, &line, &mut seen_ids) {
            Ok(h) => h,
            Err(e) => match mode {
                ParseMode::Strict => return Err(e),
                ParseMode::Lenient => {
                    report.malformed += 1;
                    continue;
                }
            },
        };
        if filter.peatland_only && !hotspot.peatland {
            continue;
        }
        report.after_peat_filter += 1;
        if filter.high_confidence_only && hotspot.confidence != Confidence::High {
            continue;
        }
        report.after_confidence_filter += 1;
        out.push(hotspot);
    }
    Ok((out, report))
}
