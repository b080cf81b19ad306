//! Daily air-quality class table keyed by (region code, date).
//! CSV format: `region_code,date,class` with class codes G (green, best),
//! BL (blue), Y (yellow), R (red), B (black, worst); `-`, `–`, or an empty
//! cell means no published value.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::IngestError;

/// Ordered from best to worst air quality. `Missing` compares lowest so
/// ordering stays total, but callers should treat it as "no data".
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum AirQualityClass {
    Missing,
    Green,
    Blue,
    Yellow,
    Red,
    Black,
}

impl AirQualityClass {
    pub fn parse(code: &str) -> Option<Self> {
        match code.trim().to_ascii_uppercase().as_str() {
            "G" | "GREEN" => Some(Self::Green),
            "BL" | "BLUE" => Some(Self::Blue),
            "Y" | "YELLOW" => Some(Self::Yellow),
            "R" | "RED" => Some(Self::Red),
            "B" | "BLACK" => Some(Self::Black),
            "" | "-" | "–" | "MISSING" => Some(Self::Missing),
            _ => None,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Self::Green => "G",
            Self::Blue => "BL",
            Self::Yellow => "Y",
            Self::Red => "R",
            Self::Black => "B",
            Self::Missing => "-",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AirQualityRecord {
    pub region_code: String,
    pub date: NaiveDate,
    pub class: AirQualityClass,
}

/// Lookup table; absent cells read as `Missing`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AirQualityTable {
    cells: BTreeMap<(String, NaiveDate), AirQualityClass>,
}

impl AirQualityTable {
    pub fn get(&self, region_code: &str, date: NaiveDate) -> AirQualityClass {
        self.cells
            .get(&(region_code.to_string(), date))
            .copied()
            .unwrap_or(AirQualityClass::Missing)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, NaiveDate), &AirQualityClass)> {
        self.cells.iter()
    }
}

pub fn load_air_quality(path: impl AsRef<Path>) -> Result<AirQualityTable, IngestError> {
    let path_str = path.as_ref().display().to_string();
    let source = fs::read_to_string(path.as_ref()).map_err(|e| IngestError::io(&path_str, e))?;
    load_air_quality_from_str(&path_str, &source)
}

pub fn load_air_quality_from_str(
    path: &str,
    source: &str,
) -> Result<AirQualityTable, IngestError> {
    let mut table = AirQualityTable::default();
    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with("region_code,") || line.starts_with("# ") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(IngestError::format(
                path,
                line_no,
                "row",
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let region_code = fields[0].trim().to_string();
        let date = NaiveDate::parse_from_str(fields[1].trim(), "%Y-%m-%d")
            .map_err(|e| IngestError::format(path, line_no, "date", e.to_string()))?;
        let class = AirQualityClass::parse(fields[2]).ok_or_else(|| {
            IngestError::format(
                path,
                line_no,
                "class",
                format!("unknown class {:?}", fields[2].trim()),
            )
        })?;
        let key = (region_code.clone(), date);
        if table.cells.contains_key(&key) {
            return Err(IngestError::DuplicateKey {
                path: path.to_string(),
                line: line_no,
                key: format!("({region_code}, {date})"),
            });
        }
        table.cells.insert(key, class);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn parses_reference_cells() {
        let table = load_air_quality_from_str(
            "mem",
            "1471,2014-02-26,Y\n1405,2014-03-15,R\n1408,2014-03-17,BL\n",
        )
        .unwrap();
        assert_eq!(table.get("1471", date(2014, 2, 26)), AirQualityClass::Yellow);
        assert_eq!(table.get("1405", date(2014, 3, 15)), AirQualityClass::Red);
        assert_eq!(table.get("1408", date(2014, 3, 17)), AirQualityClass::Blue);
    }

    #[test]
    fn absent_cell_is_missing() {
        let table = load_air_quality_from_str("mem", "1471,2014-02-26,Y\n").unwrap();
        assert_eq!(table.get("1471", date(2014, 2, 27)), AirQualityClass::Missing);
        assert_eq!(table.get("1405", date(2014, 2, 26)), AirQualityClass::Missing);
    }

    #[test]
    fn dash_cell_is_missing() {
        let table =
            load_air_quality_from_str("mem", "1401,2014-02-26,-\n1402,2014-02-26,–\n").unwrap();
        assert_eq!(table.get("1401", date(2014, 2, 26)), AirQualityClass::Missing);
        assert_eq!(table.get("1402", date(2014, 2, 26)), AirQualityClass::Missing);
    }

    #[test]
    fn duplicate_key_is_error() {
        let err =
            load_air_quality_from_str("mem", "1471,2014-02-26,Y\n1471,2014-02-26,G\n").unwrap_err();
        assert!(matches!(err, IngestError::DuplicateKey { .. }));
    }

    #[test]
    fn class_ordering_is_total_best_to_worst() {
        use AirQualityClass::*;
        assert!(Green < Blue && Blue < Yellow && Yellow < Red && Red < Black);
    }

    #[test]
    fn unknown_class_is_format_error() {
        let err = load_air_quality_from_str("mem", "1471,2014-02-26,Q\n").unwrap_err();
        assert!(matches!(err, IngestError::Format { .. }));
    }
}
