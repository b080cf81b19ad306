//! Run configuration with the precedence CLI flags > config file >
//! defaults. The fully resolved configuration is dumped next to the
//! outputs so every artifact can be reproduced from its config alone.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use haze_core::ingest::BoundingBox;
use haze_core::mobility::PairingMode;
use haze_core::model::{DistanceMode, IsoWeekId, LocalCalendar};
use haze_core::temporal::{AreaFilter, AreaKind, WeekClassConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub posts: Option<PathBuf>,
    pub hotspots: Option<PathBuf>,
    pub regions: Option<PathBuf>,
    pub air_quality: Option<PathBuf>,
    /// Taxonomy rule file; the built-in fixture when absent.
    pub taxonomies: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub iterations: u32,
    pub tau: u32,
    pub rs_threshold: f64,
    pub week_bounds: (u64, u64),
    pub exclude_weeks: Vec<IsoWeekId>,
    pub evac_weeks: Vec<IsoWeekId>,
    pub utc_offset_minutes: i32,
    pub distance: DistanceMode,
    pub strict: bool,
    pub threads: Option<usize>,
    pub bbox: Option<BoundingBox>,
    /// Extra correlation areas beyond the implicit `all`.
    pub areas: Vec<AreaSpec>,
    pub home_region: Option<String>,
    pub subdistrict_region: Option<String>,
    pub day_range: Option<(NaiveDate, NaiveDate)>,
    pub pairing: PairingMode,
    pub bin_width_km: f64,
    pub distance_bins_km: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            posts: None,
            hotspots: None,
            regions: None,
            air_quality: None,
            taxonomies: None,
            out: PathBuf::from("out"),
            seed: 1,
            iterations: 1000,
            tau: haze_core::mobility::DEFAULT_TAU,
            rs_threshold: haze_core::mobility::DEFAULT_RS_THRESHOLD,
            week_bounds: (100, 400),
            exclude_weeks: Vec::new(),
            evac_weeks: vec![IsoWeekId::new(2014, 11)],
            utc_offset_minutes: haze_core::model::DEFAULT_UTC_OFFSET_MINUTES,
            distance: DistanceMode::Haversine,
            strict: false,
            threads: None,
            bbox: None,
            areas: Vec::new(),
            home_region: None,
            subdistrict_region: None,
            day_range: None,
            pairing: PairingMode::AllBaselines,
            bin_width_km: haze_core::spatial::DEFAULT_BIN_WIDTH_KM,
            distance_bins_km: haze_core::mobility::DEFAULT_DISTANCE_BIN_EDGES_KM.to_vec(),
        }
    }
}

/// A named geographic restriction, parsed from
/// `name=bbox:minlat,minlon,maxlat,maxlon` or `name=regions:code,...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaSpec {
    pub name: String,
    pub spec: String,
}

impl AreaSpec {
    pub fn parse(raw: &str) -> Result<Self> {
        let (name, spec) = raw
            .split_once('=')
            .with_context(|| format!("area {raw:?}: expected name=bbox:... or name=regions:..."))?;
        if name.is_empty() {
            bail!("area {raw:?}: empty name");
        }
        let area = Self {
            name: name.to_string(),
            spec: spec.to_string(),
        };
        area.to_filter()?; // validate eagerly
        Ok(area)
    }

    pub fn to_filter(&self) -> Result<AreaFilter> {
        let kind = if let Some(rest) = self.spec.strip_prefix("bbox:") {
            let vals = parse_f64_list(rest)?;
            if vals.len() != 4 {
                bail!("area {}: bbox needs minlat,minlon,maxlat,maxlon", self.name);
            }
            AreaKind::Bbox(BoundingBox {
                min_lat: vals[0],
                min_lon: vals[1],
                max_lat: vals[2],
                max_lon: vals[3],
            })
        } else if let Some(rest) = self.spec.strip_prefix("regions:") {
            let codes: Vec<String> = rest
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            if codes.is_empty() {
                bail!("area {}: empty region list", self.name);
            }
            AreaKind::Regions(codes)
        } else {
            bail!(
                "area {}: unknown spec {:?}, expected bbox:... or regions:...",
                self.name,
                self.spec
            );
        };
        Ok(AreaFilter {
            name: self.name.clone(),
            kind,
        })
    }
}

pub fn parse_f64_list(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("not a number: {s:?}"))
        })
        .collect()
}

pub fn parse_week_list(raw: &str) -> Result<Vec<IsoWeekId>> {
    let trimmed = raw.trim();
    if trimmed.is_empty() || trimmed == "none" {
        return Ok(Vec::new());
    }
    trimmed
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<IsoWeekId>()
                .map_err(|e| anyhow::anyhow!("{e}"))
        })
        .collect()
}

pub fn parse_week_bounds(raw: &str) -> Result<(u64, u64)> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 2 {
        bail!("--week-bounds expects lo,hi");
    }
    Ok((
        parts[0].trim().parse().context("bad low bound")?,
        parts[1].trim().parse().context("bad high bound")?,
    ))
}

pub fn parse_bbox(raw: &str) -> Result<BoundingBox> {
    let vals = parse_f64_list(raw)?;
    if vals.len() != 4 {
        bail!("--bbox expects minlat,minlon,maxlat,maxlon");
    }
    Ok(BoundingBox {
        min_lat: vals[0],
        min_lon: vals[1],
        max_lat: vals[2],
        max_lon: vals[3],
    })
}

pub fn parse_day_range(raw: &str) -> Result<(NaiveDate, NaiveDate)> {
    let (a, b) = raw
        .split_once(',')
        .context("--day-range expects start,end (ISO dates)")?;
    let start: NaiveDate = a.trim().parse().context("bad start date")?;
    let end: NaiveDate = b.trim().parse().context("bad end date")?;
    if start > end {
        bail!("--day-range start after end");
    }
    Ok((start, end))
}

impl RunConfig {
    pub fn calendar(&self) -> LocalCalendar {
        LocalCalendar::with_offset_minutes(self.utc_offset_minutes)
    }

    pub fn week_class_config(&self) -> WeekClassConfig {
        WeekClassConfig {
            low: self.week_bounds.0,
            high: self.week_bounds.1,
            excluded_weeks: self.exclude_weeks.iter().copied().collect::<BTreeSet<_>>(),
            evacuation_weeks: self.evac_weeks.iter().copied().collect::<BTreeSet<_>>(),
        }
    }

    pub fn area_filters(&self) -> Result<Vec<AreaFilter>> {
        let mut filters = vec![AreaFilter::all()];
        for spec in &self.areas {
            filters.push(spec.to_filter()?);
        }
        Ok(filters)
    }

    pub fn load_file(path: &PathBuf) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&raw)
            .with_context(|| format!("parsing config file {}", path.display()))?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn area_specs_parse_and_validate() {
        let a = AreaSpec::parse("riau=bbox:-2,99,3,104").unwrap();
        assert!(matches!(a.to_filter().unwrap().kind, AreaKind::Bbox(_)));
        let a = AreaSpec::parse("riau=regions:1471,1405").unwrap();
        assert!(matches!(a.to_filter().unwrap().kind, AreaKind::Regions(_)));
        assert!(AreaSpec::parse("riau").is_err());
        assert!(AreaSpec::parse("riau=circle:1").is_err());
        assert!(AreaSpec::parse("riau=bbox:1,2,3").is_err());
    }

    #[test]
    fn week_lists_parse() {
        assert_eq!(
            parse_week_list("2014-W11,2014-W12").unwrap(),
            vec![IsoWeekId::new(2014, 11), IsoWeekId::new(2014, 12)]
        );
        assert!(parse_week_list("none").unwrap().is_empty());
        assert!(parse_week_list("").unwrap().is_empty());
        assert!(parse_week_list("2014-11").is_err());
    }

    #[test]
    fn config_file_round_trips() {
        let config = RunConfig::default();
        let json = serde_json::to_string_pretty(&config).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn partial_config_file_uses_defaults() {
        let config: RunConfig = serde_json::from_str(r#"{"seed": 9, "tau": 6}"#).unwrap();
        assert_eq!(config.seed, 9);
        assert_eq!(config.tau, 6);
        assert_eq!(config.iterations, 1000);
        assert_eq!(config.week_bounds, (100, 400));
    }
}
