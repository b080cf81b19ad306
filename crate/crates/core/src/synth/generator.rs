//! Deterministic scenario generator. Every behavioral knob is planted
//! explicitly and recorded in a ground-truth manifest, so downstream
//! recovery tests read their expectations from the manifest instead of
//! hard-coding numbers.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{AirQualityClass, AirQualityRecord, RegionDef};
use crate::model::{Confidence, FireHotspot, GeoPoint, GeoPost, IsoWeekId};
use crate::ruledsl::CANONICAL_TAXONOMIES;
use crate::spatial::splitmix64;
use crate::temporal::{classify_week_count, WeekClassConfig, WeekLabel};

const KM_PER_DEGREE: f64 = 111.195;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("config error: {0}")]
    Config(String),
}

fn config_err<T>(message: impl Into<String>) -> Result<T, SynthError> {
    Err(SynthError::Config(message.into()))
}

/// Rectangular region grid: `rows x cols` cells, each optionally split
/// into a sub-district grid. Row `r` belongs to province `P<r>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGridConfig {
    pub min_lat: f64,
    pub min_lon: f64,
    pub rows: u32,
    pub cols: u32,
    pub cell_size_degrees: f64,
    pub subdistrict_rows: u32,
    pub subdistrict_cols: u32,
}

impl Default for RegionGridConfig {
    fn default() -> Self {
        Self {
            min_lat: -2.0,
            min_lon: 99.0,
            rows: 3,
            cols: 4,
            cell_size_degrees: 1.5,
            subdistrict_rows: 2,
            subdistrict_cols: 2,
        }
    }
}

/// Weekly counts of hotspots that survive the peatland + high-confidence
/// filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeeklyHotspotCounts {
    /// Used as given; cycled when shorter than the week axis.
    Explicit(Vec<u32>),
    /// Drawn uniformly from `min..=max` per week, per seed.
    UniformRandom { min: u32, max: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotspotProcessConfig {
    pub weekly_counts: WeeklyHotspotCounts,
    /// Extra rows per week failing the peatland filter.
    pub extra_non_peatland_per_week: u32,
    /// Extra peatland rows per week with low confidence.
    pub extra_low_confidence_per_week: u32,
}

impl Default for HotspotProcessConfig {
    fn default() -> Self {
        // One entry per week of the default date range (2014-W02..W14):
        // quiet January, a severe burst peaking around week 11, then calm.
        Self {
            weekly_counts: WeeklyHotspotCounts::Explicit(vec![
                30, 80, 250, 60, 320, 500, 610, 700, 450, 650, 90, 260, 55,
            ]),
            extra_non_peatland_per_week: 10,
            extra_low_confidence_per_week: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortConfig {
    pub count: u32,
    pub posts_per_user_per_week: u32,
    /// `Some(i)`: every user lives in region `i`; `None`: homes round-robin
    /// across the grid.
    pub home_region_index: Option<u32>,
    /// Ring radius of a user's ordinary weekly posting pattern.
    pub base_radius_km: f64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            count: 100,
            posts_per_user_per_week: 8,
            home_region_index: None,
            base_radius_km: 5.0,
        }
    }
}

/// Weekly topic counts constructed to hit a target correlation with the
/// weekly hotspot counts: standardized hotspot counts are mixed with unit
/// Gaussian noise using weight `target_rho` (so the noise weight is
/// `sqrt(1 - rho^2)`), then scaled to `weekly_mean`/`weekly_stdev`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedTopicConfig {
    pub taxonomy: String,
    pub target_rho: f64,
    pub weekly_mean: f64,
    pub weekly_stdev: f64,
}

/// Relocates a share of one topic's posts to within `radius_km` of a
/// uniformly chosen same-day (filtered) hotspot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationConfig {
    pub taxonomy: String,
    pub radius_km: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicConfig {
    /// Independent per-post injection probability per taxonomy.
    pub rates: BTreeMap<String, f64>,
    pub correlated: Option<CorrelatedTopicConfig>,
    pub concentration: Option<ConcentrationConfig>,
}

impl Default for TopicConfig {
    fn default() -> Self {
        Self {
            rates: [
                ("haze-general".to_string(), 0.05),
                ("haze-hashtag".to_string(), 0.01),
                ("haze-impact".to_string(), 0.02),
                ("haze-health".to_string(), 0.03),
            ]
            .into_iter()
            .collect(),
            correlated: None,
            concentration: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityBehaviorConfig {
    /// Share of users planted as reducers (exact count, seeded choice).
    pub reducer_fraction: f64,
    /// Reducers' ring-radius multiplier during severe weeks.
    pub severe_spread_multiplier: f64,
    /// Share of users whose weekly center shifts during severe weeks.
    pub shift_fraction: f64,
    /// Shift distance, applied toward the grid center.
    pub centroid_shift_km: f64,
}

impl Default for MobilityBehaviorConfig {
    fn default() -> Self {
        Self {
            reducer_fraction: 0.0,
            severe_spread_multiplier: 0.25,
            shift_fraction: 0.0,
            centroid_shift_km: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvacuationConfig {
    /// 0-based index into the scenario's week axis; the planted hotspot
    /// count there must classify severe under default bounds.
    pub week_index: u32,
    /// Total distinct regions the cohort visits on the evacuation day
    /// (the home region plus fanned-out destinations).
    pub fanout_regions: u32,
    pub fanout_user_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub regions: RegionGridConfig,
    pub hotspots: HotspotProcessConfig,
    pub users: CohortConfig,
    pub topics: TopicConfig,
    pub mobility: MobilityBehaviorConfig,
    pub evacuation: Option<EvacuationConfig>,
    pub generate_air_quality: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            start_date: NaiveDate::from_ymd_opt(2014, 1, 6).unwrap(),
            end_date: NaiveDate::from_ymd_opt(2014, 3, 30).unwrap(),
            regions: RegionGridConfig::default(),
            hotspots: HotspotProcessConfig::default(),
            users: CohortConfig::default(),
            topics: TopicConfig::default(),
            mobility: MobilityBehaviorConfig::default(),
            evacuation: None,
            generate_air_quality: true,
        }
    }
}

/// Everything planted, recorded for recovery tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub weeks: Vec<IsoWeekId>,
    /// Per-week planted counts of filter-surviving hotspots.
    pub weekly_hotspot_counts: Vec<u32>,
    /// Week labels implied by the default thresholds (100, 400).
    pub default_week_labels: Vec<String>,
    pub region_codes: Vec<String>,
    pub provinces: Vec<String>,
    pub n_users: u32,
    pub posts_per_user_per_week: u32,
    pub home_region_code: Option<String>,
    pub base_radius_km: f64,
    pub n_reducers: u32,
    pub reducer_fraction_planted: f64,
    pub severe_spread_multiplier: f64,
    pub n_shifted: u32,
    pub centroid_shift_km: f64,
    pub topic_rates: BTreeMap<String, f64>,
    pub correlated_topic: Option<CorrelatedTopicManifest>,
    pub concentration: Option<ConcentrationConfig>,
    pub evacuation: Option<EvacuationManifest>,
    pub totals: ScenarioTotals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedTopicManifest {
    pub taxonomy: String,
    pub target_rho: f64,
    pub mixing_weight: f64,
    pub noise_weight: f64,
    pub weekly_topic_counts: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvacuationManifest {
    pub week: IsoWeekId,
    pub date: NaiveDate,
    pub fanout_regions: u32,
    pub destination_codes: Vec<String>,
    pub n_fanned_users: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTotals {
    pub n_posts: u64,
    pub n_hotspot_rows: u64,
    pub n_hotspots_filtered: u64,
    pub n_air_quality_rows: u64,
}

/// A generated dataset plus its manifest. `hotspot_rows` includes the
/// chaff rows that the ingest filter drops.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub hotspot_rows: Vec<FireHotspot>,
    pub posts: Vec<GeoPost>,
    pub regions: Vec<RegionDef>,
    pub air_quality: Vec<AirQualityRecord>,
    pub manifest: GroundTruthManifest,
}

const NEUTRAL_TEMPLATES: [&str; 5] = [
    "selamat pagi dari kota ini",
    "jalan jalan sore bersama teman",
    "makan nasi goreng enak sekali",
    "menikmati kopi di warung favorit",
    "berkumpul bersama keluarga tercinta",
];

fn topic_fragment(taxonomy: &str) -> &'static str {
    match taxonomy {
        "haze-general" => "kabut asap tebal menyelimuti wilayah",
        "haze-hashtag" => "ayo dukung #melawanasap bersama",
        "haze-impact" => "penerbangan ditutup karena jarak pandang",
        "haze-health" => "banyak warga pakai masker hari ini",
        other => panic!("no text template for taxonomy {other:?}"),
    }
}

fn stream_rng(master: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut s = splitmix64(master ^ tag.wrapping_mul(0xA24B_AED4_963E_E407));
    s = splitmix64(s ^ index);
    ChaCha8Rng::seed_from_u64(s)
}

// Stream tags.
const T_HOTSPOT: u64 = 1;
const T_USER: u64 = 2;
const T_MEMBERSHIP: u64 = 3;
const T_TOPIC_RATE: u64 = 4;
const T_TOPIC_WEEK: u64 = 5;
const T_NOISE: u64 = 6;
const T_AIR: u64 = 7;
const T_CONCENTRATION: u64 = 8;
const T_FANOUT: u64 = 9;

struct Grid {
    config: RegionGridConfig,
    regions: Vec<RegionDef>,
}

impl Grid {
    fn n(&self) -> usize {
        self.regions.len()
    }

    fn cell_bounds(&self, index: usize) -> (f64, f64, f64, f64) {
        let c = &self.config;
        let row = index / c.cols as usize;
        let col = index % c.cols as usize;
        let lat0 = c.min_lat + row as f64 * c.cell_size_degrees;
        let lon0 = c.min_lon + col as f64 * c.cell_size_degrees;
        (lat0, lon0, lat0 + c.cell_size_degrees, lon0 + c.cell_size_degrees)
    }

    fn cell_center(&self, index: usize) -> GeoPoint {
        let (lat0, lon0, lat1, lon1) = self.cell_bounds(index);
        GeoPoint::new((lat0 + lat1) / 2.0, (lon0 + lon1) / 2.0).unwrap()
    }

    fn bbox(&self) -> (f64, f64, f64, f64) {
        let c = &self.config;
        (
            c.min_lat,
            c.min_lon,
            c.min_lat + c.rows as f64 * c.cell_size_degrees,
            c.min_lon + c.cols as f64 * c.cell_size_degrees,
        )
    }

    fn center(&self) -> GeoPoint {
        let (a, b, c, d) = self.bbox();
        GeoPoint::new((a + c) / 2.0, (b + d) / 2.0).unwrap()
    }

    fn clamp(&self, lat: f64, lon: f64) -> GeoPoint {
        let (min_lat, min_lon, max_lat, max_lon) = self.bbox();
        GeoPoint::new(lat.clamp(min_lat, max_lat), lon.clamp(min_lon, max_lon)).unwrap()
    }
}

fn build_grid(config: &RegionGridConfig) -> Result<Grid, SynthError> {
    if config.rows == 0 || config.cols == 0 {
        return config_err("region grid needs at least one cell");
    }
    if config.cell_size_degrees <= 0.0 {
        return config_err("cell size must be positive");
    }
    let max_lat = config.min_lat + config.rows as f64 * config.cell_size_degrees;
    let max_lon = config.min_lon + config.cols as f64 * config.cell_size_degrees;
    if config.min_lat < -90.0 || max_lat > 90.0 || config.min_lon < -180.0 || max_lon > 180.0 {
        return config_err("region grid exceeds valid coordinates");
    }
    let mut regions = Vec::new();
    for row in 0..config.rows {
        for col in 0..config.cols {
            let index = (row * config.cols + col) as usize;
            let code = format!("{}", 1401 + index);
            let lat0 = config.min_lat + row as f64 * config.cell_size_degrees;
            let lon0 = config.min_lon + col as f64 * config.cell_size_degrees;
            let s = config.cell_size_degrees;
            let ring = crate::ingest::PolygonRing::new(vec![
                GeoPoint::new(lat0, lon0).unwrap(),
                GeoPoint::new(lat0, lon0 + s).unwrap(),
                GeoPoint::new(lat0 + s, lon0 + s).unwrap(),
                GeoPoint::new(lat0 + s, lon0).unwrap(),
            ])
            .map_err(SynthError::Config)?;
            let mut subdistricts = Vec::new();
            if config.subdistrict_rows > 0 && config.subdistrict_cols > 0 {
                let sr = s / config.subdistrict_rows as f64;
                let sc = s / config.subdistrict_cols as f64;
                for i in 0..config.subdistrict_rows {
                    for j in 0..config.subdistrict_cols {
                        let a = lat0 + i as f64 * sr;
                        let b = lon0 + j as f64 * sc;
                        let sub_ring = crate::ingest::PolygonRing::new(vec![
                            GeoPoint::new(a, b).unwrap(),
                            GeoPoint::new(a, b + sc).unwrap(),
                            GeoPoint::new(a + sr, b + sc).unwrap(),
                            GeoPoint::new(a + sr, b).unwrap(),
                        ])
                        .map_err(SynthError::Config)?;
                        subdistricts.push((format!("S{i}{j}"), sub_ring));
                    }
                }
            }
            regions.push(RegionDef {
                code,
                province: format!("P{row}"),
                polygon: ring,
                subdistricts,
            });
        }
    }
    Ok(Grid {
        config: config.clone(),
        regions,
    })
}

fn in_range_days(week: IsoWeekId, start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    let monday = week.monday();
    (0..7)
        .map(|i| monday + chrono::Duration::days(i))
        .filter(|d| *d >= start && *d <= end)
        .collect()
}

/// Gaussian via Box-Muller on two uniform draws.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn ring_offset(center: GeoPoint, radius_km: f64, theta: f64) -> (f64, f64) {
    let dlat = radius_km * theta.cos() / KM_PER_DEGREE;
    let dlon = radius_km * theta.sin() / (KM_PER_DEGREE * center.lat().to_radians().cos());
    (center.lat() + dlat, center.lon() + dlon)
}

/// Moves `from` a fixed distance toward `toward` (continuing past it if
/// closer than the distance), so the displacement length is exact and the
/// result stays within the hull of the two neighborhoods.
fn shift_toward(from: GeoPoint, toward: GeoPoint, km: f64) -> (f64, f64) {
    let dlat = toward.lat() - from.lat();
    let dlon = (toward.lon() - from.lon()) * from.lat().to_radians().cos();
    let norm = (dlat * dlat + dlon * dlon).sqrt();
    let (ux, uy) = if norm < 1e-12 { (1.0, 0.0) } else { (dlat / norm, dlon / norm) };
    let lat = from.lat() + ux * km / KM_PER_DEGREE;
    let lon = from.lon() + uy * km / (KM_PER_DEGREE * from.lat().to_radians().cos());
    (lat, lon)
}

/// Seeded choice of exactly `n` distinct indices out of `0..total`.
fn planted_subset(master: u64, tag: u64, total: usize, n: usize) -> Vec<usize> {
    let mut rng = stream_rng(master, tag, 0);
    let mut indices: Vec<usize> = (0..total).collect();
    for i in 0..total.saturating_sub(1) {
        let j = rng.gen_range(i..total);
        indices.swap(i, j);
    }
    let mut chosen: Vec<usize> = indices.into_iter().take(n).collect();
    chosen.sort_unstable();
    chosen
}

fn validate(config: &ScenarioConfig) -> Result<(), SynthError> {
    if config.start_date > config.end_date {
        return config_err("start date after end date");
    }
    if config.users.count == 0 || config.users.posts_per_user_per_week == 0 {
        return config_err("cohort needs at least one user and one post per week");
    }
    if config.users.base_radius_km <= 0.0 {
        return config_err("base radius must be positive");
    }
    for (name, rate) in &config.topics.rates {
        if !CANONICAL_TAXONOMIES.contains(&name.as_str()) {
            return config_err(format!("no text template for taxonomy {name:?}"));
        }
        if !(0.0..=1.0).contains(rate) {
            return config_err(format!("rate for {name:?} outside [0, 1]"));
        }
    }
    if let Some(c) = &config.topics.correlated {
        if !CANONICAL_TAXONOMIES.contains(&c.taxonomy.as_str()) {
            return config_err(format!("no text template for taxonomy {:?}", c.taxonomy));
        }
        if !(0.0..=1.0).contains(&c.target_rho) {
            return config_err("target rho outside [0, 1]");
        }
        if c.weekly_mean <= 0.0 || c.weekly_stdev < 0.0 {
            return config_err("correlated topic needs positive weekly mean");
        }
    }
    if let Some(c) = &config.topics.concentration {
        if !CANONICAL_TAXONOMIES.contains(&c.taxonomy.as_str()) {
            return config_err(format!("unknown concentration taxonomy {:?}", c.taxonomy));
        }
        if c.radius_km <= 0.0 || !(0.0..=1.0).contains(&c.fraction) {
            return config_err("concentration needs positive radius and fraction in [0, 1]");
        }
    }
    let m = &config.mobility;
    if !(0.0..=1.0).contains(&m.reducer_fraction) || !(0.0..=1.0).contains(&m.shift_fraction) {
        return config_err("mobility fractions must lie in [0, 1]");
    }
    if m.severe_spread_multiplier <= 0.0 {
        return config_err("spread multiplier must be positive");
    }
    if config.evacuation.is_some() && m.shift_fraction > 0.0 {
        return config_err("evacuation fan-out and centroid shift cannot be combined");
    }
    // Homes are padded away from cell edges so ordinary rings stay inside
    // the home region.
    let margin_deg = 1.5 * config.users.base_radius_km / KM_PER_DEGREE;
    if 2.0 * margin_deg >= config.regions.cell_size_degrees {
        return config_err("base radius too large for the region cell size");
    }
    Ok(())
}

pub fn generate(config: &ScenarioConfig) -> Result<Scenario, SynthError> {
    validate(config)?;
    let grid = build_grid(&config.regions)?;
    let seed = config.seed;
    let weeks = IsoWeekId::range_inclusive(
        IsoWeekId::from_date(config.start_date),
        IsoWeekId::from_date(config.end_date),
    );
    let n_weeks = weeks.len();
    let default_bounds = WeekClassConfig::default();

    // Planted weekly hotspot counts (filter-surviving).
    let weekly_counts: Vec<u32> = match &config.hotspots.weekly_counts {
        WeeklyHotspotCounts::Explicit(counts) => {
            if counts.is_empty() {
                return config_err("explicit weekly hotspot counts are empty");
            }
            (0..n_weeks).map(|i| counts[i % counts.len()]).collect()
        }
        WeeklyHotspotCounts::UniformRandom { min, max } => {
            if min > max {
                return config_err("weekly hotspot range has min > max");
            }
            let mut rng = stream_rng(seed, T_HOTSPOT, u64::MAX);
            (0..n_weeks).map(|_| rng.gen_range(*min..=*max)).collect()
        }
    };
    let week_labels: Vec<WeekLabel> = weekly_counts
        .iter()
        .map(|&c| classify_week_count(c as u64, &default_bounds))
        .collect();

    // Hotspot rows, week-major.
    let (min_lat, min_lon, max_lat, max_lon) = grid.bbox();
    let mut hotspot_rows = Vec::new();
    let mut hotspot_seq = 0u64;
    for (wi, week) in weeks.iter().enumerate() {
        let days = in_range_days(*week, config.start_date, config.end_date);
        let mut rng = stream_rng(seed, T_HOTSPOT, wi as u64);
        let mut push = |rng: &mut ChaCha8Rng, seq: &mut u64, peat: bool, conf: Confidence| {
            let date = days[rng.gen_range(0..days.len())];
            let lat = rng.gen_range(min_lat..max_lat);
            let lon = rng.gen_range(min_lon..max_lon);
            hotspot_rows.push(FireHotspot {
                id: format!("h{seq:06}"),
                date,
                location: GeoPoint::new(lat, lon).unwrap(),
                confidence: conf,
                peatland: peat,
            });
            *seq += 1;
        };
        for _ in 0..weekly_counts[wi] {
            push(&mut rng, &mut hotspot_seq, true, Confidence::High);
        }
        for _ in 0..config.hotspots.extra_non_peatland_per_week {
            let conf = if rng.gen_bool(0.5) { Confidence::High } else { Confidence::Low };
            push(&mut rng, &mut hotspot_seq, false, conf);
        }
        for _ in 0..config.hotspots.extra_low_confidence_per_week {
            push(&mut rng, &mut hotspot_seq, true, Confidence::Low);
        }
    }
    let filtered: Vec<&FireHotspot> = hotspot_rows
        .iter()
        .filter(|h| h.peatland && h.confidence == Confidence::High)
        .collect();

    // Behavioral memberships, planted by exact count.
    let n_users = config.users.count as usize;
    let n_reducers = (config.mobility.reducer_fraction * n_users as f64).round() as usize;
    let reducers: std::collections::BTreeSet<usize> =
        planted_subset(seed, T_MEMBERSHIP, n_users, n_reducers)
            .into_iter()
            .collect();
    let n_shifted = (config.mobility.shift_fraction * n_users as f64).round() as usize;
    let shifted: std::collections::BTreeSet<usize> =
        planted_subset(seed, T_MEMBERSHIP.wrapping_add(100), n_users, n_shifted)
            .into_iter()
            .collect();

    // Evacuation plan.
    let evac = match &config.evacuation {
        None => None,
        Some(e) => {
            if e.week_index as usize >= n_weeks {
                return config_err("evacuation week index outside the week axis");
            }
            if weekly_counts[e.week_index as usize] as u64 <= default_bounds.high {
                return config_err(
                    "evacuation week must be planted severe (count above the high bound)",
                );
            }
            let k = e.fanout_regions as usize;
            if k == 0 || k > grid.n() {
                return config_err("fan-out region count outside 1..=grid size");
            }
            let home_index = config.users.home_region_index.unwrap_or(0) as usize;
            if config.users.home_region_index.is_none() && grid.n() > 1 {
                // Fan-out accounting needs one fixed home region.
                return config_err("evacuation fan-out requires home_region_index");
            }
            let n_fanned = (e.fanout_user_fraction * n_users as f64).round() as usize;
            if n_fanned < k {
                return config_err(format!(
                    "fan-out needs at least {k} fanned users, planted {n_fanned}"
                ));
            }
            let days = in_range_days(weeks[e.week_index as usize], config.start_date, config.end_date);
            let date = days[days.len().min(4) - 1]; // Thursday when the week is whole
            let mut others: Vec<usize> = (0..grid.n()).filter(|i| *i != home_index).collect();
            let mut rng = stream_rng(seed, T_FANOUT, 0);
            for i in 0..others.len().saturating_sub(1) {
                let j = rng.gen_range(i..others.len());
                others.swap(i, j);
            }
            let mut destinations = vec![home_index];
            destinations.extend(others.into_iter().take(k - 1));
            let fanned: std::collections::BTreeSet<usize> =
                planted_subset(seed, T_FANOUT.wrapping_add(100), n_users, n_fanned)
                    .into_iter()
                    .collect();
            Some((e.clone(), date, destinations, fanned))
        }
    };

    // Posts, user-major.
    if let Some(i) = config.users.home_region_index {
        if i as usize >= grid.n() {
            return config_err("home region index outside the grid");
        }
    }
    let margin_deg = 1.5 * config.users.base_radius_km / KM_PER_DEGREE;
    let k_posts = config.users.posts_per_user_per_week as usize;
    let mut posts: Vec<GeoPost> = Vec::with_capacity(n_users * n_weeks * k_posts);
    let mut week_post_indices: Vec<Vec<usize>> = vec![Vec::new(); n_weeks];
    let mut post_seq = 0u64;
    for u in 0..n_users {
        let mut rng = stream_rng(seed, T_USER, u as u64);
        let home_index = config
            .users
            .home_region_index
            .map(|i| i as usize)
            .unwrap_or(u % grid.n());
        let (lat0, lon0, lat1, lon1) = grid.cell_bounds(home_index);
        let home = GeoPoint::new(
            rng.gen_range(lat0 + margin_deg..lat1 - margin_deg),
            rng.gen_range(lon0 + margin_deg..lon1 - margin_deg),
        )
        .unwrap();
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let is_reducer = reducers.contains(&u);
        let is_shifted = shifted.contains(&u);
        let (is_fanned, destination) = match &evac {
            Some((_, _, destinations, fanned)) if fanned.contains(&u) => {
                let fanned_rank = fanned.range(..u).count();
                (true, Some(destinations[fanned_rank % destinations.len()]))
            }
            _ => (false, None),
        };

        for (wi, week) in weeks.iter().enumerate() {
            let severe = week_labels[wi] == WeekLabel::SevereHaze;
            let radius = if severe && is_reducer {
                config.users.base_radius_km * config.mobility.severe_spread_multiplier
            } else {
                config.users.base_radius_km
            };
            let center = if severe && is_shifted {
                let (lat, lon) = shift_toward(home, grid.center(), config.mobility.centroid_shift_km);
                grid.clamp(lat, lon)
            } else {
                home
            };
            let days = in_range_days(*week, config.start_date, config.end_date);
            for j in 0..k_posts {
                let day = days[j * days.len() / k_posts];
                let on_evac_day = matches!(&evac, Some((_, date, _, _)) if *date == day);
                let location = if on_evac_day {
                    if is_fanned {
                        let dest = destination.expect("fanned user has a destination");
                        let theta = phase + std::f64::consts::TAU * j as f64 / k_posts as f64;
                        let (lat, lon) = ring_offset(
                            grid.cell_center(dest),
                            config.users.base_radius_km,
                            theta,
                        );
                        GeoPoint::new(lat, lon).unwrap()
                    } else {
                        // All non-fanned users stay exactly at home scale
                        // on the evacuation day.
                        let theta = phase + std::f64::consts::TAU * j as f64 / k_posts as f64;
                        let (lat, lon) = ring_offset(home, radius, theta);
                        GeoPoint::new(lat, lon).unwrap()
                    }
                } else {
                    let theta = phase + std::f64::consts::TAU * j as f64 / k_posts as f64;
                    let (lat, lon) = ring_offset(center, radius, theta);
                    grid.clamp(lat, lon)
                };
                let hour = 8 + (j % 12) as u32;
                let minute = ((u * 7 + j * 13) % 60) as u32;
                posts.push(GeoPost {
                    id: format!("p{post_seq:08}"),
                    user_id: format!("u{u:05}"),
                    timestamp: chrono::DateTime::parse_from_rfc3339(&format!(
                        "{day}T{hour:02}:{minute:02}:00+07:00"
                    ))
                    .unwrap(),
                    location,
                    text: String::new(),
                    source: if (u + j) % 3 == 0 {
                        "Twitter Web Client".to_string()
                    } else {
                        "Twitter for Android".to_string()
                    },
                });
                week_post_indices[wi].push(posts.len() - 1);
                post_seq += 1;
            }
        }
    }

    // Topic injection. Ground truth is exact: a post matches a taxonomy
    // iff its fragment was appended.
    let mut topics_of: Vec<Vec<&str>> = vec![Vec::new(); posts.len()];
    let correlated_manifest = match &config.topics.correlated {
        None => None,
        Some(c) => {
            let mean_h = weekly_counts.iter().map(|&v| v as f64).sum::<f64>() / n_weeks as f64;
            let var_h = weekly_counts
                .iter()
                .map(|&v| (v as f64 - mean_h).powi(2))
                .sum::<f64>()
                / n_weeks as f64;
            if var_h == 0.0 {
                return config_err("correlated topic needs varying weekly hotspot counts");
            }
            let sd_h = var_h.sqrt();
            let noise_weight = (1.0 - c.target_rho * c.target_rho).sqrt();
            let mut noise_rng = stream_rng(seed, T_NOISE, 0);
            let mut weekly_topic_counts = Vec::with_capacity(n_weeks);
            for (wi, &h) in weekly_counts.iter().enumerate() {
                let h_std = (h as f64 - mean_h) / sd_h;
                let z = standard_normal(&mut noise_rng);
                let mixed = c.target_rho * h_std + noise_weight * z;
                let t = (c.weekly_mean + c.weekly_stdev * mixed).round().max(0.0) as u32;
                let capacity = week_post_indices[wi].len() as u32;
                if t > capacity {
                    return config_err(format!(
                        "week {}: planted topic count {t} exceeds the week's {capacity} posts",
                        weeks[wi]
                    ));
                }
                weekly_topic_counts.push(t);
            }
            for (wi, &t) in weekly_topic_counts.iter().enumerate() {
                let pool = &week_post_indices[wi];
                let mut rng = stream_rng(seed, T_TOPIC_WEEK, wi as u64);
                let chosen = rand::seq::index::sample(&mut rng, pool.len(), t as usize);
                for i in chosen.iter() {
                    topics_of[pool[i]].push(c.taxonomy.as_str());
                }
            }
            Some(CorrelatedTopicManifest {
                taxonomy: c.taxonomy.clone(),
                target_rho: c.target_rho,
                mixing_weight: c.target_rho,
                noise_weight,
                weekly_topic_counts,
            })
        }
    };
    for (taxonomy, &rate) in &config.topics.rates {
        if rate == 0.0 {
            continue;
        }
        let mut rng = stream_rng(seed, T_TOPIC_RATE, taxonomy.len() as u64);
        for (i, topics) in topics_of.iter_mut().enumerate() {
            let _ = i;
            if rng.gen_bool(rate) && !topics.contains(&taxonomy.as_str()) {
                topics.push(taxonomy.as_str());
            }
        }
    }
    let mut neutral_rng = stream_rng(seed, T_TOPIC_RATE, u64::MAX);
    for (post, topics) in posts.iter_mut().zip(&mut topics_of) {
        topics.sort_unstable();
        let mut text = NEUTRAL_TEMPLATES[neutral_rng.gen_range(0..NEUTRAL_TEMPLATES.len())]
            .to_string();
        for t in topics.iter() {
            text.push(' ');
            text.push_str(topic_fragment(t));
        }
        post.text = text;
    }

    // Spatial concentration of one topic near same-day hotspots.
    if let Some(c) = &config.topics.concentration {
        let mut by_day: BTreeMap<NaiveDate, Vec<GeoPoint>> = BTreeMap::new();
        for h in &filtered {
            by_day.entry(h.date).or_default().push(h.location);
        }
        let topic_posts: Vec<usize> = topics_of
            .iter()
            .enumerate()
            .filter(|(_, t)| t.contains(&c.taxonomy.as_str()))
            .map(|(i, _)| i)
            .collect();
        let n_conc = (c.fraction * topic_posts.len() as f64).round() as usize;
        let chosen = planted_subset(seed, T_CONCENTRATION, topic_posts.len(), n_conc);
        let mut rng = stream_rng(seed, T_CONCENTRATION, 1);
        for local in chosen {
            let idx = topic_posts[local];
            let day = posts[idx].timestamp.date_naive();
            let Some(day_hotspots) = by_day.get(&day) else {
                continue; // no filtered hotspot that day, leave in place
            };
            let anchor = day_hotspots[rng.gen_range(0..day_hotspots.len())];
            let r = c.radius_km * rng.gen_range(0.0f64..1.0).sqrt();
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            let (lat, lon) = ring_offset(anchor, r, theta);
            posts[idx].location = grid.clamp(lat, lon);
        }
    }

    // Air quality: class weighted by the day's week label.
    let mut air_quality = Vec::new();
    if config.generate_air_quality {
        let week_of_day = |d: NaiveDate| weeks.iter().position(|w| *w == IsoWeekId::from_date(d));
        for (ri, region) in grid.regions.iter().enumerate() {
            let mut rng = stream_rng(seed, T_AIR, ri as u64);
            let mut day = config.start_date;
            while day <= config.end_date {
                let label = week_of_day(day).map(|wi| week_labels[wi]);
                let class = if rng.gen_bool(0.1) {
                    AirQualityClass::Missing
                } else {
                    match label {
                        Some(WeekLabel::SevereHaze) => {
                            if rng.gen_bool(0.6) {
                                AirQualityClass::Black
                            } else {
                                AirQualityClass::Red
                            }
                        }
                        Some(WeekLabel::Haze) => {
                            if rng.gen_bool(0.5) {
                                AirQualityClass::Yellow
                            } else {
                                AirQualityClass::Red
                            }
                        }
                        _ => {
                            if rng.gen_bool(0.5) {
                                AirQualityClass::Green
                            } else {
                                AirQualityClass::Blue
                            }
                        }
                    }
                };
                air_quality.push(AirQualityRecord {
                    region_code: region.code.clone(),
                    date: day,
                    class,
                });
                day += chrono::Duration::days(1);
            }
        }
    }

    let manifest = GroundTruthManifest {
        schema_version: 1,
        seed,
        start_date: config.start_date,
        end_date: config.end_date,
        weeks: weeks.clone(),
        weekly_hotspot_counts: weekly_counts,
        default_week_labels: week_labels.iter().map(|l| l.as_str().to_string()).collect(),
        region_codes: grid.regions.iter().map(|r| r.code.clone()).collect(),
        provinces: grid.regions.iter().map(|r| r.province.clone()).collect(),
        n_users: config.users.count,
        posts_per_user_per_week: config.users.posts_per_user_per_week,
        home_region_code: config
            .users
            .home_region_index
            .map(|i| grid.regions[i as usize].code.clone()),
        base_radius_km: config.users.base_radius_km,
        n_reducers: n_reducers as u32,
        reducer_fraction_planted: n_reducers as f64 / n_users as f64,
        severe_spread_multiplier: config.mobility.severe_spread_multiplier,
        n_shifted: n_shifted as u32,
        centroid_shift_km: config.mobility.centroid_shift_km,
        topic_rates: config.topics.rates.clone(),
        correlated_topic: correlated_manifest,
        concentration: config.topics.concentration.clone(),
        evacuation: evac.as_ref().map(|(e, date, destinations, fanned)| EvacuationManifest {
            week: weeks[e.week_index as usize],
            date: *date,
            fanout_regions: e.fanout_regions,
            destination_codes: destinations
                .iter()
                .map(|&i| grid.regions[i].code.clone())
                .collect(),
            n_fanned_users: fanned.len() as u32,
        }),
        totals: ScenarioTotals {
            n_posts: posts.len() as u64,
            n_hotspot_rows: hotspot_rows.len() as u64,
            n_hotspots_filtered: filtered.len() as u64,
            n_air_quality_rows: air_quality.len() as u64,
        },
    };

    Ok(Scenario {
        hotspot_rows,
        posts,
        regions: grid.regions,
        air_quality,
        manifest,
    })
}

/// Output paths of a written scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPaths {
    pub hotspots: PathBuf,
    pub posts: PathBuf,
    pub regions: PathBuf,
    pub air_quality: Option<PathBuf>,
    pub manifest: PathBuf,
}

/// Serializes the scenario in the exact ingest formats.
pub fn write_scenario(scenario: &Scenario, dir: &Path) -> io::Result<ScenarioPaths> {
    fs::create_dir_all(dir)?;

    let mut hotspots = String::from("id,date,lat,lon,confidence,peatland\n");
    for h in &scenario.hotspot_rows {
        hotspots.push_str(&format!(
            "{},{},{},{},{},{}\n",
            h.id,
            h.date,
            h.location.lat(),
            h.location.lon(),
            match h.confidence {
                Confidence::High => "high",
                Confidence::Low => "low",
            },
            h.peatland
        ));
    }
    let hotspots_path = dir.join("hotspots.csv");
    fs::write(&hotspots_path, hotspots)?;

    let mut posts = String::from("id,user_id,timestamp,lat,lon,source,text\n");
    for p in &scenario.posts {
        posts.push_str(&crate::ingest::format_post_line(p));
        posts.push('\n');
    }
    let posts_path = dir.join("posts.csv");
    fs::write(&posts_path, posts)?;

    let mut regions = String::from("code,province,subdistrict,coordinates\n");
    for r in &scenario.regions {
        let ring = |vertices: &[GeoPoint]| {
            vertices
                .iter()
                .map(|v| format!("{},{}", v.lat(), v.lon()))
                .collect::<Vec<_>>()
                .join(",")
        };
        regions.push_str(&format!(
            "{},{},,{}\n",
            r.code,
            r.province,
            ring(r.polygon.vertices())
        ));
        for (name, sub) in &r.subdistricts {
            regions.push_str(&format!(
                "{},{},{},{}\n",
                r.code,
                r.province,
                name,
                ring(sub.vertices())
            ));
        }
    }
    let regions_path = dir.join("regions.csv");
    fs::write(&regions_path, regions)?;

    let air_quality_path = if scenario.air_quality.is_empty() {
        None
    } else {
        let mut air = String::from("region_code,date,class\n");
        for rec in &scenario.air_quality {
            air.push_str(&format!("{},{},{}\n", rec.region_code, rec.date, rec.class.code()));
        }
        let path = dir.join("air_quality.csv");
        fs::write(&path, air)?;
        Some(path)
    };

    let manifest_path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&scenario.manifest).expect("manifest serializes");
    fs::write(&manifest_path, json + "\n")?;

    Ok(ScenarioPaths {
        hotspots: hotspots_path,
        posts: posts_path,
        regions: regions_path,
        air_quality: air_quality_path,
        manifest: manifest_path,
    })
}
