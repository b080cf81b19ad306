//! Per-user weekly mobility metrics and the derived cohort analytics:
//! centroid-distance CDFs per haze situation, mobility-reduction rates,
//! home-region inference, region/sub-district visit diversity, and daily
//! meta-signal counts.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{assign_region, AirQualityTable, RegionDef};
use crate::model::{local_day, local_week, DistanceMode, GeoPoint, GeoPost, IsoWeekId,
    LocalCalendar};
use crate::ruledsl::RuleExpr;
use crate::temporal::{WeekClass, WeekLabel};

#[derive(Debug, Error, PartialEq)]
pub enum MobilityError {
    #[error("no week pairs for situation {0}")]
    EmptyClass(&'static str),
    #[error("region {0} has no sub-district geometry")]
    MissingSubdistricts(String),
    #[error("config error: {0}")]
    Config(String),
}

/// Default eligibility threshold: a user-week needs strictly more than
/// this many posts.
pub const DEFAULT_TAU: u32 = 4;

/// Default reducer threshold on relative spread.
pub const DEFAULT_RS_THRESHOLD: f64 = 1.0 / 3.0;

/// Centroid and spread of one eligible user-week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekStat {
    pub post_count: u32,
    pub centroid: GeoPoint,
    pub spread_km: f64,
}

/// Per-user mobility profile over eligible weeks (post count > tau).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityProfile {
    pub user_id: String,
    pub weeks: BTreeMap<IsoWeekId, WeekStat>,
}

fn week_stat(posts: &[&GeoPost], mode: DistanceMode) -> WeekStat {
    // All posts at one location: centroid is that location and the spread
    // is exactly zero (averaging identical coordinates may not round back
    // to the input value).
    if posts.iter().all(|p| p.location == posts[0].location) {
        return WeekStat {
            post_count: posts.len() as u32,
            centroid: posts[0].location,
            spread_km: 0.0,
        };
    }
    let n = posts.len() as f64;
    let mean_lat = posts.iter().map(|p| p.location.lat()).sum::<f64>() / n;
    let mean_lon = posts.iter().map(|p| p.location.lon()).sum::<f64>() / n;
    let centroid = GeoPoint::new(mean_lat, mean_lon).expect("mean of valid coordinates");
    let spread_km = posts
        .iter()
        .map(|p| mode.distance_km(centroid, p.location))
        .sum::<f64>()
        / n;
    WeekStat {
        post_count: posts.len() as u32,
        centroid,
        spread_km,
    }
}

/// Groups posts by user and week, keeping weeks with more than `tau`
/// posts. Users with no eligible week are omitted. Output is sorted by
/// user id.
pub fn build_profiles(
    posts: &[GeoPost],
    tau: u32,
    cal: &LocalCalendar,
    mode: DistanceMode,
) -> Vec<MobilityProfile> {
    let mut by_user: BTreeMap<&str, BTreeMap<IsoWeekId, Vec<&GeoPost>>> = BTreeMap::new();
    for post in posts {
        by_user
            .entry(post.user_id.as_str())
            .or_default()
            .entry(local_week(post.timestamp, cal))
            .or_default()
            .push(post);
    }
    by_user
        .into_par_iter()
        .filter_map(|(user_id, weeks)| {
            let weeks: BTreeMap<IsoWeekId, WeekStat> = weeks
                .into_iter()
                .filter(|(_, posts)| posts.len() as u32 > tau)
                .map(|(week, posts)| (week, week_stat(&posts, mode)))
                .collect();
            if weeks.is_empty() {
                None
            } else {
                Some(MobilityProfile {
                    user_id: user_id.to_string(),
                    weeks,
                })
            }
        })
        .collect()
}

/// Comparison-week situation for pair grouping. A severe week flagged as
/// an evacuation week contributes to both `SevereHaze` and `Evacuation`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Situation {
    NoHaze,
    Haze,
    SevereHaze,
    Evacuation,
}

pub const ALL_SITUATIONS: [Situation; 4] = [
    Situation::NoHaze,
    Situation::Haze,
    Situation::SevereHaze,
    Situation::Evacuation,
];

impl Situation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Situation::NoHaze => "no-haze",
            Situation::Haze => "haze",
            Situation::SevereHaze => "severe-haze",
            Situation::Evacuation => "evacuation",
        }
    }
}

/// How baseline weeks pair with comparison weeks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingMode {
    /// Every eligible no-haze week of the user is a baseline.
    #[default]
    AllBaselines,
    /// Only the user's earliest eligible no-haze week.
    FirstBaseline,
}

/// One (user, baseline week, comparison week) sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekPairSample {
    pub user_id: String,
    pub w1: IsoWeekId,
    pub w2: IsoWeekId,
    pub w2_label: WeekLabel,
    pub w2_evacuation: bool,
    pub distance_km: f64,
    /// `S(w2)/S(w1)`; 1 when both spreads are zero, infinity when only
    /// the baseline spread is zero.
    pub relative_spread: f64,
}

impl WeekPairSample {
    pub fn in_situation(&self, situation: Situation) -> bool {
        match situation {
            Situation::NoHaze => self.w2_label == WeekLabel::NoHaze,
            Situation::Haze => self.w2_label == WeekLabel::Haze,
            Situation::SevereHaze => self.w2_label == WeekLabel::SevereHaze,
            Situation::Evacuation => self.w2_evacuation,
        }
    }
}

fn relative_spread(s1: f64, s2: f64) -> f64 {
    if s1 == 0.0 {
        if s2 == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        s2 / s1
    }
}

/// Builds all ordered (w1, w2) samples: w1 over the user's eligible
/// no-haze weeks, w2 over any other classified eligible week. Excluded
/// weeks carry no label and never pair.
pub fn build_pairs(
    profiles: &[MobilityProfile],
    week_class: &WeekClass,
    pairing: PairingMode,
    mode: DistanceMode,
) -> Vec<WeekPairSample> {
    let per_user: Vec<Vec<WeekPairSample>> = profiles
        .par_iter()
        .map(|profile| {
            let mut samples = Vec::new();
            let baselines: Vec<IsoWeekId> = profile
                .weeks
                .keys()
                .filter(|w| week_class.label_of(**w) == Some(WeekLabel::NoHaze))
                .copied()
                .collect();
            let baselines = match pairing {
                PairingMode::AllBaselines => baselines,
                PairingMode::FirstBaseline => baselines.into_iter().take(1).collect(),
            };
            for &w1 in &baselines {
                let s1 = &profile.weeks[&w1];
                for (&w2, s2) in &profile.weeks {
                    if w2 == w1 {
                        continue;
                    }
                    let Some(label) = week_class.label_of(w2) else {
                        continue;
                    };
                    samples.push(WeekPairSample {
                        user_id: profile.user_id.clone(),
                        w1,
                        w2,
                        w2_label: label,
                        w2_evacuation: week_class.is_evacuation(w2),
                        distance_km: mode.distance_km(s1.centroid, s2.centroid),
                        relative_spread: relative_spread(s1.spread_km, s2.spread_km),
                    });
                }
            }
            samples
        })
        .collect();
    per_user.into_iter().flatten().collect()
}

/// Empirical CDF over centroid distances of one situation's pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceCdf {
    pub situation: Situation,
    /// Sorted distance samples; the CDF steps to (i+1)/n at each value.
    pub sorted_km: Vec<f64>,
}

impl DistanceCdf {
    pub fn fraction_at_or_below(&self, km: f64) -> f64 {
        let idx = self.sorted_km.partition_point(|&d| d <= km);
        idx as f64 / self.sorted_km.len() as f64
    }
}

pub fn distance_cdf(
    samples: &[WeekPairSample],
    situation: Situation,
) -> Result<DistanceCdf, MobilityError> {
    let mut sorted_km: Vec<f64> = samples
        .iter()
        .filter(|s| s.in_situation(situation))
        .map(|s| s.distance_km)
        .collect();
    if sorted_km.is_empty() {
        return Err(MobilityError::EmptyClass(situation.as_str()));
    }
    sorted_km.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    Ok(DistanceCdf {
        situation,
        sorted_km,
    })
}

/// Distance-bin edges in km; each edge opens a half-open bin and the last
/// bin is unbounded. The default matches the narrative anchors 50 km and
/// 500 km.
pub const DEFAULT_DISTANCE_BIN_EDGES_KM: [f64; 3] = [0.0, 50.0, 500.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionCell {
    pub situation: Situation,
    pub bin_start_km: f64,
    /// `None` for the unbounded last bin.
    pub bin_end_km: Option<f64>,
    pub n_pairs: usize,
    pub n_users: usize,
    /// Reducer share weighting every pair equally.
    pub per_pair: f64,
    /// Mean over users of each user's within-cell reducer share.
    pub per_user_mean: f64,
}

/// Share of pairs with `RS < threshold`, per situation and distance bin.
/// Infinite RS counts as a non-reducer. Empty cells are omitted rather
/// than reported as 0/0.
pub fn reduction_rate(
    samples: &[WeekPairSample],
    rs_threshold: f64,
    bin_edges_km: &[f64],
) -> Result<Vec<ReductionCell>, MobilityError> {
    if bin_edges_km.is_empty() || bin_edges_km.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MobilityError::Config(
            "distance bin edges must be strictly increasing and non-empty".to_string(),
        ));
    }
    if !(rs_threshold.is_finite() && rs_threshold > 0.0) {
        return Err(MobilityError::Config(
            "rs threshold must be a positive finite number".to_string(),
        ));
    }
    let bin_of = |d: f64| -> Option<usize> {
        if d < bin_edges_km[0] {
            return None;
        }
        let mut bin = 0;
        for (i, &edge) in bin_edges_km.iter().enumerate() {
            if d >= edge {
                bin = i;
            }
        }
        Some(bin)
    };
    let mut cells = Vec::new();
    for situation in ALL_SITUATIONS {
        for (bin, &start) in bin_edges_km.iter().enumerate() {
            let end = bin_edges_km.get(bin + 1).copied();
            let in_cell: Vec<&WeekPairSample> = samples
                .iter()
                .filter(|s| s.in_situation(situation) && bin_of(s.distance_km) == Some(bin))
                .collect();
            if in_cell.is_empty() {
                continue;
            }
            let reducers = in_cell
                .iter()
                .filter(|s| s.relative_spread < rs_threshold)
                .count();
            let mut by_user: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
            for s in &in_cell {
                let entry = by_user.entry(s.user_id.as_str()).or_insert((0, 0));
                entry.1 += 1;
                if s.relative_spread < rs_threshold {
                    entry.0 += 1;
                }
            }
            let per_user_mean = by_user
                .values()
                .map(|(red, tot)| *red as f64 / *tot as f64)
                .sum::<f64>()
                / by_user.len() as f64;
            cells.push(ReductionCell {
                situation,
                bin_start_km: start,
                bin_end_km: end,
                n_pairs: in_cell.len(),
                n_users: by_user.len(),
                per_pair: reducers as f64 / in_cell.len() as f64,
                per_user_mean,
            });
        }
    }
    Ok(cells)
}

/// Region holding the plurality of the user's posts; ties go to the
/// region the user posted in earliest. `None` when no post falls in any
/// region.
pub fn home_region(user_posts: &[&GeoPost], regions: &[RegionDef]) -> Option<String> {
    // (count, earliest timestamp, earliest input index) per region.
    let mut tallies: BTreeMap<String, (u64, chrono::DateTime<chrono::FixedOffset>, usize)> =
        BTreeMap::new();
    for (idx, post) in user_posts.iter().enumerate() {
        let Some(assignment) = assign_region(post.location, regions) else {
            continue;
        };
        let entry = tallies
            .entry(assignment.code)
            .or_insert((0, post.timestamp, idx));
        entry.0 += 1;
        if post.timestamp < entry.1 || (post.timestamp == entry.1 && idx < entry.2) {
            entry.1 = post.timestamp;
            entry.2 = idx;
        }
    }
    tallies
        .into_iter()
        .min_by(|(_, a), (_, b)| {
            b.0.cmp(&a.0) // larger count wins
                .then_with(|| a.1.cmp(&b.1)) // then earlier first post
                .then_with(|| a.2.cmp(&b.2))
        })
        .map(|(code, _)| code)
}

/// Home region per user over the full post set.
pub fn home_regions(
    posts: &[GeoPost],
    regions: &[RegionDef],
) -> BTreeMap<String, Option<String>> {
    let mut by_user: BTreeMap<&str, Vec<&GeoPost>> = BTreeMap::new();
    for p in posts {
        by_user.entry(p.user_id.as_str()).or_default().push(p);
    }
    by_user
        .into_par_iter()
        .map(|(user, user_posts)| (user.to_string(), home_region(&user_posts, regions)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityRow {
    pub date: NaiveDate,
    pub inside_province: u32,
    pub outside_province: u32,
}

/// Distinct regions receiving at least one cohort post per day, split by
/// membership in the home province.
pub fn region_diversity(
    cohort_posts: &[GeoPost],
    regions: &[RegionDef],
    day_range: (NaiveDate, NaiveDate),
    home_province: &str,
    cal: &LocalCalendar,
) -> Vec<DiversityRow> {
    let province_of: BTreeMap<&str, &str> = regions
        .iter()
        .map(|r| (r.code.as_str(), r.province.as_str()))
        .collect();
    let mut visited: BTreeMap<NaiveDate, BTreeSet<String>> = BTreeMap::new();
    let assignments: Vec<(NaiveDate, Option<String>)> = cohort_posts
        .par_iter()
        .map(|p| {
            (
                local_day(p.timestamp, cal),
                assign_region(p.location, regions).map(|a| a.code),
            )
        })
        .collect();
    for (day, code) in assignments {
        if let Some(code) = code {
            visited.entry(day).or_default().insert(code);
        }
    }
    let mut rows = Vec::new();
    let mut day = day_range.0;
    while day <= day_range.1 {
        let mut inside = 0;
        let mut outside = 0;
        if let Some(codes) = visited.get(&day) {
            for code in codes {
                if province_of.get(code.as_str()) == Some(&home_province) {
                    inside += 1;
                } else {
                    outside += 1;
                }
            }
        }
        rows.push(DiversityRow {
            date: day,
            inside_province: inside,
            outside_province: outside,
        });
        day += chrono::Duration::days(1);
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubdistrictBucketRow {
    pub date: NaiveDate,
    pub users_one: u32,
    pub users_two: u32,
    pub users_three: u32,
    pub users_four_plus: u32,
}

/// Per day, the number of cohort users whose posts touch exactly 1, 2, 3,
/// or 4+ sub-districts of the given region. Users with no sub-district
/// post that day are excluded.
pub fn subdistrict_visit_buckets(
    cohort_posts: &[GeoPost],
    region: &RegionDef,
    day_range: (NaiveDate, NaiveDate),
    cal: &LocalCalendar,
) -> Result<Vec<SubdistrictBucketRow>, MobilityError> {
    if region.subdistricts.is_empty() {
        return Err(MobilityError::MissingSubdistricts(region.code.clone()));
    }
    let mut per_day_user: BTreeMap<(NaiveDate, &str), BTreeSet<&str>> = BTreeMap::new();
    for post in cohort_posts {
        let day = local_day(post.timestamp, cal);
        if day < day_range.0 || day > day_range.1 {
            continue;
        }
        if !region.polygon.contains(post.location) {
            continue;
        }
        let Some((name, _)) = region
            .subdistricts
            .iter()
            .find(|(_, ring)| ring.contains(post.location))
        else {
            continue;
        };
        per_day_user
            .entry((day, post.user_id.as_str()))
            .or_default()
            .insert(name.as_str());
    }
    let mut rows: BTreeMap<NaiveDate, SubdistrictBucketRow> = BTreeMap::new();
    let mut day = day_range.0;
    while day <= day_range.1 {
        rows.insert(
            day,
            SubdistrictBucketRow {
                date: day,
                users_one: 0,
                users_two: 0,
                users_three: 0,
                users_four_plus: 0,
            },
        );
        day += chrono::Duration::days(1);
    }
    for ((day, _), districts) in per_day_user {
        let row = rows.get_mut(&day).expect("day in range");
        match districts.len() {
            0 => {}
            1 => row.users_one += 1,
            2 => row.users_two += 1,
            3 => row.users_three += 1,
            _ => row.users_four_plus += 1,
        }
    }
    Ok(rows.into_values().collect())
}

/// Keyword and client-source rules for the daily meta-signal series.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaSignalConfig {
    pub home_rules: Vec<RuleExpr>,
    pub evacuation_rules: Vec<RuleExpr>,
    /// Case-insensitive substrings matched against the post source field.
    pub browser_substring: String,
    pub checkin_substring: String,
}

impl Default for MetaSignalConfig {
    fn default() -> Self {
        Self {
            home_rules: vec![RuleExpr::phrase(vec!["rumah"])],
            evacuation_rules: vec![
                RuleExpr::phrase(vec!["evakuasi"]),
                RuleExpr::phrase(vec!["ngungsi"]),
            ],
            browser_substring: "web".to_string(),
            checkin_substring: "foursquare".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaSignalRow {
    pub date: NaiveDate,
    pub home_mentions: u64,
    pub evacuation_mentions: u64,
    pub browser_posts: u64,
    pub checkin_posts: u64,
    pub total_posts: u64,
}

/// Daily counts of home/evacuation keyword mentions and browser/check-in
/// client sources. A post may count in several series.
pub fn meta_signals(
    cohort_posts: &[GeoPost],
    config: &MetaSignalConfig,
    cal: &LocalCalendar,
) -> Vec<MetaSignalRow> {
    let browser = config.browser_substring.to_lowercase();
    let checkin = config.checkin_substring.to_lowercase();
    let mut rows: BTreeMap<NaiveDate, MetaSignalRow> = BTreeMap::new();
    for post in cohort_posts {
        let day = local_day(post.timestamp, cal);
        let row = rows.entry(day).or_insert(MetaSignalRow {
            date: day,
            home_mentions: 0,
            evacuation_mentions: 0,
            browser_posts: 0,
            checkin_posts: 0,
            total_posts: 0,
        });
        row.total_posts += 1;
        if config
            .home_rules
            .iter()
            .any(|r| crate::ruledsl::matches(r, &post.text))
        {
            row.home_mentions += 1;
        }
        if config
            .evacuation_rules
            .iter()
            .any(|r| crate::ruledsl::matches(r, &post.text))
        {
            row.evacuation_mentions += 1;
        }
        let source = post.source.to_lowercase();
        if !browser.is_empty() && source.contains(&browser) {
            row.browser_posts += 1;
        }
        if !checkin.is_empty() && source.contains(&checkin) {
            row.checkin_posts += 1;
        }
    }
    rows.into_values().collect()
}

/// `profiles.csv`.
pub fn profiles_csv(profiles: &[MobilityProfile]) -> String {
    let mut out =
        String::from("user_id,week,post_count,centroid_lat,centroid_lon,spread_km\n");
    for profile in profiles {
        for (week, stat) in &profile.weeks {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                profile.user_id,
                week,
                stat.post_count,
                stat.centroid.lat(),
                stat.centroid.lon(),
                stat.spread_km
            ));
        }
    }
    out
}

/// `distance_cdf_<situation>.csv`.
pub fn distance_cdf_csv(cdf: &DistanceCdf) -> String {
    let mut out = String::from("distance_km,cumulative_fraction\n");
    let n = cdf.sorted_km.len() as f64;
    for (i, d) in cdf.sorted_km.iter().enumerate() {
        out.push_str(&format!("{},{}\n", d, (i + 1) as f64 / n));
    }
    out
}

/// `reduction_rates.csv`.
pub fn reduction_rates_csv(cells: &[ReductionCell]) -> String {
    let mut out = String::from(
        "situation,bin_start_km,bin_end_km,n_pairs,n_users,reducer_share_per_pair,reducer_share_per_user_mean\n",
    );
    for c in cells {
        let end = c.bin_end_km.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.situation.as_str(),
            c.bin_start_km,
            end,
            c.n_pairs,
            c.n_users,
            c.per_pair,
            c.per_user_mean
        ));
    }
    out
}

/// `region_diversity.csv`; includes the home region's air-quality class
/// when a table is supplied.
pub fn region_diversity_csv(
    rows: &[DiversityRow],
    air: Option<(&AirQualityTable, &str)>,
) -> String {
    let mut out = String::from("date,regions_inside_province,regions_outside_province,air_quality_home\n");
    for row in rows {
        let aq = air
            .map(|(table, code)| table.get(code, row.date).code().to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.date, row.inside_province, row.outside_province, aq
        ));
    }
    out
}

/// `subdistrict_buckets.csv`.
pub fn subdistrict_buckets_csv(rows: &[SubdistrictBucketRow]) -> String {
    let mut out = String::from("date,users_1,users_2,users_3,users_4_plus\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.date, r.users_one, r.users_two, r.users_three, r.users_four_plus
        ));
    }
    out
}

/// `meta_signals.csv`.
pub fn meta_signals_csv(rows: &[MetaSignalRow]) -> String {
    let mut out = String::from(
        "date,home_mentions,evacuation_mentions,browser_posts,checkin_posts,total_posts\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.date, r.home_mentions, r.evacuation_mentions, r.browser_posts, r.checkin_posts,
            r.total_posts
        ));
    }
    out
}
