//! Weekly event bucketing, topic/hotspot correlation, and week-severity
//! classification.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{assign_region, BoundingBox, RegionDef};
use crate::model::{local_week, FireHotspot, GeoPost, IsoWeekId, LocalCalendar};

#[derive(Debug, Error, PartialEq)]
pub enum TemporalError {
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("series length mismatch: {x} vs {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("series too short for correlation: {0} < 2")]
    TooShort(usize),
    #[error("degenerate series: {0} is constant")]
    DegenerateSeries(&'static str),
    #[error("config error: {0}")]
    Config(String),
}

/// Aligned per-week counts for hotspots, per-topic posts, and all posts.
/// All component series share one gap-free week axis; absent weeks hold
/// explicit zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklySeries {
    pub weeks: Vec<IsoWeekId>,
    pub hotspot_count: Vec<u64>,
    pub topic_counts: BTreeMap<String, Vec<u64>>,
    pub total_posts: Vec<u64>,
}

impl WeeklySeries {
    pub fn week_index(&self, week: IsoWeekId) -> Option<usize> {
        self.weeks.binary_search(&week).ok()
    }
}

/// Builds the weekly series over both datasets. A post contributes one
/// count to every taxonomy it matched, plus one to the total.
pub fn build_weekly_series(
    hotspots: &[FireHotspot],
    posts: &[GeoPost],
    classifications: &[BTreeSet<String>],
    taxonomy_names: &[String],
    cal: &LocalCalendar,
) -> Result<WeeklySeries, TemporalError> {
    assert_eq!(
        posts.len(),
        classifications.len(),
        "one classification set per post"
    );
    if hotspots.is_empty() && posts.is_empty() {
        return Err(TemporalError::EmptyInput(
            "no hotspots and no posts".to_string(),
        ));
    }

    let hotspot_weeks: Vec<IsoWeekId> = hotspots
        .iter()
        .map(|h| IsoWeekId::from_date(h.date))
        .collect();
    let post_weeks: Vec<IsoWeekId> = posts.iter().map(|p| local_week(p.timestamp, cal)).collect();

    let min = hotspot_weeks
        .iter()
        .chain(post_weeks.iter())
        .min()
        .copied()
        .expect("non-empty input");
    let max = hotspot_weeks
        .iter()
        .chain(post_weeks.iter())
        .max()
        .copied()
        .expect("non-empty input");
    let weeks = IsoWeekId::range_inclusive(min, max);
    let index: BTreeMap<IsoWeekId, usize> =
        weeks.iter().enumerate().map(|(i, w)| (*w, i)).collect();

    let mut hotspot_count = vec![0u64; weeks.len()];
    for w in &hotspot_weeks {
        hotspot_count[index[w]] += 1;
    }
    let mut total_posts = vec![0u64; weeks.len()];
    let mut topic_counts: BTreeMap<String, Vec<u64>> = taxonomy_names
        .iter()
        .map(|n| (n.clone(), vec![0u64; weeks.len()]))
        .collect();
    for (w, topics) in post_weeks.iter().zip(classifications) {
        let i = index[w];
        total_posts[i] += 1;
        for topic in topics {
            if let Some(series) = topic_counts.get_mut(topic) {
                series[i] += 1;
            }
        }
    }

    Ok(WeeklySeries {
        weeks,
        hotspot_count,
        topic_counts,
        total_posts,
    })
}

/// Product-moment correlation coefficient (mean-centered form).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, TemporalError> {
    if x.len() != y.len() {
        return Err(TemporalError::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(TemporalError::TooShort(x.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(TemporalError::DegenerateSeries("x"));
    }
    if syy == 0.0 {
        return Err(TemporalError::DegenerateSeries("y"));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Geographic restriction for per-area correlation runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaFilter {
    pub name: String,
    pub kind: AreaKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AreaKind {
    All,
    Bbox(BoundingBox),
    /// Region codes resolved against loaded region geometry.
    Regions(Vec<String>),
}

impl AreaFilter {
    pub fn all() -> Self {
        Self {
            name: "all".to_string(),
            kind: AreaKind::All,
        }
    }

    fn contains(&self, location: crate::model::GeoPoint, regions: &[RegionDef]) -> bool {
        match &self.kind {
            AreaKind::All => true,
            AreaKind::Bbox(bbox) => bbox.contains(location),
            AreaKind::Regions(codes) => assign_region(location, regions)
                .map(|a| codes.contains(&a.code))
                .unwrap_or(false),
        }
    }
}

/// One cell of the correlation table. `r` is `None` when the pairing was
/// degenerate (a constant series).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub area: String,
    pub taxonomy: String,
    pub r: Option<f64>,
    pub n_weeks: usize,
}

/// Per-(area, taxonomy) correlation between weekly hotspot counts and
/// weekly topic post counts. Weeks in `excluded_weeks` (data gaps) are
/// dropped from the pairing.
#[allow(clippy::too_many_arguments)]
pub fn correlate_all(
    hotspots: &[FireHotspot],
    posts: &[GeoPost],
    classifications: &[BTreeSet<String>],
    taxonomy_names: &[String],
    areas: &[AreaFilter],
    regions: &[RegionDef],
    cal: &LocalCalendar,
    excluded_weeks: &BTreeSet<IsoWeekId>,
) -> Result<Vec<CorrelationCell>, TemporalError> {
    let mut cells = Vec::new();
    for area in areas {
        let area_hotspots: Vec<FireHotspot> = hotspots
            .iter()
            .filter(|h| area.contains(h.location, regions))
            .cloned()
            .collect();
        let mut area_posts = Vec::new();
        let mut area_classes = Vec::new();
        for (p, c) in posts.iter().zip(classifications) {
            if area.contains(p.location, regions) {
                area_posts.push(p.clone());
                area_classes.push(c.clone());
            }
        }
        if area_posts.is_empty() {
            return Err(TemporalError::EmptyInput(format!(
                "area {:?} has no posts",
                area.name
            )));
        }
        let series = build_weekly_series(
            &area_hotspots,
            &area_posts,
            &area_classes,
            taxonomy_names,
            cal,
        )?;
        let keep: Vec<usize> = (0..series.weeks.len())
            .filter(|&i| !excluded_weeks.contains(&series.weeks[i]))
            .collect();
        let x: Vec<f64> = keep.iter().map(|&i| series.hotspot_count[i] as f64).collect();
        for name in taxonomy_names {
            let y: Vec<f64> = keep
                .iter()
                .map(|&i| series.topic_counts[name][i] as f64)
                .collect();
            let r = match pearson(&x, &y) {
                Ok(r) => Some(r),
                Err(TemporalError::DegenerateSeries(_)) => None,
                Err(e) => return Err(e),
            };
            cells.push(CorrelationCell {
                area: area.name.clone(),
                taxonomy: name.clone(),
                r,
                n_weeks: keep.len(),
            });
        }
    }
    Ok(cells)
}

/// Haze severity of one week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeekLabel {
    NoHaze,
    Haze,
    SevereHaze,
}

impl WeekLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            WeekLabel::NoHaze => "no-haze",
            WeekLabel::Haze => "haze",
            WeekLabel::SevereHaze => "severe-haze",
        }
    }
}

/// Week classification thresholds and overrides. Boundaries: a count
/// strictly below `low` is no-haze, strictly above `high` is severe, and
/// the closed interval `[low, high]` is haze.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekClassConfig {
    pub low: u64,
    pub high: u64,
    pub excluded_weeks: BTreeSet<IsoWeekId>,
    pub evacuation_weeks: BTreeSet<IsoWeekId>,
}

impl Default for WeekClassConfig {
    fn default() -> Self {
        Self {
            low: 100,
            high: 400,
            excluded_weeks: BTreeSet::new(),
            evacuation_weeks: [IsoWeekId::new(2014, 11)].into_iter().collect(),
        }
    }
}

/// Per-week labels plus the evacuation flag set. Excluded weeks carry no
/// label and never pair in mobility analyses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekClass {
    pub labels: BTreeMap<IsoWeekId, WeekLabel>,
    pub evacuation_weeks: BTreeSet<IsoWeekId>,
    pub excluded_weeks: BTreeSet<IsoWeekId>,
}

impl WeekClass {
    pub fn label_of(&self, week: IsoWeekId) -> Option<WeekLabel> {
        self.labels.get(&week).copied()
    }

    pub fn is_evacuation(&self, week: IsoWeekId) -> bool {
        self.evacuation_weeks.contains(&week)
    }
}

pub fn classify_week_count(count: u64, config: &WeekClassConfig) -> WeekLabel {
    if count < config.low {
        WeekLabel::NoHaze
    } else if count <= config.high {
        WeekLabel::Haze
    } else {
        WeekLabel::SevereHaze
    }
}

/// Labels every non-excluded week of the series by its hotspot count.
/// Evacuation weeks must land in the severe class; anything else is a
/// configuration/data mismatch and is rejected rather than silently
/// reflagged.
pub fn classify_weeks(
    series: &WeeklySeries,
    config: &WeekClassConfig,
) -> Result<WeekClass, TemporalError> {
    if config.low >= config.high {
        return Err(TemporalError::Config(format!(
            "week-class bounds must satisfy low < high, got {} >= {}",
            config.low, config.high
        )));
    }
    let mut labels = BTreeMap::new();
    for (week, count) in series.weeks.iter().zip(&series.hotspot_count) {
        if config.excluded_weeks.contains(week) {
            continue;
        }
        labels.insert(*week, classify_week_count(*count, config));
    }
    let mut evacuation_weeks = BTreeSet::new();
    for week in &config.evacuation_weeks {
        match labels.get(week) {
            None => continue, // not in the data (or excluded): nothing to flag
            Some(WeekLabel::SevereHaze) => {
                evacuation_weeks.insert(*week);
            }
            Some(other) => {
                return Err(TemporalError::Config(format!(
                    "evacuation week {week} is classified {} and not severe-haze",
                    other.as_str()
                )));
            }
        }
    }
    Ok(WeekClass {
        labels,
        evacuation_weeks,
        excluded_weeks: config.excluded_weeks.clone(),
    })
}

/// `weekly_series.csv`: week, hotspots, one column per topic, total posts.
pub fn weekly_series_csv(series: &WeeklySeries) -> String {
    let mut out = String::from("week,hotspots");
    for name in series.topic_counts.keys() {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",total_posts\n");
    for (i, week) in series.weeks.iter().enumerate() {
        out.push_str(&format!("{week},{}", series.hotspot_count[i]));
        for counts in series.topic_counts.values() {
            out.push_str(&format!(",{}", counts[i]));
        }
        out.push_str(&format!(",{}\n", series.total_posts[i]));
    }
    out
}

/// `correlations.csv`: area, taxonomy, r (empty when degenerate), n_weeks.
pub fn correlations_csv(cells: &[CorrelationCell]) -> String {
    let mut out = String::from("area,taxonomy,r,n_weeks\n");
    for cell in cells {
        let r = cell.r.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}\n",
            cell.area, cell.taxonomy, r, cell.n_weeks
        ));
    }
    out
}
