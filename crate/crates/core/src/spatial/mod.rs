//! Same-day spatial joins between posts and hotspots: hotspot popularity,
//! nearest-neighbor distance distributions in both directions, and the
//! day-matched random-sampling null model.

mod day_index;

pub use day_index::{nearest_hotspot, KdTree, SpatialDayIndex};

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{local_day, DistanceMode, FireHotspot, GeoPoint, GeoPost, LocalCalendar};

#[derive(Debug, Error, PartialEq)]
pub enum SpatialError {
    #[error("empty distribution: {0}")]
    EmptyDistribution(String),
    #[error("config error: {0}")]
    Config(String),
}

/// Mean, median, and sample standard deviation of a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub stdev: f64,
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

pub(crate) fn sample_stdev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

impl SummaryStats {
    pub fn of(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "summary of empty sample set");
        Self {
            n: values.len(),
            mean: mean(values),
            median: median(values),
            stdev: sample_stdev(values),
        }
    }
}

/// Per-hotspot count of same-day posts whose nearest hotspot it is.
/// Hotspots never referenced are not stored; their popularity is zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PopularityTable {
    pub counts: BTreeMap<String, u64>,
    pub posts_with_hotspot: u64,
    pub posts_without_hotspot: u64,
}

impl PopularityTable {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Frequency of each popularity value over the referenced set
    /// (popularity >= 1).
    pub fn frequencies(&self) -> BTreeMap<u64, u64> {
        let mut out = BTreeMap::new();
        for &c in self.counts.values() {
            *out.entry(c).or_insert(0) += 1;
        }
        out
    }
}

/// Each post increments exactly its nearest same-day hotspot; posts on
/// hotspot-free days are counted separately.
pub fn popularity(
    topic_posts: &[GeoPost],
    hotspot_index: &SpatialDayIndex,
    cal: &LocalCalendar,
) -> PopularityTable {
    let assignments: Vec<Option<String>> = topic_posts
        .par_iter()
        .map(|post| nearest_hotspot(post, hotspot_index, cal).map(|(id, _)| id))
        .collect();
    let mut table = PopularityTable::default();
    for assignment in assignments {
        match assignment {
            Some(id) => {
                *table.counts.entry(id).or_insert(0) += 1;
                table.posts_with_hotspot += 1;
            }
            None => table.posts_without_hotspot += 1,
        }
    }
    table
}

/// A set of distance samples with its histogram configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceDistribution {
    pub samples: Vec<f64>,
    pub bin_width_km: f64,
    /// Events that had no same-day counterpart and produced no sample.
    pub excluded: u64,
}

pub const DEFAULT_BIN_WIDTH_KM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub start_km: f64,
    pub end_km: f64,
    pub density: f64,
    pub count: u64,
}

impl DistanceDistribution {
    pub fn summary(&self) -> SummaryStats {
        SummaryStats::of(&self.samples)
    }

    /// Histogram normalized so that the densities integrate to one.
    pub fn histogram(&self) -> Vec<HistogramBin> {
        let w = self.bin_width_km;
        let max = self.samples.iter().cloned().fold(0.0f64, f64::max);
        let nbins = (max / w).floor() as usize + 1;
        let mut counts = vec![0u64; nbins];
        for &s in &self.samples {
            let mut bin = (s / w).floor() as usize;
            if bin >= nbins {
                bin = nbins - 1;
            }
            counts[bin] += 1;
        }
        let n = self.samples.len() as f64;
        counts
            .into_iter()
            .enumerate()
            .map(|(i, count)| HistogramBin {
                start_km: i as f64 * w,
                end_km: (i + 1) as f64 * w,
                density: count as f64 / (n * w),
                count,
            })
            .collect()
    }
}

/// Distance from each topic post to its nearest same-day hotspot. Posts
/// on hotspot-free days are excluded and counted.
pub fn tweet_to_hotspot_distribution(
    topic_posts: &[GeoPost],
    hotspot_index: &SpatialDayIndex,
    cal: &LocalCalendar,
    bin_width_km: f64,
) -> Result<DistanceDistribution, SpatialError> {
    let distances: Vec<Option<f64>> = topic_posts
        .par_iter()
        .map(|post| nearest_hotspot(post, hotspot_index, cal).map(|(_, d)| d))
        .collect();
    let mut samples = Vec::new();
    let mut excluded = 0;
    for d in distances {
        match d {
            Some(d) => samples.push(d),
            None => excluded += 1,
        }
    }
    if samples.is_empty() {
        return Err(SpatialError::EmptyDistribution(
            "no post had a same-day hotspot".to_string(),
        ));
    }
    Ok(DistanceDistribution {
        samples,
        bin_width_km,
        excluded,
    })
}

fn hotspots_by_day(hotspots: &[FireHotspot]) -> BTreeMap<NaiveDate, Vec<&FireHotspot>> {
    let mut by_day: BTreeMap<NaiveDate, Vec<&FireHotspot>> = BTreeMap::new();
    for h in hotspots {
        by_day.entry(h.date).or_default().push(h);
    }
    by_day
}

/// Mirror direction: distance from each hotspot to its nearest same-day
/// topic post. Hotspots on topic-post-free days are excluded and counted.
/// Traversal is day-ordered, then input-ordered within each day.
pub fn hotspot_to_tweet_distribution(
    topic_posts: &[GeoPost],
    hotspots: &[FireHotspot],
    cal: &LocalCalendar,
    mode: DistanceMode,
    bin_width_km: f64,
) -> Result<DistanceDistribution, SpatialError> {
    let post_index = SpatialDayIndex::for_posts(topic_posts, cal, mode);
    let mut samples = Vec::new();
    let mut excluded = 0;
    for (date, day_hotspots) in hotspots_by_day(hotspots) {
        match post_index.day(date) {
            Some(tree) if !tree.is_empty() => {
                for h in day_hotspots {
                    let (_, d) = tree.nearest(h.location).expect("non-empty tree");
                    samples.push(d);
                }
            }
            _ => excluded += day_hotspots.len() as u64,
        }
    }
    if samples.is_empty() {
        return Err(SpatialError::EmptyDistribution(
            "no hotspot had a same-day topic post".to_string(),
        ));
    }
    Ok(DistanceDistribution {
        samples,
        bin_width_km,
        excluded,
    })
}

/// Null-model output: per-iteration summaries plus cross-iteration
/// aggregates. Reruns with the same seed are bit-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullModelResult {
    pub iterations: Vec<SummaryStats>,
    pub mean_of_means: f64,
    pub mean_of_medians: f64,
    /// Standard deviation of the per-iteration means.
    pub stdev_across_iterations: f64,
    /// Mean of the per-iteration sample standard deviations.
    pub mean_within_iteration_stdev: f64,
    pub rng_seed: u64,
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Substream seed for one (day, iteration) cell, so per-day sampling is
/// independent of execution order.
fn substream_seed(master: u64, day: NaiveDate, iteration: u64) -> u64 {
    let mut s = splitmix64(master);
    s = splitmix64(s ^ day.num_days_from_ce() as u64);
    splitmix64(s ^ iteration)
}

/// Day-matched random null model: per iteration and per day, sample as
/// many posts from that day's full post set as the topic had (uniformly,
/// without replacement) and compute hotspot-to-nearest-sampled-post
/// distances. Iterations run in parallel; per-iteration sampling derives
/// from (seed, day, iteration) substreams, so results do not depend on
/// thread count.
pub fn null_model(
    topic_posts: &[GeoPost],
    all_posts: &[GeoPost],
    hotspots: &[FireHotspot],
    cal: &LocalCalendar,
    mode: DistanceMode,
    iterations: u32,
    seed: u64,
) -> Result<NullModelResult, SpatialError> {
    if iterations < 1 {
        return Err(SpatialError::Config("iterations must be >= 1".to_string()));
    }

    let mut all_by_day: BTreeMap<NaiveDate, Vec<(&str, GeoPoint)>> = BTreeMap::new();
    for p in all_posts {
        all_by_day
            .entry(local_day(p.timestamp, cal))
            .or_default()
            .push((p.id.as_str(), p.location));
    }
    let mut topic_count_by_day: BTreeMap<NaiveDate, usize> = BTreeMap::new();
    for p in topic_posts {
        *topic_count_by_day
            .entry(local_day(p.timestamp, cal))
            .or_default() += 1;
    }
    for (day, &n) in &topic_count_by_day {
        let available = all_by_day.get(day).map_or(0, |v| v.len());
        if n > available {
            return Err(SpatialError::Config(format!(
                "day {day}: topic has {n} posts but the full dataset has only {available}"
            )));
        }
    }
    let by_day = hotspots_by_day(hotspots);
    // Days that can contribute distances: at least one topic post (sample
    // size >= 1) and at least one hotspot.
    let active_days: Vec<(NaiveDate, usize, &Vec<(&str, GeoPoint)>, &Vec<&FireHotspot>)> =
        topic_count_by_day
            .iter()
            .filter_map(|(day, &n)| {
                let pool = all_by_day.get(day)?;
                let day_hotspots = by_day.get(day)?;
                Some((*day, n, pool, day_hotspots))
            })
            .collect();
    if active_days.is_empty() {
        return Err(SpatialError::EmptyDistribution(
            "no day has both topic posts and hotspots".to_string(),
        ));
    }

    let iteration_stats: Vec<SummaryStats> = (0..iterations)
        .into_par_iter()
        .map(|iteration| {
            let mut samples = Vec::new();
            for (day, n, pool, day_hotspots) in &active_days {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(substream_seed(
                    seed,
                    *day,
                    iteration as u64,
                ));
                let chosen = rand::seq::index::sample(&mut rng, pool.len(), *n);
                let sampled: Vec<(String, GeoPoint)> = chosen
                    .iter()
                    .map(|i| (pool[i].0.to_string(), pool[i].1))
                    .collect();
                let tree = KdTree::build(sampled, mode);
                for h in *day_hotspots {
                    let (_, d) = tree.nearest(h.location).expect("n >= 1 sampled posts");
                    samples.push(d);
                }
            }
            SummaryStats::of(&samples)
        })
        .collect();

    let means: Vec<f64> = iteration_stats.iter().map(|s| s.mean).collect();
    let medians: Vec<f64> = iteration_stats.iter().map(|s| s.median).collect();
    let stdevs: Vec<f64> = iteration_stats.iter().map(|s| s.stdev).collect();
    Ok(NullModelResult {
        mean_of_means: mean(&means),
        mean_of_medians: mean(&medians),
        stdev_across_iterations: sample_stdev(&means),
        mean_within_iteration_stdev: mean(&stdevs),
        iterations: iteration_stats,
        rng_seed: seed,
    })
}

/// `popularity.csv`: per topic, referenced hotspots sorted by descending
/// count then id.
pub fn popularity_csv(tables: &BTreeMap<String, PopularityTable>) -> String {
    let mut out = String::from("topic,hotspot_id,popularity\n");
    for (topic, table) in tables {
        let mut rows: Vec<(&String, &u64)> = table.counts.iter().collect();
        rows.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        for (id, count) in rows {
            out.push_str(&format!("{topic},{id},{count}\n"));
        }
    }
    out
}

/// `distance_pdf_<topic>.csv`.
pub fn distance_pdf_csv(dist: &DistanceDistribution) -> String {
    let mut out = String::from("bin_start_km,bin_end_km,density,count\n");
    for bin in dist.histogram() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            bin.start_km, bin.end_km, bin.density, bin.count
        ));
    }
    out
}

/// `null_model_<topic>.csv`: the real summary row, one row per iteration,
/// and the aggregate rows (both stdev flavors, labeled).
pub fn null_model_csv(real: &SummaryStats, result: &NullModelResult) -> String {
    let mut out = String::from("kind,label,mean_km,median_km,stdev_km,n_samples\n");
    out.push_str(&format!(
        "real,,{},{},{},{}\n",
        real.mean, real.median, real.stdev, real.n
    ));
    for (i, s) in result.iterations.iter().enumerate() {
        out.push_str(&format!(
            "iteration,{i},{},{},{},{}\n",
            s.mean, s.median, s.stdev, s.n
        ));
    }
    out.push_str(&format!(
        "aggregate,mean_of_means,{},,,\n",
        result.mean_of_means
    ));
    out.push_str(&format!(
        "aggregate,mean_of_medians,,{},,\n",
        result.mean_of_medians
    ));
    out.push_str(&format!(
        "aggregate,stdev_across_iterations,,,{},\n",
        result.stdev_across_iterations
    ));
    out.push_str(&format!(
        "aggregate,mean_within_iteration_stdev,,,{},\n",
        result.mean_within_iteration_stdev
    ));
    out.push_str(&format!("aggregate,rng_seed,{},,,\n", result.rng_seed));
    out
}
